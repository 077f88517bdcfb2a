fn main() {
    std::process::exit(dvs::cli::main_with_args(std::env::args_os()));
}

//! Command-line configuration and dispatch.

use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dvs_core::approx::{sample_approx, ApproxOptions};
use dvs_core::derand::derandomized_select;
use dvs_core::design::{
    fedorov_exchange, regression_eval, sample_leverage, sample_predictive_length, sample_uniform, Criterion,
    RegressionDataset,
};
use dvs_core::exact::sample_exact;
use dvs_core::linalg::DEFAULT_RANK_TOL;
use dvs_core::mcmc::{default_greedy_eps, greedy_init, sample_mcmc, ChainConfig, Init, StepBudget};
use dvs_core::{DesignMatrix, DvsError, DvsProblem};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::io::{load_matrix, load_regression, Format, LoadError, Orientation};
use crate::report::{evaluate, one_based, ErrorBody, ErrorReport, SelectionReport, SCHEMA_VERSION, VERSION};
use crate::stats::median;
use crate::validate::validate;

#[derive(Debug, Clone, Parser)]
#[command(name = "dvs", version, about = "Column subset selection by dual volume sampling")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Draw or select one subset with the chosen method.
    Sample(RunArgs),
    /// Greedy derandomized selection with its per-step trace.
    Derandomize(RunArgs),
    /// Regression benchmark: replicate runs over one or more k.
    Design(RunArgs),
    /// Check every sampler and identity against full enumeration.
    Validate(RunArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    DvsExact,
    DvsMcmc,
    DvsApprox,
    Unif,
    Lev,
    Pl,
    Fedorov,
    Derand,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::DvsExact => "dvs-exact",
            Method::DvsMcmc => "dvs-mcmc",
            Method::DvsApprox => "dvs-approx",
            Method::Unif => "unif",
            Method::Lev => "lev",
            Method::Pl => "pl",
            Method::Fedorov => "fedorov",
            Method::Derand => "derand",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InitKind {
    Greedy,
    DSquared,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CriterionArg {
    A,
    E,
    D,
}

impl From<CriterionArg> for Criterion {
    fn from(c: CriterionArg) -> Self {
        match c {
            CriterionArg::A => Criterion::A,
            CriterionArg::E => Criterion::E,
            CriterionArg::D => Criterion::D,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Json,
    Csv,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Input table.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// The first non-comment line holds column names.
    #[arg(long)]
    pub header: bool,
    #[arg(long, value_enum, default_value_t = Orientation::ColumnsAsGiven)]
    pub orientation: Orientation,
    /// Response column (1-based position, `last`, or header name). Implies
    /// samples-as-rows input.
    #[arg(long)]
    pub response: Option<String>,
    /// Standardize features before building the design matrix.
    #[arg(long)]
    pub standardize: bool,
    /// Subset size; `design` accepts a comma-separated list.
    #[arg(long, value_delimiter = ',', required = true)]
    pub k: Vec<usize>,
    #[arg(long, value_enum, default_value_t = Method::DvsMcmc)]
    pub method: Method,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Chain length; defaults to the mixing-time bound at `--eps-tv`.
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long, default_value_t = 0.05)]
    pub eps_tv: f64,
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
    #[arg(long, value_enum, default_value_t = InitKind::Greedy)]
    pub init: InitKind,
    /// Perturbation for `dvs-approx`.
    #[arg(long, default_value_t = 1e-6)]
    pub eps: f64,
    /// Volume distortion target for `dvs-approx`.
    #[arg(long, default_value_t = 0.5)]
    pub delta2: f64,
    /// Criterion for `fedorov`.
    #[arg(long, value_enum, default_value_t = CriterionArg::D)]
    pub criterion: CriterionArg,
    #[arg(long, default_value_t = 1000)]
    pub max_sweeps: usize,
    /// Runs per k for `design`, with seeds `seed, seed + 1, ...`.
    #[arg(long, default_value_t = 1)]
    pub replicates: usize,
    /// Exact draws used by the goodness-of-fit check of `validate`.
    #[arg(long, default_value_t = 20_000)]
    pub samples: usize,
    #[arg(long, env = "DVS_RANK_TOL", default_value_t = DEFAULT_RANK_TOL)]
    pub rank_tol: f64,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = OutputFormat::Json)]
    pub output_format: OutputFormat,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Load(#[from] LoadError),
    #[error(transparent)]
    Dvs(#[from] DvsError),
    #[error("{0}")]
    Usage(String),
    #[error("cannot write output: {0}")]
    Write(String),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Load(LoadError::Matrix(_)) | CliError::Dvs(_) => "domain",
            CliError::Load(_) => "input",
            CliError::Usage(_) => "usage",
            CliError::Write(_) => "output",
        }
    }

    pub fn to_report(&self) -> ErrorReport {
        let (row, col) = match self {
            CliError::Load(e) => e.location(),
            _ => (None, None),
        };
        ErrorReport {
            schema_version: SCHEMA_VERSION,
            version: VERSION.to_string(),
            error: ErrorBody { kind: self.kind().to_string(), message: self.to_string(), row, col },
        }
    }
}

/// Rendered output plus lines meant for standard error.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub text: String,
    pub messages: Vec<String>,
    pub success: bool,
}

/// A selected subset (0-based) with method-specific diagnostics.
#[derive(Debug, Clone)]
pub struct Selection {
    pub indices: Vec<usize>,
    pub diagnostics: Map<String, Value>,
}

fn to_map(value: Value) -> Map<String, Value> {
    match value {
        Value::Object(map) => map,
        _ => Map::new(),
    }
}

fn finite(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        Value::Null
    }
}

/// Runs `method` on `a` with its own generator.
pub fn select(method: Method, a: &DesignMatrix, k: usize, args: &RunArgs, rng: &mut ChaCha8Rng) -> Result<Selection, DvsError> {
    let selection = match method {
        Method::DvsExact => {
            let problem = DvsProblem::new(a.clone(), k)?;
            let sample = sample_exact(&problem, rng)?;
            let order = one_based_order(&sample.tuple);
            let log_prob = problem.log_prob(&sample.tuple)?;
            Selection {
                indices: sample.tuple,
                diagnostics: to_map(json!({
                    "log_partition": problem.log_partition(),
                    "log_probability": log_prob,
                    "draw_order": order,
                })),
            }
        }
        Method::DvsMcmc => {
            let problem = DvsProblem::new(a.clone(), k)?;
            let config = ChainConfig {
                steps: match args.steps {
                    Some(t) => StepBudget::Fixed(t),
                    None => StepBudget::Mixing { eps_tv: args.eps_tv },
                },
                beta: args.beta,
                init: match args.init {
                    InitKind::Greedy => Init::Greedy { eps: None },
                    InitKind::DSquared => Init::DSquared,
                },
                ..ChainConfig::default()
            };
            let out = sample_mcmc(&problem, &config, rng)?;
            let d = &out.diagnostics;
            let trace: Vec<Value> = d.logdet_trace.iter().map(|(t, l)| json!([t, finite(*l)])).collect();
            Selection {
                indices: out.selection.indices().to_vec(),
                diagnostics: to_map(json!({
                    "initial_subset": one_based(&d.initial),
                    "steps": d.steps,
                    "accepted": d.accepted,
                    "acceptance_rate": d.acceptance_rate,
                    "beta": args.beta,
                    "final_logdet": finite(d.final_logdet),
                    "logdet_trace": trace,
                })),
            }
        }
        Method::DvsApprox => {
            let out = sample_approx(a, k, args.eps, args.delta2, &ApproxOptions::default(), rng)?;
            Selection {
                indices: out.selection.indices().to_vec(),
                diagnostics: to_map(json!({
                    "eps": out.eps,
                    "delta2": out.delta2,
                    "target_dim": out.target_dim,
                    "projected": out.projected,
                    "delta1_selected": finite(out.delta1_selected),
                    "delta1_global": finite(out.delta1_global),
                })),
            }
        }
        Method::Unif => {
            if k < a.n() || k > a.m() {
                return Err(DvsError::Cardinality { k, min: a.n(), max: a.m() });
            }
            Selection { indices: sample_uniform(a.m(), k, rng)?, diagnostics: Map::new() }
        }
        Method::Lev => Selection { indices: sample_leverage(a, k, rng)?.into_indices(), diagnostics: Map::new() },
        Method::Pl => Selection { indices: sample_predictive_length(a, k, rng)?.into_indices(), diagnostics: Map::new() },
        Method::Fedorov => {
            let init = greedy_init(a, k, default_greedy_eps(a))?;
            let out = fedorov_exchange(a, k, args.criterion.into(), init.indices(), args.max_sweeps)?;
            let trace: Vec<Value> = out.trace.iter().map(|v| finite(*v)).collect();
            Selection {
                indices: out.selection.indices().to_vec(),
                diagnostics: to_map(json!({
                    "criterion": Criterion::from(args.criterion).name(),
                    "initial_subset": one_based(init.indices()),
                    "objective_trace": trace,
                    "sweeps": out.sweeps,
                    "converged": out.converged,
                })),
            }
        }
        Method::Derand => {
            let trace = derandomized_select(a, k)?;
            let per_step: Vec<Vec<Value>> = trace
                .per_step
                .iter()
                .map(|step| step.iter().map(|(j, v)| json!([j + 1, finite(*v)])).collect())
                .collect();
            Selection {
                indices: trace.subset(),
                diagnostics: to_map(json!({
                    "selection_order": one_based_order(&trace.chosen),
                    "initial_expectation": trace.initial_expectation,
                    "final_fro_sq": trace.final_fro_sq,
                    "guarantee_fro": trace.bound_fro,
                    "final_spec_sq": trace.final_spec_sq,
                    "guarantee_spec": trace.bound_spec,
                    "guarantees_hold": trace.final_fro_sq <= trace.bound_fro && trace.final_spec_sq <= trace.bound_spec,
                    "conditional_expectations": per_step,
                })),
            }
        }
    };
    Ok(selection)
}

fn one_based_order(tuple: &[usize]) -> Vec<usize> {
    tuple.iter().map(|i| i + 1).collect()
}

struct Loaded {
    design: DesignMatrix,
    regression: Option<RegressionDataset>,
    fingerprint: String,
}

fn load(args: &RunArgs) -> Result<Loaded, CliError> {
    if !(args.rank_tol > 0.0 && args.rank_tol < 1.0) {
        return Err(CliError::Usage("rank tolerance must lie in (0, 1)".into()));
    }
    match &args.response {
        Some(response) => {
            let loaded = load_regression(&args.input, args.format, args.header, response, args.standardize)?;
            let design = loaded.data.design_with_rank_tol(args.rank_tol).map_err(LoadError::from)?;
            Ok(Loaded { design, regression: Some(loaded.data), fingerprint: loaded.fingerprint })
        }
        None => {
            if args.standardize {
                return Err(CliError::Usage("--standardize needs --response".into()));
            }
            let loaded = load_matrix(&args.input, args.format, args.header, args.orientation, args.rank_tol)?;
            Ok(Loaded { design: loaded.design, regression: None, fingerprint: loaded.fingerprint })
        }
    }
}

fn single_k(args: &RunArgs) -> Result<usize, CliError> {
    match args.k.as_slice() {
        [k] => Ok(*k),
        _ => Err(CliError::Usage("exactly one --k value is required".into())),
    }
}

/// One selection turned into a report.
fn run_one(
    method: Method,
    loaded: &Loaded,
    k: usize,
    seed: u64,
    args: &RunArgs,
) -> Result<SelectionReport, CliError> {
    let a = &loaded.design;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = Instant::now();
    let selection = select(method, a, k, args, &mut rng)?;
    let wall_time_ms = start.elapsed().as_secs_f64() * 1e3;
    let (objectives, bounds) = evaluate(a, k, &selection.indices)?;
    let mut diagnostics = selection.diagnostics;
    let prediction_error = match &loaded.regression {
        Some(data) => {
            let fit = regression_eval(data, &selection.indices, args.rank_tol)?;
            diagnostics.insert("rank_deficient_fit".into(), json!(fit.rank_deficient));
            Some(fit.prediction_error)
        }
        None => None,
    };
    Ok(SelectionReport {
        schema_version: SCHEMA_VERSION,
        version: VERSION.to_string(),
        method: method.name().to_string(),
        n: a.n(),
        m: a.m(),
        k,
        seed,
        subset: one_based(&selection.indices),
        objectives,
        bounds,
        prediction_error,
        diagnostics,
        dataset_fingerprint: loaded.fingerprint.clone(),
        wall_time_ms,
    })
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("reports serialize");
    text.push('\n');
    text
}

#[derive(Debug, Clone, Serialize)]
pub struct DesignSummary {
    pub k: usize,
    pub median_prediction_error: Option<f64>,
    pub median_wall_time_ms: f64,
    pub median_d_objective: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DesignReport {
    pub schema_version: u32,
    pub version: String,
    pub command: String,
    pub method: String,
    pub n: usize,
    pub m: usize,
    pub seed: u64,
    pub replicates: usize,
    pub protocol: String,
    pub dataset_fingerprint: String,
    pub summary: Vec<DesignSummary>,
    pub runs: Vec<SelectionReport>,
}

/// Runs every `(k, replicate)` job across worker threads; replicate `r`
/// uses seed `seed + r`.
fn run_design(loaded: &Loaded, args: &RunArgs) -> Result<DesignReport, CliError> {
    if loaded.regression.is_none() {
        return Err(CliError::Usage("design needs --response".into()));
    }
    if args.replicates == 0 {
        return Err(CliError::Usage("--replicates must be positive".into()));
    }
    let jobs: Vec<(usize, usize)> = args.k.iter().flat_map(|&k| (0..args.replicates).map(move |r| (k, r))).collect();
    let results: Mutex<Vec<Option<Result<SelectionReport, CliError>>>> = Mutex::new((0..jobs.len()).map(|_| None).collect());
    let next = AtomicUsize::new(0);
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(jobs.len());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(k, r)) = jobs.get(i) else { break };
                let out = run_one(args.method, loaded, k, args.seed.wrapping_add(r as u64), args);
                results.lock().expect("no poisoned workers")[i] = Some(out);
            });
        }
    });
    let runs = results
        .into_inner()
        .expect("no poisoned workers")
        .into_iter()
        .map(|r| r.expect("every job ran"))
        .collect::<Result<Vec<_>, _>>()?;
    let summary = args
        .k
        .iter()
        .map(|&k| {
            let of_k: Vec<&SelectionReport> = runs.iter().filter(|r| r.k == k).collect();
            let errors: Vec<f64> = of_k.iter().filter_map(|r| r.prediction_error).collect();
            let times: Vec<f64> = of_k.iter().map(|r| r.wall_time_ms).collect();
            let d: Vec<f64> = of_k.iter().filter_map(|r| r.objectives.d).collect();
            DesignSummary {
                k,
                median_prediction_error: (!errors.is_empty()).then(|| median(&errors)),
                median_wall_time_ms: median(&times),
                median_d_objective: (!d.is_empty()).then(|| median(&d)),
            }
        })
        .collect();
    Ok(DesignReport {
        schema_version: SCHEMA_VERSION,
        version: VERSION.to_string(),
        command: "design".into(),
        method: args.method.name().into(),
        n: loaded.design.n(),
        m: loaded.design.m(),
        seed: args.seed,
        replicates: args.replicates,
        protocol: "least squares fit on the selected samples, prediction error on all samples".into(),
        dataset_fingerprint: loaded.fingerprint.clone(),
        summary,
        runs,
    })
}

#[derive(Debug, Clone, Serialize)]
struct ValidateOutput {
    schema_version: u32,
    version: String,
    n: usize,
    m: usize,
    k: usize,
    seed: u64,
    samples: usize,
    dataset_fingerprint: String,
    passed: bool,
    checks: Vec<crate::validate::Check>,
}

/// Executes one command without touching the output destination.
pub fn execute(command: &Command) -> Result<Outcome, CliError> {
    match command {
        Command::Sample(args) | Command::Derandomize(args) => {
            let method = if matches!(command, Command::Derandomize(_)) { Method::Derand } else { args.method };
            let loaded = load(args)?;
            let report = run_one(method, &loaded, single_k(args)?, args.seed, args)?;
            let text = match args.output_format {
                OutputFormat::Json => to_json(&report),
                OutputFormat::Csv => format!("{}\n{}\n", SelectionReport::csv_header(), report.csv_row()),
            };
            Ok(Outcome { text, messages: Vec::new(), success: true })
        }
        Command::Design(args) => {
            let loaded = load(args)?;
            let report = run_design(&loaded, args)?;
            let text = match args.output_format {
                OutputFormat::Json => to_json(&report),
                OutputFormat::Csv => {
                    let mut out = String::from("method,k,replicate,seed,prediction_error,wall_time_ms,A,E,D\n");
                    for (i, r) in report.runs.iter().enumerate() {
                        let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
                        out.push_str(&format!(
                            "{},{},{},{},{},{},{},{},{}\n",
                            r.method,
                            r.k,
                            i % args.replicates,
                            r.seed,
                            opt(r.prediction_error),
                            r.wall_time_ms,
                            opt(r.objectives.a),
                            opt(r.objectives.e),
                            opt(r.objectives.d)
                        ));
                    }
                    out
                }
            };
            Ok(Outcome { text, messages: Vec::new(), success: true })
        }
        Command::Validate(args) => {
            let loaded = load(args)?;
            let k = single_k(args)?;
            let report = validate(&loaded.design, k, args.seed, args.samples)?;
            let messages = report.summary_lines();
            let text = match args.output_format {
                OutputFormat::Json => to_json(&ValidateOutput {
                    schema_version: SCHEMA_VERSION,
                    version: VERSION.to_string(),
                    n: loaded.design.n(),
                    m: loaded.design.m(),
                    k,
                    seed: args.seed,
                    samples: args.samples,
                    dataset_fingerprint: loaded.fingerprint,
                    passed: report.passed,
                    checks: report.checks.clone(),
                }),
                OutputFormat::Csv => {
                    let mut out = String::from("check,passed,detail\n");
                    for c in &report.checks {
                        out.push_str(&format!("{},{},\"{}\"\n", c.name, c.passed, c.detail.replace('"', "'")));
                    }
                    out
                }
            };
            Ok(Outcome { text, messages, success: report.passed })
        }
    }
}

impl Command {
    pub fn args(&self) -> &RunArgs {
        match self {
            Command::Sample(a) | Command::Derandomize(a) | Command::Design(a) | Command::Validate(a) => a,
        }
    }
}

/// Writes the outcome to `--output` or standard output.
pub fn emit(command: &Command, outcome: &Outcome) -> Result<(), CliError> {
    for line in &outcome.messages {
        eprintln!("{line}");
    }
    match &command.args().output {
        Some(path) => std::fs::write(path, &outcome.text).map_err(|e| CliError::Write(e.to_string())),
        None => {
            print!("{}", outcome.text);
            Ok(())
        }
    }
}

/// Process entry point; returns the exit code.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = execute(&cli.command).and_then(|outcome| emit(&cli.command, &outcome).map(|()| outcome.success));
    match result {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            println!("{}", serde_json::to_string(&e.to_report()).expect("error reports serialize"));
            1
        }
    }
}

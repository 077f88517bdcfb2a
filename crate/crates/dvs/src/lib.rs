//! File formats, reports, statistical checks and the command-line front
//! end for dual volume sampling. The numerical work lives in `dvs-core`.

pub mod cli;
pub mod io;
pub mod report;
pub mod stats;
pub mod validate;

pub use dvs_core as core;

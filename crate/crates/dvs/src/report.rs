//! Machine-readable run reports.
//!
//! Subsets are reported 1-based and sorted. Non-finite numbers serialize
//! as `null`.

use dvs_core::design::{bound_check, objectives, BoundEstimator, Objectives};
use dvs_core::{DesignMatrix, DvsError};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

pub const SCHEMA_VERSION: u32 = 1;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveValues {
    #[serde(rename = "A")]
    pub a: Option<f64>,
    #[serde(rename = "E")]
    pub e: Option<f64>,
    #[serde(rename = "D")]
    pub d: Option<f64>,
    pub singular: bool,
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

impl From<Objectives> for ObjectiveValues {
    fn from(o: Objectives) -> Self {
        Self { a: finite(o.a), e: finite(o.e), d: finite(o.d), singular: o.singular }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundEntry {
    pub value: Option<f64>,
    pub bound: f64,
    pub holds: bool,
}

/// The selected subset's `‖A_S^+‖²` values next to the expectation bounds
/// under dual volume sampling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub frobenius: BoundEntry,
    pub spectral: BoundEntry,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub schema_version: u32,
    pub version: String,
    pub method: String,
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub seed: u64,
    pub subset: Vec<usize>,
    pub objectives: ObjectiveValues,
    pub bounds: Bounds,
    pub prediction_error: Option<f64>,
    pub diagnostics: Map<String, Value>,
    pub dataset_fingerprint: String,
    pub wall_time_ms: f64,
}

/// Objectives and bound comparison for `subset` (0-based).
pub fn evaluate(a: &DesignMatrix, k: usize, subset: &[usize]) -> Result<(ObjectiveValues, Bounds), DvsError> {
    let obj = objectives(a, subset)?;
    let check = bound_check(a, k, BoundEstimator::Single(subset))?;
    let entry = |side: &dvs_core::design::BoundSide| BoundEntry {
        value: finite(side.estimate),
        bound: side.bound,
        holds: side.holds,
    };
    Ok((obj.into(), Bounds { frobenius: entry(&check.fro), spectral: entry(&check.spec) }))
}

pub fn one_based(subset: &[usize]) -> Vec<usize> {
    let mut s: Vec<usize> = subset.iter().map(|i| i + 1).collect();
    s.sort_unstable();
    s
}

impl SelectionReport {
    pub fn csv_header() -> &'static str {
        "method,n,m,k,seed,subset,A,E,D,prediction_error,wall_time_ms"
    }

    pub fn csv_row(&self) -> String {
        let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
        let subset: Vec<String> = self.subset.iter().map(usize::to_string).collect();
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.method,
            self.n,
            self.m,
            self.k,
            self.seed,
            subset.join(" "),
            opt(self.objectives.a),
            opt(self.objectives.e),
            opt(self.objectives.d),
            opt(self.prediction_error),
            self.wall_time_ms
        )
    }
}

/// Error object printed when a command fails.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub schema_version: u32,
    pub version: String,
    pub error: ErrorBody,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub kind: String,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub row: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub col: Option<usize>,
}

//! Greedy derandomization of dual volume sampling.
//!
//! `E[‖A_S^+‖_F^2 | prefix]` equals the ratio of superset volumes
//! `Σ_j P'(prefix ⊆ S; A^{(j)}) / P'(prefix ⊆ S; A)`, where `A^{(j)}` is `A`
//! without row `j` and `P'` is an unnormalized marginal. Appending, at every
//! step, the candidate with the smallest conditional expectation never
//! increases it, so the final set inherits the expectation bound.

use alloc::vec::Vec;

use nalgebra::DMatrix;
use num_traits::Float;

use crate::error::{DvsError, Result};
use crate::exact::{check_cardinality, log_superset_volume};
use crate::linalg::{pinv_fro_sq, pinv_spec_sq, DesignMatrix};
use crate::subset::{complement, validate_indices};

/// Row-deleted copies of `A`, built once and reused across evaluations.
#[derive(Debug, Clone)]
pub struct FroExpectation<'a> {
    a: &'a DesignMatrix,
    k: usize,
    row_deleted: Vec<DMatrix<f64>>,
}

impl<'a> FroExpectation<'a> {
    pub fn new(a: &'a DesignMatrix, k: usize) -> Result<Self> {
        check_cardinality(a, k)?;
        let row_deleted = (0..a.n()).map(|j| a.entries().clone().remove_row(j)).collect();
        Ok(Self { a, k, row_deleted })
    }

    /// `E[‖A_S^+‖_F^2 | s_1..s_t = prefix]`.
    pub fn conditional(&self, prefix: &[usize]) -> Result<f64> {
        validate_indices(prefix, self.a.m())?;
        if prefix.len() > self.k {
            return Err(DvsError::Cardinality { k: prefix.len(), min: 0, max: self.k });
        }
        let cutoff = self.a.absolute_cutoff();
        let denom = log_superset_volume(self.a.entries(), self.k, prefix, cutoff).log;
        if denom == f64::neg_infinity() {
            return Err(DvsError::NullEvent);
        }
        let numer: Vec<f64> = self
            .row_deleted
            .iter()
            .map(|rows| log_superset_volume(rows, self.k, prefix, cutoff).log)
            .collect();
        let top = numer.iter().copied().fold(f64::neg_infinity(), f64::max);
        if top == f64::neg_infinity() {
            return Ok(0.0);
        }
        let sum: f64 = numer.iter().map(|l| (l - top).exp()).sum();
        Ok((top + sum.ln() - denom).exp())
    }
}

/// `E[‖A_S^+‖_F^2 | s_1..s_t = prefix]` under `P(S; A)` with `|S| = k`.
pub fn conditional_expectation_fro(a: &DesignMatrix, k: usize, prefix: &[usize]) -> Result<f64> {
    FroExpectation::new(a, k)?.conditional(prefix)
}

/// The greedy path and the guarantees it is checked against.
#[derive(Debug, Clone, PartialEq)]
pub struct DerandTrace {
    /// Indices in the order they were appended.
    pub chosen: Vec<usize>,
    /// Per step, every evaluated candidate with its conditional expectation
    /// (`+inf` for candidates that would condition on a null event).
    pub per_step: Vec<Vec<(usize, f64)>>,
    /// Unconditional `E‖A_S^+‖_F^2`.
    pub initial_expectation: f64,
    pub final_fro_sq: f64,
    /// `((m-n+1)/(k-n+1)) ‖A^+‖_F^2`.
    pub bound_fro: f64,
    pub final_spec_sq: f64,
    /// `(n(m-n+1)/(k-n+1)) ‖A^+‖_2^2`.
    pub bound_spec: f64,
}

impl DerandTrace {
    /// Chosen indices, ascending.
    pub fn subset(&self) -> Vec<usize> {
        let mut s = self.chosen.clone();
        s.sort_unstable();
        s
    }
}

/// Greedy derandomized selection. Ties go to the lowest column index.
pub fn derandomized_select(a: &DesignMatrix, k: usize) -> Result<DerandTrace> {
    let expectation = FroExpectation::new(a, k)?;
    let (n, m) = (a.n(), a.m());
    let tol = a.rank_tol();
    let initial_expectation = expectation.conditional(&[])?;

    let mut chosen: Vec<usize> = Vec::with_capacity(k);
    let mut per_step = Vec::with_capacity(k);
    for _ in 0..k {
        let mut step = Vec::new();
        let mut best: Option<(usize, f64)> = None;
        let mut prefix = chosen.clone();
        prefix.push(0);
        for j in complement(&chosen, m) {
            *prefix.last_mut().expect("non-empty") = j;
            let value = match expectation.conditional(&prefix) {
                Ok(v) => v,
                Err(DvsError::NullEvent) => f64::INFINITY,
                Err(e) => return Err(e),
            };
            step.push((j, value));
            if value.is_finite() && best.map_or(true, |(_, b)| value < b) {
                best = Some((j, value));
            }
        }
        let (pick, _) = best.ok_or(DvsError::Infeasible)?;
        chosen.push(pick);
        per_step.push(step);
    }

    let ratio = (m - n + 1) as f64 / (k - n + 1) as f64;
    let mut sorted = chosen.clone();
    sorted.sort_unstable();
    let selected = a.submatrix(&sorted);
    Ok(DerandTrace {
        chosen,
        per_step,
        initial_expectation,
        final_fro_sq: pinv_fro_sq(&selected, tol)?,
        bound_fro: ratio * pinv_fro_sq(a.entries(), tol)?,
        final_spec_sq: pinv_spec_sq(&selected, tol)?,
        bound_spec: n as f64 * ratio * pinv_spec_sq(a.entries(), tol)?,
    })
}

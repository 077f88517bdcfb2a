//! Brute-force references for small instances: full enumeration of the
//! distribution, distances between distributions, and identity checks.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use num_traits::Float;

use crate::error::{DvsError, Result};
use crate::exact::check_cardinality;
use crate::linalg::{log_det_gram, DesignMatrix};
use crate::subset::{binomial, combinations};

/// Largest number of subsets any enumeration will visit by default.
pub const DEFAULT_ENUMERATION_CAP: usize = 200_000;

/// Probabilities of `k`-subsets, keyed by sorted indices. Only subsets with
/// positive weight are stored.
#[derive(Debug, Clone)]
pub struct ExactDistribution {
    m: usize,
    k: usize,
    table: Vec<(Vec<usize>, f64)>,
    log_normalizer: f64,
}

impl ExactDistribution {
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Support in lexicographic order.
    pub fn table(&self) -> &[(Vec<usize>, f64)] {
        &self.table
    }

    /// Log of the sum of the weights.
    pub fn log_normalizer(&self) -> f64 {
        self.log_normalizer
    }

    /// `P(S)` for sorted `subset`; zero outside the support.
    pub fn probability(&self, subset: &[usize]) -> f64 {
        self.table
            .binary_search_by(|(s, _)| s.as_slice().cmp(subset))
            .map_or(0.0, |i| self.table[i].1)
    }

    /// `P(T ⊆ S)`.
    pub fn marginal(&self, t: &[usize]) -> f64 {
        self.table
            .iter()
            .filter(|(s, _)| t.iter().all(|i| s.binary_search(i).is_ok()))
            .map(|(_, p)| p)
            .sum()
    }

    /// `E[f(S)]`.
    pub fn expectation<F: FnMut(&[usize]) -> f64>(&self, mut f: F) -> f64 {
        self.table.iter().map(|(s, p)| p * f(s)).sum()
    }

    pub fn as_map(&self) -> BTreeMap<Vec<usize>, f64> {
        self.table.iter().cloned().collect()
    }
}

/// Enumerates `k`-subsets of `0..m` weighted by `exp(log_weight(S))`.
pub fn enumerate_weighted<F>(m: usize, k: usize, cap: usize, mut log_weight: F) -> Result<ExactDistribution>
where
    F: FnMut(&[usize]) -> Result<f64>,
{
    let count = binomial(m, k);
    if count > cap as f64 {
        return Err(DvsError::TooLarge { count, cap });
    }
    let mut logs = Vec::with_capacity(count as usize);
    for s in combinations(m, k) {
        let lw = log_weight(&s)?;
        if lw > f64::neg_infinity() {
            logs.push((s, lw));
        }
    }
    let top = logs.iter().map(|(_, l)| *l).fold(f64::neg_infinity(), f64::max);
    if top == f64::neg_infinity() {
        return Err(DvsError::Infeasible);
    }
    let total: f64 = logs.iter().map(|(_, l)| (l - top).exp()).sum();
    let log_normalizer = top + total.ln();
    let table = logs.into_iter().map(|(s, l)| (s, (l - log_normalizer).exp())).collect();
    Ok(ExactDistribution { m, k, table, log_normalizer })
}

/// `P(S) ∝ det(A_S A_Sᵀ)` by enumeration, capped at
/// [`DEFAULT_ENUMERATION_CAP`] subsets.
pub fn enumerate_distribution(a: &DesignMatrix, k: usize) -> Result<ExactDistribution> {
    enumerate_distribution_with_cap(a, k, DEFAULT_ENUMERATION_CAP)
}

pub fn enumerate_distribution_with_cap(a: &DesignMatrix, k: usize, cap: usize) -> Result<ExactDistribution> {
    check_cardinality(a, k)?;
    enumerate_weighted(a.m(), k, cap, |s| log_det_gram(a, s))
}

/// Relative frequencies of the given subsets (each sorted before counting).
pub fn empirical_frequencies<I>(samples: I) -> BTreeMap<Vec<usize>, f64>
where
    I: IntoIterator<Item = Vec<usize>>,
{
    let mut counts: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
    let mut total = 0usize;
    for mut s in samples {
        s.sort_unstable();
        *counts.entry(s).or_default() += 1.0;
        total += 1;
    }
    for v in counts.values_mut() {
        *v /= total as f64;
    }
    counts
}

/// `½ Σ |p − q|` over the union of both supports.
pub fn tv_between(p: &BTreeMap<Vec<usize>, f64>, q: &BTreeMap<Vec<usize>, f64>) -> f64 {
    let mut sum = 0.0;
    for (s, &pv) in p {
        sum += (pv - q.get(s).copied().unwrap_or(0.0)).abs();
    }
    for (s, &qv) in q {
        if !p.contains_key(s) {
            sum += qv;
        }
    }
    sum / 2.0
}

/// Total-variation distance between an empirical distribution and an
/// enumerated one.
pub fn tv_distance(empirical: &BTreeMap<Vec<usize>, f64>, exact: &ExactDistribution) -> f64 {
    tv_between(empirical, &exact.as_map())
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairCorrelation {
    pub i: usize,
    pub j: usize,
    pub joint: f64,
    pub product: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationReport {
    pub pairs: Vec<PairCorrelation>,
    /// Largest `P(i, j ∈ S) − P(i ∈ S) P(j ∈ S)` over all pairs.
    pub max_excess: f64,
    pub holds: bool,
}

/// Checks `P(i, j ∈ S) ≤ P(i ∈ S) P(j ∈ S)` for every pair, up to `tol`.
pub fn negative_correlation_check(a: &DesignMatrix, k: usize, tol: f64) -> Result<CorrelationReport> {
    let dist = enumerate_distribution(a, k)?;
    let m = a.m();
    let singles: Vec<f64> = (0..m).map(|i| dist.marginal(&[i])).collect();
    let mut pairs = Vec::with_capacity(m * (m - 1) / 2);
    let mut max_excess = f64::neg_infinity();
    for i in 0..m {
        for j in i + 1..m {
            let joint = dist.marginal(&[i, j]);
            let product = singles[i] * singles[j];
            max_excess = max_excess.max(joint - product);
            pairs.push(PairCorrelation { i, j, joint, product });
        }
    }
    Ok(CorrelationReport { pairs, holds: max_excess <= tol, max_excess })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityCheck {
    pub det: f64,
    pub e_n: f64,
    pub holds: bool,
}

/// Compares `det(A_S A_Sᵀ)` with `e_n` of the eigenvalues of `A_Sᵀ A_S`.
pub fn en_identity_check(a: &DesignMatrix, subset: &[usize], rel_tol: f64) -> Result<IdentityCheck> {
    a.check_subset(subset)?;
    let cols = a.submatrix(subset);
    let det = (&cols * cols.transpose()).determinant();
    let inner = cols.transpose() * &cols;
    let eig = inner.symmetric_eigen();
    let values: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    let e_n = crate::linalg::elem_sym_poly(&values, a.n())?;
    let scale = values.iter().fold(0.0f64, |acc, v| acc.max(v.abs())).powi(a.n() as i32);
    let holds = (det - e_n).abs() <= rel_tol * det.abs().max(e_n.abs()).max(scale * 1e-6);
    Ok(IdentityCheck { det, e_n, holds })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn a_star() -> DesignMatrix {
        DesignMatrix::from_row_slice(2, 3, &[1.0, 0.0, 1.0, 0.0, 1.0, 2.0]).unwrap()
    }

    #[test]
    fn reference_distribution() {
        let d = enumerate_distribution(&a_star(), 2).unwrap();
        assert!((d.probability(&[0, 1]) - 1.0 / 6.0).abs() < 1e-12);
        assert!((d.probability(&[0, 2]) - 4.0 / 6.0).abs() < 1e-12);
        assert!((d.probability(&[1, 2]) - 1.0 / 6.0).abs() < 1e-12);
        assert!((d.log_normalizer() - 6f64.ln()).abs() < 1e-12);
        assert!((d.marginal(&[0]) - 5.0 / 6.0).abs() < 1e-12);
        assert_eq!(d.probability(&[0, 3]), 0.0);
    }

    #[test]
    fn cap_is_enforced() {
        let a = DesignMatrix::new(nalgebra::DMatrix::from_fn(1, 40, |_, j| j as f64 + 1.0)).unwrap();
        assert!(matches!(enumerate_distribution_with_cap(&a, 20, 1000), Err(DvsError::TooLarge { .. })));
    }

    #[test]
    fn total_variation() {
        let p: BTreeMap<_, _> = [(vec![0, 1], 0.5), (vec![0, 2], 0.5)].into_iter().collect();
        let q: BTreeMap<_, _> = [(vec![0, 1], 0.25), (vec![1, 2], 0.75)].into_iter().collect();
        assert!((tv_between(&p, &q) - 0.75).abs() < 1e-12);
        assert_eq!(tv_between(&p, &p), 0.0);
        let e = empirical_frequencies(vec![vec![1, 0], vec![0, 1], vec![2, 0], vec![0, 2]]);
        assert_eq!(e, p);
    }

    #[test]
    fn reference_correlations() {
        let report = negative_correlation_check(&a_star(), 2, 1e-12).unwrap();
        assert!(report.holds);
        let pair = &report.pairs[0];
        assert!((pair.joint - 1.0 / 6.0).abs() < 1e-12);
        assert!((pair.product - 10.0 / 36.0).abs() < 1e-12);
    }

    #[test]
    fn identity_check_examples() {
        let c = en_identity_check(&a_star(), &[0, 2], 1e-9).unwrap();
        assert!(c.holds);
        assert!((c.det - 4.0).abs() < 1e-12);
        let dup = DesignMatrix::from_row_slice(2, 3, &[1.0, 1.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
        assert!(en_identity_check(&dup, &[0, 1], 1e-9).unwrap().holds);
    }
}

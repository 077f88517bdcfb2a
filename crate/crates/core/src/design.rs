//! Experimental-design criteria, baseline selectors, Fedorov exchange,
//! expectation-bound checks and the regression evaluation protocol.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use num_traits::Float;
use rand::Rng;

use crate::error::{DvsError, Result};
use crate::exact::check_cardinality;
use crate::linalg::{log_det_gram, pinv_fro_sq, pinv_spec_sq, DesignMatrix, GramInverseState};
use crate::oracle::enumerate_distribution;
use crate::subset::{complement, SubsetSelection};

/// Design criterion; lower is better for all three.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Criterion {
    /// `‖A_S^+‖_F²`.
    A,
    /// `‖A_S^+‖_2²`.
    E,
    /// `−log det(A_S A_Sᵀ)`.
    D,
}

impl Criterion {
    pub const ALL: [Criterion; 3] = [Criterion::A, Criterion::E, Criterion::D];

    pub fn name(self) -> &'static str {
        match self {
            Criterion::A => "A",
            Criterion::E => "E",
            Criterion::D => "D",
        }
    }
}

fn finite_or_inf(value: Result<f64>) -> Result<f64> {
    match value {
        Err(DvsError::Singular) => Ok(f64::INFINITY),
        other => other,
    }
}

/// Criterion value of `A_S`; `+inf` when `A_S` lacks full row rank.
pub fn objective(a: &DesignMatrix, subset: &[usize], criterion: Criterion) -> Result<f64> {
    a.check_subset(subset)?;
    let cols = a.submatrix(subset);
    match criterion {
        Criterion::A => finite_or_inf(pinv_fro_sq(&cols, a.rank_tol())),
        Criterion::E => finite_or_inf(pinv_spec_sq(&cols, a.rank_tol())),
        Criterion::D => Ok(-log_det_gram(a, subset)?),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Objectives {
    pub a: f64,
    pub e: f64,
    pub d: f64,
    pub singular: bool,
}

pub fn objectives(a: &DesignMatrix, subset: &[usize]) -> Result<Objectives> {
    let values = [
        objective(a, subset, Criterion::A)?,
        objective(a, subset, Criterion::E)?,
        objective(a, subset, Criterion::D)?,
    ];
    Ok(Objectives {
        a: values[0],
        e: values[1],
        d: values[2],
        singular: values.iter().any(|v| v.is_infinite()),
    })
}

/// `ℓ_i = a_iᵀ (AAᵀ)^{-1} a_i`.
pub fn leverage_scores(a: &DesignMatrix) -> Vec<f64> {
    let inverse = a.gram_inverse();
    (0..a.m())
        .map(|i| {
            let v = a.column(i);
            v.dot(&(inverse * v))
        })
        .collect()
}

/// `k` distinct indices by sequential draws proportional to `weights`
/// among the indices not yet taken. Zero weights are never drawn.
pub fn weighted_without_replacement<R: Rng + ?Sized>(weights: &[f64], k: usize, rng: &mut R) -> Result<Vec<usize>> {
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(DvsError::InvalidParameter("weights must be finite and non-negative"));
    }
    if weights.iter().filter(|&&w| w > 0.0).count() < k {
        return Err(DvsError::Infeasible);
    }
    let mut remaining = weights.to_vec();
    let mut chosen = Vec::with_capacity(k);
    for _ in 0..k {
        let pick = WeightedIndex::new(&remaining).map_err(|_| DvsError::Infeasible)?.sample(rng);
        remaining[pick] = 0.0;
        chosen.push(pick);
    }
    Ok(chosen)
}

fn selection_from(a: &DesignMatrix, indices: Vec<usize>) -> Result<SubsetSelection> {
    let logdet = log_det_gram(a, &indices)?;
    Ok(SubsetSelection::new(indices, logdet))
}

/// Leverage-score sampling without replacement.
pub fn sample_leverage<R: Rng + ?Sized>(a: &DesignMatrix, k: usize, rng: &mut R) -> Result<SubsetSelection> {
    let weights: Vec<f64> = leverage_scores(a).into_iter().map(|l| l.max(0.0)).collect();
    selection_from(a, weighted_without_replacement(&weights, k, rng)?)
}

/// Predictive-length sampling: draws proportional to column norms.
pub fn sample_predictive_length<R: Rng + ?Sized>(a: &DesignMatrix, k: usize, rng: &mut R) -> Result<SubsetSelection> {
    let weights: Vec<f64> = (0..a.m()).map(|i| a.column(i).norm()).collect();
    selection_from(a, weighted_without_replacement(&weights, k, rng)?)
}

/// A uniformly random `k`-subset of `0..m`, sorted.
pub fn sample_uniform<R: Rng + ?Sized>(m: usize, k: usize, rng: &mut R) -> Result<Vec<usize>> {
    if k > m {
        return Err(DvsError::Cardinality { k, min: 0, max: m });
    }
    let mut s = rand::seq::index::sample(rng, m, k).into_vec();
    s.sort_unstable();
    Ok(s)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FedorovResult {
    pub selection: SubsetSelection,
    /// Objective after initialization and after every accepted swap.
    pub trace: Vec<f64>,
    pub sweeps: usize,
    /// `false` when `max_sweeps` ran out while swaps still improved.
    pub converged: bool,
}

/// Criterion value of `T ∪ {j}` from the state of `T`.
fn value_after_insert(a: &DesignMatrix, reduced: &GramInverseState, j: usize, criterion: Criterion) -> f64 {
    let v = a.column(j);
    let mv = reduced.inverse() * v;
    let q = v.dot(&mv);
    match criterion {
        Criterion::D => -(reduced.logdet() + Float::ln(1.0 + q)),
        Criterion::A => reduced.inverse().trace() - mv.norm_squared() / (1.0 + q),
        Criterion::E => {
            let updated = reduced.inverse() - (&mv * mv.transpose()) / (1.0 + q);
            updated.symmetric_eigenvalues().max()
        }
    }
}

/// Best-improvement swap search: every sweep scans all `k(m−k)` exchanges
/// and applies the single best one, until none improves or `max_sweeps`
/// sweeps have run.
pub fn fedorov_exchange(
    a: &DesignMatrix,
    k: usize,
    criterion: Criterion,
    init: &[usize],
    max_sweeps: usize,
) -> Result<FedorovResult> {
    check_cardinality(a, k)?;
    if init.len() != k {
        return Err(DvsError::Cardinality { k: init.len(), min: k, max: k });
    }
    let mut current = init.to_vec();
    let mut value = objective(a, &current, criterion)?;
    if value.is_infinite() {
        return Err(DvsError::Singular);
    }
    let mut trace = alloc::vec![value];
    let mut sweeps = 0;
    let mut converged = false;
    while sweeps < max_sweeps {
        sweeps += 1;
        let full = GramInverseState::new(a, &current)?;
        let outside = complement(&current, a.m());
        let mut best: Option<(usize, usize, f64)> = None;
        for (pos, &s_in) in current.iter().enumerate() {
            let mut reduced = full.clone();
            let rank_one = reduced.downdate(a, s_in).is_ok();
            for &s_out in &outside {
                let candidate = if rank_one {
                    value_after_insert(a, &reduced, s_out, criterion)
                } else {
                    let mut swapped = current.clone();
                    swapped[pos] = s_out;
                    objective(a, &swapped, criterion)?
                };
                if best.map_or(true, |(_, _, b)| candidate < b) {
                    best = Some((pos, s_out, candidate));
                }
            }
        }
        let threshold = value - 1e-12 * value.abs().max(1.0);
        match best {
            Some((pos, s_out, b)) if b < threshold => {
                current[pos] = s_out;
                value = objective(a, &current, criterion)?;
                trace.push(value);
            }
            _ => {
                converged = true;
                break;
            }
        }
    }
    Ok(FedorovResult { selection: selection_from(a, current)?, trace, sweeps, converged })
}

/// Samples as rows of `x` (`m × n`) with responses `y`; the design matrix
/// is `A = xᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionDataset {
    x: DMatrix<f64>,
    y: DVector<f64>,
}

impl RegressionDataset {
    pub fn new(x: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(DvsError::Shape { rows: y.len(), cols: x.nrows() });
        }
        Ok(Self { x, y })
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    /// Number of samples.
    pub fn m(&self) -> usize {
        self.x.nrows()
    }

    /// Number of features.
    pub fn n(&self) -> usize {
        self.x.ncols()
    }

    /// Features shifted to zero mean and scaled to unit variance; constant
    /// features are only centered.
    pub fn standardized(&self) -> Self {
        let mut x = self.x.clone();
        let m = x.nrows() as f64;
        for mut col in x.column_iter_mut() {
            let mean = col.sum() / m;
            col.add_scalar_mut(-mean);
            let sd = Float::sqrt(col.norm_squared() / m);
            if sd > 0.0 {
                col /= sd;
            }
        }
        Self { x, y: self.y.clone() }
    }

    pub fn design(&self) -> Result<DesignMatrix> {
        DesignMatrix::new(self.x.transpose())
    }

    pub fn design_with_rank_tol(&self, rank_tol: f64) -> Result<DesignMatrix> {
        DesignMatrix::with_rank_tol(self.x.transpose(), rank_tol)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionFit {
    pub coefficients: DVector<f64>,
    /// `‖y − X α̂‖₂` over every sample.
    pub prediction_error: f64,
    /// `X_S` had rank below `n`; the minimum-norm solution was used.
    pub rank_deficient: bool,
}

/// Least squares on the selected samples, evaluated on all samples.
pub fn regression_eval(data: &RegressionDataset, subset: &[usize], rank_tol: f64) -> Result<RegressionFit> {
    crate::subset::validate_indices(subset, data.m())?;
    if subset.is_empty() {
        return Err(DvsError::Cardinality { k: 0, min: 1, max: data.m() });
    }
    let xs = data.x.select_rows(subset);
    let ys = DVector::from_iterator(subset.len(), subset.iter().map(|&i| data.y[i]));
    let svd = xs.svd(true, true);
    let smax = svd.singular_values.max();
    let cutoff = rank_tol * smax * subset.len().max(data.n()) as f64;
    let rank = svd.singular_values.iter().filter(|&&s| s > cutoff).count();
    let coefficients = svd.solve(&ys, cutoff).map_err(|_| DvsError::Singular)?;
    let residual = &data.y - &data.x * &coefficients;
    Ok(RegressionFit { coefficients, prediction_error: residual.norm(), rank_deficient: rank < data.n() })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundEstimator<'s> {
    /// Enumerate every `k`-subset.
    Exact,
    /// A single selected subset.
    Single(&'s [usize]),
    /// Sample mean over independent draws.
    MonteCarlo(&'s [Vec<usize>]),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundSide {
    pub estimate: f64,
    /// Standard error of the estimate; zero unless Monte Carlo.
    pub std_error: f64,
    pub bound: f64,
    /// Exact: `estimate ≤ bound (1 + 1e-8)`. Single: `estimate ≤ bound`.
    /// Monte Carlo: `estimate − 3·std_error ≤ bound`.
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub samples: usize,
    pub fro: BoundSide,
    pub spec: BoundSide,
}

/// `(m−n+1)/(k−n+1) ‖A^+‖_F²`.
pub fn fro_bound(a: &DesignMatrix, k: usize) -> Result<f64> {
    check_cardinality(a, k)?;
    let (n, m) = (a.n(), a.m());
    Ok((m - n + 1) as f64 / (k - n + 1) as f64 * a.gram_inverse().trace())
}

/// `(1 + n(m−k)/(k−n+1)) ‖A^+‖_2²`.
pub fn spec_bound(a: &DesignMatrix, k: usize) -> Result<f64> {
    check_cardinality(a, k)?;
    let (n, m) = (a.n(), a.m());
    let factor = 1.0 + (n * (m - k)) as f64 / (k - n + 1) as f64;
    Ok(factor * pinv_spec_sq(a.entries(), a.rank_tol())?)
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, Float::sqrt(var / n))
}

/// Compares `E‖A_S^+‖_F²` and `E‖A_S^+‖_2²` under dual volume sampling with
/// their bounds.
pub fn bound_check(a: &DesignMatrix, k: usize, estimator: BoundEstimator<'_>) -> Result<BoundReport> {
    let fb = fro_bound(a, k)?;
    let sb = spec_bound(a, k)?;
    let tol = a.rank_tol();
    let norms = |s: &[usize]| -> Result<(f64, f64)> {
        let cols = a.submatrix(s);
        Ok((finite_or_inf(pinv_fro_sq(&cols, tol))?, finite_or_inf(pinv_spec_sq(&cols, tol))?))
    };
    match estimator {
        BoundEstimator::Exact => {
            let dist = enumerate_distribution(a, k)?;
            let (mut fro, mut spec) = (0.0, 0.0);
            for (s, p) in dist.table() {
                let (f, e) = norms(s)?;
                fro += p * f;
                spec += p * e;
            }
            let side = |estimate: f64, bound: f64| BoundSide {
                estimate,
                std_error: 0.0,
                bound,
                holds: estimate <= bound * (1.0 + 1e-8),
            };
            Ok(BoundReport { samples: dist.table().len(), fro: side(fro, fb), spec: side(spec, sb) })
        }
        BoundEstimator::Single(s) => {
            if s.len() != k {
                return Err(DvsError::Cardinality { k: s.len(), min: k, max: k });
            }
            let (f, e) = norms(s)?;
            let side = |estimate: f64, bound: f64| BoundSide { estimate, std_error: 0.0, bound, holds: estimate <= bound };
            Ok(BoundReport { samples: 1, fro: side(f, fb), spec: side(e, sb) })
        }
        BoundEstimator::MonteCarlo(samples) => {
            if samples.is_empty() {
                return Err(DvsError::InvalidParameter("Monte Carlo bound check needs samples"));
            }
            let mut fro = Vec::with_capacity(samples.len());
            let mut spec = Vec::with_capacity(samples.len());
            for s in samples {
                if s.len() != k {
                    return Err(DvsError::Cardinality { k: s.len(), min: k, max: k });
                }
                let (f, e) = norms(s)?;
                fro.push(f);
                spec.push(e);
            }
            let side = |values: &[f64], bound: f64| {
                let (estimate, std_error) = mean_and_se(values);
                BoundSide { estimate, std_error, bound, holds: estimate - 3.0 * std_error <= bound }
            };
            Ok(BoundReport { samples: samples.len(), fro: side(&fro, fb), spec: side(&spec, sb) })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{sample_exact, DvsProblem};
    use crate::mcmc::{sample_mcmc, ChainConfig, Init, StepBudget};
    use crate::subset::combinations;
    use alloc::collections::BTreeMap;
    use alloc::vec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn a_star() -> DesignMatrix {
        DesignMatrix::from_row_slice(2, 3, &[1.0, 0.0, 1.0, 0.0, 1.0, 2.0]).unwrap()
    }

    fn random_design(rng: &mut ChaCha8Rng, n: usize, m: usize) -> DesignMatrix {
        DesignMatrix::new(DMatrix::from_fn(n, m, |_, _| rng.sample(StandardNormal))).unwrap()
    }

    #[test]
    fn objective_examples() {
        let a = a_star();
        assert!((objective(&a, &[0, 1], Criterion::A).unwrap() - 2.0).abs() < 1e-12);
        assert!((objective(&a, &[0, 2], Criterion::D).unwrap() + 4f64.ln()).abs() < 1e-12);
        assert!((objective(&a, &[1, 2], Criterion::A).unwrap() - 6.0).abs() < 1e-10);
        let dup = DesignMatrix::from_row_slice(2, 3, &[1.0, 1.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
        let o = objectives(&dup, &[0, 1]).unwrap();
        assert!(o.singular && o.a.is_infinite() && o.e.is_infinite() && o.d.is_infinite());
        assert!(!objectives(&a, &[0, 2]).unwrap().singular);
    }

    #[test]
    fn leverage_examples() {
        let l = leverage_scores(&a_star());
        for (got, want) in l.iter().zip([5.0 / 6.0, 1.0 / 3.0, 5.0 / 6.0]) {
            assert!((got - want).abs() < 1e-12);
        }
        let id = DesignMatrix::new(DMatrix::identity(3, 3)).unwrap();
        assert!(leverage_scores(&id).iter().all(|&v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn leverage_sum_and_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(139);
        for _ in 0..50 {
            let n = rng.random_range(1..5);
            let m = rng.random_range(n..15);
            let a = random_design(&mut rng, n, m);
            let l = leverage_scores(&a);
            assert!((l.iter().sum::<f64>() - n as f64).abs() < 1e-10);
            assert!(l.iter().all(|&v| v > -1e-10 && v < 1.0 + 1e-10));
        }
    }

    #[test]
    fn predictive_length_first_draw() {
        let a = a_star();
        let mut rng = ChaCha8Rng::seed_from_u64(149);
        let runs = 30_000;
        let mut first = [0usize; 3];
        for _ in 0..runs {
            let s = weighted_without_replacement(&[1.0, 1.0, 5f64.sqrt()], 1, &mut rng).unwrap();
            first[s[0]] += 1;
        }
        let total = 2.0 + 5f64.sqrt();
        for (c, w) in first.iter().zip([1.0, 1.0, 5f64.sqrt()]) {
            assert!((*c as f64 / runs as f64 - w / total).abs() < 0.01);
        }
        assert_eq!(sample_predictive_length(&a, 3, &mut rng).unwrap().indices(), &[0, 1, 2]);
    }

    #[test]
    fn zero_weights_are_excluded() {
        let a = DesignMatrix::from_row_slice(2, 4, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 1.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(151);
        for _ in 0..200 {
            assert!(!sample_predictive_length(&a, 3, &mut rng).unwrap().contains(1));
        }
        assert_eq!(sample_predictive_length(&a, 4, &mut rng), Err(DvsError::Infeasible));
    }

    #[test]
    fn uniform_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(157);
        assert_eq!(sample_uniform(3, 3, &mut rng).unwrap(), vec![0, 1, 2]);
        assert!(sample_uniform(3, 0, &mut rng).unwrap().is_empty());
        let runs = 60_000;
        let mut counts: BTreeMap<Vec<usize>, usize> = BTreeMap::new();
        for _ in 0..runs {
            *counts.entry(sample_uniform(3, 2, &mut rng).unwrap()).or_default() += 1;
        }
        let tv: f64 = counts.values().map(|&c| (c as f64 / runs as f64 - 1.0 / 3.0).abs()).sum::<f64>() / 2.0;
        assert_eq!(counts.len(), 3);
        assert!(tv < 0.02);
    }

    #[test]
    fn fedorov_examples() {
        let a = a_star();
        let d = fedorov_exchange(&a, 2, Criterion::D, &[1, 2], 10).unwrap();
        assert_eq!(d.selection.indices(), &[0, 2]);
        assert!(d.converged);
        let a_opt = fedorov_exchange(&a, 2, Criterion::A, &[1, 2], 10).unwrap();
        assert_eq!(a_opt.selection.indices(), &[0, 2]);
        assert!((a_opt.trace.last().unwrap() - 1.5).abs() < 1e-12);
        let fixed = fedorov_exchange(&a, 2, Criterion::D, &[0, 2], 10).unwrap();
        assert_eq!(fixed.selection.indices(), &[0, 2]);
        assert_eq!(fixed.sweeps, 1);
        assert_eq!(fixed.trace.len(), 1);
    }

    #[test]
    fn fedorov_trace_is_monotone_and_locally_optimal() {
        let mut rng = ChaCha8Rng::seed_from_u64(163);
        for _ in 0..10 {
            let a = random_design(&mut rng, 3, 10);
            for criterion in Criterion::ALL {
                let init = [0usize, 1, 2, 3, 4];
                let out = fedorov_exchange(&a, 5, criterion, &init, 100).unwrap();
                assert!(out.trace.windows(2).all(|w| w[1] <= w[0]));
                assert!(out.converged);
                let s = out.selection.indices().to_vec();
                let value = objective(&a, &s, criterion).unwrap();
                for (pos, _) in s.iter().enumerate() {
                    for j in complement(&s, 10) {
                        let mut t = s.clone();
                        t[pos] = j;
                        assert!(objective(&a, &t, criterion).unwrap() >= value - 1e-9 * value.abs().max(1.0));
                    }
                }
            }
        }
    }

    #[test]
    fn low_temperature_chain_and_fedorov_agree_on_mode() {
        let mut rng = ChaCha8Rng::seed_from_u64(167);
        for _ in 0..5 {
            let a = random_design(&mut rng, 2, 5);
            let problem = DvsProblem::new(a.clone(), 2).unwrap();
            let best = combinations(5, 2)
                .max_by(|x, y| log_det_gram(&a, x).unwrap().total_cmp(&log_det_gram(&a, y).unwrap()))
                .unwrap();
            let fed = fedorov_exchange(&a, 2, Criterion::D, &crate::mcmc::greedy_init(&a, 2, 1e-6).unwrap().into_indices(), 50)
                .unwrap();
            let config = ChainConfig {
                steps: StepBudget::Fixed(2000),
                beta: 0.01,
                init: Init::DSquared,
                ..ChainConfig::default()
            };
            let chain = sample_mcmc(&problem, &config, &mut rng).unwrap();
            assert_eq!(chain.selection.indices(), best.as_slice());
            assert_eq!(fed.selection.indices(), best.as_slice());
        }
    }

    #[test]
    fn regression_interpolation() {
        let mut rng = ChaCha8Rng::seed_from_u64(173);
        let x = DMatrix::from_fn(30, 4, |_, _| rng.sample(StandardNormal));
        let alpha = DVector::from_vec(vec![1.0, -2.0, 0.5, 3.0]);
        let y = &x * &alpha;
        let data = RegressionDataset::new(x, y).unwrap();
        let all: Vec<usize> = (0..30).collect();
        assert!(regression_eval(&data, &all, 1e-10).unwrap().prediction_error < 1e-9);
        let fit = regression_eval(&data, &[3, 7, 11, 19, 23], 1e-10).unwrap();
        assert!(fit.prediction_error < 1e-9);
        assert!(!fit.rank_deficient);
        let short = regression_eval(&data, &[3, 7], 1e-10).unwrap();
        assert!(short.rank_deficient);
        assert!(short.prediction_error.is_finite());
    }

    #[test]
    fn standardization() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 5.0, 2.0, 5.0, 3.0, 5.0]);
        let data = RegressionDataset::new(x, DVector::zeros(3)).unwrap().standardized();
        let c0 = data.x().column(0);
        assert!(c0.sum().abs() < 1e-12);
        assert!((c0.norm_squared() / 3.0 - 1.0).abs() < 1e-12);
        assert!(data.x().column(1).norm() < 1e-12);
    }

    #[test]
    fn bound_check_examples() {
        let a = a_star();
        let exact = bound_check(&a, 2, BoundEstimator::Exact).unwrap();
        assert!((exact.fro.estimate - 7.0 / 3.0).abs() < 1e-10);
        assert!((exact.fro.bound - 7.0 / 3.0).abs() < 1e-12);
        assert!(exact.fro.holds && exact.spec.holds);
        let full = bound_check(&a, 3, BoundEstimator::Exact).unwrap();
        assert!((full.fro.estimate - full.fro.bound).abs() < 1e-10);
        assert!((full.fro.bound - a.gram_inverse().trace()).abs() < 1e-12);
        let single = bound_check(&a, 2, BoundEstimator::Single(&[0, 2])).unwrap();
        assert!(single.fro.holds);
        assert!((single.fro.estimate - 1.5).abs() < 1e-12);
    }

    #[test]
    fn exact_expectations_respect_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(179);
        for &(n, m) in &[(2usize, 6usize), (3, 7)] {
            for _ in 0..10 {
                let a = random_design(&mut rng, n, m);
                for k in n..=m {
                    let r = bound_check(&a, k, BoundEstimator::Exact).unwrap();
                    assert!(r.fro.holds, "fro {} > {}", r.fro.estimate, r.fro.bound);
                    assert!(r.spec.holds, "spec {} > {}", r.spec.estimate, r.spec.bound);
                }
            }
        }
    }

    #[test]
    fn monte_carlo_bound_check() {
        let mut rng = ChaCha8Rng::seed_from_u64(181);
        let a = random_design(&mut rng, 3, 10);
        let problem = DvsProblem::new(a.clone(), 6).unwrap();
        let samples: Vec<Vec<usize>> = (0..10_000)
            .map(|_| sample_exact(&problem, &mut rng).unwrap().into_selection(&a).unwrap().into_indices())
            .collect();
        let r = bound_check(&a, 6, BoundEstimator::MonteCarlo(&samples)).unwrap();
        // The Frobenius bound is attained in expectation.
        assert!((r.fro.estimate - r.fro.bound).abs() <= 3.0 * r.fro.std_error);
        assert!(r.spec.estimate + 3.0 * r.spec.std_error <= r.spec.bound);
        assert!(r.fro.holds && r.spec.holds);
    }
}

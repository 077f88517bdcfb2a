//! Exact dual volume sampling.
//!
//! The partition function has the closed form
//! `Z = C(m-n, k-n) det(A Aᵀ)`. Marginals `P(T ⊆ S)` are computed from the
//! spectral decomposition of `A_T`: with `A_T = Q Σ Vᵀ` (rank `r`), the
//! residual block `B = Q⊥ᵀ A_{T_c}`, the scaled block
//! `C = Σ^{-1} Qᵀ A_{T_c}`, and `P_B` the projector onto the orthogonal
//! complement of the row space of `B`,
//!
//! ```text
//! Σ_{S ⊇ T, |S|=k} det(A_S A_Sᵀ) = Π σ_i²(A_T) · Π σ_j²(B) · e_{k-|T|-r(B)}(P_B (I + CᵀC) P_B)
//! ```
//!
//! Sequential sampling then draws an ordered tuple one index at a time with
//! `P(s_t = i | prefix) = P(T ∪ {i} ⊆ S) / ((k - t + 1) P(T ⊆ S))`.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use num_traits::Float;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;

use crate::error::{DvsError, Result};
use crate::linalg::{log_det_gram, log_elem_sym_poly, rank_above, svd_sorted, DesignMatrix};
use crate::subset::{complement, ln_binomial, validate_indices, SubsetSelection};

/// A design matrix paired with a target cardinality `n <= k <= m`.
#[derive(Debug, Clone)]
pub struct DvsProblem {
    a: DesignMatrix,
    k: usize,
    log_z: f64,
}

impl DvsProblem {
    pub fn new(a: DesignMatrix, k: usize) -> Result<Self> {
        let log_z = partition_function(&a, k)?;
        Ok(Self { a, k, log_z })
    }

    pub fn a(&self) -> &DesignMatrix {
        &self.a
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// `log Z_A`.
    pub fn log_partition(&self) -> f64 {
        self.log_z
    }

    /// `log P(S; A)` for a `k`-subset (`-inf` outside the support).
    pub fn log_prob(&self, subset: &[usize]) -> Result<f64> {
        if subset.len() != self.k {
            return Err(DvsError::Cardinality { k: subset.len(), min: self.k, max: self.k });
        }
        Ok(log_det_gram(&self.a, subset)? - self.log_z)
    }
}

pub(crate) fn check_cardinality(a: &DesignMatrix, k: usize) -> Result<()> {
    if k < a.n() || k > a.m() {
        return Err(DvsError::Cardinality { k, min: a.n(), max: a.m() });
    }
    Ok(())
}

/// `log Z_A = log[C(m-n, k-n) det(A Aᵀ)]`.
pub fn partition_function(a: &DesignMatrix, k: usize) -> Result<f64> {
    check_cardinality(a, k)?;
    Ok(ln_binomial(a.m() - a.n(), k - a.n()) + a.log_det_gram())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct SupersetVolume {
    pub log: f64,
    pub rank_at: usize,
    pub rank_b: usize,
}

/// `log Σ_{S ⊇ T, |S| = k} det(M_S M_Sᵀ)` for any `rows × m` matrix `M`
/// (rows may be zero). `t` must be valid and `|T| <= k <= m`. Singular
/// values at or below `cutoff` count as zero.
pub(crate) fn log_superset_volume(
    entries: &DMatrix<f64>,
    k: usize,
    t: &[usize],
    cutoff: f64,
) -> SupersetVolume {
    let (n, m) = entries.shape();
    let tlen = t.len();
    let zero = |rank_at, rank_b| SupersetVolume { log: f64::neg_infinity(), rank_at, rank_b };
    if n == 0 {
        return SupersetVolume { log: ln_binomial(m - tlen, k - tlen), rank_at: 0, rank_b: 0 };
    }

    // Left singular basis of A_T, completed to all of R^n.
    let (sigma_t, u) = if tlen == 0 {
        (Vec::new(), DMatrix::identity(n, n))
    } else {
        let mut padded = DMatrix::zeros(n, tlen.max(n));
        for (j, &c) in t.iter().enumerate() {
            padded.set_column(j, &entries.column(c));
        }
        let svd = svd_sorted(padded, true, false);
        (svd.sigma, svd.u.expect("left singular vectors requested"))
    };
    let rank_at = rank_above(&sigma_t, cutoff);
    let q = u.columns(0, rank_at);
    let q_perp = u.columns(rank_at, n - rank_at);

    let tc = complement(t, m);
    let a_tc = entries.select_columns(tc.iter());
    let width = tc.len();

    let (sigma_b, q_b) = if rank_at == n {
        (Vec::new(), DMatrix::zeros(0, width))
    } else {
        let b = q_perp.transpose() * &a_tc;
        let svd = svd_sorted(b, false, true);
        let rank_b = rank_above(&svd.sigma, cutoff);
        let v_t = svd.v_t.expect("right singular vectors requested");
        (svd.sigma, v_t.rows(0, rank_b).into_owned())
    };
    let rank_b = q_b.nrows();

    if rank_at + rank_b < n {
        return zero(rank_at, rank_b);
    }
    let Some(degree) = (k - tlen).checked_sub(rank_b) else {
        return zero(rank_at, rank_b);
    };

    let log_at: f64 = sigma_t[..rank_at].iter().map(|s| 2.0 * s.ln()).sum();
    let log_b: f64 = sigma_b[..rank_b].iter().map(|s| 2.0 * s.ln()).sum();

    let log_gamma = if degree == 0 {
        0.0
    } else {
        let inv_sigma = DMatrix::from_fn(rank_at, rank_at, |i, j| if i == j { 1.0 / sigma_t[i] } else { 0.0 });
        let c = inv_sigma * q.transpose() * &a_tc;
        let h = DMatrix::<f64>::identity(width, width) + c.transpose() * &c;
        let p_b = DMatrix::<f64>::identity(width, width) - q_b.transpose() * &q_b;
        let sandwich = &p_b * h * &p_b;
        let sym = (&sandwich + sandwich.transpose()) * 0.5;
        let mut eig: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
        eig.sort_by(f64::total_cmp);
        // P_B annihilates exactly r(B) directions.
        eig[..rank_b].iter_mut().for_each(|v| *v = 0.0);
        log_elem_sym_poly(&eig, degree).expect("degree bounded by width")
    };

    SupersetVolume { log: log_at + log_b + log_gamma, rank_at, rank_b }
}

fn check_conditioning_set(a: &DesignMatrix, k: usize, t: &[usize]) -> Result<()> {
    check_cardinality(a, k)?;
    validate_indices(t, a.m())?;
    if t.len() > k {
        return Err(DvsError::Cardinality { k: t.len(), min: 0, max: k });
    }
    Ok(())
}

/// `log Σ_{S ⊇ T, |S| = k} det(A_S A_Sᵀ)`; `-inf` when no superset of `T`
/// has full row rank.
pub fn unnormalized_marginal(a: &DesignMatrix, k: usize, t: &[usize]) -> Result<f64> {
    check_conditioning_set(a, k, t)?;
    Ok(log_superset_volume(a.entries(), k, t, a.absolute_cutoff()).log)
}

/// `P(T ⊆ S)` together with the intermediate ranks.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalResult {
    pub t: Vec<usize>,
    pub log_unnormalized: f64,
    pub probability: f64,
    pub rank_at: usize,
    pub rank_b: usize,
}

pub fn marginal(problem: &DvsProblem, t: &[usize]) -> Result<MarginalResult> {
    check_conditioning_set(problem.a(), problem.k(), t)?;
    let a = problem.a();
    let vol = log_superset_volume(a.entries(), problem.k(), t, a.absolute_cutoff());
    Ok(MarginalResult {
        t: t.to_vec(),
        log_unnormalized: vol.log,
        probability: (vol.log - problem.log_partition()).exp(),
        rank_at: vol.rank_at,
        rank_b: vol.rank_b,
    })
}

/// Probability that the next element of the ordered tuple is `i`, given the
/// elements drawn so far.
pub fn conditional_prob(problem: &DvsProblem, prefix: &[usize], i: usize) -> Result<f64> {
    let a = problem.a();
    let k = problem.k();
    check_conditioning_set(a, k, prefix)?;
    if prefix.len() >= k {
        return Err(DvsError::Cardinality { k: prefix.len() + 1, min: 1, max: k });
    }
    if i >= a.m() {
        return Err(DvsError::IndexOutOfRange { index: i, m: a.m() });
    }
    if prefix.contains(&i) {
        return Err(DvsError::DuplicateIndex(i));
    }
    let cutoff = a.absolute_cutoff();
    let denom = log_superset_volume(a.entries(), k, prefix, cutoff).log;
    if denom == f64::neg_infinity() {
        return Err(DvsError::NullEvent);
    }
    let mut extended = prefix.to_vec();
    extended.push(i);
    let numer = log_superset_volume(a.entries(), k, &extended, cutoff).log;
    Ok((numer - denom).exp() / (k - prefix.len()) as f64)
}

/// An ordered `k`-tuple and its probability under the tuple distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderedSample {
    pub tuple: Vec<usize>,
    pub log_prob: f64,
}

impl OrderedSample {
    pub fn into_selection(self, a: &DesignMatrix) -> Result<SubsetSelection> {
        let logdet = log_det_gram(a, &self.tuple)?;
        Ok(SubsetSelection::new(self.tuple, logdet))
    }
}

#[derive(Debug, Clone)]
struct StepDistribution {
    candidates: Vec<usize>,
    probs: Vec<f64>,
    index: WeightedIndex<f64>,
}

/// Sequential exact sampler. Step distributions are memoized by the set of
/// indices drawn so far, so repeated draws from one problem get cheaper.
#[derive(Debug, Clone)]
pub struct ExactSampler<'p> {
    problem: &'p DvsProblem,
    cache: BTreeMap<Vec<usize>, StepDistribution>,
}

impl<'p> ExactSampler<'p> {
    pub fn new(problem: &'p DvsProblem) -> Self {
        Self { problem, cache: BTreeMap::new() }
    }

    fn step(&mut self, drawn: &[usize]) -> Result<&StepDistribution> {
        let mut key = drawn.to_vec();
        key.sort_unstable();
        if !self.cache.contains_key(&key) {
            let dist = self.build_step(&key)?;
            self.cache.insert(key.clone(), dist);
        }
        Ok(&self.cache[&key])
    }

    fn build_step(&self, drawn: &[usize]) -> Result<StepDistribution> {
        let a = self.problem.a();
        let cutoff = a.absolute_cutoff();
        let candidates = complement(drawn, a.m());
        let mut extended = drawn.to_vec();
        extended.push(0);
        let logs: Vec<f64> = candidates
            .iter()
            .map(|&i| {
                *extended.last_mut().expect("non-empty") = i;
                log_superset_volume(a.entries(), self.problem.k(), &extended, cutoff).log
            })
            .collect();
        let top = logs.iter().copied().fold(f64::neg_infinity(), f64::max);
        if top == f64::neg_infinity() {
            return Err(DvsError::NullEvent);
        }
        let weights: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
        let total: f64 = weights.iter().sum();
        let probs = weights.iter().map(|w| w / total).collect();
        let index = WeightedIndex::new(&weights).map_err(|_| DvsError::NullEvent)?;
        Ok(StepDistribution { candidates, probs, index })
    }

    pub fn sample<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<OrderedSample> {
        let k = self.problem.k();
        let mut tuple = Vec::with_capacity(k);
        let mut log_prob = 0.0;
        for _ in 0..k {
            let step = self.step(&tuple)?;
            let pick = step.index.sample(rng);
            log_prob += step.probs[pick].ln();
            let chosen = step.candidates[pick];
            tuple.push(chosen);
        }
        Ok(OrderedSample { tuple, log_prob })
    }
}

/// Draws one ordered tuple exactly from the tuple distribution.
pub fn sample_exact<R: Rng + ?Sized>(problem: &DvsProblem, rng: &mut R) -> Result<OrderedSample> {
    ExactSampler::new(problem).sample(rng)
}

//! Swap-chain MCMC for dual volume sampling.
//!
//! Each step flips a fair coin; on heads it proposes exchanging a uniformly
//! chosen `s_in ∈ S` for a uniformly chosen `s_out ∉ S` and accepts with
//! probability `min(1, ratio^{1/β})`, where `ratio` is the determinant
//! ratio of the proposed and current sets. With `β = 1` the stationary
//! distribution is `P(S; A)`; `β → 0` approaches Fedorov-style greedy
//! exchange.
//!
//! The ratio is evaluated from `(A_T A_Tᵀ)^{-1}` with `T = S \ {s_in}`:
//! `(1 + a_outᵀ K_T^{-1} a_out) / (1 + a_inᵀ K_T^{-1} a_in)`. When `T` is
//! (numerically) rank deficient, the determinants are evaluated directly.

use alloc::vec::Vec;

use nalgebra::DMatrix;
use num_traits::Float;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;

use crate::error::{DvsError, Result};
use crate::exact::{check_cardinality, DvsProblem};
use crate::linalg::{log_det_gram, DesignMatrix, GramInverseState, DEFAULT_REFRESH_INTERVAL};
use crate::subset::{complement, SubsetSelection};

/// Retries of the D²-weighted initializer before falling back to greedy.
pub const D_SQUARED_RETRIES: usize = 16;

/// Logdet trace sampling period, in steps.
pub const TRACE_EVERY: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub enum Init {
    /// Greedy volume maximization of `det(A_S A_Sᵀ + εI)`; `None` uses
    /// [`default_greedy_eps`].
    Greedy { eps: Option<f64> },
    /// D²-weighted sequential selection.
    DSquared,
    /// A caller-supplied `k`-subset with positive determinant.
    Subset(Vec<usize>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepBudget {
    Fixed(usize),
    /// The mixing-time bound for the initial set at this total-variation
    /// target.
    Mixing { eps_tv: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainConfig {
    pub steps: StepBudget,
    pub beta: f64,
    pub init: Init,
    pub refresh_interval: usize,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self {
            steps: StepBudget::Mixing { eps_tv: 0.05 },
            beta: 1.0,
            init: Init::Greedy { eps: None },
            refresh_interval: DEFAULT_REFRESH_INTERVAL,
        }
    }
}

impl ChainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(DvsError::InvalidParameter("beta must be positive and finite"));
        }
        if self.refresh_interval == 0 {
            return Err(DvsError::InvalidParameter("refresh interval must be positive"));
        }
        if let StepBudget::Mixing { eps_tv } = self.steps {
            if !(eps_tv > 0.0 && eps_tv <= 1.0) {
                return Err(DvsError::InvalidParameter("eps_tv must lie in (0, 1]"));
            }
        }
        Ok(())
    }
}

/// Current subset of the chain with its maintained Gram inverse.
#[derive(Debug, Clone)]
pub struct ChainState {
    members: Vec<usize>,
    outside: Vec<usize>,
    gram: GramInverseState,
    step: usize,
    accept_count: usize,
}

impl ChainState {
    /// Fails unless `subset` is a valid full-rank selection.
    pub fn new(a: &DesignMatrix, subset: &[usize], refresh_interval: usize) -> Result<Self> {
        let gram = GramInverseState::new(a, subset)?.with_refresh_interval(refresh_interval);
        Ok(Self {
            members: subset.to_vec(),
            outside: complement(subset, a.m()),
            gram,
            step: 0,
            accept_count: 0,
        })
    }

    /// Members of the current subset (unordered).
    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn logdet(&self) -> f64 {
        self.gram.logdet()
    }

    pub fn step(&self) -> usize {
        self.step
    }

    pub fn accept_count(&self) -> usize {
        self.accept_count
    }

    pub fn selection(&self) -> SubsetSelection {
        SubsetSelection::new(self.members.clone(), self.gram.logdet())
    }

    fn contains(&self, i: usize) -> bool {
        self.members.contains(&i)
    }
}

struct Proposal {
    log_ratio: f64,
    /// Downdated state over `S \ {s_in}` when the rank-one path was usable.
    reduced: Option<GramInverseState>,
}

fn propose(a: &DesignMatrix, state: &ChainState, s_in: usize, s_out: usize) -> Result<Proposal> {
    let mut reduced = state.gram.clone();
    match reduced.downdate(a, s_in) {
        Ok(()) => {
            let q_in = reduced.quad_form(a, s_in);
            let q_out = reduced.quad_form(a, s_out);
            Ok(Proposal { log_ratio: (1.0 + q_out).ln() - (1.0 + q_in).ln(), reduced: Some(reduced) })
        }
        Err(DvsError::DegenerateDowndate) => {
            let swapped: Vec<usize> = state
                .members
                .iter()
                .map(|&c| if c == s_in { s_out } else { c })
                .collect();
            let log_ratio = log_det_gram(a, &swapped)? - state.gram.logdet();
            Ok(Proposal { log_ratio, reduced: None })
        }
        Err(e) => Err(e),
    }
}

fn check_swap(a: &DesignMatrix, state: &ChainState, s_in: usize, s_out: usize) -> Result<()> {
    if s_out >= a.m() {
        return Err(DvsError::IndexOutOfRange { index: s_out, m: a.m() });
    }
    if !state.contains(s_in) {
        return Err(DvsError::InvalidParameter("s_in must belong to the current subset"));
    }
    if state.contains(s_out) {
        return Err(DvsError::InvalidParameter("s_out must lie outside the current subset"));
    }
    Ok(())
}

/// `det(A_{S ∪ {s_out} \ {s_in}} ·ᵀ) / det(A_S A_Sᵀ)`.
pub fn acceptance_ratio(a: &DesignMatrix, state: &ChainState, s_in: usize, s_out: usize) -> Result<f64> {
    check_swap(a, state, s_in, s_out)?;
    Ok(propose(a, state, s_in, s_out)?.log_ratio.exp())
}

/// Probability of accepting the swap once proposed: `min(1, ratio^{1/β})`.
pub fn acceptance_probability(
    a: &DesignMatrix,
    state: &ChainState,
    s_in: usize,
    s_out: usize,
    beta: f64,
) -> Result<f64> {
    check_swap(a, state, s_in, s_out)?;
    let log_ratio = propose(a, state, s_in, s_out)?.log_ratio;
    Ok((log_ratio / beta).min(0.0).exp())
}

fn apply_swap(
    a: &DesignMatrix,
    state: &mut ChainState,
    s_in: usize,
    s_out: usize,
    reduced: Option<GramInverseState>,
) -> Result<()> {
    let pos_in = state.members.iter().position(|&c| c == s_in).expect("member");
    let pos_out = state.outside.iter().position(|&c| c == s_out).expect("non-member");
    state.members[pos_in] = s_out;
    state.outside[pos_out] = s_in;
    state.gram = match reduced {
        Some(mut g) => {
            g.update(a, s_out)?;
            g
        }
        None => GramInverseState::new(a, &state.members)?.with_refresh_interval(state.gram.refresh_interval()),
    };
    Ok(())
}

/// One lazy step. Returns whether a swap was accepted.
pub fn chain_step<R: Rng + ?Sized>(a: &DesignMatrix, state: &mut ChainState, rng: &mut R, beta: f64) -> Result<bool> {
    state.step += 1;
    if !rng.random_bool(0.5) || state.outside.is_empty() {
        return Ok(false);
    }
    let s_in = state.members[rng.random_range(0..state.members.len())];
    let s_out = state.outside[rng.random_range(0..state.outside.len())];
    let proposal = propose(a, state, s_in, s_out)?;
    let log_accept = (proposal.log_ratio / beta).min(0.0);
    let u: f64 = rng.random();
    if log_accept == f64::neg_infinity() || u >= log_accept.exp() {
        return Ok(false);
    }
    apply_swap(a, state, s_in, s_out, proposal.reduced)?;
    state.accept_count += 1;
    Ok(true)
}

/// `1e-3 · σ_n²(A)`.
pub fn default_greedy_eps(a: &DesignMatrix) -> f64 {
    let smin = a.singular_values()[a.n() - 1];
    1e-3 * smin * smin
}

/// Greedy maximization of `det(A_S A_Sᵀ + εI_n)`, one column at a time.
/// Ties go to the lowest index.
pub fn greedy_init(a: &DesignMatrix, k: usize, eps: f64) -> Result<SubsetSelection> {
    check_cardinality(a, k)?;
    if !(eps > 0.0) {
        return Err(DvsError::InvalidParameter("greedy eps must be positive"));
    }
    let n = a.n();
    let mut inverse = DMatrix::<f64>::identity(n, n) / eps;
    let mut chosen = Vec::with_capacity(k);
    let mut taken = alloc::vec![false; a.m()];
    for _ in 0..k {
        let mut best: Option<(usize, f64)> = None;
        for i in (0..a.m()).filter(|&i| !taken[i]) {
            let v = a.column(i);
            let gain = v.dot(&(&inverse * v));
            if best.map_or(true, |(_, g)| gain > g) {
                best = Some((i, gain));
            }
        }
        let (pick, gain) = best.ok_or(DvsError::Infeasible)?;
        let v = a.column(pick);
        let mv = &inverse * v;
        inverse -= (&mv * mv.transpose()) / (1.0 + gain);
        taken[pick] = true;
        chosen.push(pick);
    }
    let logdet = log_det_gram(a, &chosen)?;
    if logdet == f64::neg_infinity() {
        return Err(DvsError::Infeasible);
    }
    Ok(SubsetSelection::new(chosen, logdet))
}

/// One D²-weighted pass: the first column with probability proportional to
/// its squared norm, later ones proportional to their squared distance from
/// the span of the columns chosen so far. Once that span is all of `R^n`,
/// the remaining columns are drawn uniformly.
fn d_squared_pass<R: Rng + ?Sized>(a: &DesignMatrix, k: usize, rng: &mut R) -> Vec<usize> {
    let (n, m) = (a.n(), a.m());
    let norms: Vec<f64> = (0..m).map(|i| a.column(i).norm_squared()).collect();
    let mut basis: Vec<nalgebra::DVector<f64>> = Vec::with_capacity(n);
    let mut taken = alloc::vec![false; m];
    let mut chosen = Vec::with_capacity(k);
    while chosen.len() < k {
        let residuals: Vec<f64> = (0..m)
            .map(|i| {
                if taken[i] {
                    return 0.0;
                }
                let v = a.column(i);
                let proj: f64 = basis.iter().map(|q| Float::powi(q.dot(&v), 2)).sum();
                let r = norms[i] - proj;
                if r > 1e-12 * norms[i] { r } else { 0.0 }
            })
            .collect();
        let pick = match WeightedIndex::new(&residuals) {
            Ok(dist) => dist.sample(rng),
            Err(_) => {
                let free: Vec<usize> = (0..m).filter(|&i| !taken[i]).collect();
                free[rng.random_range(0..free.len())]
            }
        };
        if basis.len() < n {
            let v = a.column(pick).into_owned();
            let mut r = v.clone();
            for q in &basis {
                r -= q * q.dot(&v);
            }
            let norm = r.norm();
            if norm > 1e-12 * norms[pick].sqrt() {
                basis.push(r / norm);
            }
        }
        taken[pick] = true;
        chosen.push(pick);
    }
    chosen
}

/// D²-weighted initialization, retried until the selection has full rank;
/// falls back to [`greedy_init`] after [`D_SQUARED_RETRIES`] attempts.
pub fn d_squared_init<R: Rng + ?Sized>(a: &DesignMatrix, k: usize, rng: &mut R) -> Result<SubsetSelection> {
    check_cardinality(a, k)?;
    for _ in 0..D_SQUARED_RETRIES {
        let chosen = d_squared_pass(a, k, rng);
        let logdet = log_det_gram(a, &chosen)?;
        if logdet > f64::neg_infinity() {
            return Ok(SubsetSelection::new(chosen, logdet));
        }
    }
    greedy_init(a, k, default_greedy_eps(a))
}

/// `ceil(2k(m-k)(log P(S0)^{-1} + log ε^{-1}))`.
pub fn mixing_budget(problem: &DvsProblem, s0: &[usize], eps_tv: f64) -> Result<usize> {
    if !(eps_tv > 0.0 && eps_tv <= 1.0) {
        return Err(DvsError::InvalidParameter("eps_tv must lie in (0, 1]"));
    }
    let log_p = problem.log_prob(s0)?;
    if log_p == f64::neg_infinity() {
        return Err(DvsError::InvalidParameter("initial subset has probability zero"));
    }
    let (k, m) = (problem.k(), problem.a().m());
    let factor = 2.0 * k as f64 * (m - k) as f64;
    if factor == 0.0 {
        return Ok(0);
    }
    let budget = factor * ((-log_p).max(0.0) + (1.0 / eps_tv).ln());
    Ok(budget.ceil() as usize)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainDiagnostics {
    pub initial: Vec<usize>,
    pub steps: usize,
    pub accepted: usize,
    pub acceptance_rate: f64,
    pub final_logdet: f64,
    /// `(step, logdet)` every [`TRACE_EVERY`] steps, starting at step 0.
    pub logdet_trace: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct McmcOutcome {
    pub selection: SubsetSelection,
    pub diagnostics: ChainDiagnostics,
}

/// Initial subset for `config.init`.
pub fn initialize<R: Rng + ?Sized>(problem: &DvsProblem, init: &Init, rng: &mut R) -> Result<SubsetSelection> {
    let a = problem.a();
    let k = problem.k();
    match init {
        Init::Greedy { eps } => greedy_init(a, k, eps.unwrap_or_else(|| default_greedy_eps(a))),
        Init::DSquared => d_squared_init(a, k, rng),
        Init::Subset(s) => {
            if s.len() != k {
                return Err(DvsError::Cardinality { k: s.len(), min: k, max: k });
            }
            let logdet = log_det_gram(a, s)?;
            if logdet == f64::neg_infinity() {
                return Err(DvsError::Singular);
            }
            Ok(SubsetSelection::new(s.clone(), logdet))
        }
    }
}

/// Initializes, then runs the chain for the configured number of steps.
pub fn sample_mcmc<R: Rng + ?Sized>(problem: &DvsProblem, config: &ChainConfig, rng: &mut R) -> Result<McmcOutcome> {
    config.validate()?;
    let a = problem.a();
    let init = initialize(problem, &config.init, rng)?;
    let steps = match config.steps {
        StepBudget::Fixed(t) => t,
        StepBudget::Mixing { eps_tv } => mixing_budget(problem, init.indices(), eps_tv)?,
    };
    let mut state = ChainState::new(a, init.indices(), config.refresh_interval)?;
    let mut trace = Vec::with_capacity(steps / TRACE_EVERY + 1);
    trace.push((0, state.logdet()));
    for t in 1..=steps {
        chain_step(a, &mut state, rng, config.beta)?;
        if t % TRACE_EVERY == 0 {
            trace.push((t, state.logdet()));
        }
    }
    let final_logdet = log_det_gram(a, state.members())?;
    let selection = SubsetSelection::new(state.members().to_vec(), final_logdet);
    Ok(McmcOutcome {
        selection,
        diagnostics: ChainDiagnostics {
            initial: init.into_indices(),
            steps,
            accepted: state.accept_count(),
            acceptance_rate: if steps == 0 { 0.0 } else { state.accept_count() as f64 / steps as f64 },
            final_logdet,
            logdet_trace: trace,
        },
    })
}

/// The chain's full transition matrix over the full-rank `k`-subsets, in
/// lexicographic order, built from [`acceptance_probability`].
#[derive(Debug, Clone)]
pub struct TransitionMatrix {
    pub states: Vec<Vec<usize>>,
    pub matrix: DMatrix<f64>,
}

pub fn transition_matrix(a: &DesignMatrix, k: usize, beta: f64) -> Result<TransitionMatrix> {
    check_cardinality(a, k)?;
    let m = a.m();
    let states: Vec<Vec<usize>> = crate::subset::combinations(m, k)
        .filter(|s| log_det_gram(a, s).map(|l| l > f64::neg_infinity()).unwrap_or(false))
        .collect();
    let index_of = |s: &[usize]| states.binary_search_by(|x| x.as_slice().cmp(s)).ok();
    let proposals = (k * (m - k)) as f64;
    let mut matrix = DMatrix::zeros(states.len(), states.len());
    for (row, s) in states.iter().enumerate() {
        let state = ChainState::new(a, s, DEFAULT_REFRESH_INTERVAL)?;
        let mut leave = 0.0;
        for &s_in in s {
            for s_out in complement(s, m) {
                let mut target: Vec<usize> = s.iter().map(|&c| if c == s_in { s_out } else { c }).collect();
                target.sort_unstable();
                let q = acceptance_probability(a, &state, s_in, s_out, beta)?;
                if let Some(col) = index_of(&target) {
                    let p = 0.5 * q / proposals;
                    matrix[(row, col)] += p;
                    leave += p;
                }
            }
        }
        matrix[(row, row)] = 1.0 - leave;
    }
    Ok(TransitionMatrix { states, matrix })
}

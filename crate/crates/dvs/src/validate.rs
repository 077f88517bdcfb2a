//! Oracle suite: checks every sampler and identity on one input against
//! full enumeration.

use dvs_core::derand::{conditional_expectation_fro, derandomized_select};
use dvs_core::design::{bound_check, BoundEstimator};
use dvs_core::exact::{conditional_prob, marginal, ExactSampler};
use dvs_core::linalg::{log_det_gram, pinv_fro_sq};
use dvs_core::mcmc::{acceptance_ratio, transition_matrix, ChainState};
use dvs_core::oracle::{en_identity_check, enumerate_distribution, negative_correlation_check, tv_distance};
use dvs_core::{combinations, DesignMatrix, DvsError, DvsProblem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::stats::{count_subsets, frequencies, gof_against};

/// Largest chain state space for the detailed-balance check.
pub const MAX_CHAIN_STATES: usize = 2_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
    pub passed: bool,
}

impl ValidationReport {
    pub fn summary_lines(&self) -> Vec<String> {
        self.checks
            .iter()
            .map(|c| format!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail))
            .collect()
    }
}

fn rel_err(got: f64, want: f64) -> f64 {
    (got - want).abs() / want.abs().max(1e-300)
}

/// Runs every check; `samples` exact draws feed the goodness-of-fit test.
pub fn validate(a: &DesignMatrix, k: usize, seed: u64, samples: usize) -> Result<ValidationReport, DvsError> {
    let problem = DvsProblem::new(a.clone(), k)?;
    let dist = enumerate_distribution(a, k)?;
    let m = a.m();
    let mut checks = Vec::new();
    let mut push = |name: &str, passed: bool, detail: String| {
        checks.push(Check { name: name.to_string(), passed, detail })
    };

    let err = (problem.log_partition() - dist.log_normalizer()).exp_m1().abs();
    push("partition_function", err <= 1e-9, format!("relative error {err:.2e}"));

    let mut worst = 0.0f64;
    for size in 0..=k.min(2) {
        for t in combinations(m, size) {
            let want = dist.marginal(&t);
            let got = marginal(&problem, &t)?.probability;
            worst = worst.max((got - want).abs() / want.max(1e-12));
        }
    }
    push("marginals", worst <= 1e-6, format!("max relative error {worst:.2e} over |T| <= 2"));

    let mut worst = 0.0f64;
    for i in std::iter::once(None).chain((0..m).map(Some)) {
        let prefix: Vec<usize> = i.into_iter().collect();
        if !prefix.is_empty() && dist.marginal(&prefix) <= 0.0 {
            continue;
        }
        let total: f64 = (0..m)
            .filter(|j| !prefix.contains(j))
            .map(|j| conditional_prob(&problem, &prefix, j))
            .collect::<Result<Vec<_>, _>>()?
            .iter()
            .sum();
        worst = worst.max((total - 1.0).abs());
    }
    push("conditionals_normalized", worst <= 1e-8, format!("max deviation {worst:.2e}"));

    let tol = a.rank_tol();
    let mean = dist.expectation(|s| pinv_fro_sq(&a.submatrix(s), tol).unwrap_or(f64::INFINITY));
    let err = rel_err(conditional_expectation_fro(a, k, &[])?, mean);
    push("conditional_expectation", err <= 1e-6, format!("relative error {err:.2e}"));

    let trace = derandomized_select(a, k)?;
    push(
        "derandomized_bounds",
        trace.final_fro_sq <= trace.bound_fro && trace.final_spec_sq <= trace.bound_spec,
        format!(
            "fro {:.6} <= {:.6}, spec {:.6} <= {:.6}",
            trace.final_fro_sq, trace.bound_fro, trace.final_spec_sq, trace.bound_spec
        ),
    );

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sampler = ExactSampler::new(&problem);
    let mut draws = Vec::with_capacity(samples);
    for _ in 0..samples {
        let mut tuple = sampler.sample(&mut rng)?.tuple;
        tuple.sort_unstable();
        draws.push(tuple);
    }
    let counts = count_subsets(draws);
    let gof = gof_against(&counts, &dist);
    let tv = tv_distance(&frequencies(&counts), &dist);
    push(
        "exact_sampler_gof",
        gof.passes(0.01),
        format!("chi2 {:.3} on {} dof, p = {:.4}, TV {:.4}, N = {}", gof.statistic, gof.dof, gof.p_value, tv, samples),
    );

    if dist.table().len() <= MAX_CHAIN_STATES {
        let tm = transition_matrix(a, k, 1.0)?;
        let mut worst = 0.0f64;
        for i in 0..tm.states.len() {
            let pi_i = dist.probability(&tm.states[i]);
            for j in 0..tm.states.len() {
                let lhs = pi_i * tm.matrix[(i, j)];
                let rhs = dist.probability(&tm.states[j]) * tm.matrix[(j, i)];
                let scale = lhs.max(rhs);
                if scale > 0.0 {
                    worst = worst.max((lhs - rhs).abs() / scale);
                }
            }
        }
        push("mcmc_detailed_balance", worst <= 1e-9, format!("max relative asymmetry {worst:.2e}"));
    } else {
        push("mcmc_detailed_balance", true, format!("skipped: {} states", dist.table().len()));
    }

    let mut worst = 0.0f64;
    let mut swaps = 0;
    for (s, _) in dist.table().iter().take(50) {
        let state = ChainState::new(a, s, 64)?;
        let outside: Vec<usize> = (0..m).filter(|i| !s.contains(i)).collect();
        for _ in 0..4 {
            if outside.is_empty() {
                break;
            }
            let s_in = s[rng.random_range(0..s.len())];
            let s_out = outside[rng.random_range(0..outside.len())];
            let swapped: Vec<usize> = s.iter().map(|&c| if c == s_in { s_out } else { c }).collect();
            let direct = (log_det_gram(a, &swapped)? - log_det_gram(a, s)?).exp();
            let got = acceptance_ratio(a, &state, s_in, s_out)?;
            worst = worst.max((got - direct).abs() / direct.max(1e-12));
            swaps += 1;
        }
    }
    push("acceptance_ratio", worst <= 1e-8, format!("max relative error {worst:.2e} over {swaps} swaps"));

    let corr = negative_correlation_check(a, k, 1e-10)?;
    push("negative_correlation", corr.holds, format!("max excess {:.2e} over {} pairs", corr.max_excess, corr.pairs.len()));

    let mut all = true;
    let mut count = 0;
    for s in combinations(m, k).take(dvs_core::oracle::DEFAULT_ENUMERATION_CAP) {
        all &= en_identity_check(a, &s, 1e-9)?.holds;
        count += 1;
    }
    push("determinant_identity", all, format!("{count} subsets"));

    let bounds = bound_check(a, k, BoundEstimator::Exact)?;
    push(
        "expectation_bounds",
        bounds.fro.holds && bounds.spec.holds,
        format!(
            "fro {:.6} <= {:.6}, spec {:.6} <= {:.6}",
            bounds.fro.estimate, bounds.fro.bound, bounds.spec.estimate, bounds.spec.bound
        ),
    );

    let passed = checks.iter().all(|c| c.passed);
    Ok(ValidationReport { checks, passed })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_matrix_passes() {
        let a = DesignMatrix::from_row_slice(2, 3, &[1.0, 0.0, 1.0, 0.0, 1.0, 2.0]).unwrap();
        let report = validate(&a, 2, 11, 5_000).unwrap();
        assert!(report.passed, "{:#?}", report.summary_lines());
        assert_eq!(report.checks.len(), 11);
    }
}

use dvs_core::derand::{conditional_expectation_fro, derandomized_select};
use dvs_core::design::{bound_check, leverage_scores, BoundEstimator};
use dvs_core::exact::{conditional_prob, marginal, partition_function};
use dvs_core::linalg::{det_gram, elem_sym_poly, log_det_gram, pinv_fro_sq};
use dvs_core::mcmc::{acceptance_ratio, ChainState};
use dvs_core::oracle::{en_identity_check, enumerate_distribution, negative_correlation_check};
use dvs_core::{combinations, DMatrix, DesignMatrix, DvsProblem};
use proptest::prelude::*;

fn design(n: usize, m: usize) -> impl Strategy<Value = DesignMatrix> {
    prop::collection::vec(-3.0f64..3.0, n * m)
        .prop_filter_map("full row rank", move |data| DesignMatrix::new(DMatrix::from_vec(n, m, data)).ok())
}

fn instance() -> impl Strategy<Value = (DesignMatrix, usize)> {
    (2usize..=3, 5usize..=7)
        .prop_flat_map(|(n, m)| (design(n, m), n..=m))
        .prop_filter("well conditioned", |(a, _)| {
            let s = a.singular_values();
            s[s.len() - 1] > 1e-3 * s[0]
        })
}

fn close(got: f64, want: f64, rel: f64) -> bool {
    (got - want).abs() <= rel * want.abs().max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn partition_matches_enumeration((a, k) in instance()) {
        let brute: f64 = combinations(a.m(), k).map(|s| det_gram(&a, &s).unwrap()).sum();
        prop_assert!(close(partition_function(&a, k).unwrap().exp(), brute, 1e-9));
        let dist = enumerate_distribution(&a, k).unwrap();
        prop_assert!(close(dist.log_normalizer(), partition_function(&a, k).unwrap(), 1e-10));
    }

    #[test]
    fn marginals_match_enumeration((a, k) in instance()) {
        let problem = DvsProblem::new(a.clone(), k).unwrap();
        let dist = enumerate_distribution(&a, k).unwrap();
        for size in 0..=k.min(2) {
            for t in combinations(a.m(), size) {
                let want = dist.marginal(&t);
                let got = marginal(&problem, &t).unwrap().probability;
                prop_assert!((got - want).abs() <= 1e-6 * want.max(1e-12), "{:?}: {} vs {}", t, got, want);
            }
        }
    }

    #[test]
    fn conditionals_sum_to_one((a, k) in instance()) {
        let problem = DvsProblem::new(a.clone(), k).unwrap();
        let total: f64 = (0..a.m()).map(|i| conditional_prob(&problem, &[], i).unwrap()).sum();
        prop_assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn singleton_marginals_sum_to_k((a, k) in instance()) {
        let problem = DvsProblem::new(a.clone(), k).unwrap();
        let total: f64 = (0..a.m()).map(|i| marginal(&problem, &[i]).unwrap().probability).sum();
        prop_assert!((total - k as f64).abs() < 1e-8);
    }

    #[test]
    fn conditional_expectation_matches_enumeration((a, k) in instance()) {
        let dist = enumerate_distribution(&a, k).unwrap();
        let tol = a.rank_tol();
        let mean = dist.expectation(|s| pinv_fro_sq(&a.submatrix(s), tol).unwrap());
        prop_assert!(close(conditional_expectation_fro(&a, k, &[]).unwrap(), mean, 1e-6));
    }

    #[test]
    fn derandomized_selection_meets_bounds((a, k) in instance()) {
        let trace = derandomized_select(&a, k).unwrap();
        prop_assert!(trace.final_fro_sq <= trace.bound_fro);
        prop_assert!(trace.final_spec_sq <= trace.bound_spec);
    }

    #[test]
    fn exact_expectation_bounds((a, k) in instance()) {
        let r = bound_check(&a, k, BoundEstimator::Exact).unwrap();
        prop_assert!(r.fro.holds && r.spec.holds);
        // The Frobenius bound is attained with equality.
        prop_assert!(close(r.fro.estimate, r.fro.bound, 1e-8));
    }

    #[test]
    fn negative_correlation((a, k) in instance()) {
        prop_assert!(negative_correlation_check(&a, k, 1e-10).unwrap().holds);
    }

    #[test]
    fn determinant_equals_top_elementary_symmetric((a, k) in instance()) {
        for s in combinations(a.m(), k) {
            prop_assert!(en_identity_check(&a, &s, 1e-9).unwrap().holds);
        }
    }

    #[test]
    fn leverage_scores_sum_to_rank(a in (1usize..=4, 4usize..=10).prop_flat_map(|(n, m)| design(n, m))) {
        let l = leverage_scores(&a);
        prop_assert!((l.iter().sum::<f64>() - a.n() as f64).abs() < 1e-10);
        prop_assert!(l.iter().all(|&v| (-1e-10..=1.0 + 1e-10).contains(&v)));
    }

    #[test]
    fn swap_ratio_matches_determinants(
        a in design(4, 12),
        picks in prop::sample::subsequence((0usize..12).collect::<Vec<_>>(), 6),
        which_in in 0usize..6,
        which_out in 0usize..6,
    ) {
        let s = picks.clone();
        prop_assume!(log_det_gram(&a, &s).unwrap() > f64::NEG_INFINITY);
        let outside: Vec<usize> = (0..12).filter(|i| !s.contains(i)).collect();
        let (s_in, s_out) = (s[which_in], outside[which_out]);
        let state = ChainState::new(&a, &s, 64).unwrap();
        let swapped: Vec<usize> = s.iter().map(|&c| if c == s_in { s_out } else { c }).collect();
        let direct = det_gram(&a, &swapped).unwrap() / det_gram(&a, &s).unwrap();
        let got = acceptance_ratio(&a, &state, s_in, s_out).unwrap();
        prop_assert!((got - direct).abs() <= 1e-8 * direct.max(1e-12));
    }

    #[test]
    fn elementary_symmetric_generating_function(values in prop::collection::vec(0.0f64..4.0, 1..8), x in 0.1f64..2.0) {
        let product: f64 = values.iter().map(|v| 1.0 + x * v).product();
        let series: f64 = (0..=values.len()).map(|j| elem_sym_poly(&values, j).unwrap() * x.powi(j as i32)).sum();
        prop_assert!(close(series, product, 1e-10));
    }
}

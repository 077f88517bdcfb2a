//! Goodness-of-fit testing of sampled subsets against an enumerated
//! distribution.

use std::collections::BTreeMap;

use dvs_core::oracle::ExactDistribution;
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Smallest expected count per cell after merging.
pub const MIN_EXPECTED: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GofResult {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    /// Cells after merging.
    pub cells: usize,
    pub total: u64,
    /// Draws that fell outside the support of the reference distribution.
    pub outside_support: u64,
    /// Fewer than two cells remained after merging.
    pub inconclusive: bool,
}

impl GofResult {
    /// Not rejected at level `alpha`. Inconclusive tests pass unless a draw
    /// fell outside the support.
    pub fn passes(&self, alpha: f64) -> bool {
        self.outside_support == 0 && (self.inconclusive || self.p_value >= alpha)
    }
}

/// Pearson's chi-square test of `observed` counts against `probabilities`.
/// Cells are merged, smallest expected count first, until each merged cell
/// expects at least [`MIN_EXPECTED`] draws.
pub fn chi_square_gof(observed: &[u64], probabilities: &[f64], outside_support: u64) -> GofResult {
    assert_eq!(observed.len(), probabilities.len(), "one probability per cell");
    let total: u64 = observed.iter().sum::<u64>() + outside_support;
    let mut cells: Vec<(f64, f64)> = observed
        .iter()
        .zip(probabilities)
        .map(|(&o, &p)| (o as f64, p * total as f64))
        .collect();
    cells.sort_by(|x, y| x.1.total_cmp(&y.1));

    let mut merged: Vec<(f64, f64)> = Vec::new();
    let mut pending = (0.0, 0.0);
    for (o, e) in cells {
        pending.0 += o;
        pending.1 += e;
        if pending.1 >= MIN_EXPECTED {
            merged.push(pending);
            pending = (0.0, 0.0);
        }
    }
    if pending.1 > 0.0 || pending.0 > 0.0 {
        match merged.last_mut() {
            Some(last) => {
                last.0 += pending.0;
                last.1 += pending.1;
            }
            None => merged.push(pending),
        }
    }

    let inconclusive = merged.len() < 2;
    if outside_support > 0 {
        return GofResult {
            statistic: f64::INFINITY,
            dof: merged.len().saturating_sub(1),
            p_value: 0.0,
            cells: merged.len(),
            total,
            outside_support,
            inconclusive,
        };
    }
    if inconclusive {
        return GofResult { statistic: 0.0, dof: 0, p_value: 1.0, cells: merged.len(), total, outside_support, inconclusive };
    }
    let statistic: f64 = merged.iter().map(|(o, e)| (o - e) * (o - e) / e).sum();
    let dof = merged.len() - 1;
    let p_value = ChiSquared::new(dof as f64).expect("positive degrees of freedom").sf(statistic);
    GofResult { statistic, dof, p_value, cells: merged.len(), total, outside_support, inconclusive }
}

/// Chi-square test of sampled subsets (sorted index vectors) against an
/// enumerated distribution.
pub fn gof_against(counts: &BTreeMap<Vec<usize>, u64>, reference: &ExactDistribution) -> GofResult {
    let observed: Vec<u64> = reference.table().iter().map(|(s, _)| counts.get(s).copied().unwrap_or(0)).collect();
    let probabilities: Vec<f64> = reference.table().iter().map(|(_, p)| *p).collect();
    let inside: u64 = observed.iter().sum();
    let outside = counts.values().sum::<u64>() - inside;
    chi_square_gof(&observed, &probabilities, outside)
}

/// Counts of sorted subsets.
pub fn count_subsets<I: IntoIterator<Item = Vec<usize>>>(samples: I) -> BTreeMap<Vec<usize>, u64> {
    let mut counts = BTreeMap::new();
    for mut s in samples {
        s.sort_unstable();
        *counts.entry(s).or_insert(0) += 1;
    }
    counts
}

/// Empirical frequencies from counts.
pub fn frequencies(counts: &BTreeMap<Vec<usize>, u64>) -> BTreeMap<Vec<usize>, f64> {
    let total = counts.values().sum::<u64>() as f64;
    counts.iter().map(|(s, &c)| (s.clone(), c as f64 / total)).collect()
}

/// Median of a non-empty slice; NaN when empty.
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    if sorted.len() % 2 == 0 {
        (sorted[mid - 1] + sorted[mid]) / 2.0
    } else {
        sorted[mid]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_fit_has_p_value_one() {
        let r = chi_square_gof(&[25, 25, 50], &[0.25, 0.25, 0.5], 0);
        assert_eq!(r.statistic, 0.0);
        assert!((r.p_value - 1.0).abs() < 1e-12);
        assert_eq!(r.dof, 2);
    }

    #[test]
    fn known_statistic() {
        // (60-50)^2/50 + (40-50)^2/50 = 4, one degree of freedom.
        let r = chi_square_gof(&[60, 40], &[0.5, 0.5], 0);
        assert!((r.statistic - 4.0).abs() < 1e-12);
        assert!((r.p_value - 0.0455002638963).abs() < 1e-9);
        assert!(!r.passes(0.05));
        assert!(r.passes(0.01));
    }

    #[test]
    fn sparse_cells_are_merged() {
        let r = chi_square_gof(&[1, 0, 2, 97], &[0.01, 0.01, 0.03, 0.95], 0);
        assert_eq!(r.cells, 2);
        let tiny = chi_square_gof(&[1, 2], &[0.5, 0.5], 0);
        assert!(tiny.inconclusive && tiny.passes(0.01));
    }

    #[test]
    fn outside_support_rejects() {
        let r = chi_square_gof(&[50, 49], &[0.5, 0.5], 1);
        assert_eq!(r.p_value, 0.0);
        assert!(!r.passes(0.01));
    }

    #[test]
    fn medians() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!(median(&[]).is_nan());
    }
}

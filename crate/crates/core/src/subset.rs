use alloc::vec::Vec;

use num_traits::Float;

use crate::error::{DvsError, Result};

/// An unordered `k`-subset of column indices with its cached
/// `log det(A_S A_S^T)` (`-inf` when rank deficient).
#[derive(Debug, Clone, PartialEq)]
pub struct SubsetSelection {
    indices: Vec<usize>,
    logdet: f64,
}

impl SubsetSelection {
    /// Sorts `indices`; the caller guarantees they are distinct.
    pub fn new(mut indices: Vec<usize>, logdet: f64) -> Self {
        indices.sort_unstable();
        Self { indices, logdet }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn into_indices(self) -> Vec<usize> {
        self.indices
    }

    pub fn logdet(&self) -> f64 {
        self.logdet
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.indices.binary_search(&index).is_ok()
    }
}

/// Checks that every index is below `m` and no index repeats.
pub(crate) fn validate_indices(indices: &[usize], m: usize) -> Result<()> {
    let mut seen = alloc::vec![false; m];
    for &i in indices {
        if i >= m {
            return Err(DvsError::IndexOutOfRange { index: i, m });
        }
        if seen[i] {
            return Err(DvsError::DuplicateIndex(i));
        }
        seen[i] = true;
    }
    Ok(())
}

/// Indices in `0..m` not contained in `indices`, ascending.
pub(crate) fn complement(indices: &[usize], m: usize) -> Vec<usize> {
    let mut member = alloc::vec![false; m];
    for &i in indices {
        member[i] = true;
    }
    (0..m).filter(|&i| !member[i]).collect()
}

/// `ln C(n, k)`; `-inf` when `k > n`.
pub fn ln_binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return f64::neg_infinity();
    }
    let k = k.min(n - k);
    (1..=k)
        .map(|i| ((n - k + i) as f64).ln() - (i as f64).ln())
        .sum()
}

/// `C(n, k)` as a float (exact for the sizes we enumerate).
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0f64;
    for i in 1..=k {
        acc = acc * (n - k + i) as f64 / i as f64;
    }
    acc.round()
}

/// Lexicographic iterator over all `k`-subsets of `0..m`.
#[derive(Debug, Clone)]
pub struct Combinations {
    m: usize,
    current: Option<Vec<usize>>,
}

pub fn combinations(m: usize, k: usize) -> Combinations {
    let current = if k <= m { Some((0..k).collect()) } else { None };
    Combinations { m, current }
}

impl Iterator for Combinations {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let out = self.current.take()?;
        let k = out.len();
        let mut next = out.clone();
        let mut i = k;
        while i > 0 {
            i -= 1;
            if next[i] < self.m - k + i {
                next[i] += 1;
                for j in i + 1..k {
                    next[j] = next[j - 1] + 1;
                }
                self.current = Some(next);
                return Some(out);
            }
        }
        Some(out)
    }
}

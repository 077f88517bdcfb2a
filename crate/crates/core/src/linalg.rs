//! Dense linear-algebra primitives shared by the samplers.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector, DVectorView};
use num_traits::Float;

use crate::error::{DvsError, Result};
use crate::subset::validate_indices;

/// Relative numerical-rank tolerance: `σ_min > tol · σ_max · max(rows, cols)`.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

/// Rank-one operations between full refactorizations of a [`GramInverseState`].
pub const DEFAULT_REFRESH_INTERVAL: usize = 64;

/// A downdate whose determinant factor `1 - aᵀ M a` falls to this value or
/// below is reported as degenerate.
pub const DOWNDATE_TOL: f64 = 1e-6;

/// Singular values sorted non-increasing, with the matching singular vectors.
pub(crate) struct SortedSvd {
    pub u: Option<DMatrix<f64>>,
    pub sigma: Vec<f64>,
    pub v_t: Option<DMatrix<f64>>,
}

pub(crate) fn svd_sorted(matrix: DMatrix<f64>, want_u: bool, want_v: bool) -> SortedSvd {
    let (r, c) = matrix.shape();
    if r == 0 || c == 0 {
        return SortedSvd {
            u: want_u.then(|| DMatrix::zeros(r, 0)),
            sigma: Vec::new(),
            v_t: want_v.then(|| DMatrix::zeros(0, c)),
        };
    }
    let svd = matrix.svd(want_u, want_v);
    let p = svd.singular_values.len();
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let sigma = order.iter().map(|&i| svd.singular_values[i]).collect();
    let u = svd
        .u
        .map(|u| DMatrix::from_fn(u.nrows(), p, |i, j| u[(i, order[j])]));
    let v_t = svd
        .v_t
        .map(|v| DMatrix::from_fn(p, v.ncols(), |i, j| v[(order[i], j)]));
    SortedSvd { u, sigma, v_t }
}

/// Singular values of `matrix`, non-increasing.
pub fn singular_values(matrix: &DMatrix<f64>) -> Vec<f64> {
    svd_sorted(matrix.clone(), false, false).sigma
}

/// Number of singular values above `cutoff`.
pub(crate) fn rank_above(sigma: &[f64], cutoff: f64) -> usize {
    sigma.iter().take_while(|&&s| s > cutoff).count()
}

/// Whether a `rows × cols` matrix with singular values `sigma` has full row
/// rank under the scaled criterion.
pub fn is_full_row_rank(sigma: &[f64], rows: usize, cols: usize, rank_tol: f64) -> bool {
    if rows == 0 {
        return true;
    }
    if sigma.len() < rows || sigma[0] <= 0.0 {
        return false;
    }
    sigma[rows - 1] > rank_tol * sigma[0] * rows.max(cols) as f64
}

/// The `n × m` input matrix together with its cached factorizations.
///
/// Construction enforces `1 <= n <= m` and full row rank. The value is
/// immutable afterwards and can be shared between threads.
#[derive(Debug, Clone)]
pub struct DesignMatrix {
    entries: DMatrix<f64>,
    singular_values: Vec<f64>,
    gram_inverse: DMatrix<f64>,
    log_det_gram: f64,
    rank_tol: f64,
}

impl DesignMatrix {
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        Self::with_rank_tol(entries, DEFAULT_RANK_TOL)
    }

    pub fn with_rank_tol(entries: DMatrix<f64>, rank_tol: f64) -> Result<Self> {
        let (n, m) = entries.shape();
        if n == 0 || n > m {
            return Err(DvsError::Shape { rows: n, cols: m });
        }
        if !(rank_tol >= 0.0) {
            return Err(DvsError::InvalidParameter("rank tolerance must be non-negative"));
        }
        let svd = svd_sorted(entries.clone(), true, false);
        if !is_full_row_rank(&svd.sigma, n, m, rank_tol) {
            let cutoff = rank_tol * svd.sigma[0] * m as f64;
            return Err(DvsError::RankDeficient { rank: rank_above(&svd.sigma, cutoff), rows: n });
        }
        let u = svd.u.expect("left singular vectors requested");
        let inv_sq = DVector::from_iterator(n, svd.sigma.iter().map(|s| 1.0 / (s * s)));
        let gram_inverse = &u * DMatrix::from_diagonal(&inv_sq) * u.transpose();
        let log_det_gram = svd.sigma.iter().map(|s| 2.0 * s.ln()).sum();
        Ok(Self {
            entries,
            singular_values: svd.sigma,
            gram_inverse,
            log_det_gram,
            rank_tol,
        })
    }

    pub fn from_row_slice(n: usize, m: usize, data: &[f64]) -> Result<Self> {
        if data.len() != n * m {
            return Err(DvsError::Shape { rows: n, cols: m });
        }
        Self::new(DMatrix::from_row_slice(n, m, data))
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn m(&self) -> usize {
        self.entries.ncols()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn column(&self, i: usize) -> DVectorView<'_, f64> {
        self.entries.column(i)
    }

    /// `σ_1 >= ... >= σ_n`.
    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    /// `(A Aᵀ)^{-1}`.
    pub fn gram_inverse(&self) -> &DMatrix<f64> {
        &self.gram_inverse
    }

    /// `log det(A Aᵀ)`.
    pub fn log_det_gram(&self) -> f64 {
        self.log_det_gram
    }

    pub fn rank_tol(&self) -> f64 {
        self.rank_tol
    }

    /// Absolute cutoff below which singular values of any submatrix (or
    /// projection of one) are treated as zero.
    pub(crate) fn absolute_cutoff(&self) -> f64 {
        self.rank_tol * self.singular_values[0] * self.n().max(self.m()) as f64
    }

    /// `A_S` with columns in the order given.
    pub fn submatrix(&self, subset: &[usize]) -> DMatrix<f64> {
        self.entries.select_columns(subset.iter())
    }

    pub fn check_subset(&self, subset: &[usize]) -> Result<()> {
        validate_indices(subset, self.m())
    }
}

/// `e_j(values)`: the sum of all `j`-fold products, by the two-index
/// recurrence `e_j^{(i)} = e_j^{(i-1)} + λ_i e_{j-1}^{(i-1)}`.
pub fn elem_sym_poly(values: &[f64], j: usize) -> Result<f64> {
    if j > values.len() {
        return Err(DvsError::Degree { j, len: values.len() });
    }
    let mut e = alloc::vec![0.0; j + 1];
    e[0] = 1.0;
    for (i, &lambda) in values.iter().enumerate() {
        for d in (1..=j.min(i + 1)).rev() {
            e[d] += lambda * e[d - 1];
        }
    }
    Ok(e[j])
}

/// `ln e_j(values)` for non-negative values (negative round-off is clamped
/// to zero). Rescales on the fly so large spectra and degrees cannot
/// overflow. Returns `-inf` when `e_j = 0`.
pub fn log_elem_sym_poly(values: &[f64], j: usize) -> Result<f64> {
    if j > values.len() {
        return Err(DvsError::Degree { j, len: values.len() });
    }
    if j == 0 {
        return Ok(0.0);
    }
    let scale = values.iter().fold(0.0f64, |acc, &v| acc.max(v));
    if scale <= 0.0 {
        return Ok(f64::neg_infinity());
    }
    const BIG: f64 = 1e150;
    let mut log_offset = j as f64 * scale.ln();
    let mut e = alloc::vec![0.0; j + 1];
    e[0] = 1.0;
    for (i, &lambda) in values.iter().enumerate() {
        let lambda = lambda.max(0.0) / scale;
        for d in (1..=j.min(i + 1)).rev() {
            e[d] += lambda * e[d - 1];
        }
        let top = e.iter().fold(0.0f64, |acc, &v| acc.max(v));
        if top > BIG {
            e.iter_mut().for_each(|v| *v /= BIG);
            log_offset += BIG.ln();
        }
    }
    Ok(e[j].ln() + log_offset)
}

/// `log det(A_S A_Sᵀ)`, or `-inf` when `A_S` is numerically rank deficient.
pub fn log_det_gram(a: &DesignMatrix, subset: &[usize]) -> Result<f64> {
    a.check_subset(subset)?;
    let n = a.n();
    if subset.len() < n {
        return Ok(f64::neg_infinity());
    }
    let sigma = singular_values(&a.submatrix(subset));
    if !is_full_row_rank(&sigma, n, subset.len(), a.rank_tol()) {
        return Ok(f64::neg_infinity());
    }
    Ok(sigma.iter().map(|s| 2.0 * s.ln()).sum())
}

/// `det(A_S A_Sᵀ)`; zero for rank-deficient selections.
pub fn det_gram(a: &DesignMatrix, subset: &[usize]) -> Result<f64> {
    log_det_gram(a, subset).map(Float::exp)
}

fn full_rank_sigma(matrix: &DMatrix<f64>, rank_tol: f64) -> Result<Vec<f64>> {
    let (rows, cols) = matrix.shape();
    let sigma = singular_values(matrix);
    if rows == 0 || !is_full_row_rank(&sigma, rows, cols, rank_tol) {
        return Err(DvsError::Singular);
    }
    Ok(sigma)
}

/// `‖M^+‖_F^2 = Σ 1/σ_i^2 = tr((M Mᵀ)^{-1})` for a full-row-rank `M`.
pub fn pinv_fro_sq(matrix: &DMatrix<f64>, rank_tol: f64) -> Result<f64> {
    let sigma = full_rank_sigma(matrix, rank_tol)?;
    Ok(sigma.iter().map(|s| 1.0 / (s * s)).sum())
}

/// `‖M^+‖_2^2 = 1/σ_min^2` for a full-row-rank `M`.
pub fn pinv_spec_sq(matrix: &DMatrix<f64>, rank_tol: f64) -> Result<f64> {
    let sigma = full_rank_sigma(matrix, rank_tol)?;
    let smin = sigma[matrix.nrows() - 1];
    Ok(1.0 / (smin * smin))
}

/// `(A_S A_Sᵀ)^{-1}` and its log-determinant for a full-rank selection.
fn factor_subset(a: &DesignMatrix, subset: &[usize]) -> Result<(DMatrix<f64>, f64)> {
    let n = a.n();
    if subset.len() < n {
        return Err(DvsError::Singular);
    }
    let svd = svd_sorted(a.submatrix(subset), true, false);
    if !is_full_row_rank(&svd.sigma, n, subset.len(), a.rank_tol()) {
        return Err(DvsError::Singular);
    }
    let u = svd.u.expect("left singular vectors requested");
    let inv_sq = DVector::from_iterator(n, svd.sigma.iter().map(|s| 1.0 / (s * s)));
    let inverse = &u * DMatrix::from_diagonal(&inv_sq) * u.transpose();
    let logdet = svd.sigma.iter().map(|s| 2.0 * s.ln()).sum();
    Ok((inverse, logdet))
}

/// `(A_T A_Tᵀ)^{-1}` maintained under single-column insertions and removals.
///
/// Each update or downdate costs `O(n^2)` via Sherman-Morrison and the
/// matrix determinant lemma. After more than `refresh_interval` rank-one
/// operations the inverse is refactorized from scratch.
#[derive(Debug, Clone)]
pub struct GramInverseState {
    subset: Vec<usize>,
    inverse: DMatrix<f64>,
    logdet: f64,
    update_count: usize,
    refresh_interval: usize,
}

impl GramInverseState {
    /// Fails with [`DvsError::Singular`] if `A_T` lacks full row rank.
    pub fn new(a: &DesignMatrix, subset: &[usize]) -> Result<Self> {
        a.check_subset(subset)?;
        let (inverse, logdet) = factor_subset(a, subset)?;
        Ok(Self {
            subset: subset.to_vec(),
            inverse,
            logdet,
            update_count: 0,
            refresh_interval: DEFAULT_REFRESH_INTERVAL,
        })
    }

    pub fn with_refresh_interval(mut self, interval: usize) -> Self {
        self.refresh_interval = interval;
        self
    }

    pub fn subset(&self) -> &[usize] {
        &self.subset
    }

    pub fn inverse(&self) -> &DMatrix<f64> {
        &self.inverse
    }

    pub fn logdet(&self) -> f64 {
        self.logdet
    }

    pub fn refresh_interval(&self) -> usize {
        self.refresh_interval
    }

    pub fn update_count(&self) -> usize {
        self.update_count
    }

    /// `aᵀ (A_T A_Tᵀ)^{-1} a` for column `col`.
    pub fn quad_form(&self, a: &DesignMatrix, col: usize) -> f64 {
        let v = a.column(col);
        let mv = &self.inverse * v;
        v.dot(&mv)
    }

    /// Adds column `col` to the subset.
    pub fn update(&mut self, a: &DesignMatrix, col: usize) -> Result<()> {
        if col >= a.m() {
            return Err(DvsError::IndexOutOfRange { index: col, m: a.m() });
        }
        if self.subset.contains(&col) {
            return Err(DvsError::DuplicateIndex(col));
        }
        let v = a.column(col);
        let mv = &self.inverse * v;
        let factor = 1.0 + v.dot(&mv);
        self.inverse -= (&mv * mv.transpose()) / factor;
        self.logdet += factor.ln();
        self.subset.push(col);
        self.bump(a)
    }

    /// Removes column `col`. On [`DvsError::DegenerateDowndate`] the state is
    /// left untouched.
    pub fn downdate(&mut self, a: &DesignMatrix, col: usize) -> Result<()> {
        let pos = self
            .subset
            .iter()
            .position(|&c| c == col)
            .ok_or(DvsError::InvalidParameter("downdated column is not in the subset"))?;
        let v = a.column(col);
        let mv = &self.inverse * v;
        let factor = 1.0 - v.dot(&mv);
        if factor <= DOWNDATE_TOL {
            return Err(DvsError::DegenerateDowndate);
        }
        self.inverse += (&mv * mv.transpose()) / factor;
        self.logdet += factor.ln();
        self.subset.swap_remove(pos);
        self.bump(a)
    }

    /// Refactorizes from scratch and resets the update counter.
    pub fn refresh(&mut self, a: &DesignMatrix) -> Result<()> {
        let (inverse, logdet) = factor_subset(a, &self.subset)?;
        self.inverse = inverse;
        self.logdet = logdet;
        self.update_count = 0;
        Ok(())
    }

    fn bump(&mut self, a: &DesignMatrix) -> Result<()> {
        self.update_count += 1;
        if self.update_count > self.refresh_interval {
            self.refresh(a)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::subset::combinations;
    use alloc::vec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn a_star() -> DesignMatrix {
        DesignMatrix::from_row_slice(2, 3, &[1.0, 0.0, 1.0, 0.0, 1.0, 2.0]).unwrap()
    }

    fn random_matrix(rng: &mut ChaCha8Rng, n: usize, m: usize) -> DMatrix<f64> {
        DMatrix::from_fn(n, m, |_, _| rng.sample(StandardNormal))
    }

    /// Sum over all j-subsets of products.
    fn brute_elem_sym(values: &[f64], j: usize) -> f64 {
        combinations(values.len(), j)
            .map(|s| s.iter().map(|&i| values[i]).product::<f64>())
            .sum()
    }

    /// 2x2 and 3x3 determinants by cofactor expansion.
    fn det_small(k: &DMatrix<f64>) -> f64 {
        match k.nrows() {
            1 => k[(0, 0)],
            2 => k[(0, 0)] * k[(1, 1)] - k[(0, 1)] * k[(1, 0)],
            3 => {
                k[(0, 0)] * (k[(1, 1)] * k[(2, 2)] - k[(1, 2)] * k[(2, 1)])
                    - k[(0, 1)] * (k[(1, 0)] * k[(2, 2)] - k[(1, 2)] * k[(2, 0)])
                    + k[(0, 2)] * (k[(1, 0)] * k[(2, 1)] - k[(1, 1)] * k[(2, 0)])
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn elem_sym_examples() {
        let v = [1.0, 2.0, 3.0];
        assert_eq!(elem_sym_poly(&v, 0).unwrap(), 1.0);
        assert_eq!(elem_sym_poly(&v, 1).unwrap(), 6.0);
        assert_eq!(brute_elem_sym(&v, 2), 11.0);
        assert_eq!(elem_sym_poly(&v, 2).unwrap(), 11.0);
        assert_eq!(elem_sym_poly(&v, 4), Err(DvsError::Degree { j: 4, len: 3 }));
        assert!((log_elem_sym_poly(&v, 2).unwrap() - 11f64.ln()).abs() < 1e-14);
        assert_eq!(log_elem_sym_poly(&[0.0, 0.0], 1).unwrap(), f64::neg_infinity());
    }

    #[test]
    fn log_elem_sym_survives_large_degree() {
        let values = vec![3.0; 2000];
        let got = log_elem_sym_poly(&values, 1000).unwrap();
        let expected = crate::subset::ln_binomial(2000, 1000) + 1000.0 * 3f64.ln();
        assert!((got - expected).abs() / expected.abs() < 1e-10);
    }

    #[test]
    fn elem_sym_generating_function() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let len = rng.random_range(1..9);
            let values: Vec<f64> = (0..len).map(|_| rng.random::<f64>() * 3.0).collect();
            for t in [1.0, 2.0] {
                let series: f64 = (0..=len)
                    .map(|j| elem_sym_poly(&values, j).unwrap() * Float::powi(t, j as i32))
                    .sum();
                let product: f64 = values.iter().map(|l| 1.0 + t * l).product();
                assert!((series - product).abs() <= 1e-10 * product.max(1.0));
            }
        }
    }

    #[test]
    fn det_gram_examples() {
        let a = a_star();
        assert!((det_gram(&a, &[0, 1]).unwrap() - 1.0).abs() < 1e-12);
        assert!((det_gram(&a, &[0, 2]).unwrap() - 4.0).abs() < 1e-12);
        assert!((det_gram(&a, &[0, 1, 2]).unwrap() - 6.0).abs() < 1e-12);
        assert_eq!(det_gram(&a, &[0, 0]), Err(DvsError::DuplicateIndex(0)));
        assert_eq!(det_gram(&a, &[0, 3]), Err(DvsError::IndexOutOfRange { index: 3, m: 3 }));
    }

    #[test]
    fn det_gram_rank_deficient_is_neg_inf() {
        let a = DesignMatrix::from_row_slice(2, 4, &[1.0, 1.0, 0.0, 0.0, 2.0, 2.0, 1.0, 0.0]).unwrap();
        assert_eq!(log_det_gram(&a, &[0, 1]).unwrap(), f64::neg_infinity());
        assert_eq!(log_det_gram(&a, &[1, 3]).unwrap(), f64::neg_infinity());
        assert_eq!(det_gram(&a, &[0, 1]).unwrap(), 0.0);
    }

    #[test]
    fn det_gram_equals_e_n_of_column_gram() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let a = DesignMatrix::new(random_matrix(&mut rng, 2, 6)).unwrap();
            let l = a.entries().transpose() * a.entries();
            for size in 2..=6 {
                for s in combinations(6, size) {
                    let lss = DMatrix::from_fn(size, size, |i, j| l[(s[i], s[j])]);
                    let eig = lss.symmetric_eigen().eigenvalues;
                    let en = elem_sym_poly(eig.as_slice(), 2).unwrap();
                    let det = det_gram(&a, &s).unwrap();
                    assert!((en - det).abs() <= 1e-9 * det.abs().max(1e-300), "{en} vs {det}");
                }
            }
        }
    }

    #[test]
    fn pinv_norm_examples() {
        let a = a_star();
        let tol = DEFAULT_RANK_TOL;
        assert!((pinv_fro_sq(&a.submatrix(&[0, 1]), tol).unwrap() - 2.0).abs() < 1e-12);
        assert!((pinv_fro_sq(&a.submatrix(&[0, 2]), tol).unwrap() - 1.5).abs() < 1e-12);
        assert!((pinv_fro_sq(a.entries(), tol).unwrap() - 7.0 / 6.0).abs() < 1e-12);

        assert!((pinv_spec_sq(&DMatrix::identity(2, 2), tol).unwrap() - 1.0).abs() < 1e-12);
        let padded = DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 0.0, 0.0, 2.0, 0.0]);
        assert!((pinv_spec_sq(&padded, tol).unwrap() - 1.0).abs() < 1e-12);
        // Gram [[2,2],[2,5]]: λ_min = (tr - sqrt(tr² - 4 det)) / 2 with tr = 7, det = 6.
        let expected = 2.0 / (7.0 - (49.0f64 - 24.0).sqrt());
        assert!((expected - 1.0).abs() < 1e-15);
        assert!((pinv_spec_sq(a.entries(), tol).unwrap() - expected).abs() < 1e-12);

        let singular = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert_eq!(pinv_fro_sq(&singular, tol), Err(DvsError::Singular));
        assert_eq!(pinv_spec_sq(&singular, tol), Err(DvsError::Singular));
    }

    #[test]
    fn pinv_fro_times_det_is_sum_of_row_deleted_dets() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let n = rng.random_range(2..4);
            let cols = rng.random_range(n..n + 4);
            let m = random_matrix(&mut rng, n, cols);
            let k = &m * m.transpose();
            let lhs = pinv_fro_sq(&m, DEFAULT_RANK_TOL).unwrap() * det_small(&k);
            let rhs: f64 = (0..n)
                .map(|j| {
                    let mj = m.clone().remove_row(j);
                    det_small(&(&mj * mj.transpose()))
                })
                .sum();
            assert!((lhs - rhs).abs() <= 1e-8 * rhs.abs());
        }
    }

    #[test]
    fn design_matrix_rejects_bad_shapes() {
        let tall = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        assert_eq!(DesignMatrix::new(tall).unwrap_err(), DvsError::Shape { rows: 3, cols: 2 });
        let low_rank = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 6.0]);
        assert!(matches!(DesignMatrix::new(low_rank), Err(DvsError::RankDeficient { rank: 1, rows: 2 })));
        let a = a_star();
        let expected = DMatrix::from_row_slice(2, 2, &[5.0, -2.0, -2.0, 2.0]) / 6.0;
        assert!((a.gram_inverse() - expected).abs().max() < 1e-12);
        assert!((a.log_det_gram() - 6f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn gram_update_examples() {
        let a = a_star();
        let mut state = GramInverseState::new(&a, &[0, 1]).unwrap();
        assert!((state.inverse() - DMatrix::<f64>::identity(2, 2)).abs().max() < 1e-12);
        let before = state.logdet();
        state.update(&a, 2).unwrap();
        assert!((state.logdet() - before - 6f64.ln()).abs() < 1e-12);
        state.downdate(&a, 2).unwrap();
        assert!((state.inverse() - DMatrix::<f64>::identity(2, 2)).abs().max() < 1e-10);
        assert!((state.logdet() - before).abs() < 1e-10);
        assert_eq!(state.update_count(), 2);
    }

    #[test]
    fn zero_column_update_is_a_no_op() {
        let a = DesignMatrix::from_row_slice(2, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]).unwrap();
        let mut state = GramInverseState::new(&a, &[0, 1]).unwrap();
        let inv = state.inverse().clone();
        state.update(&a, 2).unwrap();
        assert_eq!(state.inverse(), &inv);
        assert_eq!(state.logdet(), 0.0);
    }

    #[test]
    fn degenerate_downdate_is_reported() {
        let a = a_star();
        let mut state = GramInverseState::new(&a, &[0, 2]).unwrap();
        let snapshot = state.clone();
        assert_eq!(state.downdate(&a, 0), Err(DvsError::DegenerateDowndate));
        assert_eq!(state.subset(), snapshot.subset());
        assert_eq!(state.inverse(), snapshot.inverse());
    }

    #[test]
    fn random_walk_matches_refactorization() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let a = DesignMatrix::new(random_matrix(&mut rng, 3, 12)).unwrap();
        let mut state = GramInverseState::new(&a, &[0, 1, 2, 3, 4]).unwrap().with_refresh_interval(1000);
        let mut steps = 0;
        while steps < 50 {
            let members = state.subset().to_vec();
            let outside: Vec<usize> = (0..12).filter(|c| !members.contains(c)).collect();
            if rng.random_bool(0.5) && members.len() > 4 {
                let col = members[rng.random_range(0..members.len())];
                if state.downdate(&a, col).is_err() {
                    continue;
                }
            } else if members.len() < 9 {
                state.update(&a, outside[rng.random_range(0..outside.len())]).unwrap();
            } else {
                continue;
            }
            steps += 1;
            let fresh = GramInverseState::new(&a, state.subset()).unwrap();
            assert!((fresh.logdet() - state.logdet()).abs() < 1e-6);
            assert!((fresh.inverse() - state.inverse()).abs().max() < 1e-6);
        }
    }

    #[test]
    fn refresh_resets_counter() {
        let a = a_star();
        let mut state = GramInverseState::new(&a, &[0, 1]).unwrap().with_refresh_interval(2);
        state.update(&a, 2).unwrap();
        state.downdate(&a, 2).unwrap();
        assert_eq!(state.update_count(), 2);
        state.update(&a, 2).unwrap();
        assert_eq!(state.update_count(), 0);
        assert!((state.logdet() - 6f64.ln()).abs() < 1e-12);
    }
}

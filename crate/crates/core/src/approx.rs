//! Approximate sampling through ε-perturbation and a Gaussian projection.
//!
//! For `ε > 0`, `det(A_S A_Sᵀ + εI_n) = ε^{n-k} det(A_Sᵀ A_S + εI_k)`, so
//! the perturbed distribution is volume sampling on the augmented matrix
//! `X = [A; √ε I_m]`. A random projection `Y = (1/√d) G X` preserves every
//! `k`-volume up to `1 ± δ₂` once `d ≳ k² log m / δ₂²`; the sampler then
//! draws from the volumes of `Y`.

use alloc::vec::Vec;

use nalgebra::DMatrix;
use num_traits::Float;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{DvsError, Result};
use crate::exact::check_cardinality;
use crate::linalg::{log_det_gram, DesignMatrix};
use crate::oracle::{enumerate_weighted, ExactDistribution, DEFAULT_ENUMERATION_CAP};
use crate::subset::SubsetSelection;

/// `[A; √ε I_m]`, kept implicit.
#[derive(Debug, Clone, Copy)]
pub struct AugmentedMatrix<'a> {
    a: &'a DesignMatrix,
    eps: f64,
}

impl<'a> AugmentedMatrix<'a> {
    pub fn new(a: &'a DesignMatrix, eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(DvsError::InvalidParameter("eps must be positive and finite"));
        }
        Ok(Self { a, eps })
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// `n + m`.
    pub fn rows(&self) -> usize {
        self.a.n() + self.a.m()
    }

    /// `X_Sᵀ X_S = A_Sᵀ A_S + εI_k`.
    pub fn gram(&self, subset: &[usize]) -> Result<DMatrix<f64>> {
        self.a.check_subset(subset)?;
        let cols = self.a.submatrix(subset);
        let k = subset.len();
        Ok(cols.transpose() * cols + DMatrix::identity(k, k) * self.eps)
    }

    /// `log det(A_Sᵀ A_S + εI_k)`.
    pub fn log_volume(&self, subset: &[usize]) -> Result<f64> {
        Ok(log_det_spd(self.gram(subset)?))
    }

    pub fn materialize(&self) -> DMatrix<f64> {
        let (n, m) = (self.a.n(), self.a.m());
        let root = self.eps.sqrt();
        DMatrix::from_fn(n + m, m, |r, c| {
            if r < n {
                self.a.entries()[(r, c)]
            } else if r - n == c {
                root
            } else {
                0.0
            }
        })
    }
}

/// Log-determinant through Cholesky; `-inf` when not positive definite.
fn log_det_spd(gram: DMatrix<f64>) -> f64 {
    match gram.cholesky() {
        Some(chol) => 2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>(),
        None => f64::neg_infinity(),
    }
}

/// `det(A_Sᵀ A_S + εI_k)`.
pub fn perturbed_det(a: &DesignMatrix, subset: &[usize], eps: f64) -> Result<f64> {
    Ok(AugmentedMatrix::new(a, eps)?.log_volume(subset)?.exp())
}

fn gaussian_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// `(1/√d) G X` with i.i.d. standard normal `G ∈ R^{d×r}`; returns `X`
/// unchanged when `d ≥ r`.
pub fn project_gaussian<R: Rng + ?Sized>(x: &DMatrix<f64>, d: usize, rng: &mut R) -> Result<DMatrix<f64>> {
    if d == 0 {
        return Err(DvsError::InvalidParameter("projection dimension must be positive"));
    }
    if d >= x.nrows() {
        return Ok(x.clone());
    }
    let g = gaussian_matrix(d, x.nrows(), rng);
    Ok(g * x / (d as f64).sqrt())
}

/// The volume-sampling distribution `P(S) ∝ det(X_Sᵀ X_S)` over
/// `k`-subsets of the columns of `x`, by enumeration.
pub fn volume_distribution(x: &DMatrix<f64>, k: usize, cap: usize) -> Result<ExactDistribution> {
    if k == 0 || k > x.ncols() {
        return Err(DvsError::Cardinality { k, min: 1, max: x.ncols() });
    }
    enumerate_weighted(x.ncols(), k, cap, |s| Ok(log_det_spd(x.select_columns(s).tr_mul(&x.select_columns(s)))))
}

fn draw(dist: &ExactDistribution, rng: &mut (impl Rng + ?Sized)) -> Result<(Vec<usize>, f64)> {
    let weights: Vec<f64> = dist.table().iter().map(|(_, p)| *p).collect();
    let index = WeightedIndex::new(&weights).map_err(|_| DvsError::Infeasible)?;
    let (s, p) = &dist.table()[index.sample(rng)];
    Ok((s.clone(), dist.log_normalizer() + p.ln()))
}

/// One draw from `P(S) ∝ det(X_Sᵀ X_S)` by enumeration (at most `cap`
/// subsets). The selection carries `log det(X_Sᵀ X_S)`.
pub fn volume_sample_enum<R: Rng + ?Sized>(
    x: &DMatrix<f64>,
    k: usize,
    cap: usize,
    rng: &mut R,
) -> Result<SubsetSelection> {
    let dist = volume_distribution(x, k, cap)?;
    let (s, logdet) = draw(&dist, rng)?;
    Ok(SubsetSelection::new(s, logdet))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApproxOptions {
    /// `c` in `d = ceil(c k² ln m / δ₂²)`.
    pub projection_constant: f64,
    pub enumeration_cap: usize,
}

impl Default for ApproxOptions {
    fn default() -> Self {
        Self { projection_constant: 8.0, enumeration_cap: DEFAULT_ENUMERATION_CAP }
    }
}

/// Target dimension `min(n + m, max(1, ceil(c k² ln m / δ₂²)))`.
pub fn projection_dimension(n: usize, m: usize, k: usize, delta2: f64, constant: f64) -> usize {
    let raw = (constant * (k * k) as f64 * (m as f64).ln() / (delta2 * delta2)).ceil();
    let rows = n + m;
    if raw >= rows as f64 {
        rows
    } else {
        (raw as usize).max(1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApproxOutcome {
    /// The drawn subset with `log det(A_S A_Sᵀ)` of the original matrix.
    pub selection: SubsetSelection,
    pub eps: f64,
    pub delta2: f64,
    pub target_dim: usize,
    /// `false` when `target_dim ≥ n + m` and the augmented volumes were
    /// used directly.
    pub projected: bool,
    /// `(1 + ε/σ_min²(A_S))^n − 1`: relative perturbation of the selected
    /// subset's weight.
    pub delta1_selected: f64,
    /// `n ε / σ_n²(A)`: first-order scale of the perturbation over the
    /// whole distribution.
    pub delta1_global: f64,
}

/// Draws `S` from the volumes of the projected augmented matrix.
pub fn sample_approx<R: Rng + ?Sized>(
    a: &DesignMatrix,
    k: usize,
    eps: f64,
    delta2: f64,
    options: &ApproxOptions,
    rng: &mut R,
) -> Result<ApproxOutcome> {
    check_cardinality(a, k)?;
    if !(delta2 > 0.0 && delta2 <= 0.5) {
        return Err(DvsError::InvalidParameter("delta2 must lie in (0, 1/2]"));
    }
    if !(options.projection_constant > 0.0) {
        return Err(DvsError::InvalidParameter("projection constant must be positive"));
    }
    let augmented = AugmentedMatrix::new(a, eps)?;
    let (n, m) = (a.n(), a.m());
    let d = projection_dimension(n, m, k, delta2, options.projection_constant);
    let projected = d < augmented.rows();
    let dist = if projected {
        // (1/√d)(G_A A + √ε G_I), with G = [G_A G_I] drawn column-major.
        let g = gaussian_matrix(d, n + m, rng);
        let y = (g.columns(0, n) * a.entries() + g.columns(n, m) * eps.sqrt()) / (d as f64).sqrt();
        volume_distribution(&y, k, options.enumeration_cap)?
    } else {
        enumerate_weighted(m, k, options.enumeration_cap, |s| augmented.log_volume(s))?
    };
    let (s, _) = draw(&dist, rng)?;
    let sigma_min_sq = crate::linalg::singular_values(&a.submatrix(&s))[n - 1].powi(2);
    let delta1_selected = (1.0 + eps / sigma_min_sq).powi(n as i32) - 1.0;
    let sn = a.singular_values()[n - 1];
    let logdet = log_det_gram(a, &s)?;
    Ok(ApproxOutcome {
        selection: SubsetSelection::new(s, logdet),
        eps,
        delta2,
        target_dim: d,
        projected,
        delta1_selected,
        delta1_global: n as f64 * eps / (sn * sn),
    })
}

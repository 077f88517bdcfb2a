//! Dual volume sampling.
//!
//! Given a short, wide matrix `A` (`n` rows, `m >= n` columns) and a target
//! cardinality `n <= k <= m`, dual volume sampling draws a `k`-subset `S` of
//! columns with probability proportional to `det(A_S A_S^T)`. This crate
//! provides:
//!
//! - [`exact`]: closed-form partition function, marginals `P(T ⊆ S)`, and an
//!   exact sequential sampler built on them.
//! - [`derand`]: conditional expectations of `‖A_S^+‖_F^2` and the greedy
//!   derandomized selection with deterministic A-/E-optimal guarantees.
//! - [`mcmc`]: the lazy swap chain with determinant-lemma acceptance ratios,
//!   its mixing budget, initializers, and temperature-scaled variant.
//! - [`approx`]: the ε-perturbation bridge to volume sampling and Gaussian
//!   projection.
//! - [`design`]: experimental design objectives, baseline samplers, Fedorov
//!   exchange, and regression evaluation.
//! - [`oracle`]: brute-force enumeration used to verify everything above.
//!
//! The crate is `no_std` and only needs `alloc`. Column indices are 0-based
//! throughout; front ends convert to 1-based for display.

#![no_std]

extern crate alloc;

pub mod approx;
pub mod derand;
pub mod design;
mod error;
pub mod exact;
pub mod linalg;
pub mod mcmc;
pub mod oracle;
mod subset;

pub use error::{DvsError, Result};
pub use exact::{DvsProblem, MarginalResult, OrderedSample};
pub use linalg::{DesignMatrix, GramInverseState};
pub use subset::{binomial, combinations, ln_binomial, Combinations, SubsetSelection};

pub use nalgebra::{DMatrix, DVector};

//! Shared numerical kernels: quadrature, Toeplitz covariance construction,
//! Gaussian quadratic-form sign probabilities, and reproducible Monte Carlo.
//!
//! Everything here is pure given its inputs and safe to call concurrently;
//! the Monte Carlo driver parallelizes internally with deterministic
//! per-replication seeding.

mod mc;
mod quadform;
pub mod quadrature;
mod toeplitz;

pub use mc::{derive_stream_seed, mc_expectation, replication_rng, McConfig, McEstimate};
pub use quadform::{
    quadform_nonneg_prob, quadform_nonneg_prob_from_weights, QuadFormProblem, EIGENVALUE_CLIP,
};
pub use toeplitz::{autocovariances, toeplitz, toeplitz_from_spectral, SpectralDensity};

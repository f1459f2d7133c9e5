//! Finite-sample diagnostics for heteroskedasticity/autocorrelation-robust
//! (HAR) tests of affine restrictions in Gaussian linear regression.
//!
//! The library builds trend-testing problems, evaluates nonsphericity-corrected
//! F-type statistics
//!
//! ```text
//! T(y) = (R β̌(y) − r)' Ω̌⁻¹(y) (R β̌(y) − r),      T(y) = 0 on N*,
//! ```
//!
//! and decides, from the geometry of the design matrix and the richness of the
//! error covariance model, whether the size of the test can be controlled at
//! all. The decision rules are driven by trigonometric-polynomial span
//! inclusions: if `span(E_{n,ρ(γ)}(γ)) ⊆ span(X)` for some frequency
//! `γ ∈ [0,π]`, a sufficiently rich stationary covariance model pushes the
//! null rejection probability of the test to one, for every critical value.
//!
//! Modules map onto the pipeline:
//!
//! - [`numerics`]: Toeplitz covariances from spectral densities, exact
//!   `P(u'Au ≥ 0)` for Gaussian quadratic forms (characteristic-function
//!   inversion), and seeded, order-independent Monte Carlo.
//! - [`design`]: design/restriction pairs, the trigonometric blocks
//!   `E_{n,s}(ω)`, frequency bookkeeping (`ρ`, `ω̄`, `d̄`, `κ`), and the
//!   restricted-mean space basis.
//! - [`covmodel`]: normalized spectral-density families (AR/ARMA, spiked
//!   AR(2), convex extensions, tabulated), boundary sequences that approach
//!   singular covariance limits, and the auxiliary sharp/natural models.
//! - [`estimators`]: the (β̌, Ω̌, N) zoo — kernel long-run-variance, Eicker,
//!   prewhitened, Vogelsang, Bunzel–Vogelsang — plus runtime equivariance
//!   checkers.
//! - [`teststat`]: F-type statistic evaluation with exceptional-set handling
//!   and affine-constancy constants.
//! - [`diagnostics`]: verdicts, exact and simulated rejection probabilities,
//!   size curves, lower bounds, power-degeneracy reports, and an empirical
//!   critical-value search.

pub mod covmodel;
pub mod design;
pub mod diagnostics;
mod error;
pub mod estimators;
pub(crate) mod linalg;
pub mod numerics;
pub mod teststat;

pub use error::{Error, Result};

pub use covmodel::{CovModelGrid, SpectralModel};
pub use design::{DesignProblem, FrequencyProfile, SubspaceBasis};
pub use diagnostics::{Verdict, VerdictOutcome, Witness};
pub use estimators::{CovarianceEstimator, EstimatorSpec, Evaluation};
pub use numerics::{McConfig, McEstimate, QuadFormProblem};
pub use teststat::FTypeTest;

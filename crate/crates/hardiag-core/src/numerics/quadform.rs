//! Exact sign probabilities of Gaussian quadratic forms.
//!
//! For u ~ N(0, Σ) and symmetric A, the form u'Au is distributed as
//! Σ λ_i χ²₁ with λ the eigenvalues of Σ^{1/2} A Σ^{1/2}. The probability
//! P(u'Au ≥ 0) is obtained by numerically inverting the characteristic
//! function at zero:
//!
//! ```text
//! P(Q ≥ 0) = 1/2 + (1/π) ∫₀^∞ sin(θ(u)) / (u ρ(u)) du,
//! θ(u) = ½ Σ atan(λ_i u),   ρ(u) = Π (1 + λ_i² u²)^{1/4}.
//! ```
//!
//! The envelope 1/(u ρ(u)) yields the truncation bound
//! ∫_U^∞ ≤ (2/s) U^{−s/2} / Π_{i≤s} |λ_i|^{1/2} for any s of the largest
//! |λ|'s; the integral is cut where that bound falls below a tenth of the
//! requested tolerance. Eigenvalues are normalized by max|λ| first, which
//! makes the result exactly invariant under positive rescaling of A or Σ.

use nalgebra::DMatrix;

use super::quadrature::integrate;
use crate::linalg::{relative_asymmetry, sym_eig_range, sym_eigenvalues, sym_sqrt, symmetrize};
use crate::{Error, Result};

/// Relative threshold below which an eigenvalue is treated as zero.
pub const EIGENVALUE_CLIP: f64 = 1e-12;

/// A symmetric matrix paired with a Gaussian covariance; the target quantity
/// is P(u'Au ≥ 0) for u ~ N(0, Σ).
#[derive(Debug, Clone)]
pub struct QuadFormProblem {
    a: DMatrix<f64>,
    sigma: DMatrix<f64>,
    n: usize,
}

impl QuadFormProblem {
    pub fn new(a: DMatrix<f64>, sigma: DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n || sigma.nrows() != n || sigma.ncols() != n {
            return Err(Error::InvalidInput(
                "quadratic form and covariance must be square of equal dimension".into(),
            ));
        }
        if relative_asymmetry(&a) > 1e-12 {
            return Err(Error::InvalidInput(
                "form matrix is asymmetric beyond 1e-12 relative tolerance".into(),
            ));
        }
        if relative_asymmetry(&sigma) > 1e-12 {
            return Err(Error::InvalidInput(
                "covariance is asymmetric beyond 1e-12 relative tolerance".into(),
            ));
        }
        let (lmin, lmax) = sym_eig_range(&sigma);
        if lmin < -1e-10 * lmax.abs().max(1.0) {
            return Err(Error::InvalidInput(format!(
                "covariance has eigenvalue {lmin:e}, below the semidefiniteness tolerance"
            )));
        }
        Ok(QuadFormProblem { a: symmetrize(&a), sigma: symmetrize(&sigma), n })
    }

    pub fn dimension(&self) -> usize {
        self.n
    }

    pub fn form(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    /// Eigenvalues of Σ^{1/2} A Σ^{1/2}, ascending.
    pub fn weights(&self) -> Result<Vec<f64>> {
        let s = sym_sqrt(&self.sigma, 1e-10)?;
        let b = &s * &self.a * &s;
        Ok(sym_eigenvalues(&b))
    }
}

/// P(u'Au ≥ 0) to absolute accuracy `tol`, with `tol ∈ (1e-10, 1e-2)`.
///
/// Returns exactly 1 (0) when all retained eigenvalues are nonnegative
/// (nonpositive); [`Error::DegenerateForm`] when every eigenvalue clips to
/// zero, in which case the caller decides the convention.
pub fn quadform_nonneg_prob(problem: &QuadFormProblem, tol: f64) -> Result<f64> {
    let weights = problem.weights()?;
    quadform_nonneg_prob_from_weights(&weights, tol)
}

/// Same computation starting from the eigenvalues of Σ^{1/2} A Σ^{1/2}.
pub fn quadform_nonneg_prob_from_weights(weights: &[f64], tol: f64) -> Result<f64> {
    if !(tol > 1e-10 && tol < 1e-2) {
        return Err(Error::InvalidInput(format!(
            "tolerance {tol:e} outside the supported range (1e-10, 1e-2)"
        )));
    }
    let lmax = weights.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
    if lmax == 0.0 {
        return Err(Error::DegenerateForm);
    }
    // normalization makes the sign probability exactly scale invariant
    let lam: Vec<f64> = weights
        .iter()
        .map(|&l| l / lmax)
        .filter(|l| l.abs() > EIGENVALUE_CLIP)
        .collect();
    if lam.is_empty() {
        return Err(Error::DegenerateForm);
    }
    if lam.iter().all(|&l| l >= 0.0) {
        return Ok(1.0);
    }
    if lam.iter().all(|&l| l <= 0.0) {
        return Ok(0.0);
    }

    let trunc_budget = tol / 10.0;
    let quad_budget = tol / 2.0;

    // truncation point: optimize the envelope bound over head sizes
    let mut mags: Vec<f64> = lam.iter().map(|l| l.abs()).collect();
    mags.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cut = f64::INFINITY;
    let mut log_prod = 0.0;
    for (idx, m) in mags.iter().enumerate() {
        let s = (idx + 1) as f64;
        log_prod += m.ln();
        if idx == 0 {
            continue;
        }
        // (1/π)(2/s) U^{-s/2} exp(-log_prod/2) ≤ trunc_budget
        let log_u = (2.0 / s)
            * ((2.0 / (std::f64::consts::PI * s)).ln() - 0.5 * log_prod - trunc_budget.ln());
        cut = cut.min(log_u.exp());
    }
    let cut = cut.clamp(1.0, 1e300);

    let integrand = |u: f64| {
        if u <= 0.0 {
            return 0.5 * lam.iter().sum::<f64>();
        }
        let mut theta = 0.0;
        let mut log_rho = 0.0;
        for &l in &lam {
            let lu = l * u;
            theta += lu.atan();
            log_rho += (lu * lu).ln_1p();
        }
        (0.5 * theta).sin() * (-0.25 * log_rho).exp() / u
    };

    // geometric seed panels cover the wide dynamic range of mixed eigenvalue
    // magnitudes
    let mut cuts = Vec::new();
    let mut p = cut;
    for _ in 0..24 {
        p /= 10.0;
        if p < 1e-18 * cut {
            break;
        }
        cuts.push(p);
    }
    let integral = integrate(&integrand, 0.0, cut, &cuts, quad_budget, 60_000)?;
    Ok((0.5 + integral / std::f64::consts::PI).clamp(0.0, 1.0))
}

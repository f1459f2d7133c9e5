//! Toeplitz covariance matrices of stationary processes from their
//! normalized spectral densities.
//!
//! For a normalized density f (∫_{−π}^{π} f = 1, symmetric about 0) the
//! covariance of n consecutive observations has entries
//!
//! ```text
//! Σ(f)[j,l] = ∫_{−π}^{π} e^{−i(j−l)ω} f(ω) dω = 2 ∫₀^π cos((j−l)ω) f(ω) dω,
//! ```
//!
//! a Toeplitz matrix with unit diagonal.

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::quadrature::integrate;
use crate::linalg::sym_eig_range;
use crate::{Error, Result};

use std::f64::consts::PI;

/// A spectral density on [−π, π], evaluated on [0, π] by symmetry.
///
/// `breakpoints` returns abscissae in (0, π) near which the density varies on
/// a much finer scale than elsewhere (peak positions of near-unit-root
/// models), each optionally with a width scale; these seed the quadrature
/// subdivision.
pub trait SpectralDensity: Sync {
    fn density(&self, omega: f64) -> f64;

    /// (location, width) pairs of sharp features.
    fn breakpoints(&self) -> Vec<(f64, f64)> {
        Vec::new()
    }
}

fn seeded_cuts(hints: &[(f64, f64)], extra_panels: usize) -> Vec<f64> {
    let mut cuts = Vec::new();
    // uniform background grid, enough panels to resolve the oscillation
    for i in 1..extra_panels {
        cuts.push(PI * i as f64 / extra_panels as f64);
    }
    for &(center, width) in hints {
        cuts.push(center);
        let w = width.abs().max(1e-14);
        let mut d = 0.25 * w;
        while d < PI {
            cuts.push(center - d);
            cuts.push(center + d);
            d *= 4.0;
        }
    }
    cuts
}

/// Autocovariances γ_0 … γ_{n−1} of the process with spectral density `f`.
pub fn autocovariances<D: SpectralDensity + ?Sized>(
    f: &D,
    n: usize,
    tol: f64,
) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::InvalidInput("dimension must be at least 1".into()));
    }
    let hints = f.breakpoints();
    // normalization gate: |∫f − 1| ≤ 1e-8
    let cuts0 = seeded_cuts(&hints, 8);
    let total = 2.0 * integrate(&|w| f.density(w), 0.0, PI, &cuts0, 1e-10, 60_000)?;
    if (total - 1.0).abs() > 1e-8 {
        return Err(Error::InvalidInput(format!(
            "density is not normalized: ∫ f = {total:.12} (must be 1 within 1e-8)"
        )));
    }
    (0..n)
        .into_par_iter()
        .map(|h| {
            let panels = (h / 2).max(8);
            let cuts = seeded_cuts(&hints, panels);
            let g = |w: f64| (h as f64 * w).cos() * f.density(w);
            integrate(&g, 0.0, PI, &cuts, tol, 60_000).map(|v| 2.0 * v)
        })
        .collect()
}

/// Symmetric Toeplitz matrix from a slice of autocovariances.
pub fn toeplitz(acov: &[f64]) -> DMatrix<f64> {
    let n = acov.len();
    DMatrix::from_fn(n, n, |i, j| acov[i.abs_diff(j)])
}

/// Build Σ(f) for dimension `n`; the returned matrix has unit diagonal to
/// within 1e-10 and is verified positive definite up to eigenvalue noise.
pub fn toeplitz_from_spectral<D: SpectralDensity + ?Sized>(
    f: &D,
    n: usize,
) -> Result<DMatrix<f64>> {
    let acov = autocovariances(f, n, 1e-11)?;
    if (acov[0] - 1.0).abs() > 1e-10 {
        return Err(Error::Numerical(format!(
            "diagonal entry {:.14} differs from 1 beyond quadrature tolerance",
            acov[0]
        )));
    }
    let sigma = toeplitz(&acov);
    let (lmin, lmax) = sym_eig_range(&sigma);
    if lmin < -1e-8 * lmax.abs().max(1.0) {
        return Err(Error::Numerical(format!(
            "covariance not positive definite: eigenvalue range [{lmin:e}, {lmax:e}]"
        )));
    }
    Ok(sigma)
}

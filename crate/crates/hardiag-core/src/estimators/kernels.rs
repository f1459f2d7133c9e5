//! Covariance-kernel weight functions and the constant weight matrices they
//! induce.
//!
//! The weight matrix of a kernel long-run-variance estimator has entries
//! `W[i,j] = κ(|i−j|/M)` for a bandwidth M > 0. The kernel definitions are
//! the canonical ones: Bartlett `(1−|x|)⁺`; the Parzen two-piece cubic; the
//! quadratic-spectral kernel
//! `25/(12π²x²)·(sin(6πx/5)/(6πx/5) − cos(6πx/5))`; the Daniell kernel
//! `sin(πx)/(πx)`; and the rectangular indicator of the open interval
//! (−1, 1), which is the one weight here that is not positive semidefinite
//! for M > 1.

use nalgebra::DMatrix;
use std::f64::consts::PI;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelName {
    Bartlett,
    Parzen,
    QuadraticSpectral,
    Daniell,
    Rectangular,
}

impl KernelName {
    pub fn parse(text: &str) -> Result<Self> {
        match text.to_ascii_lowercase().as_str() {
            "bartlett" => Ok(KernelName::Bartlett),
            "parzen" => Ok(KernelName::Parzen),
            "qs" | "quadratic_spectral" | "quadratic-spectral" => {
                Ok(KernelName::QuadraticSpectral)
            }
            "daniell" => Ok(KernelName::Daniell),
            "rect" | "rectangular" => Ok(KernelName::Rectangular),
            other => Err(Error::Parse(format!("unknown kernel `{other}`"))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            KernelName::Bartlett => "bartlett",
            KernelName::Parzen => "parzen",
            KernelName::QuadraticSpectral => "quadratic_spectral",
            KernelName::Daniell => "daniell",
            KernelName::Rectangular => "rectangular",
        }
    }
}

pub fn kernel_value(name: KernelName, x: f64) -> f64 {
    let ax = x.abs();
    match name {
        KernelName::Bartlett => (1.0 - ax).max(0.0),
        KernelName::Parzen => {
            if ax <= 0.5 {
                1.0 - 6.0 * ax * ax + 6.0 * ax * ax * ax
            } else if ax <= 1.0 {
                2.0 * (1.0 - ax).powi(3)
            } else {
                0.0
            }
        }
        KernelName::QuadraticSpectral => {
            if ax == 0.0 {
                1.0
            } else {
                let z = 6.0 * PI * ax / 5.0;
                25.0 / (12.0 * PI * PI * ax * ax) * (z.sin() / z - z.cos())
            }
        }
        KernelName::Daniell => {
            if ax == 0.0 {
                1.0
            } else {
                (PI * ax).sin() / (PI * ax)
            }
        }
        KernelName::Rectangular => {
            if ax < 1.0 {
                1.0
            } else {
                0.0
            }
        }
    }
}

/// `W[i,j] = κ(|i−j|/M)`, n×n symmetric.
pub fn kernel_weight_matrix(name: KernelName, bandwidth: f64, n: usize) -> Result<DMatrix<f64>> {
    if !(bandwidth > 0.0) {
        return Err(Error::InvalidInput(format!(
            "bandwidth must be positive, got {bandwidth}"
        )));
    }
    let mut lags = vec![0.0f64; n];
    for (h, slot) in lags.iter_mut().enumerate() {
        *slot = kernel_value(name, h as f64 / bandwidth);
    }
    Ok(DMatrix::from_fn(n, n, |i, j| lags[i.abs_diff(j)]))
}

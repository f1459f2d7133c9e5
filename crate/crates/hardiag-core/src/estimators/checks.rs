//! Runtime property checkers for the estimator contract.
//!
//! `check_assumption5` exercises the equivariance pair
//! β̌(δy + Xη) = δβ̌(y) + η and Ω̌(δy + Xη) = δ²Ω̌(y) on random triples,
//! verifies that exceptional-set membership is invariant under the same
//! transformations, and estimates the fraction of singular Ω̌ draws (which
//! must be zero under continuous sampling). `check_assumption7` estimates
//! the fraction of draws where v'Ω̌⁻¹v vanishes for a random direction v,
//! which must also be zero.

use nalgebra::DVector;
use rand::Rng;

use crate::linalg::standard_normal_vector;

use super::{omega_is_singular, CovarianceEstimator, Evaluation};

const EQUIVARIANCE_TOL: f64 = 1e-9;

/// Outcome of a property run; `passed` summarizes, the fields carry the
/// evidence.
#[derive(Debug, Clone)]
pub struct AssumptionReport {
    pub label: String,
    pub trials: usize,
    pub passed: bool,
    pub max_beta_residual: f64,
    pub max_omega_residual: f64,
    pub membership_flips: usize,
    pub singular_fraction: f64,
    pub zero_quadratic_fraction: f64,
    pub notes: Vec<String>,
}

/// Equivariance, membership-invariance, and nonsingularity check.
pub fn check_assumption5(
    est: &dyn CovarianceEstimator,
    trials: usize,
    seed: u64,
) -> AssumptionReport {
    let mut rng = crate::numerics::replication_rng(seed, 0);
    let design = est.design();
    let (n, k) = (design.n(), design.k());
    let mut max_beta = 0.0f64;
    let mut max_omega = 0.0f64;
    let mut flips = 0usize;
    let mut singular = 0usize;
    let mut regular = 0usize;
    let mut notes = Vec::new();

    for trial in 0..trials {
        let y = standard_normal_vector(&mut rng, n);
        let delta: f64 = {
            let mag = rng.gen_range(0.2..3.0);
            if rng.gen_bool(0.5) {
                mag
            } else {
                -mag
            }
        };
        let eta = standard_normal_vector(&mut rng, k);
        let shifted: DVector<f64> = &y * delta + design.x() * &eta;

        match (est.evaluate(&y), est.evaluate(&shifted)) {
            (Evaluation::InExceptionalSet, Evaluation::InExceptionalSet) => {}
            (Evaluation::Regular { .. }, Evaluation::InExceptionalSet)
            | (Evaluation::InExceptionalSet, Evaluation::Regular { .. }) => {
                flips += 1;
                if notes.len() < 4 {
                    notes.push(format!("membership flipped on trial {trial}"));
                }
            }
            (
                Evaluation::Regular { beta: b1, omega: o1 },
                Evaluation::Regular { beta: b2, omega: o2 },
            ) => {
                regular += 1;
                let want_beta = &b1 * delta + &eta;
                let beta_res =
                    (&b2 - &want_beta).norm() / want_beta.norm().max(1.0);
                let want_omega = &o1 * (delta * delta);
                let omega_res =
                    (&o2 - &want_omega).norm() / want_omega.norm().max(1.0);
                max_beta = max_beta.max(beta_res);
                max_omega = max_omega.max(omega_res);
                if omega_is_singular(&o1) {
                    singular += 1;
                }
            }
        }
    }

    let singular_fraction = if regular > 0 { singular as f64 / regular as f64 } else { 1.0 };
    let passed = flips == 0
        && max_beta < EQUIVARIANCE_TOL
        && max_omega < EQUIVARIANCE_TOL
        && singular_fraction == 0.0
        && regular > 0;
    AssumptionReport {
        label: est.label(),
        trials,
        passed,
        max_beta_residual: max_beta,
        max_omega_residual: max_omega,
        membership_flips: flips,
        singular_fraction,
        zero_quadratic_fraction: 0.0,
        notes,
    }
}

/// Nonvanishing of v'Ω̌⁻¹v along random directions.
pub fn check_assumption7(
    est: &dyn CovarianceEstimator,
    trials: usize,
    seed: u64,
) -> AssumptionReport {
    let mut rng = crate::numerics::replication_rng(seed, 1);
    let design = est.design();
    let (n, q) = (design.n(), design.q());
    let mut zero_hits = 0usize;
    let mut usable = 0usize;
    for _ in 0..trials {
        let y = standard_normal_vector(&mut rng, n);
        let v = {
            let raw = standard_normal_vector(&mut rng, q);
            let norm = raw.norm();
            raw / norm
        };
        if let Evaluation::Regular { omega, .. } = est.evaluate(&y) {
            if omega_is_singular(&omega) {
                continue;
            }
            usable += 1;
            let inv = omega.clone().try_inverse().expect("nonsingular by the guard above");
            let quad = (v.transpose() * inv * &v)[(0, 0)];
            if quad.abs() <= 1e-12 {
                zero_hits += 1;
            }
        }
    }
    let fraction = if usable > 0 { zero_hits as f64 / usable as f64 } else { 1.0 };
    AssumptionReport {
        label: est.label(),
        trials,
        passed: usable > 0 && fraction == 0.0,
        max_beta_residual: 0.0,
        max_omega_residual: 0.0,
        membership_flips: 0,
        singular_fraction: 0.0,
        zero_quadratic_fraction: fraction,
        notes: Vec::new(),
    }
}

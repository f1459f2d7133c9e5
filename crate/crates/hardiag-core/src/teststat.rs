//! Evaluation of nonsphericity-corrected F-type statistics.
//!
//! ```text
//! T(y) = (R β̌(y) − r)' Ω̌⁻¹(y) (R β̌(y) − r)    off N*,
//! T(y) = 0                                      on N* = N ∪ {det Ω̌ = 0},
//! ```
//!
//! Membership in the determinant branch is decided relative to the product
//! of the row norms of Ω̌, so that the equivariance Ω̌(δy) = δ²Ω̌(y) leaves
//! the decision invariant.
//!
//! The module also measures the constants C(𝒮): the almost-everywhere
//! constant value of T on an affine subspace μ₀ + 𝒮, certified by sampling.
//! These constants separate the critical-value ranges that force size one
//! from the ranges that force zero infimal power.

use nalgebra::DVector;

use crate::design::SubspaceBasis;
use crate::estimators::{omega_is_singular, CovarianceEstimator, Evaluation};
use crate::linalg::standard_normal_vector;
use crate::numerics::replication_rng;
use crate::{Error, Result};

/// A test statistic bound to an estimator triple; the restriction pair
/// lives in the estimator's design.
pub struct FTypeTest<'a> {
    est: &'a dyn CovarianceEstimator,
}

/// Value of the statistic together with the branch that produced it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestValue {
    pub value: f64,
    pub on_exceptional_branch: bool,
}

impl<'a> FTypeTest<'a> {
    pub fn new(est: &'a dyn CovarianceEstimator) -> Self {
        FTypeTest { est }
    }

    pub fn estimator(&self) -> &'a dyn CovarianceEstimator {
        self.est
    }

    pub fn evaluate(&self, y: &DVector<f64>) -> TestValue {
        evaluate_statistic(self.est, y)
    }
}

/// T(y) with the zero branch on the exceptional set.
pub fn evaluate_statistic(est: &dyn CovarianceEstimator, y: &DVector<f64>) -> TestValue {
    match est.evaluate(y) {
        Evaluation::InExceptionalSet => TestValue { value: 0.0, on_exceptional_branch: true },
        Evaluation::Regular { beta, omega } => {
            if omega_is_singular(&omega) {
                return TestValue { value: 0.0, on_exceptional_branch: true };
            }
            let design = est.design();
            let v = design.r_mat() * beta - design.r_vec();
            let solved = omega
                .lu()
                .solve(&v)
                .expect("nonsingular by the determinant guard");
            TestValue { value: v.dot(&solved), on_exceptional_branch: false }
        }
    }
}

/// Outcome of probing T for constancy on an affine subspace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConstancyOutcome {
    /// T equals this value at every sampled point (relative spread ≤ 1e-8).
    Constant(f64),
    /// The sampled values spread beyond the tolerance.
    NotConstant { spread: f64 },
    /// Every sampled point fell on the exceptional branch.
    Inconclusive,
}

const CONSTANCY_POINTS: usize = 16;
const CONSTANCY_TOL: f64 = 1e-8;

/// Probe T at random points of μ₀ + 𝒮 (exceptional hits excluded).
pub fn constant_on_affine(
    est: &dyn CovarianceEstimator,
    s: &SubspaceBasis,
    mu0: &DVector<f64>,
    seed: u64,
) -> Result<ConstancyOutcome> {
    if s.dim() == 0 {
        return Err(Error::InvalidInput(
            "constancy probe needs a subspace of positive dimension".into(),
        ));
    }
    if s.ambient_dim() != mu0.len() {
        return Err(Error::InvalidInput(
            "subspace and base point have mismatched dimensions".into(),
        ));
    }
    let mut rng = replication_rng(seed, 0xC0);
    let mut values = Vec::with_capacity(CONSTANCY_POINTS);
    for _ in 0..CONSTANCY_POINTS {
        let coord = standard_normal_vector(&mut rng, s.dim());
        let point = mu0 + s.vectors() * coord;
        let tv = evaluate_statistic(est, &point);
        if !tv.on_exceptional_branch {
            values.push(tv.value);
        }
    }
    if values.is_empty() {
        return Ok(ConstancyOutcome::Inconclusive);
    }
    let max = values.iter().cloned().fold(f64::MIN, f64::max);
    let min = values.iter().cloned().fold(f64::MAX, f64::min);
    let spread = (max - min) / max.abs().max(min.abs()).max(1.0);
    if spread <= CONSTANCY_TOL {
        Ok(ConstancyOutcome::Constant(values.iter().sum::<f64>() / values.len() as f64))
    } else {
        Ok(ConstancyOutcome::NotConstant { spread })
    }
}

/// (inf, sup) of the certified constants C(𝒮) over a collection of
/// subspaces; the empty collection yields (+∞, −∞).
///
/// Nested members are deduplicated before evaluation (their constants agree
/// by continuity), keeping the minimal elements under inclusion.
pub fn cstar_bounds(
    est: &dyn CovarianceEstimator,
    subspaces: &[SubspaceBasis],
    mu0: &DVector<f64>,
    seed: u64,
) -> Result<(f64, f64)> {
    if subspaces.is_empty() {
        return Ok((f64::INFINITY, f64::NEG_INFINITY));
    }
    // keep members that contain no other member
    let contains = |outer: &SubspaceBasis, inner: &SubspaceBasis| -> bool {
        inner.dim() <= outer.dim() && outer.contains_span(inner.vectors())
    };
    let mut keep: Vec<&SubspaceBasis> = Vec::new();
    'outer: for (i, cand) in subspaces.iter().enumerate() {
        for (j, other) in subspaces.iter().enumerate() {
            if i != j && contains(cand, other) && !(contains(other, cand) && j > i) {
                continue 'outer;
            }
        }
        keep.push(cand);
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (idx, s) in keep.iter().enumerate() {
        match constant_on_affine(est, s, mu0, seed ^ (idx as u64))? {
            ConstancyOutcome::Constant(c) => {
                lo = lo.min(c);
                hi = hi.max(c);
            }
            ConstancyOutcome::NotConstant { spread } => {
                return Err(Error::InvalidInput(format!(
                    "member {idx} is not constant on its affine subspace (spread {spread:e})"
                )));
            }
            ConstancyOutcome::Inconclusive => {
                return Err(Error::InvalidInput(format!(
                    "member {idx} only produced exceptional-branch values"
                )));
            }
        }
    }
    Ok((lo, hi))
}

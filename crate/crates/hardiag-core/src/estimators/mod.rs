//! The (β̌, Ω̌, N) estimator zoo behind nonsphericity-corrected F-type
//! statistics.
//!
//! Each estimator pairs a location estimator β̌ with a q×q covariance
//! estimator Ω̌ and a closed null set N where the pair is undefined. All
//! shipped members satisfy the equivariance contract
//!
//! ```text
//! β̌(δy + Xη) = δ β̌(y) + η,      Ω̌(δy + Xη) = δ² Ω̌(y),      δ ≠ 0,
//! ```
//!
//! which [`checks::check_assumption5`] verifies at runtime on random inputs.
//!
//! Members:
//!
//! - `kernel`: OLS with Ω̌ = ω̂_W·R(X'X)⁻¹R', ω̂_W(y) = n⁻¹û'Wû for a constant
//!   symmetric weight matrix W (named kernel or custom); N = ∅.
//! - `eicker`: OLS with Ω̌ = (û'𝖶û/(n−k))·R(X'X)⁻¹R' for a positive-definite
//!   weight 𝖶; at 𝖶 = I this is the classical F denominator; N = ∅.
//! - `am`: AR(1)-prewhitened quadratic-spectral estimator with the
//!   data-driven bandwidth 1.3221·(4nρ̃²/(1−ρ̃)⁴)^{1/5}; N is where either
//!   autoregression fit degenerates.
//! - `vogelsang`: β̌_V = (X'V'VX)⁻¹X'V'Vy for V ∈ {A, I} (A = running-sum
//!   matrix) with Ω̌ = n^{j(V)} s²_{A,X} exp(c·Jⁱ) R(X'V'VX)⁻¹R';
//!   N = span(X, U).
//! - `bv_fixed` / `bv_datadriven`: long-run-variance estimators with an
//!   exponential correction term, fixed or driven by the residual AR(1)
//!   coefficient through a step function b(ρ̂) that also produces a
//!   data-driven critical value.

pub mod checks;
mod kernels;
mod parse;

pub use checks::{check_assumption5, check_assumption7, AssumptionReport};
pub use kernels::{kernel_value, kernel_weight_matrix, KernelName};
pub use parse::{matrix_from_csv, parse_estimator};

use nalgebra::{DMatrix, DVector};

use crate::design::{DesignProblem, SubspaceBasis};
use crate::linalg::{self, sym_eig_range};
use crate::{Error, Result};

/// Symbolic description of the exceptional set N.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExceptionalSet {
    Empty,
    SpanX,
    SpanXU,
    PrewhitenSet,
    BvSet,
    BvSetU,
}

/// Traits of an estimator the verdict engine conditions on.
#[derive(Debug, Clone, Copy)]
pub struct EstimatorFlags {
    /// N = ∅: the pair is defined everywhere.
    pub n_is_empty: bool,
    /// Ω̌(y) nonnegative definite for every y outside N.
    pub omega_nnd_everywhere: bool,
    /// Ω̌ ≡ 0 (degenerate weight, e.g. the all-ones matrix).
    pub omega_identically_zero: bool,
    /// v'Ω̌⁻¹v vanishes at most on a null set for every v ≠ 0.
    pub satisfies_sign_condition: bool,
    pub exceptional_set: ExceptionalSet,
}

/// Result of evaluating (β̌, Ω̌) at one data vector.
#[derive(Debug, Clone)]
pub enum Evaluation {
    Regular { beta: DVector<f64>, omega: DMatrix<f64> },
    InExceptionalSet,
}

impl Evaluation {
    pub fn is_exceptional(&self) -> bool {
        matches!(self, Evaluation::InExceptionalSet)
    }
}

/// Anything that produces a (β̌, Ω̌, N) triple over a fixed design. The
/// shipped implementation is [`EstimatorSpec`]; tests inject deliberately
/// broken members through this trait.
pub trait CovarianceEstimator: Sync {
    fn design(&self) -> &DesignProblem;
    fn evaluate(&self, y: &DVector<f64>) -> Evaluation;
    fn label(&self) -> String;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JVariant {
    J1,
    J2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VKind {
    RunningSum,
    Identity,
}

/// Which covariance estimator to attach to the OLS (or transformed OLS)
/// location estimator.
#[derive(Debug, Clone)]
pub enum OmegaKind {
    Kernel { w: DMatrix<f64>, name: String },
    Eicker { w: DMatrix<f64> },
    AmPrewhitened,
    Vogelsang { c: f64, u: DMatrix<f64>, variant: JVariant, v: VKind },
    BvFixed { w: DMatrix<f64>, name: String, c: f64, u: Option<DMatrix<f64>> },
    BvDataDriven {
        a: Vec<f64>,
        abar: Vec<f64>,
        h: Vec<f64>,
        p: Vec<f64>,
        u: Option<DMatrix<f64>>,
    },
}

// precomputed geometry for an augmented regressor block Z = (X, U)
#[derive(Debug, Clone)]
struct AugmentedBlock {
    z_basis: DMatrix<f64>,    // orthonormal basis of span(Z)
    pinv_z: DMatrix<f64>,     // (Z'Z)⁻¹Z'
    g_inv_gzg: DMatrix<f64>,  // [G(Z'Z)⁻¹G']⁻¹ (m×m)
    az_basis: DMatrix<f64>,   // orthonormal basis of span(AZ)
    pinv_az: DMatrix<f64>,    // (Z'A'AZ)⁻¹Z'A'
    g_inv_gazg: DMatrix<f64>, // [G(Z'A'AZ)⁻¹G']⁻¹
    m: usize,
}

#[derive(Debug, Clone)]
struct Precomp {
    cumsum_ax_basis: Option<DMatrix<f64>>, // span(AX) for s²_{A,X}
    vx_pinv: Option<DMatrix<f64>>,         // (X'V'VX)⁻¹X'V'V
    rxvxr: Option<DMatrix<f64>>,           // R(X'V'VX)⁻¹R'
    augmented: Option<AugmentedBlock>,
    bv_levels: Option<BvLevels>,
}

// every value the BV step function can take, with its weight matrix and the
// induced tuning/critical constants
#[derive(Debug, Clone)]
struct BvLevels {
    thresholds: Vec<f64>, // ā sorted ascending
    b_values: Vec<f64>,   // b for ρ̂ in each threshold cell
    w_matrices: Vec<DMatrix<f64>>,
    c_values: Vec<f64>,
    crit_values: Vec<f64>,
    rho_nonconstant: bool,
}

/// One fully-specified nonsphericity-corrected covariance estimator bound to
/// a design.
#[derive(Debug, Clone)]
pub struct EstimatorSpec {
    design: DesignProblem,
    kind: OmegaKind,
    flags: EstimatorFlags,
    label: String,
    pre: Precomp,
}

fn running_sum_matrix(n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| if j <= i { 1.0 } else { 0.0 })
}

fn stack(x: &DMatrix<f64>, u: &DMatrix<f64>) -> DMatrix<f64> {
    let mut z = DMatrix::zeros(x.nrows(), x.ncols() + u.ncols());
    z.columns_mut(0, x.ncols()).copy_from(x);
    z.columns_mut(x.ncols(), u.ncols()).copy_from(u);
    z
}

fn pinv(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    (m.transpose() * m)
        .try_inverse()
        .map(|inv| inv * m.transpose())
        .ok_or_else(|| Error::Numerical("normal equations not invertible".into()))
}

fn validate_u(design: &DesignProblem, u: &DMatrix<f64>) -> Result<()> {
    let (n, k) = (design.n(), design.k());
    if u.nrows() != n || u.ncols() == 0 {
        return Err(Error::InvalidInput(format!(
            "augmenting block must be n×m with m ≥ 1 (n = {n})"
        )));
    }
    let m = u.ncols();
    if k + m >= n {
        return Err(Error::InvalidInput(format!(
            "augmented design needs k + m < n, got {k} + {m} ≥ {n}"
        )));
    }
    let z = stack(design.x(), u);
    if linalg::rank(&z) != k + m {
        return Err(Error::InvalidInput(
            "(X, U) is rank deficient; the augmenting block must be linearly independent".into(),
        ));
    }
    Ok(())
}

fn augmented_block(design: &DesignProblem, u: &DMatrix<f64>) -> Result<AugmentedBlock> {
    let z = stack(design.x(), u);
    let m = u.ncols();
    let k = design.k();
    let a = running_sum_matrix(design.n());
    let az = &a * &z;
    let zz_inv = (z.transpose() * &z)
        .try_inverse()
        .ok_or_else(|| Error::Numerical("Z'Z not invertible".into()))?;
    let azaz_inv = (az.transpose() * &az)
        .try_inverse()
        .ok_or_else(|| Error::Numerical("(AZ)'(AZ) not invertible".into()))?;
    // G = (0, I_m) picks the trailing block
    let gzg = zz_inv.view((k, k), (m, m)).into_owned();
    let gazg = azaz_inv.view((k, k), (m, m)).into_owned();
    Ok(AugmentedBlock {
        z_basis: linalg::orthonormal_basis(&z),
        pinv_z: &zz_inv * z.transpose(),
        g_inv_gzg: gzg
            .try_inverse()
            .ok_or_else(|| Error::Numerical("G(Z'Z)⁻¹G' not invertible".into()))?,
        az_basis: linalg::orthonormal_basis(&az),
        pinv_az: &azaz_inv * az.transpose(),
        g_inv_gazg: gazg
            .try_inverse()
            .ok_or_else(|| Error::Numerical("G(Z'A'AZ)⁻¹G' not invertible".into()))?,
        m,
    })
}

const SPAN_MEMBERSHIP_TOL: f64 = 1e-10;
/// Scale-free guard for the residual autoregression denominators.
const DEGENERACY_GUARD: f64 = 1e-24;

fn in_span(basis: &DMatrix<f64>, y: &DVector<f64>) -> bool {
    let norm = y.norm();
    if norm == 0.0 {
        return true;
    }
    linalg::project_off_vec(basis, y).norm() <= SPAN_MEMBERSHIP_TOL * norm
}

impl EstimatorSpec {
    pub fn new(design: DesignProblem, kind: OmegaKind) -> Result<Self> {
        let n = design.n();
        let mut pre = Precomp {
            cumsum_ax_basis: None,
            vx_pinv: None,
            rxvxr: None,
            augmented: None,
            bv_levels: None,
        };
        let (flags, label) = match &kind {
            OmegaKind::Kernel { w, name } => {
                validate_weight(w, n)?;
                let pwp = project_both_sides(&design, w);
                let scale = w.norm().max(1.0);
                let zero = pwp.norm() <= 1e-12 * scale;
                let (lmin, lmax) = sym_eig_range(&pwp);
                let nnd = lmin >= -1e-10 * lmax.abs().max(1.0);
                (
                    EstimatorFlags {
                        n_is_empty: true,
                        omega_nnd_everywhere: nnd && !zero,
                        omega_identically_zero: zero,
                        satisfies_sign_condition: !zero,
                        exceptional_set: ExceptionalSet::Empty,
                    },
                    format!("kernel:{name}"),
                )
            }
            OmegaKind::Eicker { w } => {
                validate_weight(w, n)?;
                let (lmin, _) = sym_eig_range(w);
                if lmin <= 0.0 {
                    return Err(Error::InvalidInput(
                        "weight matrix must be positive definite".into(),
                    ));
                }
                (
                    EstimatorFlags {
                        n_is_empty: true,
                        omega_nnd_everywhere: true,
                        omega_identically_zero: false,
                        satisfies_sign_condition: true,
                        exceptional_set: ExceptionalSet::Empty,
                    },
                    "eicker".to_string(),
                )
            }
            OmegaKind::AmPrewhitened => (
                EstimatorFlags {
                    n_is_empty: false,
                    omega_nnd_everywhere: false,
                    omega_identically_zero: false,
                    satisfies_sign_condition: true,
                    exceptional_set: ExceptionalSet::PrewhitenSet,
                },
                "am".to_string(),
            ),
            OmegaKind::Vogelsang { c, u, variant, v } => {
                validate_u(&design, u)?;
                pre.augmented = Some(augmented_block(&design, u)?);
                let a = running_sum_matrix(n);
                pre.cumsum_ax_basis = Some(linalg::orthonormal_basis(&(&a * design.x())));
                let vx = match v {
                    VKind::RunningSum => &a * design.x(),
                    VKind::Identity => design.x().clone(),
                };
                let vx_pinv = pinv(&vx)?;
                let xvvx_inv = (vx.transpose() * &vx)
                    .try_inverse()
                    .ok_or_else(|| Error::Numerical("X'V'VX not invertible".into()))?;
                pre.rxvxr =
                    Some(design.r_mat() * &xvvx_inv * design.r_mat().transpose());
                pre.vx_pinv = Some(vx_pinv);
                let tag = format!(
                    "vogelsang:c={c},i={},V={}",
                    match variant {
                        JVariant::J1 => 1,
                        JVariant::J2 => 2,
                    },
                    match v {
                        VKind::RunningSum => "A",
                        VKind::Identity => "I",
                    }
                );
                (
                    EstimatorFlags {
                        n_is_empty: false,
                        omega_nnd_everywhere: false,
                        omega_identically_zero: false,
                        satisfies_sign_condition: true,
                        exceptional_set: ExceptionalSet::SpanXU,
                    },
                    tag,
                )
            }
            OmegaKind::BvFixed { w, name, c, u } => {
                validate_weight(w, n)?;
                if let Some(u) = u {
                    validate_u(&design, u)?;
                    pre.augmented = Some(augmented_block(&design, u)?);
                }
                let pwp = project_both_sides(&design, w);
                let zero = pwp.norm() <= 1e-12 * w.norm().max(1.0);
                (
                    EstimatorFlags {
                        n_is_empty: false,
                        omega_nnd_everywhere: false,
                        omega_identically_zero: zero,
                        satisfies_sign_condition: !zero,
                        exceptional_set: if u.is_some() {
                            ExceptionalSet::SpanXU
                        } else {
                            ExceptionalSet::SpanX
                        },
                    },
                    format!("bvfixed:{name}:c={c}"),
                )
            }
            OmegaKind::BvDataDriven { a, abar, h, p, u } => {
                if a.len() != abar.len() + 1 {
                    return Err(Error::InvalidInput(format!(
                        "step function needs one more weight than thresholds, got {} weights \
                         and {} thresholds",
                        a.len(),
                        abar.len()
                    )));
                }
                if a.iter().any(|v| *v <= 0.0) {
                    return Err(Error::InvalidInput(
                        "step-function weights must be positive".into(),
                    ));
                }
                if abar.is_empty() {
                    return Err(Error::InvalidInput(
                        "the data-driven rule needs at least one threshold".into(),
                    ));
                }
                if h.last().map(|v| *v == 0.0).unwrap_or(true) || h.len() < 2 {
                    return Err(Error::InvalidInput(
                        "critical-value polynomial needs a nonzero leading coefficient \
                         and degree ≥ 1"
                            .into(),
                    ));
                }
                if p.last().map(|v| *v == 0.0).unwrap_or(true) || p.len() < 2 {
                    return Err(Error::InvalidInput(
                        "tuning polynomial needs a nonzero leading coefficient and degree ≥ 1"
                            .into(),
                    ));
                }
                if let Some(u) = u {
                    validate_u(&design, u)?;
                    pre.augmented = Some(augmented_block(&design, u)?);
                }
                pre.bv_levels = Some(bv_levels(&design, a, abar, h, p)?);
                let set = if u.is_some() { ExceptionalSet::BvSetU } else { ExceptionalSet::BvSet };
                (
                    EstimatorFlags {
                        n_is_empty: false,
                        omega_nnd_everywhere: false,
                        omega_identically_zero: false,
                        satisfies_sign_condition: true,
                        exceptional_set: set,
                    },
                    "bvdd".to_string(),
                )
            }
        };
        Ok(EstimatorSpec { design, kind, flags, label, pre })
    }

    pub fn flags(&self) -> &EstimatorFlags {
        &self.flags
    }

    pub fn kind(&self) -> &OmegaKind {
        &self.kind
    }

    /// For the scalar families Ω̌ = (y'Qy)·R(X'X)⁻¹R'·(positive factor), the
    /// matrix Q whose quadratic form carries the sign of Ω̌.
    pub fn sign_matrix(&self) -> Option<DMatrix<f64>> {
        match &self.kind {
            OmegaKind::Kernel { w, .. } | OmegaKind::BvFixed { w, .. } => {
                Some(project_both_sides(&self.design, w) / self.design.n() as f64)
            }
            OmegaKind::Eicker { w } => Some(
                project_both_sides(&self.design, w)
                    / (self.design.n() - self.design.k()) as f64,
            ),
            _ => None,
        }
    }

    /// For estimators whose Ω̌ is the scalar y'Qy times the constant matrix
    /// R(X'X)⁻¹R' with no data-dependent factor, (Q, R(X'X)⁻¹R'); these admit
    /// the exact rejection-probability path.
    pub fn scalar_family(&self) -> Option<(DMatrix<f64>, DMatrix<f64>)> {
        match &self.kind {
            OmegaKind::Kernel { .. } | OmegaKind::Eicker { .. } => {
                Some((self.sign_matrix().unwrap(), self.design.rxxr().clone()))
            }
            _ => None,
        }
    }

    /// Estimators that are positive definite off their exceptional set by
    /// construction.
    pub fn positive_definite_off_n(&self) -> bool {
        matches!(
            self.kind,
            OmegaKind::AmPrewhitened
                | OmegaKind::Vogelsang { .. }
                | OmegaKind::BvDataDriven { .. }
        )
    }

    /// The finite set of (bandwidth fraction, critical value) pairs the
    /// data-driven rule can select; `None` for every other estimator.
    pub fn data_driven_levels(&self) -> Option<Vec<(f64, f64)>> {
        let levels = self.pre.bv_levels.as_ref()?;
        Some(
            levels
                .b_values
                .iter()
                .zip(&levels.crit_values)
                .map(|(&b, &c)| (b, c))
                .collect(),
        )
    }

    /// The data-driven critical value C(y) = Σ h_i b(ρ̂(y))^i of the
    /// data-driven rule, with the convention C(y) = 0 on the degenerate set;
    /// `None` for every other estimator.
    pub fn data_driven_critical_value(&self, y: &DVector<f64>) -> Option<f64> {
        let levels = self.pre.bv_levels.as_ref()?;
        let uhat = self.design.residuals(y);
        match rho_hat(&uhat, y) {
            None => Some(0.0),
            Some(rho) => {
                let cell = levels.cell(rho);
                Some(levels.crit_values[cell])
            }
        }
    }

    /// Numerical evidence for N* = span(X): Ω̌ must be nonsingular at
    /// `trials` random points off span(X) and vanish (or be undefined) on
    /// span(X). Evidence, not proof.
    pub fn nstar_equals_span_x(&self, trials: usize, seed: u64) -> bool {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let n = self.design.n();
        for _ in 0..trials {
            let y = linalg::standard_normal_vector(&mut rng, n);
            match self.evaluate(&y) {
                Evaluation::InExceptionalSet => return false,
                Evaluation::Regular { omega, .. } => {
                    if omega_is_singular(&omega) {
                        return false;
                    }
                }
            }
        }
        // on span(X): either exceptional or Ω̌ = 0
        for _ in 0..trials.min(32) {
            let coef = linalg::standard_normal_vector(&mut rng, self.design.k());
            let y = self.design.x() * coef;
            match self.evaluate(&y) {
                Evaluation::InExceptionalSet => {}
                Evaluation::Regular { omega, .. } => {
                    if omega.norm() > 1e-10 {
                        return false;
                    }
                }
            }
        }
        true
    }
}

/// Relative-determinant singularity decision used for the N* branch; the
/// threshold is scaled by the row norms so that the equivariance
/// Ω̌(δy) = δ²Ω̌(y) leaves the decision invariant.
pub fn omega_is_singular(omega: &DMatrix<f64>) -> bool {
    let q = omega.nrows();
    let mut scale = 1.0f64;
    for i in 0..q {
        scale *= omega.row(i).norm();
    }
    let det = omega.clone().determinant();
    det.abs() <= 1e-12 * scale
}

fn validate_weight(w: &DMatrix<f64>, n: usize) -> Result<()> {
    if w.nrows() != n || w.ncols() != n {
        return Err(Error::InvalidInput(format!(
            "weight matrix must be {n}×{n}, got {}×{}",
            w.nrows(),
            w.ncols()
        )));
    }
    if linalg::relative_asymmetry(w) > 1e-12 {
        return Err(Error::InvalidInput("weight matrix must be symmetric".into()));
    }
    Ok(())
}

fn project_both_sides(design: &DesignProblem, w: &DMatrix<f64>) -> DMatrix<f64> {
    let basis = SubspaceBasis::new(design.x_basis().clone())
        .expect("design basis is orthonormal by construction");
    linalg::symmetrize(&basis.project_off(&basis.project_off(w).transpose()))
}

/// OLS coefficient vector and residuals.
pub fn ols(design: &DesignProblem, y: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
    (design.beta_ols(y), design.residuals(y))
}

// residuals with the projection noise floor snapped to exact zero, so data
// on span(X) lands on the zero branch of the statistic instead of producing
// a noise-over-noise quotient
fn snapped_ols(design: &DesignProblem, y: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
    let (beta, uhat) = ols(design, y);
    if uhat.norm() <= 1e-12 * y.norm() {
        (beta, DVector::zeros(y.len()))
    } else {
        (beta, uhat)
    }
}

/// The long-run-variance quadratic form n⁻¹û'Wû.
pub fn lrv(w: &DMatrix<f64>, residuals: &DVector<f64>) -> Result<f64> {
    let n = residuals.len();
    if w.nrows() != n || w.ncols() != n {
        return Err(Error::InvalidInput(format!(
            "weight matrix is {}×{}, residual vector has length {n}",
            w.nrows(),
            w.ncols()
        )));
    }
    Ok((residuals.transpose() * w * residuals)[(0, 0)] / n as f64)
}

/// The equivalent autocovariance-sum form Σ_{|i|<n} κ(|i|/M) γ̂_i of a kernel
/// long-run-variance estimator; used as the cross-checking oracle.
pub fn lrv_kernel_sum(name: KernelName, bandwidth: f64, residuals: &DVector<f64>) -> f64 {
    let n = residuals.len();
    let mut total = 0.0;
    for lag in 0..n {
        let gamma: f64 = (lag..n)
            .map(|j| residuals[j] * residuals[j - lag])
            .sum::<f64>()
            / n as f64;
        let weight = kernel_value(name, lag as f64 / bandwidth);
        total += if lag == 0 { weight * gamma } else { 2.0 * weight * gamma };
    }
    total
}

fn rho_hat(uhat: &DVector<f64>, y: &DVector<f64>) -> Option<f64> {
    let n = uhat.len();
    let denom: f64 = (0..n - 1).map(|i| uhat[i] * uhat[i]).sum();
    if denom <= DEGENERACY_GUARD * y.norm_squared() {
        return None;
    }
    let num: f64 = (1..n).map(|i| uhat[i] * uhat[i - 1]).sum();
    Some(num / denom)
}

fn bv_levels(
    design: &DesignProblem,
    a: &[f64],
    abar: &[f64],
    h: &[f64],
    p: &[f64],
) -> Result<BvLevels> {
    let mut thresholds = abar.to_vec();
    thresholds.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let n = design.n();
    // b in cell t (ρ̂ below thresholds[t..]) is a₀ plus the weights of the
    // thresholds already crossed; order a alongside the sorted thresholds
    let mut order: Vec<usize> = (0..abar.len()).collect();
    order.sort_by(|&i, &j| abar[i].partial_cmp(&abar[j]).unwrap());
    let mut b_values = Vec::with_capacity(thresholds.len() + 1);
    let mut acc = a[0];
    b_values.push(acc);
    for &idx in &order {
        acc += a[idx + 1];
        b_values.push(acc);
    }
    let poly = |coeffs: &[f64], b: f64| -> f64 {
        coeffs.iter().rev().fold(0.0, |s, &c| s * b + c)
    };
    let mut w_matrices = Vec::new();
    let mut c_values = Vec::new();
    let mut crit_values = Vec::new();
    for &b in &b_values {
        let bandwidth = (b * n as f64).max(2.0);
        w_matrices.push(kernel_weight_matrix(KernelName::Daniell, bandwidth, n)?);
        c_values.push(poly(p, b));
        crit_values.push(poly(h, b));
    }
    // does ρ̂ vary off span(X)? sampled decision at tolerance 1e-10
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5eed_b5d0);
    let mut seen: Option<f64> = None;
    let mut nonconstant = false;
    for _ in 0..64 {
        let y = linalg::standard_normal_vector(&mut rng, n);
        if let Some(r) = rho_hat(&design.residuals(&y), &y) {
            match seen {
                None => seen = Some(r),
                Some(prev) => {
                    if (prev - r).abs() > 1e-10 {
                        nonconstant = true;
                        break;
                    }
                }
            }
        }
    }
    Ok(BvLevels {
        thresholds,
        b_values,
        w_matrices,
        c_values,
        crit_values,
        rho_nonconstant: nonconstant,
    })
}

impl BvLevels {
    fn cell(&self, rho: f64) -> usize {
        self.thresholds.iter().filter(|&&t| rho >= t).count()
    }

    fn on_threshold(&self, rho: f64) -> bool {
        self.thresholds.iter().any(|&t| (rho - t).abs() <= 1e-12)
    }
}

impl CovarianceEstimator for EstimatorSpec {
    fn design(&self) -> &DesignProblem {
        &self.design
    }

    fn label(&self) -> String {
        self.label.clone()
    }

    fn evaluate(&self, y: &DVector<f64>) -> Evaluation {
        let design = &self.design;
        let n = design.n();
        match &self.kind {
            OmegaKind::Kernel { w, .. } => {
                let (beta, uhat) = snapped_ols(design, y);
                let omega_scalar = lrv(w, &uhat).expect("dimensions fixed at construction");
                Evaluation::Regular { beta, omega: design.rxxr() * omega_scalar }
            }
            OmegaKind::Eicker { w } => {
                let (beta, uhat) = snapped_ols(design, y);
                let scale =
                    (uhat.transpose() * w * &uhat)[(0, 0)] / (n - design.k()) as f64;
                Evaluation::Regular { beta, omega: design.rxxr() * scale }
            }
            OmegaKind::AmPrewhitened => {
                let (beta, uhat) = snapped_ols(design, y);
                let d1: f64 = (0..n - 1).map(|i| uhat[i] * (uhat[i + 1] - uhat[i])).sum();
                let scale = uhat.norm_squared();
                if d1.abs() <= DEGENERACY_GUARD * scale.max(1e-300) || scale == 0.0 {
                    return Evaluation::InExceptionalSet;
                }
                let rho = rho_hat(&uhat, y).expect("d1 guard implies a valid denominator");
                let vhat =
                    DVector::from_fn(n - 1, |i, _| uhat[i + 1] - rho * uhat[i]);
                let d2: f64 =
                    (0..n.saturating_sub(2)).map(|i| vhat[i] * (vhat[i + 1] - vhat[i])).sum();
                let vscale = vhat.norm_squared();
                if d2.abs() <= DEGENERACY_GUARD * vscale.max(1e-300) || vscale == 0.0 {
                    return Evaluation::InExceptionalSet;
                }
                let vnum: f64 = (1..n - 1).map(|i| vhat[i] * vhat[i - 1]).sum();
                let vden: f64 = (0..n - 2).map(|i| vhat[i] * vhat[i]).sum();
                let rho_tilde = vnum / vden;
                let m_am = am_bandwidth(n, rho_tilde);
                let quad = if m_am == 0.0 {
                    vhat.norm_squared()
                } else {
                    let mut acc = 0.0;
                    for i in 0..n - 1 {
                        for j in 0..n - 1 {
                            acc += kernel_value(
                                KernelName::QuadraticSpectral,
                                i.abs_diff(j) as f64 / m_am,
                            ) * vhat[i]
                                * vhat[j];
                        }
                    }
                    acc
                };
                let omega_scalar = quad / ((1.0 - rho) * (1.0 - rho) * n as f64);
                Evaluation::Regular { beta, omega: design.rxxr() * omega_scalar }
            }
            OmegaKind::Vogelsang { c, variant, v, .. } => {
                let aug = self.pre.augmented.as_ref().expect("built at construction");
                if in_span(&aug.z_basis, y) {
                    return Evaluation::InExceptionalSet;
                }
                let ay = cumulative_sums(y);
                let pinv = self.pre.vx_pinv.as_ref().unwrap();
                let beta = match v {
                    VKind::RunningSum => pinv * &ay,
                    VKind::Identity => pinv * y,
                };
                let s2_ax = residual_ms(self.pre.cumsum_ax_basis.as_ref().unwrap(), &ay, n);
                let j = match variant {
                    JVariant::J1 => j1_statistic(aug, y, n),
                    JVariant::J2 => j2_statistic(aug, &ay, n),
                };
                let nf = n as f64;
                let npow = match v {
                    VKind::RunningSum => nf,
                    VKind::Identity => 1.0 / nf,
                };
                let omega =
                    self.pre.rxvxr.as_ref().unwrap() * (npow * s2_ax * (c * j).exp());
                Evaluation::Regular { beta, omega }
            }
            OmegaKind::BvFixed { w, c, u, .. } => {
                let in_n = match (u, &self.pre.augmented) {
                    (Some(_), Some(aug)) => in_span(&aug.z_basis, y),
                    _ => in_span(design.x_basis(), y),
                };
                if in_n {
                    return Evaluation::InExceptionalSet;
                }
                let (beta, uhat) = ols(design, y);
                let omega_scalar = lrv(w, &uhat).expect("dimensions fixed at construction");
                let factor = match &self.pre.augmented {
                    Some(aug) => (c * j1_statistic(aug, y, n)).exp(),
                    None => {
                        let cum = cumulative_sums(&uhat);
                        let ratio = cum.norm_squared() / uhat.norm_squared();
                        (c * ratio / (n as f64 * n as f64)).exp()
                    }
                };
                Evaluation::Regular { beta, omega: design.rxxr() * (omega_scalar * factor) }
            }
            OmegaKind::BvDataDriven { u, .. } => {
                let levels = self.pre.bv_levels.as_ref().expect("built at construction");
                let in_base = match (u, &self.pre.augmented) {
                    (Some(_), Some(aug)) => in_span(&aug.z_basis, y),
                    _ => in_span(design.x_basis(), y),
                };
                if in_base {
                    return Evaluation::InExceptionalSet;
                }
                let (beta, uhat) = ols(design, y);
                let rho = match rho_hat(&uhat, y) {
                    None => return Evaluation::InExceptionalSet,
                    Some(r) => r,
                };
                if levels.rho_nonconstant && levels.on_threshold(rho) {
                    return Evaluation::InExceptionalSet;
                }
                let cell = levels.cell(rho);
                let omega_scalar = lrv(&levels.w_matrices[cell], &uhat)
                    .expect("dimensions fixed at construction");
                let c = levels.c_values[cell];
                let factor = match &self.pre.augmented {
                    Some(aug) => (c * j1_statistic(aug, y, n)).exp(),
                    None => {
                        let cum = cumulative_sums(&uhat);
                        let ratio = cum.norm_squared() / uhat.norm_squared();
                        (c * ratio / (n as f64 * n as f64)).exp()
                    }
                };
                Evaluation::Regular { beta, omega: design.rxxr() * (omega_scalar * factor) }
            }
        }
    }
}

/// The plug-in bandwidth 1.3221·(4n ρ̃²/(1−ρ̃)⁴)^{1/5} of the prewhitened
/// estimator.
pub fn am_bandwidth(n: usize, rho_tilde: f64) -> f64 {
    1.3221 * (n as f64 * 4.0 * rho_tilde * rho_tilde / (1.0 - rho_tilde).powi(4)).powf(0.2)
}

fn cumulative_sums(u: &DVector<f64>) -> DVector<f64> {
    let mut acc = 0.0;
    DVector::from_iterator(
        u.len(),
        u.iter().map(|&v| {
            acc += v;
            acc
        }),
    )
}

fn residual_ms(basis: &DMatrix<f64>, v: &DVector<f64>, n: usize) -> f64 {
    let captured = basis.transpose() * v;
    ((v.norm_squared() - captured.norm_squared()).max(0.0)) / n as f64
}

fn j1_statistic(aug: &AugmentedBlock, y: &DVector<f64>, n: usize) -> f64 {
    let coef = &aug.pinv_z * y;
    let tail = coef.rows(coef.len() - aug.m, aug.m).into_owned();
    let s2 = residual_ms(&aug.z_basis, y, n);
    let quad = (tail.transpose() * &aug.g_inv_gzg * &tail)[(0, 0)];
    quad / (s2 * n as f64)
}

fn j2_statistic(aug: &AugmentedBlock, ay: &DVector<f64>, n: usize) -> f64 {
    let coef = &aug.pinv_az * ay;
    let tail = coef.rows(coef.len() - aug.m, aug.m).into_owned();
    let s2 = residual_ms(&aug.az_basis, ay, n);
    let quad = (tail.transpose() * &aug.g_inv_gazg * &tail)[(0, 0)];
    quad / (s2 * n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::polynomial_design;
    use crate::linalg::standard_normal_vector;
    use crate::numerics::replication_rng;
    use approx::assert_abs_diff_eq;

    fn trend_design(n: usize) -> DesignProblem {
        DesignProblem::new(
            polynomial_design(n, 2, None).unwrap(),
            DMatrix::from_row_slice(1, 2, &[0.0, 1.0]),
            DVector::from_element(1, 0.0),
        )
        .unwrap()
    }

    fn spec(design: &DesignProblem, kind: OmegaKind) -> EstimatorSpec {
        EstimatorSpec::new(design.clone(), kind).unwrap()
    }

    fn bartlett_spec(design: &DesignProblem, bw: f64) -> EstimatorSpec {
        let w = kernel_weight_matrix(KernelName::Bartlett, bw, design.n()).unwrap();
        spec(design, OmegaKind::Kernel { w, name: format!("bartlett:M={bw}") })
    }

    #[test]
    fn ols_exact_cases() {
        let design = trend_design(8);
        // y in the column span recovers the coefficients with zero residual
        let beta_true = DVector::from_vec(vec![1.5, -0.25]);
        let y = design.x() * &beta_true;
        let (beta, resid) = ols(&design, &y);
        assert!((beta - &beta_true).norm() < 1e-12);
        assert!(resid.norm() < 1e-12);

        // y orthogonal to the span passes through untouched
        let raw = standard_normal_vector(&mut replication_rng(1, 0), 8);
        let y_perp = design.project_off_x(&raw);
        let (beta, resid) = ols(&design, &y_perp);
        assert!(beta.norm() < 1e-12);
        assert!((resid - y_perp).norm() < 1e-12);
    }

    #[test]
    fn ols_matches_normal_equations() {
        let design = trend_design(8);
        let y = standard_normal_vector(&mut replication_rng(2, 0), 8);
        let (beta, resid) = ols(&design, &y);
        let xtx = design.x().transpose() * design.x();
        let oracle = xtx.try_inverse().unwrap() * design.x().transpose() * &y;
        assert!((beta - oracle).norm() < 1e-10);
        // residuals orthogonal to the regressors
        assert!((design.x().transpose() * resid).norm() < 1e-10);
    }

    #[test]
    fn lrv_identity_and_zero() {
        let u = DVector::from_vec(vec![1.0, -2.0, 3.0]);
        let w = DMatrix::identity(3, 3);
        assert_abs_diff_eq!(lrv(&w, &u).unwrap(), u.norm_squared() / 3.0, epsilon = 1e-14);
        assert_eq!(lrv(&w, &DVector::zeros(3)).unwrap(), 0.0);
        assert!(lrv(&DMatrix::identity(2, 2), &u).is_err());
    }

    #[test]
    fn lrv_matches_autocovariance_sum_form() {
        let design = trend_design(10);
        let y = standard_normal_vector(&mut replication_rng(3, 0), 10);
        let (_, uhat) = ols(&design, &y);
        let w = kernel_weight_matrix(KernelName::Bartlett, 3.0, 10).unwrap();
        let direct = lrv(&w, &uhat).unwrap();
        let summed = lrv_kernel_sum(KernelName::Bartlett, 3.0, &uhat);
        assert_abs_diff_eq!(direct, summed, epsilon = 1e-12);
    }

    #[test]
    fn kernel_omega_composes_lrv_with_the_fixed_matrix() {
        let design = trend_design(9);
        let est = bartlett_spec(&design, 3.0);
        let y = standard_normal_vector(&mut replication_rng(4, 0), 9);
        match est.evaluate(&y) {
            Evaluation::Regular { omega, .. } => {
                let (_, uhat) = ols(&design, &y);
                let w = kernel_weight_matrix(KernelName::Bartlett, 3.0, 9).unwrap();
                let expect = design.rxxr() * lrv(&w, &uhat).unwrap();
                assert!((omega - expect).norm() < 1e-12);
            }
            _ => panic!("unexpected exceptional point"),
        }
    }

    #[test]
    fn eicker_identity_is_the_classical_denominator() {
        let design = trend_design(9);
        let est = spec(&design, OmegaKind::Eicker { w: DMatrix::identity(9, 9) });
        let y = standard_normal_vector(&mut replication_rng(5, 0), 9);
        match est.evaluate(&y) {
            Evaluation::Regular { omega, .. } => {
                let (_, uhat) = ols(&design, &y);
                let expect = design.rxxr() * (uhat.norm_squared() / 7.0);
                assert!((omega - expect).norm() < 1e-12);
            }
            _ => panic!("unexpected exceptional point"),
        }
        // on span(X) the weight quadratic vanishes
        let y0 = design.x() * DVector::from_vec(vec![2.0, 1.0]);
        match est.evaluate(&y0) {
            Evaluation::Regular { omega, .. } => assert!(omega.norm() < 1e-12),
            _ => panic!("identity-weight member has an empty exceptional set"),
        }
    }

    #[test]
    fn eicker_rejects_indefinite_weights() {
        let design = trend_design(6);
        let mut w = DMatrix::identity(6, 6);
        w[(0, 0)] = -1.0;
        assert!(EstimatorSpec::new(design, OmegaKind::Eicker { w }).is_err());
    }

    #[test]
    fn eicker_is_nonnegative_definite_on_random_data() {
        let design = trend_design(9);
        let est = spec(&design, OmegaKind::Eicker { w: DMatrix::identity(9, 9) });
        let mut rng = replication_rng(6, 0);
        for _ in 0..100 {
            let y = standard_normal_vector(&mut rng, 9);
            if let Evaluation::Regular { omega, .. } = est.evaluate(&y) {
                assert!(omega[(0, 0)] >= 0.0);
            }
        }
    }

    #[test]
    fn am_bandwidth_closed_form() {
        // 1.3221·(100·4·0.25/0.5⁴)^{1/5} = 1.3221·1600^{0.2}
        assert_abs_diff_eq!(am_bandwidth(100, 0.5), 5.782135991841632, epsilon = 1e-9);
        assert_eq!(am_bandwidth(50, 0.0), 0.0);
    }

    #[test]
    fn am_estimator_is_positive_off_its_exceptional_set() {
        let design = DesignProblem::new(
            polynomial_design(30, 2, None).unwrap(),
            DMatrix::from_row_slice(1, 2, &[0.0, 1.0]),
            DVector::from_element(1, 0.0),
        )
        .unwrap();
        let est = spec(&design, OmegaKind::AmPrewhitened);
        let mut rng = replication_rng(7, 0);
        for _ in 0..50 {
            let y = standard_normal_vector(&mut rng, 30);
            match est.evaluate(&y) {
                Evaluation::Regular { omega, .. } => assert!(omega[(0, 0)] > 0.0),
                Evaluation::InExceptionalSet => {
                    panic!("continuous draws should not hit the degenerate set")
                }
            }
        }
        // span(X) members are inside the set
        let y0 = design.x() * DVector::from_vec(vec![1.0, 1.0]);
        assert!(est.evaluate(&y0).is_exceptional());
    }

    #[test]
    fn running_sum_matrix_shape() {
        let a = running_sum_matrix(3);
        let expect =
            DMatrix::from_row_slice(3, 3, &[1., 0., 0., 1., 1., 0., 1., 1., 1.]);
        assert_eq!(a, expect);
    }

    #[test]
    fn vogelsang_zero_tuning_drops_the_exponential() {
        let design = trend_design(12);
        let u = DMatrix::from_fn(12, 1, |i, _| ((i + 1) as f64).powi(2));
        let est0 = spec(
            &design,
            OmegaKind::Vogelsang {
                c: 0.0,
                u: u.clone(),
                variant: JVariant::J1,
                v: VKind::Identity,
            },
        );
        let y = standard_normal_vector(&mut replication_rng(8, 0), 12);
        let omega0 = match est0.evaluate(&y) {
            Evaluation::Regular { omega, .. } => omega,
            _ => panic!("off the span"),
        };
        // hand-composed: n^{-1}·s²_{A,X}(y)·R(X'X)⁻¹R'
        let a = running_sum_matrix(12);
        let ay = &a * &y;
        let ax = &a * design.x();
        let basis = crate::linalg::orthonormal_basis(&ax);
        let s2 = (ay.norm_squared()
            - (basis.transpose() * &ay).norm_squared())
            / 12.0;
        let expect = design.rxxr() * (s2 / 12.0);
        assert!((omega0 - &expect).norm() < 1e-10 * expect.norm());
    }

    #[test]
    fn vogelsang_composite_formula_at_fixed_seed() {
        let design = trend_design(12);
        let u = DMatrix::from_fn(12, 1, |i, _| ((i + 1) as f64).powi(2));
        let c = 1.0;
        let est = spec(
            &design,
            OmegaKind::Vogelsang { c, u: u.clone(), variant: JVariant::J1, v: VKind::Identity },
        );
        let y = standard_normal_vector(&mut replication_rng(9, 0), 12);
        let omega = match est.evaluate(&y) {
            Evaluation::Regular { omega, .. } => omega,
            _ => panic!("off the span"),
        };
        // sub-oracles
        let n = 12f64;
        let a = running_sum_matrix(12);
        let ay = &a * &y;
        let ax = &a * design.x();
        let ax_basis = crate::linalg::orthonormal_basis(&ax);
        let s2_ax =
            (ay.norm_squared() - (ax_basis.transpose() * &ay).norm_squared()) / n;
        let z = stack(design.x(), &u);
        let zz_inv = (z.transpose() * &z).try_inverse().unwrap();
        let coef = &zz_inv * z.transpose() * &y;
        let tail = coef.rows(2, 1).into_owned();
        let z_basis = crate::linalg::orthonormal_basis(&z);
        let s2_z = (y.norm_squared() - (z_basis.transpose() * &y).norm_squared()) / n;
        let gzg = zz_inv.view((2, 2), (1, 1)).into_owned();
        let j1 = (tail[0] * tail[0] / gzg[(0, 0)]) / (s2_z * n);
        let expect = design.rxxr() * ((s2_ax / n) * (c * j1).exp());
        let diff = (&omega - &expect).norm();
        assert!(diff < 1e-10 * expect.norm(), "{omega} vs {expect}");
    }

    #[test]
    fn vogelsang_flags_span_xu() {
        let design = trend_design(12);
        let u = DMatrix::from_fn(12, 1, |i, _| ((i + 1) as f64).powi(2));
        let est = spec(
            &design,
            OmegaKind::Vogelsang { c: 1.0, u: u.clone(), variant: JVariant::J2, v: VKind::RunningSum },
        );
        let inside = design.x() * DVector::from_vec(vec![1.0, -2.0]) + &u * 0.5;
        assert!(est.evaluate(&inside).is_exceptional());
        assert_eq!(est.flags().exceptional_set, ExceptionalSet::SpanXU);
    }

    #[test]
    fn vogelsang_rejects_bad_augmenting_blocks() {
        let design = trend_design(8);
        // rank-deficient: U duplicates the trend column
        let dup = DMatrix::from_fn(8, 1, |i, _| (i + 1) as f64);
        assert!(EstimatorSpec::new(
            design.clone(),
            OmegaKind::Vogelsang { c: 1.0, u: dup, variant: JVariant::J1, v: VKind::Identity },
        )
        .is_err());
        // k + m = n
        let big = DMatrix::from_fn(8, 6, |i, j| ((i + 1) as f64).powi(j as i32 + 2));
        assert!(EstimatorSpec::new(
            design,
            OmegaKind::Vogelsang { c: 1.0, u: big, variant: JVariant::J1, v: VKind::Identity },
        )
        .is_err());
    }

    #[test]
    fn bv_fixed_with_zero_tuning_reduces_to_the_kernel_estimator() {
        let design = trend_design(10);
        let w = kernel_weight_matrix(KernelName::Daniell, 4.0, 10).unwrap();
        let fixed = spec(
            &design,
            OmegaKind::BvFixed { w: w.clone(), name: "daniell:M=4".into(), c: 0.0, u: None },
        );
        let plain = spec(&design, OmegaKind::Kernel { w, name: "daniell:M=4".into() });
        let y = standard_normal_vector(&mut replication_rng(10, 0), 10);
        match (fixed.evaluate(&y), plain.evaluate(&y)) {
            (
                Evaluation::Regular { omega: o1, .. },
                Evaluation::Regular { omega: o2, .. },
            ) => assert!((o1 - o2).norm() < 1e-14),
            _ => panic!("both members are regular off span(X)"),
        }
    }

    #[test]
    fn bv_fixed_exponential_factor_direct_evaluation() {
        let design = trend_design(10);
        let w = DMatrix::identity(10, 10);
        let c = 0.7;
        let est = spec(
            &design,
            OmegaKind::BvFixed { w: w.clone(), name: "identity".into(), c, u: None },
        );
        let y = standard_normal_vector(&mut replication_rng(11, 0), 10);
        let omega = match est.evaluate(&y) {
            Evaluation::Regular { omega, .. } => omega,
            _ => panic!("off the span"),
        };
        let (_, uhat) = ols(&design, &y);
        let cums = cumulative_sums(&uhat);
        let factor = (c * cums.norm_squared() / uhat.norm_squared() / 100.0).exp();
        let expect = design.rxxr() * (lrv(&w, &uhat).unwrap() * factor);
        assert!((omega - &expect).norm() < 1e-12 * expect.norm(), "mismatch");
        // the exponential factor cannot flip the sign
        assert!(factor > 0.0);
    }

    #[test]
    fn bv_step_function_and_critical_polynomial() {
        let design = trend_design(20);
        let est = spec(
            &design,
            OmegaKind::BvDataDriven {
                a: vec![0.1, 0.2],
                abar: vec![0.5],
                h: vec![1.0, 2.0],
                p: vec![0.5, 1.0],
                u: None,
            },
        );
        let levels = est.data_driven_levels().unwrap();
        // ρ̂ < 0.5 selects b = 0.1, C = 1 + 2·0.1; ρ̂ ≥ 0.5 selects b = 0.3,
        // C = 1 + 2·0.3 = 1.6
        assert_eq!(levels.len(), 2);
        assert_abs_diff_eq!(levels[0].0, 0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(levels[0].1, 1.2, epsilon = 1e-15);
        assert_abs_diff_eq!(levels[1].0, 0.3, epsilon = 1e-15);
        assert_abs_diff_eq!(levels[1].1, 1.6, epsilon = 1e-15);
    }

    #[test]
    fn bv_data_driven_validates_parameters() {
        let design = trend_design(20);
        let bad_a = OmegaKind::BvDataDriven {
            a: vec![0.1, -0.2],
            abar: vec![0.5],
            h: vec![1.0, 2.0],
            p: vec![0.5, 1.0],
            u: None,
        };
        assert!(EstimatorSpec::new(design.clone(), bad_a).is_err());
        let bad_h = OmegaKind::BvDataDriven {
            a: vec![0.1, 0.2],
            abar: vec![0.5],
            h: vec![1.0, 0.0],
            p: vec![0.5, 1.0],
            u: None,
        };
        assert!(EstimatorSpec::new(design, bad_h).is_err());
    }

    #[test]
    fn assumption5_passes_for_every_shipped_member() {
        let design = trend_design(24);
        let u = DMatrix::from_fn(24, 1, |i, _| ((i + 1) as f64).powi(2));
        let members: Vec<EstimatorSpec> = vec![
            bartlett_spec(&design, 6.0),
            spec(&design, OmegaKind::Eicker { w: DMatrix::identity(24, 24) }),
            spec(&design, OmegaKind::AmPrewhitened),
            spec(
                &design,
                OmegaKind::Vogelsang { c: 1.0, u: u.clone(), variant: JVariant::J1, v: VKind::RunningSum },
            ),
            spec(
                &design,
                OmegaKind::BvFixed {
                    w: kernel_weight_matrix(KernelName::Daniell, 5.0, 24).unwrap(),
                    name: "daniell:M=5".into(),
                    c: 1.0,
                    u: Some(u.clone()),
                },
            ),
            spec(
                &design,
                OmegaKind::BvDataDriven {
                    a: vec![0.3, 0.4],
                    abar: vec![0.5],
                    h: vec![1.5, 1.0, 0.5],
                    p: vec![0.5, 1.0],
                    u: None,
                },
            ),
        ];
        for est in &members {
            let report = check_assumption5(est, 100, 0xA5);
            assert!(
                report.passed && report.max_omega_residual < 1e-9,
                "{}: {report:?}",
                est.label()
            );
        }
    }

    #[test]
    fn assumption7_passes_for_kernel_and_eicker() {
        let design = trend_design(16);
        for est in [
            bartlett_spec(&design, 4.0),
            spec(&design, OmegaKind::Eicker { w: DMatrix::identity(16, 16) }),
        ] {
            let report = check_assumption7(&est, 100, 0xA7);
            assert!(report.passed, "{}: {report:?}", est.label());
        }
    }

    struct BrokenScaling(EstimatorSpec);
    impl CovarianceEstimator for BrokenScaling {
        fn design(&self) -> &DesignProblem {
            self.0.design()
        }
        fn label(&self) -> String {
            "planted-defect:linear-scaling".into()
        }
        fn evaluate(&self, y: &DVector<f64>) -> Evaluation {
            // deliberate defect: scales like ‖y‖·Ω̌ instead of Ω̌, breaking
            // the δ² law
            match self.0.evaluate(y) {
                Evaluation::Regular { beta, omega } => {
                    Evaluation::Regular { beta, omega: omega / y.norm().max(1e-12) }
                }
                other => other,
            }
        }
    }

    struct FixedNullDirection(EstimatorSpec);
    impl CovarianceEstimator for FixedNullDirection {
        fn design(&self) -> &DesignProblem {
            self.0.design()
        }
        fn label(&self) -> String {
            "planted-defect:null-direction".into()
        }
        fn evaluate(&self, y: &DVector<f64>) -> Evaluation {
            // deliberate defect: q = 1 variance pinned to zero, so the
            // inverse quadratic vanishes in the fixed direction
            match self.0.evaluate(y) {
                Evaluation::Regular { beta, omega } => {
                    Evaluation::Regular { beta, omega: omega * 0.0 }
                }
                other => other,
            }
        }
    }

    #[test]
    fn planted_defects_fail_their_checks() {
        let design = trend_design(16);
        let base = bartlett_spec(&design, 4.0);
        let broken = BrokenScaling(base.clone());
        assert!(!check_assumption5(&broken, 100, 0xA5).passed);
        let pinned = FixedNullDirection(base);
        assert!(!check_assumption7(&pinned, 100, 0xA7).passed);
    }

    #[test]
    fn nstar_matches_span_x_for_generic_trend_kernel() {
        let design = trend_design(16);
        let est = bartlett_spec(&design, 4.0);
        assert!(est.nstar_equals_span_x(64, 1));
    }
}

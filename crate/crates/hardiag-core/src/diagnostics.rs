//! The decision procedures: size-controllability verdicts, exact and
//! simulated rejection probabilities, lower bounds, size curves, power
//! degeneracy reports, and an empirical critical-value search.
//!
//! The verdict engine asks one geometric question: does a frequency
//! γ ∈ [0, π] exist with span(E_{n,ρ(γ)}(γ)) ⊆ span(X)? Only finitely many
//! candidates can qualify — the frequencies span(X) itself captures — so the
//! scan is exact. A hit, for an estimator with empty exceptional set and
//! everywhere-nonnegative-definite Ω̌, certifies that the null rejection
//! probability can be pushed to one over any covariance model containing
//! all AR(2) spectra, for every critical value. An exhausted scan under the
//! same estimator conditions (plus N* = span(X)) certifies the opposite:
//! size-controlling critical values exist at every level. Estimators outside
//! that scope degrade to an explicit quadratic-sign lower bound on size, and
//! a separate appendix rule covers one-restriction problems whose singular
//! directions land inside the exceptional set.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::covmodel::{boundary_member, CovModelGrid, SpectralModel};
use crate::design::{
    inclusion_residual, kappa, kappa_total, reduced_trig_basis, rho, singular_frequencies,
    trig_basis, DesignProblem, SubspaceBasis, INCLUSION_TOL,
};
use crate::estimators::{CovarianceEstimator, EstimatorSpec, Evaluation, OmegaKind, omega_is_singular};
use crate::linalg::{standard_normal_vector, sym_sqrt, symmetrize};
use crate::numerics::{
    mc_expectation, quadform_nonneg_prob, replication_rng, McConfig, QuadFormProblem,
};
use crate::teststat::{constant_on_affine, evaluate_statistic, ConstancyOutcome};
use crate::{Error, Result};

use std::f64::consts::PI;

/// Decision rule tags attached to verdicts, named by what each rule does.
pub mod rules {
    /// A captured frequency's trigonometric block lies inside span(X).
    pub const SPAN_INCLUSION: &str = "trig-span-inclusion";
    /// Every candidate frequency was scanned and rejected.
    pub const SCAN_EXHAUSTED: &str = "candidate-scan-exhausted";
    /// One-restriction branch: a singular direction sits inside the
    /// degenerate set of the statistic but not orthogonally to span(X).
    pub const Q1_EXCEPTIONAL_OVERLAP: &str = "q1-exceptional-span-overlap";
    /// Lower bound from the sign of a quadratic form in the limit direction.
    pub const SIGN_LOWER_BOUND: &str = "quadratic-sign-lower-bound";
    /// Positive definiteness off the exceptional set forces the bound one.
    pub const POSITIVITY: &str = "positive-definite-off-exceptional-set";
    /// Exact characteristic-function inversion of the sign probability.
    pub const SIGN_INVERSION: &str = "sign-probability-inversion";
    /// Degenerate all-ones weight: the variance estimator vanishes
    /// identically and the sign event is certain.
    pub const DEGENERATE_WEIGHT: &str = "degenerate-weight-convention";
    /// No rule with the required scope applied.
    pub const INCONCLUSIVE: &str = "insufficient-structure";
}

#[derive(Debug, Clone, PartialEq)]
pub enum VerdictOutcome {
    /// Size equals one for every critical value over any model containing
    /// the AR(2) spectra.
    SizeOne,
    /// A size-controlling critical value exists at every level.
    SizeControllable,
    /// Size is at least this value for every critical value.
    LowerBound { value: f64, std_error: Option<f64> },
    Inconclusive,
}

/// Witness data behind a verdict: the frequency, its escape order, the
/// singular-direction basis, and the span-inclusion residual.
#[derive(Debug, Clone)]
pub struct Witness {
    pub gamma: f64,
    pub escape_order: usize,
    pub basis: SubspaceBasis,
    pub inclusion_residual: f64,
}

#[derive(Debug, Clone)]
pub struct Verdict {
    pub outcome: VerdictOutcome,
    pub witness: Option<Witness>,
    pub rule: String,
    pub notes: Vec<String>,
}

/// One singular-direction generator: span(Π_{𝓛⊥}E_{n,ρ(γ)}(γ)) for 𝓛 the
/// null-restricted space.
#[derive(Debug, Clone)]
pub struct JSingleton {
    pub gamma: f64,
    pub escape_order: usize,
    pub basis: SubspaceBasis,
}

#[derive(Debug, Clone)]
pub struct JSingletons {
    pub members: Vec<JSingleton>,
    /// The richness assumption on the covariance model the membership
    /// statement relies on.
    pub family_note: String,
}

/// Candidate frequencies for the span scan: the frequencies captured by
/// span(X) plus the endpoints.
fn candidate_frequencies(dp: &DesignProblem) -> Result<Vec<f64>> {
    let x_span = SubspaceBasis::new(dp.x_basis().clone()).expect("orthonormal by construction");
    let profile = singular_frequencies(&x_span)?;
    let mut cands = profile.omegas;
    for endpoint in [0.0, PI] {
        if !cands.iter().any(|&w| (w - endpoint).abs() < 1e-9) {
            cands.push(endpoint);
        }
    }
    cands.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(cands)
}

/// Singular-direction generators over the candidate frequencies plus a user
/// grid, filtered by the dimension condition
/// κ(ω̄(𝓛), d̄(𝓛)) + κ(γ, 1) < n; the endpoint members are always
/// one-dimensional.
pub fn j_singletons(dp: &DesignProblem, extra: &[f64]) -> Result<JSingletons> {
    let l = dp.m0lin();
    let profile = singular_frequencies(l)?;
    let base = kappa_total(&profile);
    let mut gammas = candidate_frequencies(dp)?;
    for &g in extra {
        if (0.0..=PI).contains(&g) && !gammas.iter().any(|&w| (w - g).abs() < 1e-12) {
            gammas.push(g);
        }
    }
    gammas.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut members = Vec::new();
    for gamma in gammas {
        if base + kappa(gamma, 1) >= dp.n() {
            continue;
        }
        let order = rho(gamma, l)?;
        let block = reduced_trig_basis(dp.n(), order, gamma);
        let basis = SubspaceBasis::from_span(&l.project_off(&block));
        if basis.dim() == 0 {
            continue;
        }
        members.push(JSingleton { gamma, escape_order: order, basis });
    }
    Ok(JSingletons {
        members,
        family_note: "valid for covariance models containing all AR(2) spectra".into(),
    })
}

fn uses_ols_location(est: &EstimatorSpec) -> bool {
    !matches!(
        est.kind(),
        OmegaKind::Vogelsang { v: crate::estimators::VKind::RunningSum, .. }
    )
}

/// The size-controllability decision for one design/estimator pair.
///
/// A Monte Carlo configuration is needed only when the estimator falls back
/// to the lower-bound rule.
pub fn size_control_verdict(
    dp: &DesignProblem,
    est: &EstimatorSpec,
    mc: Option<&McConfig>,
) -> Result<Verdict> {
    let flags = *est.flags();
    let l = dp.m0lin();
    let x_span = SubspaceBasis::new(dp.x_basis().clone()).expect("orthonormal by construction");
    let mut notes = Vec::new();

    // scan: the inclusion span(E_{n,ρ(γ)}(γ)) ⊆ span(X) can only hold at
    // the finitely many frequencies span(X) captures
    let mut passing: Vec<Witness> = Vec::new();
    for gamma in candidate_frequencies(dp)? {
        let order = rho(gamma, l)?;
        let block = trig_basis(dp.n(), order, gamma);
        let resid = inclusion_residual(&x_span, &block);
        if resid <= INCLUSION_TOL {
            let basis = SubspaceBasis::from_span(&l.project_off(&block));
            passing.push(Witness {
                gamma,
                escape_order: order,
                basis,
                inclusion_residual: resid,
            });
        }
    }
    passing.sort_by(|a, b| a.inclusion_residual.partial_cmp(&b.inclusion_residual).unwrap());

    if let Some(best) = passing.first() {
        if flags.n_is_empty && flags.omega_nnd_everywhere {
            return Ok(Verdict {
                outcome: VerdictOutcome::SizeOne,
                witness: Some(best.clone()),
                rule: rules::SPAN_INCLUSION.into(),
                notes,
            });
        }
        notes.push(format!(
            "span inclusion holds at frequency {} but the estimator is outside the \
             empty-exceptional-set scope",
            best.gamma
        ));
    }

    // appendix branch: q = 1, OLS location, singular directions that live
    // inside the degenerate set of the statistic without being orthogonal
    // to span(X)
    if dp.q() == 1 && uses_ols_location(est) {
        if let Some(witness) = extension_rule(dp, est, &x_span)? {
            return Ok(Verdict {
                outcome: VerdictOutcome::SizeOne,
                witness: Some(witness),
                rule: rules::Q1_EXCEPTIONAL_OVERLAP.into(),
                notes,
            });
        }
    }

    if let Some(best) = passing.first() {
        if flags.satisfies_sign_condition {
            let cfg = match mc {
                Some(cfg) => *cfg,
                None => {
                    notes.push(
                        "lower-bound rule needs a Monte Carlo configuration; none supplied"
                            .into(),
                    );
                    return Ok(Verdict {
                        outcome: VerdictOutcome::Inconclusive,
                        witness: Some(best.clone()),
                        rule: rules::INCONCLUSIVE.into(),
                        notes,
                    });
                }
            };
            // every passing frequency bounds size from below; report the best
            let mut best_bound = f64::NEG_INFINITY;
            let mut best_se = None;
            let mut best_witness = best.clone();
            for w in &passing {
                let (value, se) = k_gamma(dp, est, w.gamma, &cfg)?;
                if value > best_bound {
                    best_bound = value;
                    best_se = Some(se);
                    best_witness = w.clone();
                }
            }
            return Ok(Verdict {
                outcome: VerdictOutcome::LowerBound { value: best_bound, std_error: best_se },
                witness: Some(best_witness),
                rule: rules::SIGN_LOWER_BOUND.into(),
                notes,
            });
        }
        return Ok(Verdict {
            outcome: VerdictOutcome::Inconclusive,
            witness: Some(best.clone()),
            rule: rules::INCONCLUSIVE.into(),
            notes,
        });
    }

    if flags.n_is_empty && flags.omega_nnd_everywhere {
        if est.nstar_equals_span_x(256, 0x5ca1ab1e) {
            notes.push(
                "degenerate set equals span(X): 256 sampled points off span(X) were \
                 nonsingular (evidence, not proof)"
                    .into(),
            );
            return Ok(Verdict {
                outcome: VerdictOutcome::SizeControllable,
                witness: None,
                rule: rules::SCAN_EXHAUSTED.into(),
                notes,
            });
        }
        notes.push("could not certify that the degenerate set equals span(X)".into());
    } else {
        notes.push("no candidate frequency passes and the estimator is outside the \
                    controllability scope"
            .into());
    }
    Ok(Verdict {
        outcome: VerdictOutcome::Inconclusive,
        witness: None,
        rule: rules::INCONCLUSIVE.into(),
        notes,
    })
}

fn extension_rule(
    dp: &DesignProblem,
    est: &EstimatorSpec,
    x_span: &SubspaceBasis,
) -> Result<Option<Witness>> {
    let singles = j_singletons(dp, &[])?;
    let mut rng = replication_rng(0xEC7E, 0);
    'member: for member in &singles.members {
        // not orthogonal to span(X)
        let overlap = x_span.vectors().transpose() * member.basis.vectors();
        if overlap.norm() <= 1e-9 * (member.basis.dim() as f64).sqrt() {
            continue;
        }
        // sampled points must avoid N yet land in the degenerate set
        for _ in 0..16 {
            let coord = standard_normal_vector(&mut rng, member.basis.dim());
            let point = member.basis.vectors() * coord;
            match est.evaluate(&point) {
                Evaluation::InExceptionalSet => continue 'member,
                Evaluation::Regular { omega, .. } => {
                    if !omega_is_singular(&omega) {
                        continue 'member;
                    }
                }
            }
        }
        let block = trig_basis(dp.n(), member.escape_order, member.gamma);
        return Ok(Some(Witness {
            gamma: member.gamma,
            escape_order: member.escape_order,
            basis: member.basis.clone(),
            inclusion_residual: inclusion_residual(x_span, &block),
        }));
    }
    Ok(None)
}

/// The lower bound K(γ) on size: the probability that the quadratic form
/// ξ̄_γ(x) = (Rβ̂(Ēx))'Ω̌⁻¹(𝐆)(Rβ̂(Ēx)) is nonnegative, over independent
/// 𝐆 ~ N(0, I_n) and x ~ N(0, I_{κ(γ,1)}), with ξ̄ = 0 whenever 𝐆 falls in
/// the degenerate set. Requires span(E_{n,ρ(γ)}(γ)) ⊆ span(X).
///
/// At the endpoint frequencies ξ̄_γ(x) = x²·ξ̄_γ(1), so the x-integral
/// collapses and only 𝐆 is simulated.
pub fn k_gamma(
    dp: &DesignProblem,
    est: &EstimatorSpec,
    gamma: f64,
    cfg: &McConfig,
) -> Result<(f64, f64)> {
    let l = dp.m0lin();
    let order = rho(gamma, l)?;
    let block = trig_basis(dp.n(), order, gamma);
    let x_span = SubspaceBasis::new(dp.x_basis().clone()).expect("orthonormal");
    let resid = inclusion_residual(&x_span, &block);
    if resid > INCLUSION_TOL {
        return Err(Error::InvalidInput(format!(
            "the bound needs span(E_{{n,ρ(γ)}}(γ)) ⊆ span(X); residual {resid:e} at γ = {gamma}"
        )));
    }
    let reduced = reduced_trig_basis(dp.n(), order, gamma);
    // v(x) = R β̂(Ē x): q×κ map
    let coeff_map = dp.r_mat()
        * DMatrix::from_fn(dp.k(), reduced.ncols(), |i, j| {
            dp.beta_ols(&reduced.column(j).into_owned())[i]
        });
    let endpoint = gamma == 0.0 || gamma == PI;
    let n = dp.n();
    let est_ref = &est;
    let map_ref = &coeff_map;
    let result = mc_expectation(
        move |rng| {
            let g = standard_normal_vector(rng, n);
            match est_ref.evaluate(&g) {
                Evaluation::InExceptionalSet => 1.0, // ξ̄ = 0 branch counts as ≥ 0
                Evaluation::Regular { omega, .. } => {
                    if omega_is_singular(&omega) {
                        return 1.0;
                    }
                    let v = if endpoint {
                        map_ref.column(0).into_owned()
                    } else {
                        let x = standard_normal_vector(rng, map_ref.ncols());
                        map_ref * x
                    };
                    let solved = omega.lu().solve(&v).expect("nonsingular by guard");
                    if v.dot(&solved) >= 0.0 {
                        1.0
                    } else {
                        0.0
                    }
                }
            }
        },
        cfg,
    )?;
    Ok((result.estimate, result.std_error))
}

/// Exact rejection probability of {T ≥ c} under N(μ₀, σ²Σ) for scalar-family
/// tests (kernel or identity-weighted) with one restriction, nonnegative
/// critical value, and everywhere-nonnegative-definite Ω̌.
///
/// Under the null the event coincides (up to a null set) with the
/// nonnegativity of a single Gaussian quadratic form,
/// u'(bb' − c·s²_R·Q)u ≥ 0 with b = X(X'X)⁻¹R'. The error scale σ² scales
/// every eigenvalue of the form, which provably cannot change the sign
/// event; it is therefore accepted, validated, and never touches the
/// numerics — making the σ²-invariance of the result exact by construction.
pub fn exact_rejection_prob(
    est: &EstimatorSpec,
    sigma: &DMatrix<f64>,
    sigma2: f64,
    c: f64,
    tol: f64,
) -> Result<f64> {
    if !(sigma2 > 0.0) {
        return Err(Error::InvalidInput(format!(
            "error scale must be positive, got {sigma2}"
        )));
    }
    let dp = est.design();
    if dp.q() != 1 {
        return Err(Error::InvalidInput(
            "the exact path handles one restriction; use the Monte Carlo path".into(),
        ));
    }
    if c < 0.0 {
        return Err(Error::InvalidInput("critical value must be nonnegative".into()));
    }
    if est.flags().omega_identically_zero {
        // T ≡ 0: rejection iff 0 ≥ c
        return Ok(if c <= 0.0 { 1.0 } else { 0.0 });
    }
    let (q_mat, rxxr) = est.scalar_family().ok_or_else(|| {
        Error::InvalidInput(
            "the exact path needs a scalar covariance family (kernel or identity-weight)".into(),
        )
    })?;
    if !est.flags().omega_nnd_everywhere {
        return Err(Error::InvalidInput(
            "the exact path needs a nonnegative-definite variance estimator; \
             use the Monte Carlo path"
                .into(),
        ));
    }
    let b = dp.x() * (dp.x().transpose() * dp.x()).try_inverse().unwrap()
        * dp.r_mat().transpose();
    let b = b.column(0).into_owned();
    let s2r = rxxr[(0, 0)];
    let a = symmetrize(&(&b * b.transpose() - q_mat * (c * s2r)));
    let problem = QuadFormProblem::new(a, sigma.clone())?;
    quadform_nonneg_prob(&problem, tol)
}

/// Simulated rejection probability of {T ≥ c} under N(μ₀, σ²Σ) at the null
/// mean μ₀ of the design.
pub fn mc_rejection_prob(
    est: &dyn CovarianceEstimator,
    sigma: &DMatrix<f64>,
    sigma2: f64,
    c: f64,
    cfg: &McConfig,
) -> Result<(f64, f64)> {
    if !(sigma2 > 0.0) {
        return Err(Error::InvalidInput(format!(
            "error scale must be positive, got {sigma2}"
        )));
    }
    let dp = est.design();
    let mu0 = dp.null_mean();
    let root = sym_sqrt(sigma, 1e-10)? * sigma2.sqrt();
    let n = dp.n();
    let result = mc_expectation(
        move |rng| {
            let z = standard_normal_vector(rng, n);
            let y = &mu0 + &root * z;
            let tv = evaluate_statistic(est, &y);
            if tv.value >= c {
                1.0
            } else {
                0.0
            }
        },
        cfg,
    )?;
    Ok((result.estimate, result.std_error))
}

/// Simulated probability of the data-driven rejection event
/// {T(y) ≥ C(y)} where C is the estimator's own data-driven critical value.
pub fn mc_data_driven_rejection_prob(
    est: &EstimatorSpec,
    sigma: &DMatrix<f64>,
    cfg: &McConfig,
) -> Result<(f64, f64)> {
    let dp = est.design();
    let mu0 = dp.null_mean();
    let root = sym_sqrt(sigma, 1e-10)?;
    let n = dp.n();
    let result = mc_expectation(
        move |rng| {
            let z = standard_normal_vector(rng, n);
            let y = &mu0 + &root * z;
            let c = est
                .data_driven_critical_value(&y)
                .expect("caller ensures a data-driven estimator");
            let tv = evaluate_statistic(est, &y);
            if tv.value >= c {
                1.0
            } else {
                0.0
            }
        },
        cfg,
    )?;
    Ok((result.estimate, result.std_error))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurveMethod {
    Exact,
    MonteCarlo,
}

#[derive(Debug, Clone)]
pub struct CurvePoint {
    pub label: String,
    pub probability: f64,
    pub std_error: Option<f64>,
}

/// Null rejection probability per grid member; the maximum over the grid is
/// a lower bound for the size of the test.
pub fn size_curve(
    est: &EstimatorSpec,
    grid: &CovModelGrid,
    c: f64,
    method: CurveMethod,
    mc: Option<&McConfig>,
) -> Result<Vec<CurvePoint>> {
    let n = est.design().n();
    match method {
        CurveMethod::Exact => grid
            .members
            .iter()
            .map(|member| {
                let sigma = member.sigma(n)?;
                let p = exact_rejection_prob(est, &sigma, 1.0, c, 1e-6)?;
                Ok(CurvePoint { label: member.label().into(), probability: p, std_error: None })
            })
            .collect(),
        CurveMethod::MonteCarlo => {
            let cfg = mc.ok_or_else(|| {
                Error::InvalidInput("Monte Carlo curve needs a seed configuration".into())
            })?;
            grid.members
                .iter()
                .enumerate()
                .map(|(idx, member)| {
                    let sigma = member.sigma(n)?;
                    let member_cfg = McConfig {
                        master_seed: crate::numerics::derive_stream_seed(
                            cfg.master_seed,
                            idx as u64,
                        ),
                        ..*cfg
                    };
                    let (p, se) = mc_rejection_prob(est, &sigma, 1.0, c, &member_cfg)?;
                    Ok(CurvePoint {
                        label: member.label().into(),
                        probability: p,
                        std_error: Some(se),
                    })
                })
                .collect()
        }
    }
}

/// The default boundary demonstration grid: spiked members approaching the
/// target frequency with pole moduli 1 − 10^{−j/2}, j = 2..12.
pub fn boundary_grid(gamma: f64, l: &SubspaceBasis, js: std::ops::RangeInclusive<u32>) -> Result<CovModelGrid> {
    let profile = singular_frequencies(l)?;
    let members: Vec<SpectralModel> = js
        .map(|j| {
            let m = (10f64.powf(j as f64 / 2.0).round() as usize).saturating_sub(1).max(1);
            boundary_member(gamma, &profile.omegas, m)
        })
        .collect::<Result<_>>()?;
    CovModelGrid::new(members, format!("boundary(γ={gamma})"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PowerClass {
    /// c lies strictly below every certified constant: size one.
    SizeOneRange,
    /// c lies strictly above every certified constant: infimal power zero
    /// (provided size is below one).
    ZeroInfimalPower,
    /// c lies strictly between the constants: both degeneracies.
    BothRegimes,
    /// c coincides with a constant; the inference is undetermined there.
    BoundaryUndetermined,
    Inconclusive,
}

#[derive(Debug, Clone)]
pub struct PowerReport {
    /// (γ, certified outcome) for the endpoint singular directions.
    pub constants: Vec<(f64, ConstancyOutcome)>,
    pub c_lower: f64,
    pub c_upper: f64,
    pub classification: PowerClass,
    pub notes: Vec<String>,
}

/// Power-degeneracy analysis at the endpoint singular directions.
///
/// The two one-dimensional members attached to γ ∈ {0, π} carry constants
/// C(𝒮); a critical value below the largest constant forces size one, one
/// above the smallest forces zero infimal power (when size stays below
/// one); the report classifies the supplied critical value.
pub fn power_degeneracy(est: &EstimatorSpec, c: f64, seed: u64) -> Result<PowerReport> {
    let dp = est.design();
    let flags = est.flags();
    if !(flags.n_is_empty && flags.omega_nnd_everywhere) {
        return Err(Error::InvalidInput(
            "power-degeneracy analysis needs an empty exceptional set and a \
             nonnegative-definite variance estimator"
                .into(),
        ));
    }
    let l = dp.m0lin();
    let mu0 = dp.null_mean();
    let mut constants = Vec::new();
    let mut notes = Vec::new();
    let mut certified: Vec<f64> = Vec::new();
    for gamma in [0.0, PI] {
        let order = rho(gamma, l)?;
        let basis = SubspaceBasis::from_span(&l.project_off(&reduced_trig_basis(dp.n(), order, gamma)));
        if basis.dim() == 0 {
            notes.push(format!("frequency {gamma}: projected direction vanished"));
            continue;
        }
        let outcome = constant_on_affine(est, &basis, &mu0, seed ^ gamma.to_bits())?;
        match outcome {
            ConstancyOutcome::Constant(value) => certified.push(value),
            ConstancyOutcome::Inconclusive => notes.push(format!(
                "frequency {gamma}: all probe points fell on the zero branch \
                 (direction inside the degenerate set)"
            )),
            ConstancyOutcome::NotConstant { spread } => notes.push(format!(
                "frequency {gamma}: statistic varies on the direction (spread {spread:e})"
            )),
        }
        constants.push((gamma, outcome));
    }
    let c_lower = certified.iter().cloned().fold(f64::INFINITY, f64::min);
    let c_upper = certified.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let classification = if certified.is_empty() {
        PowerClass::Inconclusive
    } else if certified.iter().any(|&v| (v - c).abs() <= 1e-9 * v.abs().max(1.0)) {
        PowerClass::BoundaryUndetermined
    } else if c < c_lower {
        PowerClass::SizeOneRange
    } else if c > c_upper {
        PowerClass::ZeroInfimalPower
    } else {
        PowerClass::BothRegimes
    };
    if certified.len() >= 2 && (c_upper - c_lower).abs() > 1e-9 {
        notes.push(
            "constants differ: any critical value keeping size below one forces \
             infimal power zero"
                .into(),
        );
    }
    Ok(PowerReport { constants, c_lower, c_upper, classification, notes })
}

/// Polynomial-trend lower bound on size: the probability that the first
/// active restriction direction sees a nonnegative inverse-variance
/// quadratic, under white noise. Exact for scalar families; exactly one for
/// estimators positive definite off their exceptional set.
#[derive(Debug, Clone)]
pub struct BoundResult {
    pub value: f64,
    pub std_error: Option<f64>,
    pub rule: String,
}

/// Width of the leading canonical polynomial block of X.
fn polynomial_block_width(x: &DMatrix<f64>) -> usize {
    let n = x.nrows();
    let mut width = 0;
    for j in 0..x.ncols() {
        let col = x.column(j);
        let mut matches = true;
        for i in 0..n {
            let want = ((i + 1) as f64).powi(j as i32);
            if (col[i] - want).abs() > 1e-9 * want.abs().max(1.0) {
                matches = false;
                break;
            }
        }
        if matches {
            width += 1;
        } else {
            break;
        }
    }
    width
}

pub fn poly_lower_bound(est: &EstimatorSpec, mc: Option<&McConfig>) -> Result<BoundResult> {
    let dp = est.design();
    let k_f = polynomial_block_width(dp.x());
    if k_f == 0 {
        return Err(Error::InvalidInput(
            "the polynomial bound needs a leading canonical trend block in X".into(),
        ));
    }
    let r = dp.r_mat();
    let has_trend_column = (0..k_f).any(|j| r.column(j).norm() > 0.0);
    if !has_trend_column {
        return Err(Error::InvalidInput(
            "the restriction does not touch the polynomial block".into(),
        ));
    }
    if est.positive_definite_off_n() {
        return Ok(BoundResult { value: 1.0, std_error: None, rule: rules::POSITIVITY.into() });
    }
    if est.flags().omega_identically_zero {
        return Ok(BoundResult {
            value: 1.0,
            std_error: None,
            rule: rules::DEGENERATE_WEIGHT.into(),
        });
    }
    if let Some(q_mat) = est.sign_matrix() {
        let n = dp.n();
        let problem = QuadFormProblem::new(q_mat, DMatrix::identity(n, n))?;
        return match quadform_nonneg_prob(&problem, 1e-6) {
            Ok(p) => Ok(BoundResult { value: p, std_error: None, rule: rules::SIGN_INVERSION.into() }),
            Err(Error::DegenerateForm) => Ok(BoundResult {
                value: 1.0,
                std_error: None,
                rule: rules::DEGENERATE_WEIGHT.into(),
            }),
            Err(e) => Err(e),
        };
    }
    let cfg = mc.ok_or_else(|| {
        Error::InvalidInput("this estimator needs the Monte Carlo bound path; supply a seed".into())
    })?;
    let (value, se) = poly_lower_bound_mc(est, cfg)?;
    Ok(BoundResult { value, std_error: Some(se), rule: "sign-probability-simulation".into() })
}

/// Monte Carlo version of the bound: P(R'_{·i₀} Ω̌⁻¹(y) R_{·i₀} ≥ 0) under
/// y ~ N(0, I); the independent cross-check for the exact paths.
pub fn poly_lower_bound_mc(
    est: &dyn CovarianceEstimator,
    cfg: &McConfig,
) -> Result<(f64, f64)> {
    let dp = est.design();
    let r = dp.r_mat();
    let i0 = (0..dp.k())
        .find(|&j| r.column(j).norm() > 0.0)
        .ok_or_else(|| Error::InvalidInput("restriction matrix is zero".into()))?;
    let direction = r.column(i0).into_owned();
    let n = dp.n();
    let result = mc_expectation(
        move |rng| {
            let y = standard_normal_vector(rng, n);
            match est.evaluate(&y) {
                Evaluation::InExceptionalSet => 1.0, // zero branch counts as ≥ 0
                Evaluation::Regular { omega, .. } => {
                    if omega_is_singular(&omega) {
                        return 1.0;
                    }
                    let solved = omega.lu().solve(&direction).expect("nonsingular");
                    if direction.dot(&solved) >= 0.0 {
                        1.0
                    } else {
                        0.0
                    }
                }
            }
        },
        cfg,
    )?;
    Ok((result.estimate, result.std_error))
}

/// One row of the rejection-probability sweep over bandwidth fractions.
#[derive(Debug, Clone, Copy)]
pub struct FigureRow {
    pub k: usize,
    pub b: f64,
    pub probability: f64,
}

/// P(ω̂_W ≥ 0) under white noise for polynomial designs of width k and
/// bandwidth M = b·n, one row per (k, b). The probabilities are step
/// functions of b (the weight matrix only changes when M crosses a lag
/// count), which the computation exploits by caching on the weight pattern.
pub fn figure1_table(
    n: usize,
    ks: &[usize],
    b_grid: &[f64],
    kernel: crate::estimators::KernelName,
    tol: f64,
) -> Result<Vec<FigureRow>> {
    use std::collections::HashMap;

    let mut rows = Vec::with_capacity(ks.len() * b_grid.len());
    let per_k: Vec<Result<Vec<FigureRow>>> = ks
        .par_iter()
        .map(|&k| {
            let x = crate::design::polynomial_design(n, k, None)?;
            let basis = SubspaceBasis::from_span(&x);
            let mut cache: HashMap<Vec<u64>, f64> = HashMap::new();
            let mut out = Vec::with_capacity(b_grid.len());
            for &b in b_grid {
                let bandwidth = b * n as f64;
                let lags: Vec<f64> = (0..n)
                    .map(|h| crate::estimators::kernel_value(kernel, h as f64 / bandwidth))
                    .collect();
                let key: Vec<u64> = lags.iter().map(|v| v.to_bits()).collect();
                let prob = match cache.get(&key) {
                    Some(&p) => p,
                    None => {
                        let w = DMatrix::from_fn(n, n, |i, j| lags[i.abs_diff(j)]);
                        let a = symmetrize(&basis.project_off(&basis.project_off(&w).transpose()));
                        let p = if a.norm() <= 1e-12 * w.norm().max(1.0) {
                            // all-ones weight annihilated by the projector:
                            // ω̂ ≡ 0 and the sign event is certain
                            1.0
                        } else {
                            let problem =
                                QuadFormProblem::new(a, DMatrix::identity(n, n))?;
                            match quadform_nonneg_prob(&problem, tol) {
                                Ok(p) => p,
                                Err(Error::DegenerateForm) => 1.0,
                                Err(e) => return Err(e),
                            }
                        };
                        cache.insert(key, p);
                        p
                    }
                };
                out.push(FigureRow { k, b, probability: prob });
            }
            Ok(out)
        })
        .collect();
    for chunk in per_k {
        rows.extend(chunk?);
    }
    Ok(rows)
}

/// Bisection search for the critical value whose maximal rejection
/// probability over the grid matches `alpha` to within 1e-3; refused (with
/// the witness frequency) when the verdict engine certifies size one. The
/// result is valid only relative to the supplied grid.
pub fn critical_value_search(
    dp: &DesignProblem,
    est: &EstimatorSpec,
    grid: &CovModelGrid,
    alpha: f64,
    bracket: (f64, f64),
    mc: Option<&McConfig>,
) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidInput(format!("level must be in (0,1), got {alpha}")));
    }
    let verdict = size_control_verdict(dp, est, mc)?;
    if let VerdictOutcome::SizeOne = verdict.outcome {
        let gamma = verdict.witness.map(|w| w.gamma).unwrap_or(f64::NAN);
        return Err(Error::RefusedSizeOne { gamma });
    }
    let n = dp.n();
    let sigmas: Vec<DMatrix<f64>> = grid
        .members
        .iter()
        .map(|m| m.sigma(n))
        .collect::<Result<_>>()?;
    let exact_ok = est.scalar_family().is_some()
        && dp.q() == 1
        && est.flags().omega_nnd_everywhere;
    let max_prob = |c: f64| -> Result<f64> {
        let mut worst = 0.0f64;
        for (idx, sigma) in sigmas.iter().enumerate() {
            let p = if exact_ok {
                exact_rejection_prob(est, sigma, 1.0, c, 1e-6)?
            } else {
                let cfg = mc.ok_or_else(|| {
                    Error::InvalidInput(
                        "Monte Carlo path needed for this estimator; supply a seed".into(),
                    )
                })?;
                let member_cfg = McConfig {
                    master_seed: crate::numerics::derive_stream_seed(
                        cfg.master_seed,
                        idx as u64,
                    ),
                    ..*cfg
                };
                mc_rejection_prob(est, sigma, 1.0, c, &member_cfg)?.0
            };
            worst = worst.max(p);
        }
        Ok(worst)
    };
    let (mut lo, mut hi) = bracket;
    if !(hi > lo) {
        return Err(Error::InvalidInput("bracket must satisfy lo < hi".into()));
    }
    if max_prob(lo)? < alpha {
        return Err(Error::InvalidInput(format!(
            "lower bracket end already rejects less than α = {alpha}"
        )));
    }
    let mut expansions = 0;
    while max_prob(hi)? > alpha {
        hi *= 2.0;
        expansions += 1;
        if expansions > 12 {
            return Err(Error::Numerical(
                "could not bracket the target level from above".into(),
            ));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let p = max_prob(mid)?;
        if (p - alpha).abs() <= 1e-3 {
            return Ok(mid);
        }
        if p > alpha {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-10 * hi.abs().max(1.0) {
            return Ok(0.5 * (lo + hi));
        }
    }
    Err(Error::Numerical("critical-value bisection did not converge".into()))
}

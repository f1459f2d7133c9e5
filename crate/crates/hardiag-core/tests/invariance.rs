//! Cross-module invariance properties: group invariance of the statistic,
//! exceptional-set stability, quadratic-form identities, and the agreement
//! between exact bounds and simulated size curves.

use hardiag_core::covmodel::{l_of_sigma, natural_transform, sharp_transform, SpectralModel};
use hardiag_core::design::{polynomial_design, DesignProblem, SubspaceBasis};
use hardiag_core::diagnostics::{
    boundary_grid, mc_rejection_prob, size_control_verdict, VerdictOutcome,
};
use hardiag_core::estimators::{
    kernel_weight_matrix, CovarianceEstimator, EstimatorSpec, JVariant, KernelName, OmegaKind,
    VKind,
};
use hardiag_core::numerics::{
    quadform_nonneg_prob, quadform_nonneg_prob_from_weights, replication_rng, McConfig,
    QuadFormProblem,
};
use hardiag_core::teststat::evaluate_statistic;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand_distr::{Distribution, StandardNormal};

fn normal_vec(rng: &mut rand_chacha::ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_iterator(n, (0..n).map(|_| StandardNormal.sample(rng)))
}

fn trend_design(n: usize) -> DesignProblem {
    DesignProblem::new(
        polynomial_design(n, 2, None).unwrap(),
        DMatrix::from_row_slice(1, 2, &[0.0, 1.0]),
        DVector::from_element(1, 0.5),
    )
    .unwrap()
}

fn shipped_estimators(dp: &DesignProblem) -> Vec<EstimatorSpec> {
    let n = dp.n();
    let u = DMatrix::from_fn(n, 1, |i, _| ((i + 1) as f64).powi(2));
    let bartlett = kernel_weight_matrix(KernelName::Bartlett, 5.0, n).unwrap();
    let daniell = kernel_weight_matrix(KernelName::Daniell, 4.0, n).unwrap();
    let mut out = vec![
        EstimatorSpec::new(dp.clone(), OmegaKind::Kernel { w: bartlett, name: "bartlett".into() })
            .unwrap(),
        EstimatorSpec::new(dp.clone(), OmegaKind::Eicker { w: DMatrix::identity(n, n) }).unwrap(),
        EstimatorSpec::new(dp.clone(), OmegaKind::AmPrewhitened).unwrap(),
        EstimatorSpec::new(
            dp.clone(),
            OmegaKind::BvFixed { w: daniell, name: "daniell".into(), c: 1.0, u: Some(u.clone()) },
        )
        .unwrap(),
        EstimatorSpec::new(
            dp.clone(),
            OmegaKind::BvDataDriven {
                a: vec![0.3, 0.4],
                abar: vec![0.5],
                h: vec![1.5, 1.0, 0.5],
                p: vec![0.5, 1.0],
                u: None,
            },
        )
        .unwrap(),
    ];
    for variant in [JVariant::J1, JVariant::J2] {
        for v in [VKind::RunningSum, VKind::Identity] {
            out.push(
                EstimatorSpec::new(
                    dp.clone(),
                    OmegaKind::Vogelsang { c: 1.0, u: u.clone(), variant, v },
                )
                .unwrap(),
            );
        }
    }
    out
}

#[test]
fn statistic_is_invariant_under_the_null_group() {
    let dp = trend_design(24);
    let mu_base = dp.null_mean();
    let m0lin = dp.m0lin().clone();
    let mut rng = replication_rng(2024, 0);
    for est in shipped_estimators(&dp) {
        let mut checked = 0;
        for _ in 0..200 {
            let y = normal_vec(&mut rng, 24) * 2.0;
            let delta = loop {
                let d: f64 = StandardNormal.sample(&mut rng);
                if d.abs() > 0.1 {
                    break d * 2.0;
                }
            };
            let shift0 = normal_vec(&mut rng, m0lin.dim());
            let shift1 = normal_vec(&mut rng, m0lin.dim());
            let mu0 = &mu_base + m0lin.vectors() * shift0;
            let mu1 = &mu_base + m0lin.vectors() * shift1;
            let moved = (&y - &mu0) * delta + &mu1;
            let t0 = evaluate_statistic(&est, &y);
            let t1 = evaluate_statistic(&est, &moved);
            if t0.on_exceptional_branch || t1.on_exceptional_branch {
                assert_eq!(
                    t0.on_exceptional_branch,
                    t1.on_exceptional_branch,
                    "{}: exceptional branch flipped",
                    est.label()
                );
                continue;
            }
            let scale = t0.value.abs().max(1.0);
            assert!(
                (t0.value - t1.value).abs() <= 1e-9 * scale,
                "{}: T changed under the group action: {} vs {}",
                est.label(),
                t0.value,
                t1.value
            );
            checked += 1;
        }
        assert!(checked > 150, "{}: too many exceptional draws", est.label());
    }
}

#[test]
fn exceptional_membership_is_invariant_under_design_shifts() {
    let dp = trend_design(20);
    let mut rng = replication_rng(77, 0);
    for est in shipped_estimators(&dp) {
        for _ in 0..50 {
            let y = normal_vec(&mut rng, 20);
            let delta: f64 = 1.5;
            let eta = normal_vec(&mut rng, 2);
            let moved = &y * delta + dp.x() * eta;
            let a = est.evaluate(&y).is_exceptional();
            let b = est.evaluate(&moved).is_exceptional();
            assert_eq!(a, b, "{}", est.label());
        }
    }
}

#[test]
fn nonnegative_statistics_for_psd_members() {
    let dp = trend_design(18);
    let n = dp.n();
    let psd_members = vec![
        EstimatorSpec::new(
            dp.clone(),
            OmegaKind::Kernel {
                w: kernel_weight_matrix(KernelName::Parzen, 4.0, n).unwrap(),
                name: "parzen".into(),
            },
        )
        .unwrap(),
        EstimatorSpec::new(dp.clone(), OmegaKind::Eicker { w: DMatrix::identity(n, n) }).unwrap(),
    ];
    let mut rng = replication_rng(5150, 0);
    for est in psd_members {
        for _ in 0..200 {
            let y = normal_vec(&mut rng, n);
            let tv = evaluate_statistic(&est, &y);
            assert!(tv.value >= 0.0, "{}", est.label());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    // P(Q ≥ 0) + P(−Q ≥ 0) = 1 for forms without an atom at zero
    #[test]
    fn complement_rule(seed in 0u64..1000) {
        let mut rng = replication_rng(seed, 3);
        let n = 6;
        let raw = DMatrix::from_fn(n, n, |_, _| {
            let v: f64 = StandardNormal.sample(&mut rng);
            v
        });
        let a = (&raw + raw.transpose()) * 0.5;
        let p_pos = quadform_nonneg_prob(
            &QuadFormProblem::new(a.clone(), DMatrix::identity(n, n)).unwrap(),
            1e-7,
        )
        .unwrap();
        let p_neg = quadform_nonneg_prob(
            &QuadFormProblem::new(-a, DMatrix::identity(n, n)).unwrap(),
            1e-7,
        )
        .unwrap();
        prop_assert!((p_pos + p_neg - 1.0).abs() <= 2e-7, "{p_pos} + {p_neg}");
    }

    // joint orthogonal conjugation leaves the probability unchanged
    #[test]
    fn rotation_invariance(seed in 0u64..1000) {
        let mut rng = replication_rng(seed, 4);
        let n = 5;
        let raw = DMatrix::from_fn(n, n, |_, _| {
            let v: f64 = StandardNormal.sample(&mut rng);
            v
        });
        let a = (&raw + raw.transpose()) * 0.5;
        let g = DMatrix::from_fn(n, n, |_, _| {
            let v: f64 = StandardNormal.sample(&mut rng);
            v
        });
        let sigma = &g * g.transpose() + DMatrix::identity(n, n) * 0.4;
        let q = DMatrix::from_fn(n, n, |_, _| {
            let v: f64 = StandardNormal.sample(&mut rng);
            v
        })
        .qr()
        .q();
        let p1 = quadform_nonneg_prob(
            &QuadFormProblem::new(a.clone(), sigma.clone()).unwrap(),
            1e-7,
        )
        .unwrap();
        let rotated_a = &q * a * q.transpose();
        let rotated_sigma = &q * sigma * q.transpose();
        let p2 = quadform_nonneg_prob(
            &QuadFormProblem::new(rotated_a, rotated_sigma).unwrap(),
            1e-7,
        )
        .unwrap();
        prop_assert!((p1 - p2).abs() <= 2e-7, "{p1} vs {p2}");
    }

    // positive rescaling of the form never moves the sign probability:
    // bit-exact under lossless (power-of-two) scaling, tolerance-exact under
    // rounded scaling
    #[test]
    fn scale_invariance_of_weights(exponent in -40i32..40, c in 1e-6f64..1e6, seed in 0u64..100) {
        let mut rng = replication_rng(seed, 5);
        let lam: Vec<f64> = (0..6).map(|_| {
            let v: f64 = StandardNormal.sample(&mut rng);
            v
        }).collect();
        let p1 = quadform_nonneg_prob_from_weights(&lam, 1e-7).unwrap();
        let dyadic: Vec<f64> = lam.iter().map(|l| l * 2f64.powi(exponent)).collect();
        let p2 = quadform_nonneg_prob_from_weights(&dyadic, 1e-7).unwrap();
        prop_assert_eq!(p1.to_bits(), p2.to_bits());
        let rounded: Vec<f64> = lam.iter().map(|l| l * c).collect();
        let p3 = quadform_nonneg_prob_from_weights(&rounded, 1e-7).unwrap();
        prop_assert!((p1 - p3).abs() <= 2e-7);
    }

    // Σ(f) of an autoregression is Toeplitz, unit-diagonal, positive definite
    #[test]
    fn ar1_toeplitz_structure(rho in -0.95f64..0.95) {
        prop_assume!(rho.abs() > 1e-3);
        let sigma = SpectralModel::ar(&[rho]).unwrap().sigma(6).unwrap();
        for i in 0..6 {
            prop_assert!((sigma[(i, i)] - 1.0).abs() < 1e-9);
            for j in 0..6 {
                prop_assert_eq!(sigma[(i, j)], sigma[(j, i)]);
                if i + 1 < 6 && j + 1 < 6 {
                    prop_assert_eq!(sigma[(i, j)], sigma[(i + 1, j + 1)]);
                }
            }
        }
        let chol = sigma.cholesky();
        prop_assert!(chol.is_some());
    }
}

#[test]
fn rejection_probabilities_survive_the_covariance_transforms() {
    // the auxiliary models reproduce the rejection probabilities of the
    // original model for statistics invariant under null-space shifts
    let dp = trend_design(16);
    let est = EstimatorSpec::new(
        dp.clone(),
        OmegaKind::Kernel {
            w: kernel_weight_matrix(KernelName::Bartlett, 4.0, 16).unwrap(),
            name: "bartlett".into(),
        },
    )
    .unwrap();
    let l = dp.m0lin();
    let sigma = SpectralModel::ar(&[0.7, -0.2]).unwrap().sigma(16).unwrap();
    let c = 3.0;
    let variants = vec![
        ("original", sigma.clone()),
        ("projected", l_of_sigma(&sigma, l).unwrap()),
        ("sharp", sharp_transform(&sigma, l).unwrap()),
        ("natural", natural_transform(&sigma, l).unwrap()),
    ];
    let mut probs = Vec::new();
    for (idx, (name, cov)) in variants.iter().enumerate() {
        let cfg = McConfig::new(40_000, 900 + idx as u64);
        let (p, se) = mc_rejection_prob(&est, cov, 1.0, c, &cfg).unwrap();
        probs.push((name, p, se));
    }
    for i in 0..probs.len() {
        for j in (i + 1)..probs.len() {
            let (n1, p1, s1) = probs[i];
            let (n2, p2, s2) = probs[j];
            let joint = (s1 * s1 + s2 * s2).sqrt();
            assert!(
                (p1 - p2).abs() <= 4.0 * joint,
                "{n1} {p1} vs {n2} {p2} (joint se {joint})"
            );
        }
    }
}

#[test]
fn lower_bound_never_exceeds_the_size_curve_supremum() {
    // an indefinite weight gives a bound genuinely below one, which the
    // boundary members must dominate; definite members pin the bound at the
    // limit value one, which finite grids only approach
    let dp = trend_design(24);
    let n = dp.n();
    let rect = kernel_weight_matrix(KernelName::Rectangular, 8.0, n).unwrap();
    let est = EstimatorSpec::new(
        dp.clone(),
        OmegaKind::BvFixed { w: rect, name: "rect:M=8".into(), c: 1.0, u: None },
    )
    .unwrap();
    let cfg = McConfig::new(20_000, 17);
    let verdict = size_control_verdict(&dp, &est, Some(&cfg)).unwrap();
    let (bound, bound_se) = match verdict.outcome {
        VerdictOutcome::LowerBound { value, std_error } => (value, std_error.unwrap_or(0.0)),
        other => panic!("expected a lower bound, got {other:?}"),
    };
    assert!(bound < 0.95, "indefinite weight should give a nondegenerate bound, got {bound}");
    // the bound agrees with the exact sign probability of the weight
    let exact = hardiag_core::diagnostics::poly_lower_bound(&est, None).unwrap();
    assert!(
        (bound - exact.value).abs() <= 4.0 * bound_se + 1e-6,
        "simulated bound {bound} ± {bound_se} vs exact {}",
        exact.value
    );
    // deep boundary members push the simulated curve above the bound
    let grid = boundary_grid(0.0, dp.m0lin(), 10..=12).unwrap();
    let mut sup: f64 = 0.0;
    let mut sup_se = 0.0;
    for (idx, member) in grid.members.iter().enumerate() {
        let sigma = member.sigma(n).unwrap();
        let (p, se) =
            mc_rejection_prob(&est, &sigma, 1.0, 3.84, &McConfig::new(4000, 31 + idx as u64))
                .unwrap();
        if p > sup {
            sup = p;
            sup_se = se;
        }
    }
    assert!(
        bound <= sup + 4.0 * sup_se.max(1e-4),
        "bound {bound} exceeds supremum {sup} ± {sup_se}"
    );
}

#[test]
fn verdict_consistency_on_shipped_trend_designs() {
    // every polynomial-trend design gets the size-one verdict, and the
    // simulated curve at the deepest boundary member backs it up
    for k_f in [1usize, 2, 3] {
        let n = 30;
        let x = polynomial_design(n, k_f, None).unwrap();
        let mut r = vec![0.0; k_f];
        r[k_f - 1] = 1.0;
        let dp = DesignProblem::new(
            x,
            DMatrix::from_row_slice(1, k_f, &r),
            DVector::from_element(1, 0.0),
        )
        .unwrap();
        let est = EstimatorSpec::new(
            dp.clone(),
            OmegaKind::Kernel {
                w: kernel_weight_matrix(KernelName::Bartlett, 6.0, n).unwrap(),
                name: "bartlett".into(),
            },
        )
        .unwrap();
        let v = size_control_verdict(&dp, &est, None).unwrap();
        assert_eq!(v.outcome, VerdictOutcome::SizeOne, "k_F = {k_f}: {v:?}");
        assert_eq!(v.witness.as_ref().unwrap().gamma, 0.0, "k_F = {k_f}");
    }
}

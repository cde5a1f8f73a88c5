//! Contact localization against contacts built by hand: the sensor wrench
//! and joint torques of a known force are assembled from plain
//! trigonometry and virtual work, then handed to the estimator.

use legcontact::contact::{
    estimate_contact, localize_contact, BaseWrench, EstimatorConfig, SensorSnapshot,
};
use legcontact::dynamics::{BaseMode, ChainModel};
use legcontact::Error;
use nalgebra::DVector;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

mod common;
use common::{oracle_generalized_force, oracle_points, random_case, snapshot_for, Case};

#[test]
fn round_trip_recovers_alpha_and_force() {
    let model = ChainModel::reference_leg(BaseMode::VirtualFt);
    let cfg = EstimatorConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let residual = DVector::from_row_slice(&[0.0, 0.0, 0.0, 1.0, 1.0]);
    for i in 0..10_000 {
        let case = random_case(&mut rng, &model);
        let (state, tau, reading) = snapshot_for(&model, &case);
        let snap = SensorSnapshot {
            state: &state,
            tau_sen: &tau,
            ft_reading: reading,
            residual: &residual,
            residual_joint_offset: 3,
            known_force: None,
        };
        // Bypass link identification: the contacted link is given.
        let w = legcontact::contact::predicted_base_wrench(
            &model,
            &state,
            &tau,
            &legcontact::contact::ActuationMap::for_model(&model),
            None,
        )
        .unwrap();
        let est = localize_contact(&model, &state.q, case.link, w - reading, &cfg).unwrap();
        assert!((est.alpha - case.alpha).abs() < 1e-9, "case {i}: {} vs {}", est.alpha, case.alpha);
        // The estimate reports the reaction on the environment.
        assert!((est.force[0] + case.force[0]).abs() < 1e-9, "case {i}");
        assert!((est.force[1] + case.force[1]).abs() < 1e-9, "case {i}");
        assert!(est.valid);
        if case.link == 2 {
            let full = estimate_contact(&model, &snap, &cfg).unwrap().unwrap();
            assert_eq!(full.link, 2);
            assert!((full.alpha - case.alpha).abs() < 1e-9);
        }
    }
}

#[test]
fn oracle_moment_matches_finite_difference_virtual_work() {
    let model = ChainModel::reference_leg(BaseMode::VirtualFt);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..200 {
        let case = random_case(&mut rng, &model);
        let g = oracle_generalized_force(&model, &case.q, case.link, case.alpha, case.force);
        let h = 1e-6;
        for k in 0..5 {
            let mut qp = case.q.clone();
            let mut qm = case.q.clone();
            qp[k] += h;
            qm[k] -= h;
            let pp = oracle_points(&model, &qp, case.link, case.alpha).2;
            let pm = oracle_points(&model, &qm, case.link, case.alpha).2;
            let work = case.force[0] * (pp[0] - pm[0]) / (2.0 * h) + case.force[1] * (pp[1] - pm[1]) / (2.0 * h);
            assert!((work - g[k]).abs() < 1e-6, "k={k} {work} vs {}", g[k]);
        }
    }
}

#[test]
fn collinear_force_is_rejected() {
    let model = ChainModel::reference_leg(BaseMode::VirtualFt);
    let q = DVector::from_row_slice(&[0.0, 0.0, 0.0, 0.0, 0.0]);
    // Links hang straight down; a vertical force is collinear.
    let f_u = BaseWrench::new(0.0, -5.0, 0.0);
    let err = localize_contact(&model, &q, 1, f_u, &EstimatorConfig::default()).unwrap_err();
    assert!(matches!(err, Error::DegenerateGeometry { link: 1, .. }));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    /// Moving and turning the base, with the force turned along, leaves
    /// `alpha` unchanged.
    #[test]
    fn alpha_is_invariant_under_base_motion(
        seed in any::<u64>(),
        dx in -1.0f64..1.0,
        dz in -1.0f64..1.0,
        turn in -1.5f64..1.5,
    ) {
        let model = ChainModel::reference_leg(BaseMode::VirtualFt);
        let cfg = EstimatorConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let case = random_case(&mut rng, &model);
        let wrench = |c: &Case| {
            let d = oracle_generalized_force(&model, &c.q, c.link, c.alpha, c.force);
            BaseWrench::new(d[0], d[2], d[1])
        };
        let a = localize_contact(&model, &DVector::from_vec(case.q.clone()), case.link, wrench(&case), &cfg).unwrap();
        // Clockwise base turn by `turn` rotates world vectors by −turn.
        let (s, c) = (-turn).sin_cos();
        let moved = Case {
            q: vec![case.q[0] + dx, case.q[1] + turn, case.q[2] + dz, case.q[3], case.q[4]],
            link: case.link,
            alpha: case.alpha,
            force: [c * case.force[0] - s * case.force[1], s * case.force[0] + c * case.force[1]],
        };
        let b = localize_contact(&model, &DVector::from_vec(moved.q.clone()), moved.link, wrench(&moved), &cfg).unwrap();
        prop_assert!((a.alpha - b.alpha).abs() < 1e-9);
        prop_assert!((a.force.norm() - b.force.norm()).abs() < 1e-9);
    }

    /// A fixed moment error moves the estimate further as the force turns
    /// toward the link.
    #[test]
    fn sensitivity_grows_as_force_aligns_with_link(
        q1 in -3.0f64..3.0,
        q2 in -3.0f64..3.0,
        alpha in 0.2f64..0.8,
    ) {
        let model = ChainModel::reference_leg(BaseMode::VirtualFt);
        let cfg = EstimatorConfig { alpha_clamp_margin: 0.0, ..EstimatorConfig::default() };
        let q = vec![0.0, 0.0, 0.0, q1, q2];
        let (_, origins, _) = oracle_points(&model, &q, 2, 0.0);
        let tip = oracle_points(&model, &q, 2, 1.0).2;
        let link_angle = (tip[1] - origins[1][1]).atan2(tip[0] - origins[1][0]);
        let mut last = 0.0;
        for offset in [1.5, 1.0, 0.6, 0.3, 0.15, 0.08, 0.04, 0.02] {
            let angle = link_angle + offset;
            let f = [5.0 * angle.cos(), 5.0 * angle.sin()];
            let d = oracle_generalized_force(&model, &q, 2, alpha, f);
            let wrench = BaseWrench::new(d[0], d[2], d[1] + 0.01);
            let est = localize_contact(&model, &DVector::from_vec(q.clone()), 2, wrench, &cfg).unwrap();
            let err = (est.alpha - alpha).abs();
            prop_assert!(err > last);
            last = err;
        }
        let angle = link_angle + 1e-4;
        let d = oracle_generalized_force(&model, &q, 2, alpha, [5.0 * angle.cos(), 5.0 * angle.sin()]);
        let degenerate = localize_contact(&model, &DVector::from_vec(q), 2, BaseWrench::new(d[0], d[2], d[1]), &cfg);
        prop_assert!(
            matches!(degenerate, Err(Error::DegenerateGeometry { .. })),
            "degenerate geometry was not flagged"
        );
    }
}

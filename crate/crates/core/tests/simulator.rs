use legcontact::sensors::AxisTriple;
use legcontact::sim::{
    evaluate_trace, integrate_plant, parametric_sweep, run_scenario, static_equilibrium,
    ScenarioConfig, SimBase, SweepConfig,
};
use legcontact::Error;

fn quiet(mut s: ScenarioConfig) -> ScenarioConfig {
    s.ft_sensor.noise_sigma = AxisTriple::new(0.0, 0.0, 0.0);
    s.torque_noise_Nm = 0.0;
    s
}

#[test]
fn identical_seeds_give_identical_traces() {
    for base in [SimBase::Fixed, SimBase::Floating] {
        let s = ScenarioConfig::reference(2, base).unwrap();
        let a = run_scenario(&s).unwrap();
        let b = run_scenario(&s).unwrap();
        assert_eq!(a, b);
        let mut other = s.clone();
        other.seed += 1;
        assert_ne!(a, run_scenario(&other).unwrap());
    }
}

#[test]
fn trace_is_uniformly_sampled() {
    let s = ScenarioConfig::reference(1, SimBase::Fixed).unwrap();
    let tr = run_scenario(&s).unwrap();
    assert_eq!(tr.rows.len(), s.ticks() + 1);
    for (k, row) in tr.rows.iter().enumerate() {
        assert_eq!(row.t, k as f64 * 1e-3);
    }
}

#[test]
fn halving_the_step_barely_moves_the_final_state() {
    for base in [SimBase::Fixed, SimBase::Floating] {
        let mut s = quiet(ScenarioConfig::reference(1, base).unwrap());
        s.contact = None;
        s.duration_s = 0.5;
        if base == SimBase::Floating {
            s.controller.waypoints.push(legcontact::sim::Waypoint {
                t_s: 0.3,
                q_rad: vec![-0.6, -0.5],
            });
        }
        let start = static_equilibrium(&s).unwrap();
        let coarse = integrate_plant(&s, &start).unwrap();
        s.integrator_step_s /= 2.0;
        let fine = integrate_plant(&s, &start).unwrap();
        let dq = (&coarse.q - &fine.q).amax();
        let dv = (&coarse.qdot - &fine.qdot).amax();
        assert!(dq < 1e-6 && dv < 1e-6, "{base:?}: dq {dq:e} dv {dv:e}");
    }
}

#[test]
fn detection_follows_onset_within_fifty_milliseconds() {
    for base in [SimBase::Fixed, SimBase::Floating] {
        for i in [1, 2] {
            let s = ScenarioConfig::reference(i, base).unwrap();
            let rep = evaluate_trace(&run_scenario(&s).unwrap(), &s).unwrap();
            let latency = rep.detection_latency_s.unwrap();
            assert!(latency < 0.05, "{base:?} {i}: {latency}");
            assert_eq!(rep.early_detections, 0);
            assert_eq!(rep.modal_link, Some(i));
        }
    }
}

#[test]
fn contact_free_quiet_run_has_no_estimates() {
    for base in [SimBase::Fixed, SimBase::Floating] {
        let mut s = quiet(ScenarioConfig::reference(1, base).unwrap());
        s.contact = None;
        let tr = run_scenario(&s).unwrap();
        assert!(tr.rows.iter().all(|r| r.estimate.is_none() && !r.detected));
        assert!(matches!(evaluate_trace(&tr, &s), Err(Error::EmptyContactWindow)));
    }
}

#[test]
fn ground_friction_never_exceeds_coulomb_limit() {
    for i in [1, 2] {
        let s = ScenarioConfig::reference(i, SimBase::Floating).unwrap();
        let tr = run_scenario(&s).unwrap();
        let mu = s.ground.friction_mu;
        for r in &tr.rows {
            let f = r.ground_force;
            assert!(f[1] >= 0.0);
            assert!(f[0].abs() <= mu * f[1] * (1.0 + 1e-12), "t={} f={f:?}", r.t);
        }
    }
}

#[test]
fn standing_leg_carries_its_weight() {
    let s = ScenarioConfig::reference(1, SimBase::Floating).unwrap();
    let weight = s.model().unwrap().total_mass() * s.robot.gravity_m_per_s2;
    let tr = run_scenario(&s).unwrap();
    for r in tr.rows.iter().filter(|r| r.t >= 0.1 && r.t < 0.5) {
        assert!((r.ground_force[1] - weight).abs() < 0.01 * weight, "t={}", r.t);
    }
}

#[test]
fn single_cell_sweep_is_one_scenario() {
    let mut cfg = SweepConfig::reference().unwrap();
    cfg.grid = [1, 1];
    cfg.q1_range_rad = [-0.8, -0.8];
    cfg.q2_range_rad = [-0.25, -0.25];
    cfg.links = vec![2];
    cfg.alphas = vec![0.5];
    let res = parametric_sweep(&cfg).unwrap();
    assert_eq!(res.rows.len(), 1);
    let mut s = cfg.scenario(-0.8, -0.25, 2, 0.5);
    s.seed = cfg.template.seed;
    let rep = evaluate_trace(&run_scenario(&s).unwrap(), &s).unwrap();
    assert_eq!(res.rows[0].loc_err_mm, rep.p_norm_mm.mean);
    assert_eq!(res.rows[0].force_err_N, rep.f_norm_N.mean);
}

#[test]
fn sweep_rows_follow_grid_order() {
    let mut cfg = SweepConfig::reference().unwrap();
    cfg.grid = [2, 2];
    cfg.alphas = vec![0.5];
    cfg.contact_duration_s = 0.2;
    let a = parametric_sweep(&cfg).unwrap();
    let b = parametric_sweep(&cfg).unwrap();
    assert_eq!(a, b);
    let keys: Vec<_> = a.rows.iter().map(|r| (r.q1, r.q2, r.link)).collect();
    let mut sorted = keys.clone();
    sorted.sort_by(|x, y| x.partial_cmp(y).unwrap());
    assert_eq!(keys, sorted);
}

#[test]
fn invalid_alpha_is_reported_by_field() {
    let mut s = ScenarioConfig::reference(1, SimBase::Fixed).unwrap();
    s.contact.as_mut().unwrap().alpha = 1.5;
    match run_scenario(&s) {
        Err(Error::InvalidConfig { field, .. }) => assert_eq!(field, "contact.alpha"),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn empty_sweep_grid_is_rejected() {
    let mut cfg = SweepConfig::reference().unwrap();
    cfg.grid = [0, 10];
    assert!(matches!(parametric_sweep(&cfg), Err(Error::InvalidConfig { .. })));
    let mut cfg = SweepConfig::reference().unwrap();
    cfg.q1_range_rad = [1.0, 0.0];
    assert!(matches!(parametric_sweep(&cfg), Err(Error::InvalidConfig { .. })));
}

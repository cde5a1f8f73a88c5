//! Fixed-step simulation of the leg with PD control, the virtual FT
//! sensor or ground contact, scripted collisions, and the observer and
//! estimator running in the loop.

pub mod config;
mod evaluate;
mod sweep;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::contact::{estimate_contact, ActuationMap, BaseWrench, ContactEstimate, SensorSnapshot};
use crate::dynamics::{
    contact_jacobian, dynamics_terms, foot_jacobian, forward_dynamics, forward_kinematics,
    gravity_vector, mass_matrix, BaseMode, ChainModel, GeneralizedState, Vec2,
};
use crate::error::{Error, Result};
use crate::observer::{detect, observer_init, observer_step, ObserverConfig};
use crate::sensors::{AxisTriple, NoiseSource, VirtualFtConfig};

pub use config::{
    ContactEvent, ControllerConfig, EstimatorSettings, GroundModel, LinkConfig, ObserverSettings,
    RobotConfig, ScenarioConfig, SimBase, Waypoint, REFERENCE_POSE,
};
pub use evaluate::{count_detections, evaluate_trace, ErrorReport, ErrorStat};
pub use sweep::{parametric_sweep, SweepConfig, SweepResult, SweepRow};

/// `τ = K_P (q_des − q) − K_D q̇`.
pub fn pd_torque(
    cfg: &ControllerConfig,
    q: &DVector<f64>,
    qdot: &DVector<f64>,
    q_des: &DVector<f64>,
) -> DVector<f64> {
    (q_des - q) * cfg.kp_Nm_per_rad - qdot * cfg.kd_Nms_per_rad
}

/// Penalty ground contact: spring-damper normal force clamped at zero and a
/// viscous tangential force saturated at `μ N`.
pub fn ground_force(gm: &GroundModel, foot_pos: Vec2, foot_vel: Vec2) -> Vec2 {
    let depth = gm.height_m - foot_pos[1];
    if depth <= 0.0 {
        return Vec2::zeros();
    }
    let normal = (gm.stiffness_N_per_m * depth - gm.damping_Ns_per_m * foot_vel[1]).max(0.0);
    let limit = gm.friction_mu * normal;
    let tangential = (-gm.tangential_damping_Ns_per_m * foot_vel[0]).clamp(-limit, limit);
    Vec2::new(tangential, normal)
}

/// The collision actually applied at one instant.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrueContact {
    pub link: usize,
    pub alpha: f64,
    pub point: Vec2,
    /// Force applied to the leg by the environment.
    pub applied_force: Vec2,
}

impl TrueContact {
    /// The contact force in the estimator's convention: the force the leg
    /// exerts on the obstacle.
    pub fn contact_force(&self) -> Vec2 {
        -self.applied_force
    }
}

/// Generalized `τ_ext` of the scripted collision at time `t`, with the left-
/// hand-side sign of the equation of motion (`τ_ext = −Jᵀ F`).
pub fn external_event_torque(
    model: &ChainModel,
    q: &DVector<f64>,
    event: Option<&ContactEvent>,
    t: f64,
) -> Result<(DVector<f64>, Option<TrueContact>)> {
    let zero = DVector::zeros(model.dof());
    let Some(ev) = event else {
        return Ok((zero, None));
    };
    if !ev.is_active(t) {
        return Ok((zero, None));
    }
    let magnitude = ev.force_magnitude_N * ev.envelope(t);
    let force = Vec2::new(ev.force_angle_rad.cos(), ev.force_angle_rad.sin()) * magnitude;
    let point = forward_kinematics(model, q)?.point_on_link(ev.link, ev.alpha);
    let jac = contact_jacobian(model, q, ev.link, ev.alpha)?;
    let tau = -(jac.transpose() * DVector::from_column_slice(force.as_slice()));
    Ok((
        tau,
        Some(TrueContact {
            link: ev.link,
            alpha: ev.alpha,
            point,
            applied_force: force,
        }),
    ))
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceRow {
    pub t: f64,
    /// Full generalized state of the simulated model.
    pub q: DVector<f64>,
    pub qdot: DVector<f64>,
    pub tau_cmd: DVector<f64>,
    pub tau_sen: DVector<f64>,
    /// Base FT reading.
    pub ft: BaseWrench,
    /// Observer residual of the real joints.
    pub residual: DVector<f64>,
    pub detected: bool,
    pub link: Option<usize>,
    pub estimate: Option<ContactEstimate>,
    pub truth: Option<TrueContact>,
    /// Ground reaction on the foot (zero on the fixed base).
    pub ground_force: Vec2,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimulationTrace {
    pub name: String,
    pub base: SimBase,
    pub n_joints: usize,
    pub joint_offset: usize,
    pub rows: Vec<TraceRow>,
}

impl SimulationTrace {
    pub fn joints(&self, row: &TraceRow) -> DVector<f64> {
        row.q.rows(self.joint_offset, self.n_joints).into_owned()
    }
}

struct Plant<'a> {
    model: ChainModel,
    scen: &'a ScenarioConfig,
    map: ActuationMap,
}

struct Forces {
    /// Known generalized forces: actuation plus virtual spring.
    tau: DVector<f64>,
    /// Left-hand-side external forces: collision and ground.
    tau_ext: DVector<f64>,
    ground: Vec2,
    ground_generalized: DVector<f64>,
    truth: Option<TrueContact>,
}

fn virtual_axes(q: &DVector<f64>) -> AxisTriple {
    AxisTriple::new(q[0], q[2], q[1])
}

fn wrench_to_virtual(w: BaseWrench, dof: usize) -> DVector<f64> {
    let mut v = DVector::zeros(dof);
    v[0] = w.fx;
    v[1] = w.my;
    v[2] = w.fz;
    v
}

impl<'a> Plant<'a> {
    fn new(scen: &'a ScenarioConfig) -> Result<Self> {
        let model = scen.model()?;
        let map = ActuationMap::for_model(&model);
        Ok(Plant { model, scen, map })
    }

    fn ft(&self) -> &VirtualFtConfig {
        &self.scen.ft_sensor
    }

    fn spring(&self, state: &GeneralizedState) -> BaseWrench {
        self.ft()
            .spring_wrench(virtual_axes(&state.q), virtual_axes(&state.qdot))
    }

    fn ground(&self, state: &GeneralizedState) -> Result<(Vec2, DVector<f64>)> {
        let dof = self.model.dof();
        if self.scen.base != SimBase::Floating {
            return Ok((Vec2::zeros(), DVector::zeros(dof)));
        }
        let foot = forward_kinematics(&self.model, &state.q)?.foot();
        let jac = foot_jacobian(&self.model, &state.q)?;
        let vel = &jac * &state.qdot;
        let f = ground_force(&self.scen.ground, foot, Vec2::new(vel[0], vel[1]));
        let gen = jac.transpose() * DVector::from_column_slice(f.as_slice());
        Ok((f, gen))
    }

    fn forces(
        &self,
        t: f64,
        state: &GeneralizedState,
        tau_cmd: &DVector<f64>,
        with_event: bool,
    ) -> Result<Forces> {
        let mut tau = self.map.lift(tau_cmd);
        if self.scen.base == SimBase::Fixed {
            tau += wrench_to_virtual(self.spring(state), self.model.dof());
        }
        let (ground, ground_generalized) = self.ground(state)?;
        let event = if with_event { self.scen.contact.as_ref() } else { None };
        let (event_tau, truth) = external_event_torque(&self.model, &state.q, event, t)?;
        let tau_ext = event_tau - &ground_generalized;
        Ok(Forces {
            tau,
            tau_ext,
            ground,
            ground_generalized,
            truth,
        })
    }

    fn command(&self, t: f64, state: &GeneralizedState) -> DVector<f64> {
        let off = self.model.joint_offset();
        let n = self.model.n_joints();
        pd_torque(
            &self.scen.controller,
            &state.q.rows(off, n).into_owned(),
            &state.qdot.rows(off, n).into_owned(),
            &self.scen.controller.setpoint(t),
        )
    }

    fn accel(&self, t: f64, state: &GeneralizedState, held: Option<&DVector<f64>>) -> Result<DVector<f64>> {
        let tau_cmd = match held {
            Some(tau) => tau.clone(),
            None => self.command(t, state),
        };
        let f = self.forces(t, state, &tau_cmd, true)?;
        forward_dynamics(&self.model, state, &f.tau, &f.tau_ext)
    }

    fn rk4(&self, t: f64, h: f64, s: &GeneralizedState, held: Option<&DVector<f64>>) -> Result<GeneralizedState> {
        let shift = |dq: &DVector<f64>, dv: &DVector<f64>, k: f64| {
            GeneralizedState::new(&s.q + dq * k, &s.qdot + dv * k)
        };
        let a1 = self.accel(t, s, held)?;
        let v1 = s.qdot.clone();
        let s2 = shift(&v1, &a1, 0.5 * h);
        let a2 = self.accel(t + 0.5 * h, &s2, held)?;
        let v2 = s2.qdot.clone();
        let s3 = shift(&v2, &a2, 0.5 * h);
        let a3 = self.accel(t + 0.5 * h, &s3, held)?;
        let v3 = s3.qdot.clone();
        let s4 = shift(&v3, &a3, h);
        let a4 = self.accel(t + h, &s4, held)?;
        let v4 = s4.qdot;
        let q = &s.q + (v1 + &v2 * 2.0 + &v3 * 2.0 + v4) * (h / 6.0);
        let qdot = &s.qdot + (a1 + a2 * 2.0 + a3 * 2.0 + a4) * (h / 6.0);
        let next = GeneralizedState::new(q, qdot);
        if !next.is_finite() {
            return Err(Error::IntegrationBlowUp { t: t + h });
        }
        Ok(next)
    }

    /// Advances one control period.
    fn advance(&self, t: f64, state: GeneralizedState, tau_cmd: &DVector<f64>) -> Result<GeneralizedState> {
        let substeps = self.scen.substeps();
        let h = self.scen.controller.period() / substeps as f64;
        let held = self.scen.controller.zero_order_hold.then_some(tau_cmd);
        let mut state = state;
        for s in 0..substeps {
            state = self.rk4(t + s as f64 * h, h, &state, held)?;
        }
        Ok(state)
    }

    /// Static generalized force balance at rest under PD hold of `q_des`,
    /// without the scripted collision.
    fn static_residual(&self, q: &DVector<f64>, q_des: &DVector<f64>) -> Result<DVector<f64>> {
        let state = GeneralizedState::at_rest(q.clone());
        let off = self.model.joint_offset();
        let n = self.model.n_joints();
        let tau_cmd = pd_torque(
            &self.scen.controller,
            &q.rows(off, n).into_owned(),
            &DVector::zeros(n),
            q_des,
        );
        let f = self.forces(0.0, &state, &tau_cmd, false)?;
        Ok(f.tau - f.tau_ext - gravity_vector(&self.model, q)?)
    }

    fn initial_guess(&self, q_des: &DVector<f64>) -> Result<(DVector<f64>, Vec<usize>)> {
        let dof = self.model.dof();
        let off = self.model.joint_offset();
        let mut q = DVector::zeros(dof);
        q.rows_mut(off, q_des.len()).copy_from(q_des);
        let free = match self.scen.base {
            SimBase::Fixed => (0..dof).collect(),
            SimBase::Floating => {
                let foot = forward_kinematics(&self.model, &q)?.foot();
                let sink = self.model.total_mass() * self.model.gravity
                    / self.scen.ground.stiffness_N_per_m.max(1e-9);
                q[1] = self.scen.ground.height_m - foot[1] - sink;
                (1..dof).collect()
            }
        };
        Ok((q, free))
    }

    /// Newton solve for the resting configuration that holds `q_des`.
    fn equilibrium(&self, q_des: &DVector<f64>) -> Result<GeneralizedState> {
        let (mut q, free) = self.initial_guess(q_des)?;
        let m = free.len();
        let mut norm = f64::INFINITY;
        for _ in 0..60 {
            let res = self.static_residual(&q, q_des)?;
            let r = DVector::from_fn(m, |i, _| res[free[i]]);
            norm = r.amax();
            if norm < 1e-11 {
                return Ok(GeneralizedState::at_rest(q));
            }
            let h = 1e-7;
            let mut jac = DMatrix::zeros(m, m);
            for (j, &k) in free.iter().enumerate() {
                let mut qp = q.clone();
                let mut qm = q.clone();
                qp[k] += h;
                qm[k] -= h;
                let rp = self.static_residual(&qp, q_des)?;
                let rm = self.static_residual(&qm, q_des)?;
                for (i, &row) in free.iter().enumerate() {
                    jac[(i, j)] = (rp[row] - rm[row]) / (2.0 * h);
                }
            }
            let step = jac
                .lu()
                .solve(&r)
                .ok_or(Error::EquilibriumNotFound { residual: norm })?;
            for (i, &k) in free.iter().enumerate() {
                q[k] -= step[i];
            }
        }
        Err(Error::EquilibriumNotFound { residual: norm })
    }
}

/// Leg-only view of a floating-base state in the estimator's virtual
/// FT coordinates `[x, y_rot, z, q...]` with a massless hip.
fn leg_view(model: &ChainModel) -> ChainModel {
    ChainModel {
        base_mass: 0.0,
        ..model.with_base_mode(BaseMode::VirtualFt)
    }
}

fn to_virtual(v: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(v.len() + 1);
    out[0] = v[0];
    out[2] = v[1];
    out.rows_mut(3, v.len() - 2).copy_from(&v.rows(2, v.len() - 2));
    out
}

/// Runs the scenario and samples everything at the control rate.
pub fn run_scenario(scen: &ScenarioConfig) -> Result<SimulationTrace> {
    scen.validate()?;
    let plant = Plant::new(scen)?;
    let model = &plant.model;
    let n = model.n_joints();
    let off = model.joint_offset();
    let dof = model.dof();
    let period = scen.controller.period();
    let est_cfg = scen.estimator_config();
    let obs_cfg = ObserverConfig::uniform(
        dof,
        scen.observer.gain_per_s,
        scen.observer.epsilon_res_Nm,
        period,
    );
    let leg = leg_view(model);
    let leg_map = ActuationMap::for_model(&leg);
    let mut noise = NoiseSource::new(scen.seed);

    let mut state = plant.equilibrium(&scen.controller.setpoint(0.0))?;
    let mut obs = observer_init(model, &state, &obs_cfg)?;
    let ticks = scen.ticks();
    let mut rows = Vec::with_capacity(ticks + 1);

    for k in 0..=ticks {
        let t = k as f64 * period;
        let tau_cmd = plant.command(t, &state);
        let forces = plant.forces(t, &state, &tau_cmd, true)?;

        let ft_noise = noise.wrench(scen.ft_sensor.noise_sigma);
        let mut tau_sen = tau_cmd.clone();
        if scen.torque_noise_Nm > 0.0 {
            for v in tau_sen.iter_mut() {
                *v += noise.gaussian(scen.torque_noise_Nm);
            }
        }

        let (ft, known_obs) = match scen.base {
            SimBase::Fixed => {
                let ft = plant.spring(&state) + ft_noise;
                (ft, plant.map.lift(&tau_sen) + wrench_to_virtual(ft, dof))
            }
            SimBase::Floating => {
                let leg_state = GeneralizedState::new(to_virtual(&state.q), to_virtual(&state.qdot));
                let terms = dynamics_terms(&leg, &leg_state)?;
                let event_leg = external_event_torque(&leg, &leg_state.q, scen.contact.as_ref(), t)?.0;
                let ground_leg = to_virtual(&forces.ground_generalized);
                let mut hip = &terms.coriolis * &leg_state.qdot + &terms.gravity + event_leg - ground_leg;
                if scen.ft_inertial {
                    let qdd = forward_dynamics(model, &state, &forces.tau, &forces.tau_ext)?;
                    hip += mass_matrix(&leg, &leg_state.q)? * to_virtual(&qdd);
                }
                let w = &leg_map.s * hip;
                let ft = BaseWrench::new(w[0], w[2], w[1]) + ft_noise;
                (ft, plant.map.lift(&tau_sen) + &forces.ground_generalized)
            }
        };

        let (next_obs, r) = observer_step(&obs, model, &state, &known_obs, &obs_cfg)?;
        obs = next_obs;
        let detection = detect(&r, scen.observer.epsilon_res_Nm, model);

        let estimate = {
            let result = match scen.base {
                SimBase::Fixed => estimate_contact(
                    model,
                    &SensorSnapshot {
                        state: &state,
                        tau_sen: &tau_sen,
                        ft_reading: ft,
                        residual: &r,
                        residual_joint_offset: off,
                        known_force: None,
                    },
                    &est_cfg,
                ),
                SimBase::Floating => {
                    let leg_state =
                        GeneralizedState::new(to_virtual(&state.q), to_virtual(&state.qdot));
                    let known = to_virtual(&forces.ground_generalized);
                    estimate_contact(
                        &leg,
                        &SensorSnapshot {
                            state: &leg_state,
                            tau_sen: &tau_sen,
                            ft_reading: ft,
                            residual: &r,
                            residual_joint_offset: off,
                            known_force: Some(&known),
                        },
                        &est_cfg,
                    )
                }
            };
            match result {
                Ok(e) => e,
                Err(Error::DegenerateGeometry { .. }) => None,
                Err(e) => return Err(e),
            }
        };

        rows.push(TraceRow {
            t,
            q: state.q.clone(),
            qdot: state.qdot.clone(),
            tau_cmd: tau_cmd.clone(),
            tau_sen,
            ft,
            residual: r.rows(off, n).into_owned(),
            detected: detection.detected,
            link: detection.link,
            estimate,
            truth: forces.truth,
            ground_force: forces.ground,
        });

        if k < ticks {
            state = plant.advance(t, state, &tau_cmd)?;
        }
    }

    Ok(SimulationTrace {
        name: scen.name.clone(),
        base: scen.base,
        n_joints: n,
        joint_offset: off,
        rows,
    })
}

/// Final state after integrating a scenario with the observer and
/// estimator switched off; used for integrator convergence checks.
pub fn integrate_plant(scen: &ScenarioConfig, initial: &GeneralizedState) -> Result<GeneralizedState> {
    scen.validate()?;
    let plant = Plant::new(scen)?;
    let period = scen.controller.period();
    let mut state = initial.clone();
    for k in 0..scen.ticks() {
        let t = k as f64 * period;
        let tau_cmd = plant.command(t, &state);
        state = plant.advance(t, state, &tau_cmd)?;
    }
    Ok(state)
}

/// Resting state that holds the first controller setpoint.
pub fn static_equilibrium(scen: &ScenarioConfig) -> Result<GeneralizedState> {
    scen.validate()?;
    let plant = Plant::new(scen)?;
    plant.equilibrium(&scen.controller.setpoint(0.0))
}

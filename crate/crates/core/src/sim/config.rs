//! Scenario configuration. Field names carry their physical units so the
//! serialized form is self-describing.

#![allow(non_snake_case)]

use std::f64::consts::FRAC_PI_3;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::contact::EstimatorConfig;
use crate::dynamics::{BaseMode, ChainModel, LinkParams};
use crate::error::{Error, Result};
use crate::observer::{DEFAULT_EPSILON_RES, DEFAULT_GAIN};
use crate::sensors::VirtualFtConfig;

fn positive(field: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(field, format!("must be > 0, got {v}")))
    }
}

fn non_negative(field: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(field, format!("must be ≥ 0, got {v}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimBase {
    /// Hip bolted to the world through the virtual spring-damper FT sensor.
    Fixed,
    /// Torso free in `x` and `z` with pitch held; the foot stands on the ground.
    Floating,
}

impl SimBase {
    pub fn base_mode(self) -> BaseMode {
        match self {
            SimBase::Fixed => BaseMode::VirtualFt,
            SimBase::Floating => BaseMode::FloatingXz,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkConfig {
    pub length_m: f64,
    pub com_offset_m: f64,
    pub mass_kg: f64,
    pub inertia_kg_m2: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotConfig {
    pub links: Vec<LinkConfig>,
    pub base_mass_kg: f64,
    pub base_inertia_kg_m2: f64,
    pub gravity_m_per_s2: f64,
}

impl Default for RobotConfig {
    fn default() -> Self {
        RobotConfig::from_model(&ChainModel::reference_leg(BaseMode::Fixed))
    }
}

impl RobotConfig {
    pub fn from_model(model: &ChainModel) -> Self {
        RobotConfig {
            links: model
                .links
                .iter()
                .map(|l| LinkConfig {
                    length_m: l.length,
                    com_offset_m: l.com_offset,
                    mass_kg: l.mass,
                    inertia_kg_m2: l.inertia,
                })
                .collect(),
            base_mass_kg: model.base_mass,
            base_inertia_kg_m2: model.base_inertia,
            gravity_m_per_s2: model.gravity,
        }
    }

    pub fn model(&self, base_mode: BaseMode) -> Result<ChainModel> {
        let model = ChainModel {
            links: self
                .links
                .iter()
                .map(|l| LinkParams {
                    length: l.length_m,
                    com_offset: l.com_offset_m,
                    mass: l.mass_kg,
                    inertia: l.inertia_kg_m2,
                })
                .collect(),
            base_mass: self.base_mass_kg,
            base_inertia: self.base_inertia_kg_m2,
            base_mode,
            gravity: self.gravity_m_per_s2,
        };
        model.validate().map_err(|e| match e {
            Error::InvalidConfig { field, reason } => Error::invalid(format!("robot.{field}"), reason),
            other => other,
        })?;
        Ok(model)
    }
}

/// Joint-space target reached at `t_s`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Waypoint {
    pub t_s: f64,
    pub q_rad: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerConfig {
    pub kp_Nm_per_rad: f64,
    pub kd_Nms_per_rad: f64,
    pub rate_Hz: f64,
    /// Hold each command constant between control ticks. When false the PD
    /// law is evaluated continuously inside the integrator and only the
    /// sensors and observer run at `rate_Hz`.
    pub zero_order_hold: bool,
    /// Targets in increasing time order, joined by smooth (cosine) blends
    /// and held after the last one.
    pub waypoints: Vec<Waypoint>,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        ControllerConfig {
            kp_Nm_per_rad: 500.0,
            kd_Nms_per_rad: 10.0,
            rate_Hz: 1000.0,
            zero_order_hold: false,
            waypoints: vec![Waypoint {
                t_s: 0.0,
                q_rad: vec![0.0, 0.0],
            }],
        }
    }
}

impl ControllerConfig {
    pub fn period(&self) -> f64 {
        1.0 / self.rate_Hz
    }

    pub fn validate(&self, n_joints: usize) -> Result<()> {
        non_negative("controller.kp_Nm_per_rad", self.kp_Nm_per_rad)?;
        non_negative("controller.kd_Nms_per_rad", self.kd_Nms_per_rad)?;
        positive("controller.rate_Hz", self.rate_Hz)?;
        if self.waypoints.is_empty() {
            return Err(Error::invalid("controller.waypoints", "at least one waypoint is required"));
        }
        let mut last = f64::NEG_INFINITY;
        for (i, w) in self.waypoints.iter().enumerate() {
            if w.q_rad.len() != n_joints {
                return Err(Error::invalid(
                    format!("controller.waypoints[{i}].q_rad"),
                    format!("expected {n_joints} joint angles, got {}", w.q_rad.len()),
                ));
            }
            if !w.t_s.is_finite() || w.t_s <= last || w.q_rad.iter().any(|q| !q.is_finite()) {
                return Err(Error::invalid(
                    format!("controller.waypoints[{i}]"),
                    "times must be finite and strictly increasing",
                ));
            }
            last = w.t_s;
        }
        Ok(())
    }

    /// Joint setpoint at time `t`.
    pub fn setpoint(&self, t: f64) -> DVector<f64> {
        let w = &self.waypoints;
        let first = &w[0];
        if t <= first.t_s {
            return DVector::from_column_slice(&first.q_rad);
        }
        for pair in w.windows(2) {
            let (a, b) = (&pair[0], &pair[1]);
            if t < b.t_s {
                let s = (t - a.t_s) / (b.t_s - a.t_s);
                let blend = 0.5 * (1.0 - (std::f64::consts::PI * s).cos());
                return DVector::from_fn(a.q_rad.len(), |i, _| {
                    a.q_rad[i] + (b.q_rad[i] - a.q_rad[i]) * blend
                });
            }
        }
        DVector::from_column_slice(&w[w.len() - 1].q_rad)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundModel {
    pub stiffness_N_per_m: f64,
    pub damping_Ns_per_m: f64,
    pub friction_mu: f64,
    /// Viscous stick coefficient for the tangential force before the
    /// Coulomb limit.
    pub tangential_damping_Ns_per_m: f64,
    pub height_m: f64,
}

impl Default for GroundModel {
    fn default() -> Self {
        GroundModel {
            stiffness_N_per_m: 1e4,
            damping_Ns_per_m: 100.0,
            friction_mu: 0.3,
            tangential_damping_Ns_per_m: 500.0,
            height_m: 0.0,
        }
    }
}

impl GroundModel {
    pub fn validate(&self) -> Result<()> {
        non_negative("ground.stiffness_N_per_m", self.stiffness_N_per_m)?;
        non_negative("ground.damping_Ns_per_m", self.damping_Ns_per_m)?;
        non_negative("ground.friction_mu", self.friction_mu)?;
        non_negative("ground.tangential_damping_Ns_per_m", self.tangential_damping_Ns_per_m)?;
        if !self.height_m.is_finite() {
            return Err(Error::invalid("ground.height_m", "must be finite"));
        }
        Ok(())
    }
}

/// A scripted external force on one link.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContactEvent {
    /// 1-based link index.
    pub link: usize,
    pub alpha: f64,
    pub force_magnitude_N: f64,
    pub force_angle_rad: f64,
    pub start_s: f64,
    pub duration_s: f64,
    /// Raised-cosine ramp from zero to full force; 0 applies a step.
    pub rise_time_s: f64,
}

impl ContactEvent {
    pub fn validate(&self, n_joints: usize) -> Result<()> {
        if self.link == 0 || self.link > n_joints {
            return Err(Error::invalid(
                "contact.link",
                format!("must lie in 1..={n_joints}, got {}", self.link),
            ));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::invalid(
                "contact.alpha",
                format!("must lie in [0, 1], got {}", self.alpha),
            ));
        }
        non_negative("contact.force_magnitude_N", self.force_magnitude_N)?;
        if !self.force_angle_rad.is_finite() {
            return Err(Error::invalid("contact.force_angle_rad", "must be finite"));
        }
        non_negative("contact.start_s", self.start_s)?;
        positive("contact.duration_s", self.duration_s)?;
        non_negative("contact.rise_time_s", self.rise_time_s)?;
        if self.rise_time_s > self.duration_s {
            return Err(Error::invalid("contact.rise_time_s", "must not exceed duration_s"));
        }
        Ok(())
    }

    pub fn end_s(&self) -> f64 {
        self.start_s + self.duration_s
    }

    pub fn is_active(&self, t: f64) -> bool {
        t >= self.start_s && t <= self.end_s()
    }

    /// Fraction of the full force applied at time `t`.
    pub fn envelope(&self, t: f64) -> f64 {
        if !self.is_active(t) {
            return 0.0;
        }
        let elapsed = t - self.start_s;
        if elapsed >= self.rise_time_s {
            1.0
        } else {
            0.5 * (1.0 - (std::f64::consts::PI * elapsed / self.rise_time_s).cos())
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObserverSettings {
    /// Diagonal observer gain applied to every coordinate.
    pub gain_per_s: f64,
    pub epsilon_res_Nm: f64,
}

impl Default for ObserverSettings {
    fn default() -> Self {
        ObserverSettings {
            gain_per_s: DEFAULT_GAIN,
            epsilon_res_Nm: DEFAULT_EPSILON_RES,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorSettings {
    pub collinearity_tol: f64,
    pub alpha_clamp_margin: f64,
}

impl Default for EstimatorSettings {
    fn default() -> Self {
        let d = EstimatorConfig::default();
        EstimatorSettings {
            collinearity_tol: d.collinearity_tol,
            alpha_clamp_margin: d.alpha_clamp_margin,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub base: SimBase,
    pub duration_s: f64,
    pub integrator_step_s: f64,
    pub seed: u64,
    /// Standard deviation of additive joint torque sensing noise.
    pub torque_noise_Nm: f64,
    /// Add the leg's inertial term to the floating-base hip wrench reading.
    pub ft_inertial: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contact: Option<ContactEvent>,
    pub controller: ControllerConfig,
    pub observer: ObserverSettings,
    pub estimator: EstimatorSettings,
    pub ft_sensor: VirtualFtConfig,
    pub ground: GroundModel,
    pub robot: RobotConfig,
}

/// Stance used by the scenario presets: both links close to perpendicular
/// to a force at −π/3.
pub const REFERENCE_POSE: [f64; 2] = [-0.8, -0.25];

impl ScenarioConfig {
    /// The two reference collision scenarios (`index` 1 or 2) on either base.
    pub fn reference(index: usize, base: SimBase) -> Result<Self> {
        let (link, alpha, magnitude) = match index {
            1 => (1, 0.5, 5.0),
            2 => (2, 0.8, 7.0),
            _ => return Err(Error::invalid("scenario", format!("no reference scenario {index}"))),
        };
        let waypoints = match base {
            SimBase::Fixed => vec![
                Waypoint {
                    t_s: 0.0,
                    q_rad: vec![0.0, 0.0],
                },
                Waypoint {
                    t_s: 0.3,
                    q_rad: REFERENCE_POSE.to_vec(),
                },
            ],
            SimBase::Floating => vec![Waypoint {
                t_s: 0.0,
                q_rad: REFERENCE_POSE.to_vec(),
            }],
        };
        let tag = match base {
            SimBase::Fixed => "fixed",
            SimBase::Floating => "floating",
        };
        Ok(ScenarioConfig {
            name: format!("scenario{index}_{tag}"),
            base,
            duration_s: 1.2,
            integrator_step_s: 5e-5,
            seed: 1,
            torque_noise_Nm: 0.0,
            ft_inertial: false,
            contact: Some(ContactEvent {
                link,
                alpha,
                force_magnitude_N: magnitude,
                force_angle_rad: -FRAC_PI_3,
                start_s: 0.5,
                duration_s: 0.5,
                rise_time_s: 0.0,
            }),
            controller: ControllerConfig {
                waypoints,
                ..ControllerConfig::default()
            },
            observer: ObserverSettings::default(),
            estimator: EstimatorSettings::default(),
            ft_sensor: VirtualFtConfig::default(),
            ground: GroundModel::default(),
            robot: RobotConfig::default(),
        })
    }

    pub fn model(&self) -> Result<ChainModel> {
        self.robot.model(self.base.base_mode())
    }

    pub fn estimator_config(&self) -> EstimatorConfig {
        EstimatorConfig {
            epsilon_res: self.observer.epsilon_res_Nm,
            collinearity_tol: self.estimator.collinearity_tol,
            alpha_clamp_margin: self.estimator.alpha_clamp_margin,
        }
    }

    /// Number of control ticks after `t = 0`.
    pub fn ticks(&self) -> usize {
        (self.duration_s * self.controller.rate_Hz).round() as usize
    }

    /// Integrator substeps per control tick.
    pub fn substeps(&self) -> usize {
        (self.controller.period() / self.integrator_step_s).round().max(1.0) as usize
    }

    pub fn validate(&self) -> Result<()> {
        let model = self.model()?;
        positive("duration_s", self.duration_s)?;
        positive("integrator_step_s", self.integrator_step_s)?;
        non_negative("torque_noise_Nm", self.torque_noise_Nm)?;
        self.controller.validate(model.n_joints())?;
        let period = self.controller.period();
        if self.integrator_step_s > period * (1.0 + 1e-12) {
            return Err(Error::invalid(
                "integrator_step_s",
                "must not exceed the control period",
            ));
        }
        let ratio = period / self.integrator_step_s;
        if (ratio - ratio.round()).abs() > 1e-9 * ratio {
            return Err(Error::invalid(
                "integrator_step_s",
                "must divide the control period evenly",
            ));
        }
        let ticks = self.duration_s * self.controller.rate_Hz;
        if (ticks - ticks.round()).abs() > 1e-9 * ticks.max(1.0) {
            return Err(Error::invalid(
                "duration_s",
                "must be a whole number of control periods",
            ));
        }
        positive("observer.gain_per_s", self.observer.gain_per_s)?;
        positive("observer.epsilon_res_Nm", self.observer.epsilon_res_Nm)?;
        positive("estimator.collinearity_tol", self.estimator.collinearity_tol)?;
        non_negative("estimator.alpha_clamp_margin", self.estimator.alpha_clamp_margin)?;
        self.ft_sensor.validate()?;
        self.ground.validate()?;
        if let Some(c) = &self.contact {
            c.validate(model.n_joints())?;
            if c.start_s > self.duration_s {
                return Err(Error::invalid("contact.start_s", "must lie within duration_s"));
            }
        }
        Ok(())
    }
}

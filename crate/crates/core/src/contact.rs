//! Contact force and location from a base FT sensor fused with the
//! momentum observer.
//!
//! The base wrench the model predicts for the measured joint torques,
//! `w = S(C q̇ + g − B τ_sen)` (inertial term neglected), is compared with
//! the FT reading `F_b`. The difference `F_u = w − F_b` is the unexpected
//! wrench; its force part gives `F_c = −F_u,xz` and a moment balance about
//! the base,
//!
//! ```text
//! M_y,u + p_c ∧ F_u,xz = 0,   p_c = p1 + α (p2 − p1),
//! ```
//!
//! is solved for the position `α` along the link picked by the observer.
//!
//! `F_c` is the force the leg exerts on the obstacle at the contact point.
//! Models used here must be in `BaseMode::VirtualFt`, whose `[x, y_rot, z]`
//! block carries `(F_x, M_y, F_z)`.

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dynamics::{dynamics_terms, forward_kinematics, wedge, BaseMode, ChainModel, GeneralizedState, Vec2};
use crate::error::{Error, Result};
use crate::observer::{detect_collision, identify_link};

/// Planar wrench `(F_x, F_z, M_y)` in the base frame.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BaseWrench {
    pub fx: f64,
    pub fz: f64,
    pub my: f64,
}

impl BaseWrench {
    pub const ZERO: BaseWrench = BaseWrench {
        fx: 0.0,
        fz: 0.0,
        my: 0.0,
    };

    pub fn new(fx: f64, fz: f64, my: f64) -> Self {
        BaseWrench { fx, fz, my }
    }

    pub fn force(&self) -> Vec2 {
        Vec2::new(self.fx, self.fz)
    }

    pub fn is_finite(&self) -> bool {
        self.fx.is_finite() && self.fz.is_finite() && self.my.is_finite()
    }

    /// Reads the `[x, y_rot, z]` block of a generalized force in
    /// `VirtualFt` ordering.
    pub fn from_virtual_block(v: &DVector<f64>) -> Self {
        BaseWrench::new(v[0], v[2], v[1])
    }

    pub fn component_mul(&self, other: &BaseWrench) -> BaseWrench {
        BaseWrench::new(self.fx * other.fx, self.fz * other.fz, self.my * other.my)
    }
}

impl Add for BaseWrench {
    type Output = BaseWrench;
    fn add(self, o: BaseWrench) -> BaseWrench {
        BaseWrench::new(self.fx + o.fx, self.fz + o.fz, self.my + o.my)
    }
}

impl Sub for BaseWrench {
    type Output = BaseWrench;
    fn sub(self, o: BaseWrench) -> BaseWrench {
        BaseWrench::new(self.fx - o.fx, self.fz - o.fz, self.my - o.my)
    }
}

impl Neg for BaseWrench {
    type Output = BaseWrench;
    fn neg(self) -> BaseWrench {
        BaseWrench::new(-self.fx, -self.fz, -self.my)
    }
}

impl Mul<f64> for BaseWrench {
    type Output = BaseWrench;
    fn mul(self, k: f64) -> BaseWrench {
        BaseWrench::new(self.fx * k, self.fz * k, self.my * k)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContactEstimate {
    /// 1-based link index.
    pub link: usize,
    pub alpha: f64,
    /// World contact point `(x, z)` (m).
    pub point: Vec2,
    /// Contact force `(F_x, F_z)` exerted by the leg (N).
    pub force: Vec2,
    pub valid: bool,
    /// `alpha` was pulled back into `[0, 1]` from a small excursion.
    pub clamped: bool,
}

/// `B` (N×n) places actuated joint torques into generalized-force space;
/// `S` (3×N) extracts the `[x, y_rot, z]` base block.
#[derive(Clone, Debug, PartialEq)]
pub struct ActuationMap {
    pub b: DMatrix<f64>,
    pub s: DMatrix<f64>,
}

impl ActuationMap {
    pub fn for_model(model: &ChainModel) -> Self {
        let dof = model.dof();
        let n = model.n_joints();
        let off = model.joint_offset();
        let b = DMatrix::from_fn(dof, n, |i, j| if i == off + j { 1.0 } else { 0.0 });
        let base = model.base_mode.base_dofs().min(3);
        let s = DMatrix::from_fn(3, dof, |i, j| if i == j && i < base { 1.0 } else { 0.0 });
        ActuationMap { b, s }
    }

    /// `B τ`, the actuated torques zero-padded to N.
    pub fn lift(&self, tau: &DVector<f64>) -> DVector<f64> {
        &self.b * tau
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    pub epsilon_res: f64,
    /// Minimum `|sin|` of the angle between force and link before the
    /// moment balance is declared degenerate.
    pub collinearity_tol: f64,
    /// `alpha` excursions outside `[0, 1]` up to this size are clamped.
    pub alpha_clamp_margin: f64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig {
            epsilon_res: crate::observer::DEFAULT_EPSILON_RES,
            collinearity_tol: 1e-3,
            alpha_clamp_margin: 0.02,
        }
    }
}

fn require_virtual(model: &ChainModel) -> Result<()> {
    if model.base_mode != BaseMode::VirtualFt {
        return Err(Error::invalid(
            "base_mode",
            "contact estimation needs the virtual FT coordinates",
        ));
    }
    Ok(())
}

/// Model-predicted base wrench, quasi-static. `known` is any additional
/// measured generalized force acting on the leg (e.g. a foot ground
/// reaction) that should not be attributed to the collision.
pub fn predicted_base_wrench(
    model: &ChainModel,
    state: &GeneralizedState,
    tau_sen: &DVector<f64>,
    map: &ActuationMap,
    known: Option<&DVector<f64>>,
) -> Result<BaseWrench> {
    require_virtual(model)?;
    if tau_sen.len() != model.n_joints() {
        return Err(Error::DimensionMismatch {
            what: "tau_sen",
            expected: model.n_joints(),
            got: tau_sen.len(),
        });
    }
    let terms = dynamics_terms(model, state)?;
    let mut gen = &terms.coriolis * &state.qdot + &terms.gravity - map.lift(tau_sen);
    if let Some(k) = known {
        if k.len() != model.dof() {
            return Err(Error::DimensionMismatch {
                what: "known generalized force",
                expected: model.dof(),
                got: k.len(),
            });
        }
        gen -= k;
    }
    let w = &map.s * gen;
    Ok(BaseWrench::new(w[0], w[2], w[1]))
}

pub fn unexpected_wrench(w: BaseWrench, ft_reading: BaseWrench) -> BaseWrench {
    w - ft_reading
}

const ROUNDOFF: f64 = 1e-12;

/// Solves the base moment balance for the contact position on `link`.
pub fn localize_contact(
    model: &ChainModel,
    q: &DVector<f64>,
    link: usize,
    f_u: BaseWrench,
    config: &EstimatorConfig,
) -> Result<ContactEstimate> {
    if link == 0 || link > model.n_joints() {
        return Err(Error::LinkIndexOutOfRange {
            index: link,
            links: model.n_joints(),
        });
    }
    let fk = forward_kinematics(model, q)?;
    let (p1, p2) = fk.links[link - 1];
    let d = p2 - p1;
    let f = f_u.force();
    let denom = wedge(&d, &f);
    let scale = d.norm() * f.norm();
    let sine = if scale > 0.0 { denom.abs() / scale } else { 0.0 };
    if !(sine >= config.collinearity_tol) {
        return Err(Error::DegenerateGeometry {
            link,
            sine,
            tol: config.collinearity_tol,
        });
    }
    // The sensor moment is taken about the base point.
    let raw = -(f_u.my + wedge(&(p1 - fk.base), &f)) / denom;
    let margin = config.alpha_clamp_margin;
    let (alpha, valid, clamped) = if (-ROUNDOFF..=1.0 + ROUNDOFF).contains(&raw) {
        (raw.clamp(0.0, 1.0), true, false)
    } else if raw >= -margin && raw <= 1.0 + margin {
        (raw.clamp(0.0, 1.0), true, true)
    } else {
        (raw, false, false)
    };
    Ok(ContactEstimate {
        link,
        alpha,
        point: p1 + d * alpha,
        force: -f,
        valid,
        clamped,
    })
}

/// Everything sampled at one instant that the estimator consumes.
#[derive(Clone, Debug)]
pub struct SensorSnapshot<'a> {
    /// State in the estimator model's `VirtualFt` coordinates.
    pub state: &'a GeneralizedState,
    /// Actuated joint torques (length n).
    pub tau_sen: &'a DVector<f64>,
    pub ft_reading: BaseWrench,
    /// Observer residual and the index of joint 1 inside it.
    pub residual: &'a DVector<f64>,
    pub residual_joint_offset: usize,
    /// Measured non-collision generalized force on the leg, if any.
    pub known_force: Option<&'a DVector<f64>>,
}

/// Detect, identify the link, compute the unexpected wrench and localize.
/// Returns `Ok(None)` when no joint residual crosses the threshold.
pub fn estimate_contact(
    model: &ChainModel,
    snapshot: &SensorSnapshot<'_>,
    config: &EstimatorConfig,
) -> Result<Option<ContactEstimate>> {
    let n = model.n_joints();
    let off = snapshot.residual_joint_offset;
    if snapshot.residual.len() < off + n {
        return Err(Error::DimensionMismatch {
            what: "residual",
            expected: off + n,
            got: snapshot.residual.len(),
        });
    }
    if !detect_collision(snapshot.residual.rows(off, n), config.epsilon_res) {
        return Ok(None);
    }
    let link = identify_link(snapshot.residual, config.epsilon_res, n, off)?;
    let map = ActuationMap::for_model(model);
    let w = predicted_base_wrench(
        model,
        snapshot.state,
        snapshot.tau_sen,
        &map,
        snapshot.known_force,
    )?;
    let f_u = unexpected_wrench(w, snapshot.ft_reading);
    localize_contact(model, &snapshot.state.q, link, f_u, config).map(Some)
}

//! Generalized-momentum residual observer, collision detection and
//! collided-link identification.
//!
//! With `P = M(q) q̇` and `u = Cᵀq̇ − g + τ_sen`, the residual
//!
//! ```text
//! r(t)       = K [P(t) − p_int(t) − P0]
//! p_int(t+Δ) = p_int(t) + (u + r(t)) Δ
//! ```
//!
//! obeys `ṙ = K(d − r)` where `d` is the generalized force from the
//! environment acting on the robot (the negative of `τ_ext` in
//! `M q̈ + C q̇ + g + τ_ext = τ_sen`). A contact on link `c` leaves the
//! residuals of joints distal to `c` at zero.

use std::collections::BTreeMap;

use nalgebra::{DVector, DVectorView};

use crate::dynamics::{dynamics_terms, ChainModel, GeneralizedState};
use crate::error::{Error, Result};

/// Residual threshold determined empirically on hardware.
pub const DEFAULT_EPSILON_RES: f64 = 0.06;
/// Default diagonal observer gain (1/s).
pub const DEFAULT_GAIN: f64 = 50.0;

#[derive(Clone, Debug, PartialEq)]
pub struct ObserverConfig {
    /// Diagonal of the gain matrix `K` (1/s), one entry per coordinate.
    pub gain: DVector<f64>,
    pub epsilon_res: f64,
    /// Update period (s).
    pub dt: f64,
}

impl ObserverConfig {
    pub fn uniform(dof: usize, gain: f64, epsilon_res: f64, dt: f64) -> Self {
        ObserverConfig {
            gain: DVector::from_element(dof, gain),
            epsilon_res,
            dt,
        }
    }

    pub fn validate(&self, dof: usize) -> Result<()> {
        if self.gain.len() != dof {
            return Err(Error::DimensionMismatch {
                what: "observer gain",
                expected: dof,
                got: self.gain.len(),
            });
        }
        if self.gain.iter().any(|k| !(*k > 0.0 && k.is_finite())) {
            return Err(Error::invalid("observer.gain", "entries must be > 0"));
        }
        if !(self.epsilon_res > 0.0 && self.epsilon_res.is_finite()) {
            return Err(Error::invalid("observer.epsilon_res", "must be > 0"));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::invalid("observer.dt", "must be > 0"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ObserverState {
    /// Integrator state (momentum units).
    pub p_int: DVector<f64>,
    /// Momentum at initialization.
    pub p0: DVector<f64>,
    /// Latest residual (generalized force units).
    pub r: DVector<f64>,
    /// Elapsed time (s).
    pub t: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DetectionResult {
    pub detected: bool,
    /// 1-based index of the collided link, present iff `detected`.
    pub link: Option<usize>,
    pub residual: DVector<f64>,
}

pub fn observer_init(
    model: &ChainModel,
    state0: &GeneralizedState,
    config: &ObserverConfig,
) -> Result<ObserverState> {
    config.validate(model.dof())?;
    let m = crate::dynamics::mass_matrix(model, &state0.q)?;
    let n = model.dof();
    Ok(ObserverState {
        p_int: DVector::zeros(n),
        p0: m * &state0.qdot,
        r: DVector::zeros(n),
        t: 0.0,
    })
}

/// One explicit-Euler observer update.
///
/// `tau_sen` is the full N-vector of known generalized forces: actuated
/// joint torques through the actuation map, zero on unactuated or virtual
/// coordinates unless a force there is measured.
pub fn observer_step(
    state: &ObserverState,
    model: &ChainModel,
    meas: &GeneralizedState,
    tau_sen: &DVector<f64>,
    config: &ObserverConfig,
) -> Result<(ObserverState, DVector<f64>)> {
    let n = model.dof();
    if tau_sen.len() != n {
        return Err(Error::DimensionMismatch {
            what: "tau_sen",
            expected: n,
            got: tau_sen.len(),
        });
    }
    if state.p_int.len() != n {
        return Err(Error::DimensionMismatch {
            what: "observer state",
            expected: n,
            got: state.p_int.len(),
        });
    }
    if !meas.is_finite() {
        return Err(Error::NonFinite("measured state"));
    }
    if tau_sen.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("tau_sen"));
    }
    let terms = dynamics_terms(model, meas)?;
    let momentum = &terms.mass * &meas.qdot;
    let u = terms.coriolis.transpose() * &meas.qdot - &terms.gravity + tau_sen;
    let r = (&momentum - &state.p_int - &state.p0).component_mul(&config.gain);
    let p_int = &state.p_int + (&u + &r) * config.dt;
    let next = ObserverState {
        p_int,
        p0: state.p0.clone(),
        r: r.clone(),
        t: state.t + config.dt,
    };
    Ok((next, r))
}

/// `true` iff `max_i |r_i| > ε`.
pub fn detect_collision(r: DVectorView<'_, f64>, epsilon_res: f64) -> bool {
    r.iter().any(|v| v.abs() > epsilon_res)
}

/// Highest real-joint index (1-based) whose residual magnitude exceeds the
/// threshold. `joint_offset` skips base coordinates at the front of `r`.
pub fn identify_link(
    r: &DVector<f64>,
    epsilon_res: f64,
    n_joints: usize,
    joint_offset: usize,
) -> Result<usize> {
    if r.len() < joint_offset + n_joints {
        return Err(Error::DimensionMismatch {
            what: "residual",
            expected: joint_offset + n_joints,
            got: r.len(),
        });
    }
    (1..=n_joints)
        .rev()
        .find(|&i| r[joint_offset + i - 1].abs() > epsilon_res)
        .ok_or(Error::NoResidualAboveThreshold {
            threshold: epsilon_res,
        })
}

/// Threshold test and link identification on the real-joint block of `r`.
pub fn detect(r: &DVector<f64>, epsilon_res: f64, model: &ChainModel) -> DetectionResult {
    let offset = model.joint_offset();
    let n = model.n_joints();
    let detected = detect_collision(r.rows(offset, n), epsilon_res);
    let link = if detected {
        identify_link(r, epsilon_res, n, offset).ok()
    } else {
        None
    };
    DetectionResult {
        detected,
        link,
        residual: r.clone(),
    }
}

/// Most frequent link over a window; ties go to the lower index.
pub fn modal_link<I: IntoIterator<Item = usize>>(links: I) -> Option<usize> {
    let mut counts = BTreeMap::new();
    for l in links {
        *counts.entry(l).or_insert(0usize) += 1;
    }
    counts
        .into_iter()
        .fold(None, |best: Option<(usize, usize)>, (l, c)| match best {
            Some((_, bc)) if bc >= c => best,
            _ => Some((l, c)),
        })
        .map(|(l, _)| l)
}

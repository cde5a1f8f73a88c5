#![allow(non_snake_case)]

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{forward_kinematics, wedge, Vec2};
use crate::error::{Error, Result};
use crate::sensors::AxisTriple;

use super::{evaluate_trace, run_scenario, ContactEvent, ScenarioConfig, SimBase, Waypoint};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub q1_range_rad: [f64; 2],
    pub q2_range_rad: [f64; 2],
    /// Grid points along `q1` and `q2`, endpoints included.
    pub grid: [usize; 2],
    pub links: Vec<usize>,
    pub alphas: Vec<f64>,
    pub force_magnitude_N: f64,
    pub force_angle_rad: f64,
    /// Rest time before the force is applied.
    pub settle_s: f64,
    pub contact_duration_s: f64,
    pub rise_time_s: f64,
    /// Contacts whose force makes an angle with the link below this sine
    /// are marked degenerate.
    pub degenerate_sine: f64,
    /// Everything else (gains, sensors, robot) comes from this scenario.
    pub template: ScenarioConfig,
}

impl SweepConfig {
    /// The 10×10 fixed-base grid over `[0, π]²` with contacts at four points
    /// on each link, noiseless, 5 N at −π/3.
    pub fn reference() -> Result<Self> {
        let mut template = ScenarioConfig::reference(1, SimBase::Fixed)?;
        template.name = "sweep".into();
        template.ft_sensor.noise_sigma = AxisTriple::new(0.0, 0.0, 0.0);
        template.torque_noise_Nm = 0.0;
        let event = template.contact.expect("reference scenarios have a contact");
        Ok(SweepConfig {
            q1_range_rad: [0.0, PI],
            q2_range_rad: [0.0, PI],
            grid: [10, 10],
            links: vec![1, 2],
            alphas: vec![0.25, 0.5, 0.75, 1.0],
            force_magnitude_N: event.force_magnitude_N,
            force_angle_rad: event.force_angle_rad,
            settle_s: 0.05,
            contact_duration_s: 0.45,
            rise_time_s: 0.15,
            degenerate_sine: 0.2,
            template,
        })
    }

    pub fn validate(&self) -> Result<()> {
        for (name, r) in [("q1_range_rad", self.q1_range_rad), ("q2_range_rad", self.q2_range_rad)] {
            if !(r[0].is_finite() && r[1].is_finite() && r[0] <= r[1]) {
                return Err(Error::invalid(name, "needs finite bounds with lo ≤ hi"));
            }
        }
        if self.grid[0] == 0 || self.grid[1] == 0 {
            return Err(Error::invalid("grid", "both dimensions must be ≥ 1"));
        }
        if self.links.is_empty() {
            return Err(Error::invalid("links", "at least one link is required"));
        }
        if self.alphas.is_empty() {
            return Err(Error::invalid("alphas", "at least one alpha is required"));
        }
        if !(self.settle_s > 0.0) {
            return Err(Error::invalid("settle_s", "must be > 0"));
        }
        if !(self.degenerate_sine >= 0.0 && self.degenerate_sine < 1.0) {
            return Err(Error::invalid("degenerate_sine", "must lie in [0, 1)"));
        }
        for (i, &link) in self.links.iter().enumerate() {
            for (j, &alpha) in self.alphas.iter().enumerate() {
                self.scenario(0.0, 0.0, link, alpha)
                    .validate()
                    .map_err(|e| match e {
                        Error::InvalidConfig { field, reason } => Error::invalid(
                            format!("links[{i}]/alphas[{j}] → {field}"),
                            reason,
                        ),
                        other => other,
                    })?;
            }
        }
        Ok(())
    }

    pub fn grid_values(&self) -> (Vec<f64>, Vec<f64>) {
        let axis = |r: [f64; 2], n: usize| -> Vec<f64> {
            if n == 1 {
                return vec![r[0]];
            }
            (0..n)
                .map(|i| r[0] + (r[1] - r[0]) * i as f64 / (n - 1) as f64)
                .collect()
        };
        (axis(self.q1_range_rad, self.grid[0]), axis(self.q2_range_rad, self.grid[1]))
    }

    /// The single-contact scenario simulated for one grid cell.
    pub fn scenario(&self, q1: f64, q2: f64, link: usize, alpha: f64) -> ScenarioConfig {
        let mut scen = self.template.clone();
        let rate = scen.controller.rate_Hz;
        let ticks = ((self.settle_s + self.contact_duration_s) * rate).round();
        scen.duration_s = ticks / rate;
        scen.name = format!("{}_q{q1:.4}_{q2:.4}_l{link}_a{alpha}", self.template.name);
        scen.controller.waypoints = vec![Waypoint {
            t_s: 0.0,
            q_rad: vec![q1, q2],
        }];
        scen.contact = Some(ContactEvent {
            link,
            alpha,
            force_magnitude_N: self.force_magnitude_N,
            force_angle_rad: self.force_angle_rad,
            start_s: self.settle_s,
            duration_s: scen.duration_s - self.settle_s,
            rise_time_s: self.rise_time_s,
        });
        scen
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub q1: f64,
    pub q2: f64,
    pub link: usize,
    pub alpha: f64,
    /// Mean contact-point error over the contact window.
    pub loc_err_mm: f64,
    /// Mean force error over the contact window.
    pub force_err_N: f64,
    /// `|sin|` of the angle between the commanded force and the link.
    pub sine: f64,
    pub degenerate: bool,
    /// Why the contact was marked degenerate, empty otherwise.
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    /// Worst errors over rows not marked degenerate.
    pub max_loc_err_mm: f64,
    pub max_force_err_N: f64,
    pub degenerate_rows: usize,
}

fn run_contact(cfg: &SweepConfig, q1: f64, q2: f64, link: usize, alpha: f64, seed: u64) -> Result<SweepRow> {
    let mut scen = cfg.scenario(q1, q2, link, alpha);
    scen.seed = seed;
    let model = scen.model()?;
    let mut q = nalgebra::DVector::zeros(model.dof());
    q[model.joint_offset()] = q1;
    q[model.joint_offset() + 1] = q2;
    let (p1, p2) = forward_kinematics(&model, &q)?.links[link - 1];
    let dir = (p2 - p1).normalize();
    let force = Vec2::new(cfg.force_angle_rad.cos(), cfg.force_angle_rad.sin());
    let sine = wedge(&dir, &force).abs();

    let trace = run_scenario(&scen)?;
    let (loc, force_err, mut reason) = match evaluate_trace(&trace, &scen) {
        Ok(rep) => {
            let mut why = Vec::new();
            if rep.modal_link != Some(link) {
                why.push(format!("link identified as {:?}", rep.modal_link));
            }
            if rep.missing > 0 {
                why.push(format!("{} samples without a solution", rep.missing));
            }
            (rep.p_norm_mm.mean, rep.f_norm_N.mean, why)
        }
        Err(Error::EmptyContactWindow) => (f64::NAN, f64::NAN, vec!["not detected".to_string()]),
        Err(e) => return Err(e),
    };
    if sine < cfg.degenerate_sine {
        reason.insert(0, format!("force nearly collinear with link (|sin| = {sine:.3})"));
    }
    Ok(SweepRow {
        q1,
        q2,
        link,
        alpha,
        loc_err_mm: loc,
        force_err_N: force_err,
        sine,
        degenerate: !reason.is_empty(),
        reason: reason.join("; "),
    })
}

/// Runs every `(q1, q2, link, alpha)` combination in parallel. Rows come
/// back in grid order regardless of scheduling.
pub fn parametric_sweep(cfg: &SweepConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let (q1s, q2s) = cfg.grid_values();
    let mut jobs = Vec::new();
    for &q1 in &q1s {
        for &q2 in &q2s {
            for &link in &cfg.links {
                for &alpha in &cfg.alphas {
                    jobs.push((q1, q2, link, alpha));
                }
            }
        }
    }
    let base_seed = cfg.template.seed;
    let rows: Vec<SweepRow> = jobs
        .par_iter()
        .enumerate()
        .map(|(i, &(q1, q2, link, alpha))| run_contact(cfg, q1, q2, link, alpha, base_seed.wrapping_add(i as u64)))
        .collect::<Result<_>>()?;
    let good = rows.iter().filter(|r| !r.degenerate);
    let max_loc = good.clone().map(|r| r.loc_err_mm).fold(0.0, f64::max);
    let max_force = good.map(|r| r.force_err_N).fold(0.0, f64::max);
    let degenerate_rows = rows.iter().filter(|r| r.degenerate).count();
    Ok(SweepResult {
        rows,
        max_loc_err_mm: max_loc,
        max_force_err_N: max_force,
        degenerate_rows,
    })
}

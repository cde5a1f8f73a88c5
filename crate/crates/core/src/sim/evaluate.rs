#![allow(non_snake_case)]

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::observer::modal_link;

use super::{ScenarioConfig, SimulationTrace};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ErrorStat {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
}

impl ErrorStat {
    fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return ErrorStat {
                mean: f64::NAN,
                std: f64::NAN,
            };
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        ErrorStat {
            mean,
            std: var.sqrt(),
        }
    }
}

/// Estimation errors over the contact window. Per-axis errors are signed
/// (`estimate − truth`); the magnitude errors are norms of the error vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub fx_N: ErrorStat,
    pub fz_N: ErrorStat,
    pub f_norm_N: ErrorStat,
    pub px_mm: ErrorStat,
    pub pz_mm: ErrorStat,
    pub p_norm_mm: ErrorStat,
    /// Samples with an estimate inside the window.
    pub samples: usize,
    /// Window samples (contact active and detection latched) without an
    /// estimate.
    pub missing: usize,
    /// Window samples whose estimate was flagged invalid (`alpha` outside
    /// `[0, 1]`); excluded from the statistics.
    pub invalid: usize,
    pub true_link: usize,
    pub modal_link: Option<usize>,
    pub first_detection_s: Option<f64>,
    pub detection_latency_s: Option<f64>,
    /// Detections before the collision started.
    pub early_detections: usize,
}

/// Number of samples with a residual above threshold.
pub fn count_detections(trace: &SimulationTrace) -> usize {
    trace.rows.iter().filter(|r| r.detected).count()
}

pub fn evaluate_trace(trace: &SimulationTrace, scen: &ScenarioConfig) -> Result<ErrorReport> {
    let event = scen.contact.as_ref().ok_or(Error::EmptyContactWindow)?;
    let early = trace
        .rows
        .iter()
        .filter(|r| r.detected && r.t < event.start_s)
        .count();
    let first = trace
        .rows
        .iter()
        .find(|r| r.detected && r.t >= event.start_s)
        .map(|r| r.t);
    let Some(latch) = first else {
        return Err(Error::EmptyContactWindow);
    };
    let window: Vec<_> = trace
        .rows
        .iter()
        .filter(|r| r.t >= latch && r.truth.is_some())
        .collect();
    let mut fx = Vec::new();
    let mut fz = Vec::new();
    let mut fn_ = Vec::new();
    let mut px = Vec::new();
    let mut pz = Vec::new();
    let mut pn = Vec::new();
    let mut missing = 0;
    let mut invalid = 0;
    for row in &window {
        let truth = row.truth.as_ref().expect("filtered on truth");
        let Some(est) = &row.estimate else {
            missing += 1;
            continue;
        };
        if !est.valid {
            invalid += 1;
            continue;
        }
        let df = est.force - truth.contact_force();
        let dp = (est.point - truth.point) * 1e3;
        fx.push(df[0]);
        fz.push(df[1]);
        fn_.push(df.norm());
        px.push(dp[0]);
        pz.push(dp[1]);
        pn.push(dp.norm());
    }
    if fx.is_empty() {
        return Err(Error::EmptyContactWindow);
    }
    Ok(ErrorReport {
        fx_N: ErrorStat::of(&fx),
        fz_N: ErrorStat::of(&fz),
        f_norm_N: ErrorStat::of(&fn_),
        px_mm: ErrorStat::of(&px),
        pz_mm: ErrorStat::of(&pz),
        p_norm_mm: ErrorStat::of(&pn),
        samples: fx.len(),
        missing,
        invalid,
        true_link: event.link,
        modal_link: modal_link(window.iter().filter_map(|r| r.link)),
        first_detection_s: Some(latch),
        detection_latency_s: Some(latch - event.start_s),
        early_detections: early,
    })
}

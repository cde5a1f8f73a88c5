//! Config files, trace/report/sweep serialization and calibration output.
//!
//! Floats are written with Rust's shortest round-trip formatting, so every
//! value in a CSV parses back to the identical `f64`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::sensors::{AccuracyReport, CalibrationFit, ACCURACY_DEFINITION};
use crate::sim::{count_detections, ErrorReport, ScenarioConfig, SimBase, SimulationTrace, SweepConfig, SweepResult};

fn parse_toml<T: DeserializeOwned>(text: &str, origin: &str) -> Result<T> {
    toml::from_str(text).map_err(|e| {
        let message = match e.span() {
            Some(span) => {
                let line = text[..span.start.min(text.len())].matches('\n').count() + 1;
                format!("line {line}: {}", e.message())
            }
            None => e.message().to_string(),
        };
        Error::Parse {
            path: origin.to_string(),
            message,
        }
    })
}

fn to_toml<T: Serialize>(value: &T) -> Result<String> {
    toml::to_string(value).map_err(|e| Error::Parse {
        path: "<serialize>".into(),
        message: e.to_string(),
    })
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

/// Parses and validates a scenario.
pub fn parse_scenario(text: &str, origin: &str) -> Result<ScenarioConfig> {
    let scen: ScenarioConfig = parse_toml(text, origin)?;
    scen.validate()?;
    Ok(scen)
}

pub fn load_scenario(path: &Path) -> Result<ScenarioConfig> {
    parse_scenario(&read(path)?, &path.display().to_string())
}

pub fn scenario_to_toml(scen: &ScenarioConfig) -> Result<String> {
    to_toml(scen)
}

pub fn parse_sweep(text: &str, origin: &str) -> Result<SweepConfig> {
    let cfg: SweepConfig = parse_toml(text, origin)?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_sweep(path: &Path) -> Result<SweepConfig> {
    parse_sweep(&read(path)?, &path.display().to_string())
}

pub fn sweep_to_toml(cfg: &SweepConfig) -> Result<String> {
    to_toml(cfg)
}

fn num(out: &mut String, v: f64) {
    write!(out, "{v:?}").expect("writing to a String");
}

fn opt_num(out: &mut String, v: Option<f64>) {
    if let Some(v) = v {
        num(out, v);
    }
}

pub fn trace_header(trace: &SimulationTrace) -> Vec<String> {
    let n = trace.n_joints;
    let mut h = vec!["t_s".to_string()];
    h.extend((1..=n).map(|i| format!("q{i}_rad")));
    if trace.base == SimBase::Floating {
        h.push("x_m".into());
        h.push("z_m".into());
    }
    h.extend((1..=n).map(|i| format!("tau{i}_Nm")));
    h.extend(["Fb_x_N", "Fb_z_N", "Mb_y_Nm"].map(String::from));
    h.extend((1..=n).map(|i| format!("r{i}")));
    let contact = ["link_c", "alpha_est", "pc_x_m", "pc_z_m", "Fc_x_N", "Fc_z_N"];
    h.push("detected".into());
    h.extend(contact.map(String::from));
    h.extend(contact.map(|c| format!("true_{}", c.trim_end_matches("_est"))));
    h
}

/// One row per control tick. Estimate columns are empty when the estimator
/// produced nothing, truth columns when no contact is active.
pub fn trace_csv(trace: &SimulationTrace) -> String {
    let mut out = trace_header(trace).join(",");
    out.push('\n');
    let off = trace.joint_offset;
    for row in &trace.rows {
        let mut cells: Vec<String> = Vec::new();
        let mut push = |v: f64| {
            let mut s = String::new();
            num(&mut s, v);
            cells.push(s);
        };
        push(row.t);
        for i in 0..trace.n_joints {
            push(row.q[off + i]);
        }
        if trace.base == SimBase::Floating {
            push(row.q[0]);
            push(row.q[1]);
        }
        for &v in row.tau_sen.iter() {
            push(v);
        }
        push(row.ft.fx);
        push(row.ft.fz);
        push(row.ft.my);
        for &v in row.residual.iter() {
            push(v);
        }
        cells.push(if row.detected { "1" } else { "0" }.into());
        let est = row.estimate.as_ref();
        cells.push(est.map(|e| e.link.to_string()).unwrap_or_default());
        for v in [
            est.map(|e| e.alpha),
            est.map(|e| e.point[0]),
            est.map(|e| e.point[1]),
            est.map(|e| e.force[0]),
            est.map(|e| e.force[1]),
        ] {
            let mut s = String::new();
            opt_num(&mut s, v);
            cells.push(s);
        }
        let truth = row.truth.as_ref();
        cells.push(truth.map(|t| t.link.to_string()).unwrap_or_default());
        for v in [
            truth.map(|t| t.alpha),
            truth.map(|t| t.point[0]),
            truth.map(|t| t.point[1]),
            truth.map(|t| t.contact_force()[0]),
            truth.map(|t| t.contact_force()[1]),
        ] {
            let mut s = String::new();
            opt_num(&mut s, v);
            cells.push(s);
        }
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

fn base_name(base: SimBase) -> &'static str {
    match base {
        SimBase::Fixed => "fixed",
        SimBase::Floating => "floating",
    }
}

/// Error statistics as `key=value` lines.
pub fn report_text(scen: &ScenarioConfig, rep: &ErrorReport) -> String {
    let mut out = String::new();
    let mut kv = |k: &str, v: String| {
        writeln!(out, "{k}={v}").expect("writing to a String");
    };
    kv("scenario", scen.name.clone());
    kv("base", base_name(scen.base).into());
    kv("seed", scen.seed.to_string());
    for (name, stat) in [
        ("fx_N", rep.fx_N),
        ("fz_N", rep.fz_N),
        ("f_norm_N", rep.f_norm_N),
        ("px_mm", rep.px_mm),
        ("pz_mm", rep.pz_mm),
        ("p_norm_mm", rep.p_norm_mm),
    ] {
        kv(&format!("{name}_mean"), format!("{:?}", stat.mean));
        kv(&format!("{name}_std"), format!("{:?}", stat.std));
    }
    kv("samples", rep.samples.to_string());
    kv("missing", rep.missing.to_string());
    kv("invalid", rep.invalid.to_string());
    kv("true_link", rep.true_link.to_string());
    kv(
        "modal_link",
        rep.modal_link.map(|l| l.to_string()).unwrap_or_default(),
    );
    kv(
        "first_detection_s",
        rep.first_detection_s.map(|t| format!("{t:?}")).unwrap_or_default(),
    );
    kv(
        "detection_latency_s",
        rep.detection_latency_s.map(|t| format!("{t:?}")).unwrap_or_default(),
    );
    kv("early_detections", rep.early_detections.to_string());
    out
}

/// Report for a run without a scheduled contact: only detections are
/// meaningful.
pub fn contact_free_report_text(scen: &ScenarioConfig, trace: &SimulationTrace) -> String {
    let mut out = String::new();
    writeln!(out, "scenario={}", scen.name).unwrap();
    writeln!(out, "base={}", base_name(scen.base)).unwrap();
    writeln!(out, "seed={}", scen.seed).unwrap();
    writeln!(out, "contact=none").unwrap();
    writeln!(out, "detections={}", count_detections(trace)).unwrap();
    out
}

/// Parses `key=value` lines back into pairs, in order.
pub fn parse_report(text: &str) -> Vec<(String, String)> {
    text.lines()
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

pub const SWEEP_HEADER: &str = "q1,q2,link,alpha,loc_err_mm,force_err_N,degenerate_flag,reason";

pub fn sweep_csv(res: &SweepResult) -> String {
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for r in &res.rows {
        let reason = r.reason.replace('"', "'");
        writeln!(
            out,
            "{:?},{:?},{},{:?},{:?},{:?},{},\"{}\"",
            r.q1,
            r.q2,
            r.link,
            r.alpha,
            r.loc_err_mm,
            r.force_err_N,
            u8::from(r.degenerate),
            reason
        )
        .expect("writing to a String");
    }
    out
}

pub fn sweep_summary(res: &SweepResult) -> String {
    let mut out = String::new();
    writeln!(out, "cells={}", res.rows.len()).unwrap();
    writeln!(out, "max_loc_err_mm={:?}", res.max_loc_err_mm).unwrap();
    writeln!(out, "max_force_err_N={:?}", res.max_force_err_N).unwrap();
    writeln!(out, "degenerate_cells={}", res.degenerate_rows).unwrap();
    for r in res.rows.iter().filter(|r| r.degenerate) {
        writeln!(
            out,
            "degenerate=q1 {:?} q2 {:?} link {} alpha {:?}: {}",
            r.q1, r.q2, r.link, r.alpha, r.reason
        )
        .unwrap();
    }
    out
}

pub fn calibration_text(fit: &CalibrationFit) -> String {
    let mut out = String::new();
    writeln!(out, "slope={:?}", fit.slope).unwrap();
    writeln!(out, "intercept={:?}", fit.intercept).unwrap();
    writeln!(out, "r_squared={:?}", fit.r_squared).unwrap();
    writeln!(out, "rmse={:?}", fit.rmse).unwrap();
    writeln!(out, "mae={:?}", fit.mae).unwrap();
    writeln!(out, "samples={}", fit.samples).unwrap();
    out
}

pub fn accuracy_text(rep: &AccuracyReport) -> String {
    let mut out = String::new();
    writeln!(out, "rmse={:?}", rep.rmse).unwrap();
    writeln!(out, "mae={:?}", rep.mae).unwrap();
    writeln!(out, "r_squared={:?}", rep.r_squared).unwrap();
    writeln!(out, "range={:?}", rep.range).unwrap();
    writeln!(out, "accuracy_pct={:?}", rep.accuracy_pct).unwrap();
    writeln!(out, "accuracy_definition={ACCURACY_DEFINITION}").unwrap();
    out
}

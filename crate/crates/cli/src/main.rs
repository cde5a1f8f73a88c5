use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use serde::Serialize;

use legcontact::io;
use legcontact::sensors::{calibrate_linear, parse_two_column};
use legcontact::sim::{evaluate_trace, parametric_sweep, run_scenario};
use legcontact::Error;

#[derive(Parser)]
#[command(name = "legcontact", version, about = "Contact detection and localization for planar legs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write trace.csv and report.txt.
    Simulate(RunArgs),
    /// Run a parametric sweep and write sweep.csv and summary.txt.
    Sweep(RunArgs),
    /// Fit a calibration line to a two-column dataset.
    Calibrate {
        /// Dataset with raw readings in the first column and reference torque in the second.
        dataset: PathBuf,
        /// Parent directory for the run directory.
        #[arg(long, default_value = "runs")]
        out: PathBuf,
    },
}

#[derive(clap::Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Parent directory for the run directory.
    #[arg(long, default_value = "runs")]
    out: PathBuf,
    /// Overrides the seed in the config.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Serialize)]
struct Timing {
    step: &'static str,
    seconds: f64,
}

#[derive(Serialize)]
struct RunManifest {
    command: &'static str,
    config_path: String,
    resolved_config: Option<&'static str>,
    seeds: Vec<u64>,
    tool_version: &'static str,
    output_dir: String,
    timings: Vec<Timing>,
}

impl RunManifest {
    fn new(command: &'static str, config: &Path, dir: &Path) -> Self {
        RunManifest {
            command,
            config_path: config.display().to_string(),
            resolved_config: None,
            seeds: Vec::new(),
            tool_version: env!("CARGO_PKG_VERSION"),
            output_dir: dir.display().to_string(),
            timings: Vec::new(),
        }
    }

    fn time<T>(&mut self, step: &'static str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.timings.push(Timing {
            step,
            seconds: start.elapsed().as_secs_f64(),
        });
        out
    }

    fn write(&self, dir: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self)?;
        write(dir, "manifest.json", &(json + "\n"))
    }
}

/// Creates `<parent>/<command>-<UTC timestamp>`, adding a counter when
/// that name is taken. Existing directories are never reused.
fn create_run_dir(parent: &Path, command: &str) -> Result<PathBuf> {
    fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%S%.3fZ");
    for n in 0.. {
        let name = match n {
            0 => format!("{command}-{stamp}"),
            _ => format!("{command}-{stamp}-{n}"),
        };
        let dir = parent.join(name);
        match fs::create_dir(&dir) {
            Ok(()) => return Ok(dir),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(e).with_context(|| format!("creating {}", dir.display())),
        }
    }
    unreachable!()
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))
}

fn simulate(args: &RunArgs) -> Result<PathBuf> {
    let mut scen = io::load_scenario(&args.config)?;
    if let Some(seed) = args.seed {
        scen.seed = seed;
    }
    let dir = create_run_dir(&args.out, "simulate")?;
    let mut manifest = RunManifest::new("simulate", &args.config, &dir);
    manifest.seeds.push(scen.seed);
    let trace = manifest.time("simulate", || run_scenario(&scen))?;
    let report = manifest.time("evaluate", || match evaluate_trace(&trace, &scen) {
        Ok(rep) => Ok(io::report_text(&scen, &rep)),
        Err(Error::EmptyContactWindow) if scen.contact.is_none() => {
            Ok(io::contact_free_report_text(&scen, &trace))
        }
        Err(e) => Err(e),
    })?;
    let start = Instant::now();
    write(&dir, "trace.csv", &io::trace_csv(&trace))?;
    write(&dir, "report.txt", &report)?;
    write(&dir, "config.toml", &io::scenario_to_toml(&scen)?)?;
    manifest.resolved_config = Some("config.toml");
    manifest.timings.push(Timing {
        step: "write",
        seconds: start.elapsed().as_secs_f64(),
    });
    manifest.write(&dir)?;
    print!("{report}");
    Ok(dir)
}

fn sweep(args: &RunArgs) -> Result<PathBuf> {
    let mut cfg = io::load_sweep(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.template.seed = seed;
    }
    let dir = create_run_dir(&args.out, "sweep")?;
    let mut manifest = RunManifest::new("sweep", &args.config, &dir);
    manifest.seeds.push(cfg.template.seed);
    let res = manifest.time("sweep", || parametric_sweep(&cfg))?;
    let summary = io::sweep_summary(&res);
    write(&dir, "sweep.csv", &io::sweep_csv(&res))?;
    write(&dir, "summary.txt", &summary)?;
    write(&dir, "config.toml", &io::sweep_to_toml(&cfg)?)?;
    manifest.resolved_config = Some("config.toml");
    manifest.write(&dir)?;
    print!("{summary}");
    Ok(dir)
}

fn calibrate(dataset: &Path, out: &Path) -> Result<PathBuf> {
    let text = fs::read_to_string(dataset).with_context(|| format!("reading {}", dataset.display()))?;
    let samples = parse_two_column(&text).with_context(|| dataset.display().to_string())?;
    let fit = calibrate_linear(&samples)?;
    let dir = create_run_dir(out, "calibrate")?;
    let mut manifest = RunManifest::new("calibrate", dataset, &dir);
    let fit_text = io::calibration_text(&fit);
    manifest.time("write", || write(&dir, "fit.txt", &fit_text))?;
    manifest.write(&dir)?;
    print!("{fit_text}");
    Ok(dir)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate(args) => simulate(args),
        Command::Sweep(args) => sweep(args),
        Command::Calibrate { dataset, out } => calibrate(dataset, out),
    };
    match result {
        Ok(dir) => {
            println!("output_dir={}", dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

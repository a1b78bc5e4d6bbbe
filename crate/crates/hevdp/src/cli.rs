//! Command-line front end.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use hevdp_core::dp::{DpError, Mode};
use hevdp_core::{compute_stats, CycleStats};

use crate::config::{ConfigError, Experiment};
use crate::files::load_cycle;
use crate::run::{self, ModeRun, RunError};

/// Reference figures for the JN-1015 cycle.
pub mod jn1015 {
    pub const DISTANCE_M: f64 = 4165.27;
    pub const DISTANCE_REL_TOL: f64 = 0.01;
    pub const DURATION_S: f64 = 660.0;
    pub const MAX_SPEED_MPS: f64 = 19.44;
    pub const MAX_SPEED_TOL: f64 = 0.1;
}

#[derive(Debug, Parser)]
#[command(name = "hevdp", version, about = "Dynamic-programming energy management for a parallel hybrid vehicle")]
pub struct Cli {
    /// Directory for output files.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load a drive cycle and print its statistics.
    ValidateCycle {
        path: PathBuf,
        /// Sample period in seconds, overriding the timestamps.
        #[arg(long)]
        dt: Option<f64>,
    },
    /// Solve one mode and write its trace and summary.
    Solve {
        #[arg(long, value_name = "PATH")]
        config: PathBuf,
        #[arg(long, value_enum)]
        mode: ModeArg,
    },
    /// Solve both modes and compare them.
    Compare {
        #[arg(long, value_name = "PATH")]
        config: PathBuf,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    SocOnly,
    TwoState,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::SocOnly => Mode::SocOnly,
            ModeArg::TwoState => Mode::TwoState,
        }
    }
}

/// Process exit status.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Ok = 0,
    CheckFailed = 1,
    InputError = 2,
    Infeasible = 3,
}

impl From<Status> for ExitCode {
    fn from(s: Status) -> Self {
        ExitCode::from(s as u8)
    }
}

fn fail(status: Status, message: impl std::fmt::Display) -> Status {
    eprintln!("error: {message}");
    status
}

fn run_error_status(e: &RunError) -> Status {
    match e {
        RunError::Dp { source: DpError::NoFeasibleTrajectory, .. } | RunError::Rollout { .. } => Status::Infeasible,
        _ => Status::InputError,
    }
}

fn config_error(e: ConfigError) -> Status {
    fail(Status::InputError, e)
}

pub fn run(cli: Cli) -> Status {
    match cli.command {
        Command::ValidateCycle { path, dt } => validate_cycle(&path, dt, cli.out.as_deref()),
        Command::Solve { config, mode } => {
            let out = cli.out.unwrap_or_else(|| PathBuf::from("out"));
            solve(&config, mode.into(), &out)
        }
        Command::Compare { config } => {
            let out = cli.out.unwrap_or_else(|| PathBuf::from("out"));
            compare(&config, &out)
        }
    }
}

/// Whether a file name identifies the JN-1015 cycle.
pub fn claims_jn1015(path: &Path) -> bool {
    let stem: String = crate::files::cycle_name(path)
        .chars()
        .filter(char::is_ascii_alphanumeric)
        .map(|c| c.to_ascii_lowercase())
        .collect();
    stem.starts_with("jn1015")
}

/// Reference checks for JN-1015: (passed, description).
pub fn jn1015_checks(stats: &CycleStats) -> Vec<(bool, String)> {
    use jn1015::*;
    let rel = (stats.distance - DISTANCE_M).abs() / DISTANCE_M;
    vec![
        (rel <= DISTANCE_REL_TOL, format!("distance {} m within 1% of {DISTANCE_M} m", stats.distance)),
        (stats.duration == DURATION_S, format!("duration {} s equals {DURATION_S} s", stats.duration)),
        (
            (stats.max_speed - MAX_SPEED_MPS).abs() <= MAX_SPEED_TOL,
            format!("max speed {} m/s within {MAX_SPEED_TOL} of {MAX_SPEED_MPS} m/s", stats.max_speed),
        ),
    ]
}

fn validate_cycle(path: &Path, dt: Option<f64>, out: Option<&Path>) -> Status {
    let cycle = match load_cycle(path, dt) {
        Ok(c) => c,
        Err(e) => return fail(Status::InputError, e),
    };
    let stats = compute_stats(&cycle);
    let mut report = format!(
        "cycle = {}\nsamples = {}\ndt_s = {}\ndistance_m = {}\nduration_s = {}\nmax_speed_mps = {}\n\
         mean_speed_overall_mps = {}\nmean_speed_moving_mps = {}\nmean_accel_mps2 = {}\n",
        cycle.name(),
        cycle.speeds().len(),
        cycle.dt(),
        stats.distance,
        stats.duration,
        stats.max_speed,
        stats.mean_speed_overall,
        stats.mean_speed_moving,
        stats.mean_accel,
    );
    let mut status = Status::Ok;
    if claims_jn1015(path) {
        for (ok, what) in jn1015_checks(&stats) {
            report += &format!("check = {} {what}\n", if ok { "ok" } else { "FAILED" });
            if !ok {
                status = Status::CheckFailed;
            }
        }
    }
    print!("{report}");
    if let Some(dir) = out {
        if let Err(e) = std::fs::create_dir_all(dir).and_then(|_| std::fs::write(dir.join("cycle_stats.txt"), &report))
        {
            return fail(Status::InputError, format!("cannot write to {}: {e}", dir.display()));
        }
    }
    if status != Status::Ok {
        eprintln!("error: cycle does not match the JN-1015 reference figures");
    }
    status
}

fn prepare(config: &Path, out: &Path) -> Result<(Experiment, hevdp_core::DriveCycle), Status> {
    let exp = Experiment::load(config).map_err(config_error)?;
    let cycle = run::load_experiment_cycle(&exp).map_err(|e| fail(Status::InputError, e))?;
    std::fs::create_dir_all(out)
        .map_err(|e| fail(Status::InputError, format!("cannot create {}: {e}", out.display())))?;
    Ok((exp, cycle))
}

fn report_checks(exp: &Experiment, r: &ModeRun) -> bool {
    for w in run::warnings(exp, r) {
        eprintln!("warning: {}: {w}", r.mode.as_str());
    }
    let mut ok = true;
    for (passed, what) in run::checks(exp, r) {
        if !passed {
            eprintln!("error: {}: {what} failed", r.mode.as_str());
            ok = false;
        }
    }
    ok
}

fn solve(config: &Path, mode: Mode, out: &Path) -> Status {
    let (exp, cycle) = match prepare(config, out) {
        Ok(x) => x,
        Err(s) => return s,
    };
    let result = run::run_mode(&exp, &cycle, mode).and_then(|r| {
        run::write_manifest(out, &exp, &format!("solve --mode {}", mode.as_str()))?;
        run::write_mode(out, &exp, &cycle, &r)?;
        Ok(r)
    });
    let r = match result {
        Ok(r) => r,
        Err(e) => return fail(run_error_status(&e), e),
    };
    print!("{}", run::summary(&exp, &cycle, &r));
    if report_checks(&exp, &r) {
        Status::Ok
    } else {
        Status::CheckFailed
    }
}

/// Fuel-ordering checks between the modes: (passed, description).
pub fn ordering_checks(exp: &Experiment, base: &ModeRun, two: &ModeRun) -> Vec<(bool, String)> {
    let delta = two.fuel_kg() - base.fuel_kg();
    let mut out = vec![(
        delta >= -exp.fuel_order_tolerance,
        format!("two-state fuel minus soc-only fuel {delta} kg >= -{} kg", exp.fuel_order_tolerance),
    )];
    if base.replay.max > exp.problem.bounds.theta_high {
        out.push((delta > 0.0, format!("soc-only run overheats, so fuel delta {delta} kg must be positive")));
    }
    out
}

fn compare(config: &Path, out: &Path) -> Status {
    let (exp, cycle) = match prepare(config, out) {
        Ok(x) => x,
        Err(s) => return s,
    };
    let result = (|| {
        let base = run::run_mode(&exp, &cycle, Mode::SocOnly)?;
        let two = run::run_mode(&exp, &cycle, Mode::TwoState)?;
        run::write_manifest(out, &exp, "compare")?;
        run::write_mode(out, &exp, &cycle, &base)?;
        run::write_mode(out, &exp, &cycle, &two)?;
        let table = run::comparison(&base, &two);
        let path = out.join("compare.csv");
        std::fs::write(&path, &table).map_err(|source| RunError::Write { path, source })?;
        Ok::<_, RunError>((base, two, table))
    })();
    let (base, two, table) = match result {
        Ok(x) => x,
        Err(e) => return fail(run_error_status(&e), e),
    };
    print!("{table}");
    let mut ok = report_checks(&exp, &base) & report_checks(&exp, &two);
    for (passed, what) in ordering_checks(&exp, &base, &two) {
        if !passed {
            eprintln!("error: {what} failed");
            ok = false;
        }
    }
    if ok {
        Status::Ok
    } else {
        Status::CheckFailed
    }
}

//! Experiment orchestration: solve, roll out, report, write artifacts.

use std::fmt::Write as _;
use std::io;
use std::path::{Path, PathBuf};

use hevdp_core::dp::{solve_mode, DpError, Mode};
use hevdp_core::sim::ThermalReplay;
use hevdp_core::{
    compute_stats, forward_simulate, fuel_per_100km, post_hoc_thermal, DriveCycle, SimError, Solution, Trace,
};

use crate::config::Experiment;
use crate::files::{load_cycle, write_trace, write_values, InputError};
use crate::plot::{line_plot, Limit, Series};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Input(#[from] InputError),
    #[error("{mode}: {source}")]
    Dp { mode: &'static str, source: DpError },
    #[error("{mode}: rollout failed: {source}")]
    Rollout { mode: &'static str, source: SimError },
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: io::Error },
}

/// One mode's solution and its forward simulation.
pub struct ModeRun {
    pub mode: Mode,
    pub solution: Solution,
    pub trace: Trace,
    pub fuel_l_per_100km: f64,
    /// Temperature replayed from the trace currents.
    pub replay: ThermalReplay,
}

impl ModeRun {
    pub fn fuel_kg(&self) -> f64 {
        self.trace.total_fuel()
    }
}

pub fn load_experiment_cycle(exp: &Experiment) -> Result<DriveCycle, InputError> {
    load_cycle(&exp.cycle_path, exp.cycle_dt)
}

pub fn run_mode(exp: &Experiment, cycle: &DriveCycle, mode: Mode) -> Result<ModeRun, RunError> {
    let name = mode.as_str();
    let solution =
        solve_mode(cycle, &exp.powertrain, &exp.problem, mode).map_err(|source| RunError::Dp { mode: name, source })?;
    let trace = forward_simulate(&solution, cycle, &exp.powertrain, &exp.problem, exp.problem.initial, exp.rollout)
        .map_err(|source| RunError::Rollout { mode: name, source })?;
    let fuel_l_per_100km =
        fuel_per_100km(&trace, exp.fuel_density).map_err(|source| RunError::Rollout { mode: name, source })?;
    let replay = post_hoc_thermal(&trace, &exp.powertrain.battery, exp.problem.initial.theta);
    Ok(ModeRun { mode, solution, trace, fuel_l_per_100km, replay })
}

/// Checks on a finished run. Each entry is (passed, description).
pub fn checks(exp: &Experiment, run: &ModeRun) -> Vec<(bool, String)> {
    let w = &exp.problem.window;
    let b = &exp.problem.bounds;
    let end = run.trace.final_state();
    let mut out = vec![(
        w.soc_min <= end.soc && end.soc <= w.soc_max,
        format!("final SOC {} in [{}, {}]", end.soc, w.soc_min, w.soc_max),
    )];
    if run.mode == Mode::TwoState {
        out.push((
            w.theta_min <= end.theta && end.theta <= w.theta_max,
            format!("final theta {} in [{}, {}]", end.theta, w.theta_min, w.theta_max),
        ));
        out.push((
            run.trace.min_theta() >= b.theta_low && run.trace.max_theta() <= b.theta_high,
            format!(
                "theta range [{}, {}] within [{}, {}]",
                run.trace.min_theta(),
                run.trace.max_theta(),
                b.theta_low,
                b.theta_high
            ),
        ));
    }
    out
}

/// Warnings that do not change the exit status.
pub fn warnings(exp: &Experiment, run: &ModeRun) -> Vec<String> {
    let b = &exp.problem.bounds;
    let mut out = Vec::new();
    if run.mode == Mode::SocOnly && run.replay.max > b.theta_high {
        out.push(format!(
            "battery temperature reaches {:.2} C, above the {} C limit the soc-only policy ignores",
            run.replay.max, b.theta_high
        ));
    }
    out
}

pub fn summary(exp: &Experiment, cycle: &DriveCycle, run: &ModeRun) -> String {
    let stats = compute_stats(cycle);
    let t = &run.trace;
    let end = t.final_state();
    let p = &exp.problem;
    let mut s = String::new();
    let mut kv = |k: &str, v: String| {
        let _ = writeln!(s, "{k} = {v}");
    };
    kv("mode", run.mode.as_str().into());
    kv("cycle", cycle.name().into());
    kv("cycle_samples", cycle.speeds().len().to_string());
    kv("cycle_dt_s", cycle.dt().to_string());
    kv("distance_m", stats.distance.to_string());
    kv("grid", format!("{}x{}x{}", run.solution.grid.n_soc(), run.solution.grid.n_theta(), p.n_u));
    kv("j0_kg", run.solution.initial_cost.to_string());
    kv("j0_terminal_penalty_kg", run.solution.initial_violation.to_string());
    kv("fuel_kg", t.total_fuel().to_string());
    kv("fuel_l_per_100km", run.fuel_l_per_100km.to_string());
    kv("soc_final", end.soc.to_string());
    kv("soc_min", t.min_soc().to_string());
    kv("soc_max", t.max_soc().to_string());
    kv("theta_final_c", end.theta.to_string());
    kv("theta_min_c", t.min_theta().to_string());
    kv("theta_max_c", t.max_theta().to_string());
    kv("theta_replay_max_c", run.replay.max.to_string());
    for (ok, what) in checks(exp, run) {
        kv("check", format!("{} {what}", if ok { "ok" } else { "FAILED" }));
    }
    for w in warnings(exp, run) {
        kv("warning", w);
    }
    s
}

/// Side-by-side comparison of the two modes as CSV.
pub fn comparison(base: &ModeRun, two: &ModeRun) -> String {
    let row = |name: &str, f: &dyn Fn(&ModeRun) -> f64| {
        let (a, b) = (f(base), f(two));
        format!("{name},{a},{b},{}\n", b - a)
    };
    let mut s = String::from("metric,soc_only,two_state,delta\n");
    s += &row("fuel_kg", &|r| r.fuel_kg());
    s += &row("fuel_l_per_100km", &|r| r.fuel_l_per_100km);
    s += &row("j0_kg", &|r| r.solution.initial_cost);
    s += &row("soc_final", &|r| r.trace.final_state().soc);
    s += &row("soc_min", &|r| r.trace.min_soc());
    s += &row("soc_max", &|r| r.trace.max_soc());
    s += &row("theta_final_c", &|r| r.trace.final_state().theta);
    s += &row("theta_min_c", &|r| r.trace.min_theta());
    s += &row("theta_max_c", &|r| r.trace.max_theta());
    s += &row("theta_replay_max_c", &|r| r.replay.max);
    s
}

fn write(path: PathBuf, contents: &str) -> Result<(), RunError> {
    std::fs::write(&path, contents).map_err(|source| RunError::Write { path, source })
}

pub fn write_manifest(out: &Path, exp: &Experiment, command: &str) -> Result<(), RunError> {
    let text = format!("# hevdp {command}\n{}", exp.resolved.to_manifest());
    write(out.join("manifest.toml"), &text)
}

/// Writes trace, summary, value dump and plots for one mode.
pub fn write_mode(out: &Path, exp: &Experiment, cycle: &DriveCycle, run: &ModeRun) -> Result<(), RunError> {
    let tag = run.mode.as_str();
    let path = out.join(format!("trace_{tag}.csv"));
    write_trace(&path, &run.trace).map_err(|source| RunError::Write { path, source })?;
    write(out.join(format!("summary_{tag}.txt")), &summary(exp, cycle, run))?;
    if exp.value_dump {
        let path = out.join(format!("values_{tag}.csv"));
        write_values(&path, &run.solution).map_err(|source| RunError::Write { path, source })?;
    }
    if exp.plots {
        for (name, svg) in plots(exp, run) {
            write(out.join(format!("{name}_{tag}.svg")), &svg)?;
        }
    }
    Ok(())
}

fn plots(exp: &Experiment, run: &ModeRun) -> Vec<(&'static str, String)> {
    let rows = &run.trace.rows;
    let t: Vec<f64> = rows.iter().map(|r| r.time).collect();
    let soc: Vec<f64> = rows.iter().map(|r| r.soc).collect();
    let theta: Vec<f64> = rows.iter().map(|r| r.theta).collect();
    let stage_t = &t[..t.len() - 1];
    let u: Vec<f64> = run.trace.stage_rows().iter().map(|r| r.u).collect();
    let p = &exp.problem;
    let tag = run.mode.as_str();
    vec![
        (
            "soc",
            line_plot(
                &format!("State of charge ({tag})"),
                "time (s)",
                "SOC",
                &t,
                &[Series { label: "SOC", color: "#1f77b4", ys: &soc }],
                &[
                    Limit { label: "window min".into(), y: p.window.soc_min },
                    Limit { label: "window max".into(), y: p.window.soc_max },
                ],
            ),
        ),
        (
            "theta",
            line_plot(
                &format!("Battery temperature ({tag})"),
                "time (s)",
                "theta (C)",
                &t,
                &[Series { label: "theta", color: "#d62728", ys: &theta }],
                &[Limit { label: "upper bound".into(), y: p.bounds.theta_high }],
            ),
        ),
        (
            "u",
            line_plot(
                &format!("Motor torque share ({tag})"),
                "time (s)",
                "u",
                stage_t,
                &[Series { label: "u", color: "#2ca02c", ys: &u }],
                &[],
            ),
        ),
    ]
}

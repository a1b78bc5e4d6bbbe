//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use hevdp::cli::jn1015_checks;
use hevdp::config::Experiment;
use hevdp::files::{load_cycle, read_trace_columns};
use hevdp_core::battery::{cooling_coefficients, heat_generation, heat_removed, terminal_voltage};
use hevdp_core::dp::{brute_force_solve, solve_mode, terminal_penalty, DpError, Mode, ProblemConfig};
use hevdp_core::interp::Axis;
use hevdp_core::vehicle::split_torque;
use hevdp_core::{
    compute_stats, forward_simulate, Battery, BatteryElectricalParams, BatteryState, BatteryThermalParams,
    CoolingChannel, DriveCycle, Powertrain, Rollout, SocCurve, StageDemand, StateBounds, TerminalWindow, Trace,
};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

const BIN: &str = env!("CARGO_BIN_EXE_hevdp");
const ROOT: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../..");

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome { passed, detail: detail.into() }
}

fn root(rel: &str) -> PathBuf {
    Path::new(ROOT).join(rel)
}

fn hevdp(args: &[&str]) -> (i32, Duration, String) {
    let start = Instant::now();
    let o = Command::new(BIN).args(args).output().expect("binary runs");
    (o.status.code().unwrap_or(-1), start.elapsed(), String::from_utf8_lossy(&o.stderr).into_owned())
}

// Trace CSV columns.
const TW: usize = 2;
const TM: usize = 4;
const TE: usize = 5;
const BRAKE: usize = 6;
const PM: usize = 7;
const IB: usize = 8;
const VO: usize = 9;
const SOC: usize = 10;
const THETA: usize = 11;
const FUEL: usize = 13;

fn rows_of(trace: &Trace) -> Vec<[f64; 14]> {
    trace
        .rows
        .iter()
        .map(|r| {
            [
                r.time,
                r.speed,
                r.demand_torque,
                r.u,
                r.motor_torque,
                r.engine_torque,
                r.brake_torque,
                r.motor_power,
                r.current,
                r.terminal_voltage,
                r.soc,
                r.theta,
                r.fuel_rate,
                r.cumulative_fuel,
            ]
        })
        .collect()
}

fn rel_close(a: f64, b: f64, scale: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * scale.max(f64::MIN_POSITIVE)
}

/// Per-row physics checks on a trace. Returns the first violation.
fn trace_violation(rows: &[[f64; 14]], battery: &Battery, dt: f64) -> Option<String> {
    let stages = &rows[..rows.len() - 1];
    let soc0 = rows[0][SOC];
    let mut charge = 0.0;
    let mut theta = rows[0][THETA];
    for (k, r) in stages.iter().enumerate() {
        let (i, soc) = (r[IB], r[SOC]);
        let voc = battery.ocv(soc);
        let res = battery.resistance(soc);
        if r[TM] + r[TE] + r[BRAKE] != r[TW] {
            return Some(format!("row {k}: torque {} + {} + {} != {}", r[TM], r[TE], r[BRAKE], r[TW]));
        }
        let lhs = voc * i;
        let rhs = r[VO] * i + res * i * i;
        if !rel_close(lhs, rhs, lhs.abs().max(rhs.abs()), 1e-9) {
            return Some(format!("row {k}: power balance {lhs} vs {rhs}"));
        }
        let delivered = i * (voc - res * i);
        if !rel_close(delivered, r[PM], delivered.abs().max(r[PM].abs()).max(lhs.abs()), 1e-9) {
            return Some(format!("row {k}: I(Voc - R I) = {delivered} vs Pm {}", r[PM]));
        }
        let counted = soc0 - charge / battery.electrical.capacity;
        if !rel_close(counted, soc, soc.abs(), 1e-9) {
            return Some(format!("row {k}: coulomb count {counted} vs soc {soc}"));
        }
        if !rel_close(theta, r[THETA], r[THETA].abs(), 1e-9) {
            return Some(format!("row {k}: replayed theta {theta} vs {}", r[THETA]));
        }
        charge += i * dt;
        let heat = heat_generation(battery.joule_resistance(soc), i);
        theta = battery.next_theta_from_heat(theta, heat, dt);
    }
    let last = rows[rows.len() - 1];
    let counted = soc0 - charge / battery.electrical.capacity;
    if !rel_close(counted, last[SOC], last[SOC].abs(), 1e-9) {
        return Some(format!("terminal row: coulomb count {counted} vs soc {}", last[SOC]));
    }
    if rows.windows(2).any(|w| w[1][FUEL] < w[0][FUEL]) {
        return Some("cumulative fuel decreases".into());
    }
    None
}

/// Cooling-balance checks for one parameter set.
fn cooling_violation(thermal: &BatteryThermalParams, inlet: f64) -> Option<String> {
    let c = cooling_coefficients(thermal);
    let sums = [c.a1 + c.a2 + c.a3, c.a3 + c.a2 + c.a1, c.a1 + (c.a2 + c.a3), (c.a1 + c.a3) + c.a2];
    if sums.iter().any(|&s| s != 0.0) {
        return Some(format!("a1 + a2 + a3 = {sums:?}"));
    }
    let q = heat_removed(&c, inlet, inlet, inlet);
    if q != 0.0 {
        return Some(format!("Q_d at inlet temperature {inlet} is {q}"));
    }
    None
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = StdRng::seed_from_u64(1015);
    let (mut compared, mut infeasible, mut attempts) = (0, 0, 0);
    let b = StateBounds::default();
    while compared < 60 && attempts < 5000 {
        attempts += 1;
        let stages = rng.gen_range(1..=6);
        let mut v = rng.gen_range(0.0..10.0);
        let speeds: Vec<f64> = (0..=stages)
            .map(|_| {
                v = (v + rng.gen_range(-2.5f64..2.5)).clamp(0.0, 14.0);
                v
            })
            .collect();
        let (n_soc, n_theta) = (rng.gen_range(2..=5usize), rng.gen_range(2..=5usize));
        let soc = |i| Axis::uniform(b.soc_low, b.soc_high, n_soc).points()[i];
        let theta = |i| Axis::uniform(b.theta_low, b.theta_high, n_theta).points()[i];
        let (s0, s1) = (rng.gen_range(0..n_soc), rng.gen_range(0..n_soc));
        let (t0, t1) = (rng.gen_range(0..n_theta), rng.gen_range(0..n_theta));
        let hard = rng.gen_bool(0.5);
        let penalty = if hard { f64::INFINITY } else { 50.0 };
        let config = ProblemConfig {
            window: TerminalWindow {
                soc_min: soc(s0.min(s1)),
                soc_max: soc(s0.max(s1)),
                theta_min: theta(t0.min(t1)),
                theta_max: theta(t0.max(t1)),
            },
            initial: BatteryState::new(soc(rng.gen_range(0..n_soc)), theta(rng.gen_range(0..n_theta))),
            n_soc,
            n_theta,
            n_u: 3,
            terminal_penalty_soc: penalty,
            terminal_penalty_theta: penalty,
            violation_tolerance: if hard { 0.0 } else { f64::MAX },
            snap_transitions: true,
            ..ProblemConfig::default()
        };
        let electrical = BatteryElectricalParams { capacity: rng.gen_range(300.0..3000.0), ..Default::default() };
        let thermal = BatteryThermalParams { cell_mass: rng.gen_range(0.1..2.0), ..Default::default() };
        let pt = Powertrain { battery: Battery::new(electrical, thermal), ..Powertrain::default() };
        let cycle = DriveCycle::new("toy", 1.0, speeds).unwrap();
        let mode = if rng.gen_bool(0.5) { Mode::TwoState } else { Mode::SocOnly };

        match (solve_mode(&cycle, &pt, &config, mode), brute_force_solve(&cycle, &pt, &config, mode)) {
            (Ok(sol), Ok(best)) => {
                if sol.initial_cost != best.cost {
                    return outcome(false, format!("instance {attempts}: J0 {} vs enumeration {}", sol.initial_cost, best.cost));
                }
                let trace = match forward_simulate(&sol, &cycle, &pt, &config, config.initial, Rollout::Snapped) {
                    Ok(t) => t,
                    Err(e) => return outcome(false, format!("instance {attempts}: rollout failed: {e}")),
                };
                let end = terminal_penalty(&config, mode, trace.final_state());
                let achieved = trace.stage_rows().iter().rev().fold(end, |acc, r| r.stage_fuel + acc);
                if achieved != best.cost {
                    return outcome(false, format!("instance {attempts}: rollout cost {achieved} vs {}", best.cost));
                }
                compared += 1;
            }
            (Err(DpError::NoFeasibleTrajectory), Err(DpError::NoFeasibleTrajectory)) => infeasible += 1,
            (dp, brute) => {
                return outcome(
                    false,
                    format!("instance {attempts}: solve {:?} vs enumeration {:?}", dp.map(|s| s.initial_cost), brute),
                )
            }
        }
    }
    let elapsed = start.elapsed();
    outcome(
        compared >= 50 && elapsed < Duration::from_secs(10),
        format!(
            "{compared} feasible instances match exactly, {infeasible} infeasible on both sides, {:.2} s",
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_2() -> Outcome {
    let cycle = match load_cycle(&root("data/jn1015.csv"), None) {
        Ok(c) => c,
        Err(e) => return outcome(false, e.to_string()),
    };
    let stats = compute_stats(&cycle);
    let checks = jn1015_checks(&stats);
    outcome(
        checks.iter().all(|c| c.0) && cycle.speeds().len() == 661,
        format!(
            "distance {:.2} m, duration {} s, max speed {:.3} m/s",
            stats.distance, stats.duration, stats.max_speed
        ),
    )
}

/// Default-config comparison run shared by criteria 3 to 7.
struct DefaultRun {
    exp: Experiment,
    base: Vec<[f64; 14]>,
    two: Vec<[f64; 14]>,
}

fn default_run(out: &Path) -> Result<DefaultRun, String> {
    let cfg = root("config/defaults.toml");
    let (code, _, err) = hevdp(&["compare", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    if code != 0 && code != 1 {
        return Err(format!("compare exited {code}: {err}"));
    }
    let exp = Experiment::load(&cfg).map_err(|e| e.to_string())?;
    let base = read_trace_columns(&out.join("trace_soc-only.csv")).map_err(|e| e.to_string())?;
    let two = read_trace_columns(&out.join("trace_two-state.csv")).map_err(|e| e.to_string())?;
    Ok(DefaultRun { exp, base, two })
}

fn criterion_3(run: &DefaultRun) -> Outcome {
    let w = &run.exp.problem.window;
    let (a, b) = (run.base.last().unwrap()[SOC], run.two.last().unwrap()[SOC]);
    let inside = |s: f64| (w.soc_min..=w.soc_max).contains(&s);
    outcome(inside(a) && inside(b), format!("final SOC soc-only {a:.5}, two-state {b:.5}"))
}

fn criterion_4(run: &DefaultRun) -> Outcome {
    let p = &run.exp.problem;
    let lo = run.two.iter().map(|r| r[THETA]).fold(f64::INFINITY, f64::min);
    let hi = run.two.iter().map(|r| r[THETA]).fold(f64::NEG_INFINITY, f64::max);
    let end = run.two.last().unwrap()[THETA];
    let contained = lo >= p.bounds.theta_low - 0.5 && hi <= p.bounds.theta_high + 0.5;
    let window = (p.window.theta_min..=p.window.theta_max).contains(&end);
    outcome(contained && window, format!("theta range [{lo:.3}, {hi:.3}] C, final {end:.3} C"))
}

fn replay_max(rows: &[[f64; 14]], battery: &Battery, theta0: f64, dt: f64) -> f64 {
    let mut theta = theta0;
    let mut max = theta;
    for r in &rows[..rows.len() - 1] {
        theta = battery.next_theta_from_heat(theta, heat_generation(battery.joule_resistance(r[SOC]), r[IB]), dt);
        max = max.max(theta);
    }
    max
}

fn criterion_5(run: &DefaultRun) -> Outcome {
    let max = replay_max(&run.base, &run.exp.powertrain.battery, run.exp.problem.initial.theta, 1.0);
    outcome(
        max > run.exp.problem.bounds.theta_high,
        format!("soc-only replayed peak {max:.2} C against the {} C bound", run.exp.problem.bounds.theta_high),
    )
}

fn criterion_6(run: &DefaultRun) -> Outcome {
    let (a, b) = (run.base.last().unwrap()[FUEL], run.two.last().unwrap()[FUEL]);
    let fired = replay_max(&run.base, &run.exp.powertrain.battery, run.exp.problem.initial.theta, 1.0)
        > run.exp.problem.bounds.theta_high;
    let passed = b >= a && (!fired || b > a);
    let distance = compute_stats(&load_cycle(&run.exp.cycle_path, None).unwrap()).distance;
    let litres = |kg: f64| kg / run.exp.fuel_density / distance * 1e5;
    outcome(
        passed,
        format!(
            "fuel soc-only {a:.5} kg ({:.2} L/100km), two-state {b:.5} kg ({:.2} L/100km), delta {:+.5} kg",
            litres(a),
            litres(b),
            b - a
        ),
    )
}

fn random_thermal(rng: &mut StdRng, inlet: f64) -> BatteryThermalParams {
    let mut channel = || CoolingChannel {
        h_bar: rng.gen_range(5.0..500.0),
        area: rng.gen_range(0.005..0.1),
        air_density: rng.gen_range(1.0..1.3),
        air_specific_heat: rng.gen_range(990.0..1020.0),
        air_flow: rng.gen_range(0.001..0.5),
        inlet_temp: inlet,
    };
    let channels = [channel(), channel()];
    BatteryThermalParams {
        cell_mass: rng.gen_range(0.5..10.0),
        specific_heat: rng.gen_range(500.0..1200.0),
        channels,
        ..Default::default()
    }
}

fn criterion_7(run: &DefaultRun, scratch: &Path) -> Outcome {
    // Shipped configurations, end to end through the CLI.
    let mut examples = vec![(root("config/defaults.toml"), run.base.clone(), run.two.clone())];
    let mut names: Vec<PathBuf> = std::fs::read_dir(root("config/examples"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .collect();
    names.sort();
    for cfg in names {
        let out = scratch.join(cfg.file_stem().unwrap());
        let (code, _, err) = hevdp(&["compare", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        if code != 0 {
            return outcome(false, format!("{}: compare exited {code}: {err}", cfg.display()));
        }
        let read = |m: &str| read_trace_columns(&out.join(format!("trace_{m}.csv"))).unwrap();
        examples.push((cfg, read("soc-only"), read("two-state")));
    }
    for (cfg, base, two) in &examples {
        let exp = Experiment::load(cfg).unwrap();
        let battery = &exp.powertrain.battery;
        let dt = base[1][0] - base[0][0];
        for rows in [base, two] {
            if let Some(v) = trace_violation(rows, battery, dt) {
                return outcome(false, format!("{}: {v}", cfg.display()));
            }
        }
        let inlet = battery.thermal.channels[0].inlet_temp;
        if battery.thermal.channels[1].inlet_temp == inlet {
            if let Some(v) = cooling_violation(&battery.thermal, inlet) {
                return outcome(false, format!("{}: {v}", cfg.display()));
            }
        }
    }

    // Randomized parameter draws.
    let mut rng = StdRng::seed_from_u64(7);
    let mut traces = 0;
    for draw in 0..1000 {
        let fail = |v: String| outcome(false, format!("draw {draw}: {v}"));
        let inlet = rng.gen_range(0.0..40.0);
        let thermal = random_thermal(&mut rng, inlet);
        if let Some(v) = cooling_violation(&thermal, inlet) {
            return fail(v);
        }
        let electrical = BatteryElectricalParams {
            capacity: rng.gen_range(5.0..40.0) * 3600.0,
            series_cells: rng.gen_range(40..=120),
            ocv: SocCurve::Affine { offset: rng.gen_range(3.0..3.6), slope: rng.gen_range(0.3..1.2) },
            cell_resistance: SocCurve::Constant(rng.gen_range(0.001..0.01)),
        };
        let battery = Battery::new(electrical, thermal);

        // Pointwise electrical balance.
        let soc = rng.gen_range(0.4..0.7);
        let (voc, res) = (battery.ocv(soc), battery.resistance(soc));
        let limit = voc * voc / (4.0 * res);
        let power = rng.gen_range(-limit..0.95 * limit);
        let i = match battery.current(soc, power) {
            Ok(i) => i,
            Err(e) => return fail(format!("current for P = {power} rejected: {e:?}")),
        };
        let vo = terminal_voltage(voc, res, i);
        if !rel_close(voc * i, vo * i + res * i * i, (voc * i).abs(), 1e-9) {
            return fail(format!("power balance at P = {power}"));
        }
        if !rel_close(i * (voc - res * i), power, power.abs().max((voc * i).abs()), 1e-9) {
            return fail(format!("quadratic root at P = {power}: I = {i}"));
        }

        // Torque split over the full control box.
        let total = rng.gen_range(-400.0..400.0);
        let u = rng.gen_range(-1.0..=2.0);
        let pt = Powertrain::default();
        let s = split_torque(&StageDemand::at_shaft(0, total, 100.0), u, &pt.motor, &pt.engine);
        if s.motor + s.engine + s.brake != total {
            return fail(format!("split of {total} at u = {u}: {} + {} + {}", s.motor, s.engine, s.brake));
        }

        // A short optimised trace with these parameters.
        let mut powertrain = Powertrain { battery: battery.clone(), ..Powertrain::default() };
        powertrain.engine.loss_power = rng.gen_range(0.0..6000.0);
        powertrain.vehicle.mass = rng.gen_range(1000.0..2500.0);
        let mut v = rng.gen_range(0.0..8.0);
        let speeds: Vec<f64> = (0..13)
            .map(|_| {
                v = (v + rng.gen_range(-1.5f64..1.5)).clamp(0.0, 15.0);
                v
            })
            .collect();
        let cycle = DriveCycle::new("draw", 1.0, speeds).unwrap();
        let config = ProblemConfig {
            initial: BatteryState::new(rng.gen_range(0.45..0.65), inlet.clamp(12.0, 28.0)),
            n_soc: 15,
            n_theta: 7,
            n_u: 11,
            violation_tolerance: f64::MAX,
            ..ProblemConfig::default()
        };
        let mode = if draw % 2 == 0 { Mode::TwoState } else { Mode::SocOnly };
        let Ok(sol) = solve_mode(&cycle, &powertrain, &config, mode) else { continue };
        let Ok(trace) = forward_simulate(&sol, &cycle, &powertrain, &config, config.initial, Rollout::Interpolated)
        else {
            continue;
        };
        if let Some(v) = trace_violation(&rows_of(&trace), &battery, 1.0) {
            return fail(v);
        }
        traces += 1;
    }
    outcome(
        traces >= 500,
        format!("{} shipped configs and 1000 random draws ({traces} with optimised traces) clean", examples.len()),
    )
}

fn criterion_8() -> Outcome {
    let battery = Battery::default();
    let res = battery.resistance(0.5);
    let profile = |t: f64| 30.0 + 25.0 * (t / 40.0).sin();
    let finals: Vec<f64> = [8.0, 4.0, 2.0, 1.0, 0.5, 0.25]
        .iter()
        .map(|&dt| {
            let steps = (600.0 / dt) as usize;
            (0..steps).fold(20.0, |theta, k| {
                theta + dt * battery.theta_rate(res, profile(k as f64 * dt), theta)
            })
        })
        .collect();
    let deltas: Vec<f64> = finals.windows(2).map(|w| (w[0] - w[1]).abs()).collect();
    let ratios: Vec<f64> = deltas.windows(2).map(|w| w[0] / w[1]).collect();
    let passed = ratios.iter().all(|r| (1.5..=3.0).contains(r));
    let shown: Vec<String> = ratios.iter().map(|r| format!("{r:.3}")).collect();
    outcome(passed, format!("delta ratios {}", shown.join(", ")))
}

fn criterion_9(scratch: &Path) -> Outcome {
    let cfg = root("config/defaults.toml");
    let mut times = Vec::new();
    let mut outputs = Vec::new();
    for n in 0..2 {
        let out = scratch.join(format!("run{n}"));
        let (code, elapsed, err) =
            hevdp(&["solve", "--config", cfg.to_str().unwrap(), "--mode", "two-state", "--out", out.to_str().unwrap()]);
        if code != 0 {
            return outcome(false, format!("solve exited {code}: {err}"));
        }
        times.push(elapsed.as_secs_f64());
        let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(&out)
            .unwrap()
            .map(|e| {
                let e = e.unwrap();
                (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
            })
            .collect();
        files.sort();
        outputs.push(files);
    }
    let identical = outputs[0] == outputs[1];
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get());
    outcome(
        identical && times.iter().all(|&t| t < 300.0),
        format!(
            "201x101x51 over 660 stages in {:.1} s and {:.1} s on {threads} thread(s), {} files {}",
            times[0],
            times[1],
            outputs[0].len(),
            if identical { "byte-identical" } else { "DIFFER" }
        ),
    )
}

fn main() {
    let scratch = tempfile::tempdir().unwrap();
    let mut results: Vec<(u32, &str, Outcome)> = Vec::new();
    let mut report = |n: u32, name: &'static str, o: Outcome| {
        println!("criterion {n} [{}] {name}: {}", if o.passed { "PASS" } else { "FAIL" }, o.detail);
        results.push((n, name, o));
    };

    report(1, "oracle equivalence", criterion_1());
    report(2, "cycle fidelity", criterion_2());
    match default_run(&scratch.path().join("defaults")) {
        Ok(run) => {
            report(3, "charge sustaining", criterion_3(&run));
            report(4, "thermal containment", criterion_4(&run));
            report(5, "baseline excursion", criterion_5(&run));
            report(6, "fuel ordering", criterion_6(&run));
            report(7, "physics invariants", criterion_7(&run, scratch.path()));
        }
        Err(e) => {
            for (n, name) in [
                (3, "charge sustaining"),
                (4, "thermal containment"),
                (5, "baseline excursion"),
                (6, "fuel ordering"),
                (7, "physics invariants"),
            ] {
                report(n, name, outcome(false, format!("default run failed: {e}")));
            }
        }
    }
    report(8, "Euler convergence", criterion_8());
    report(9, "determinism and performance", criterion_9(scratch.path()));

    let failed: Vec<u32> = results.iter().filter(|r| !r.2.passed).map(|r| r.0).collect();
    if failed.is_empty() {
        println!("acceptance: all {} criteria pass", results.len());
    } else {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}

//! CSV readers and writers.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use hevdp_core::interp::{Curve, Table2d};
use hevdp_core::{DriveCycle, Solution, Trace};

pub const CYCLE_HEADER: [&str; 2] = ["t_s", "v_mps"];
pub const CURVE_HEADER: [&str; 2] = ["soc", "value"];
pub const TRACE_HEADER: &str = "t_s,v_mps,Tw_Nm,u,Tm_Nm,Te_Nm,brake_Nm,Pm_W,Ib_A,Vo_V,soc,theta_C,mf_kgps,fuel_kg";
pub const VALUES_HEADER: &str = "soc,theta,J,u_opt";

/// Relative tolerance on timestamp spacing.
const UNIFORM_TOL: f64 = 1e-9;

#[derive(Debug, thiserror::Error)]
pub enum InputError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: line {line}: {message}")]
    Line { path: PathBuf, line: u64, message: String },
    #[error("{path}: {message}")]
    File { path: PathBuf, message: String },
}

fn open(path: &Path) -> Result<csv::Reader<File>, InputError> {
    let file = File::open(path).map_err(|source| InputError::Io { path: path.into(), source })?;
    Ok(csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(file))
}

/// Reads every record, tagging each with its 1-based line number.
fn records(path: &Path) -> Result<Vec<(u64, csv::StringRecord)>, InputError> {
    let mut out = Vec::new();
    for result in open(path)?.into_records() {
        let record = result.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            InputError::Line { path: path.into(), line, message: e.to_string() }
        })?;
        let line = record.position().map_or(0, |p| p.line());
        out.push((line, record));
    }
    Ok(out)
}

fn field(path: &Path, line: u64, record: &csv::StringRecord, i: usize, what: &str) -> Result<f64, InputError> {
    let err = |message: String| InputError::Line { path: path.into(), line, message };
    let raw = record.get(i).ok_or_else(|| err(format!("missing {what}")))?.trim();
    let x: f64 = raw.parse().map_err(|_| err(format!("{what} `{raw}` is not a number")))?;
    if !x.is_finite() {
        return Err(err(format!("{what} `{raw}` is not finite")));
    }
    Ok(x)
}

fn check_header(path: &Path, rows: &[(u64, csv::StringRecord)], expected: [&str; 2]) -> Result<(), InputError> {
    let Some((line, header)) = rows.first() else {
        return Err(InputError::File { path: path.into(), message: "file is empty".into() });
    };
    let found: Vec<&str> = header.iter().map(str::trim).collect();
    if found != expected {
        return Err(InputError::Line {
            path: path.into(),
            line: *line,
            message: format!("expected header `{}`, found `{}`", expected.join(","), found.join(",")),
        });
    }
    Ok(())
}

/// Cycle name: the file stem.
pub fn cycle_name(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Loads a `t_s,v_mps` cycle. The period comes from the timestamps, which
/// must be uniform, unless `dt_override` is given.
pub fn load_cycle(path: &Path, dt_override: Option<f64>) -> Result<DriveCycle, InputError> {
    let rows = records(path)?;
    check_header(path, &rows, CYCLE_HEADER)?;
    let mut times = Vec::with_capacity(rows.len());
    let mut speeds = Vec::with_capacity(rows.len());
    for (line, record) in &rows[1..] {
        let line = *line;
        if record.len() != 2 {
            return Err(InputError::Line {
                path: path.into(),
                line,
                message: format!("expected 2 fields, found {}", record.len()),
            });
        }
        let t = field(path, line, record, 0, "time")?;
        let v = field(path, line, record, 1, "speed")?;
        if v < 0.0 {
            return Err(InputError::Line { path: path.into(), line, message: format!("negative speed {v}") });
        }
        times.push((line, t));
        speeds.push(v);
    }
    if speeds.len() < 2 {
        return Err(InputError::File {
            path: path.into(),
            message: format!("a cycle needs at least 2 samples, found {}", speeds.len()),
        });
    }
    let period = times[1].1 - times[0].1;
    if !(period > 0.0) {
        return Err(InputError::Line {
            path: path.into(),
            line: times[1].0,
            message: "timestamps must increase".into(),
        });
    }
    for (k, &(line, t)) in times.iter().enumerate() {
        let expected = times[0].1 + k as f64 * period;
        if (t - expected).abs() > UNIFORM_TOL * period.max(expected.abs()) {
            return Err(InputError::Line {
                path: path.into(),
                line,
                message: format!("non-uniform timestamp {t} (expected {expected})"),
            });
        }
    }
    let dt = dt_override.unwrap_or(period);
    DriveCycle::new(cycle_name(path), dt, speeds)
        .map_err(|e| InputError::File { path: path.into(), message: e.to_string() })
}

/// Loads a 2-D map: first row speeds (first cell ignored), first column
/// torques, values row by row.
pub fn load_map(path: &Path) -> Result<Table2d, InputError> {
    let rows = records(path)?;
    let Some(((_, head), body)) = rows.split_first() else {
        return Err(InputError::File { path: path.into(), message: "file is empty".into() });
    };
    let head_line = rows[0].0;
    let speeds = (1..head.len())
        .map(|i| field(path, head_line, head, i, "speed breakpoint"))
        .collect::<Result<Vec<_>, _>>()?;
    let mut torques = Vec::with_capacity(body.len());
    let mut values = Vec::with_capacity(body.len() * speeds.len());
    for (line, record) in body {
        if record.len() != head.len() {
            return Err(InputError::Line {
                path: path.into(),
                line: *line,
                message: format!("expected {} fields, found {}", head.len(), record.len()),
            });
        }
        torques.push(field(path, *line, record, 0, "torque breakpoint")?);
        for i in 1..record.len() {
            values.push(field(path, *line, record, i, "value")?);
        }
    }
    Table2d::new(speeds, torques, values).ok_or_else(|| InputError::File {
        path: path.into(),
        message: "map needs at least 2x2 entries with strictly increasing breakpoints".into(),
    })
}

/// Loads a `soc,value` curve.
pub fn load_curve(path: &Path) -> Result<Curve, InputError> {
    let rows = records(path)?;
    check_header(path, &rows, CURVE_HEADER)?;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (line, record) in &rows[1..] {
        xs.push(field(path, *line, record, 0, "soc")?);
        ys.push(field(path, *line, record, 1, "value")?);
    }
    Curve::new(xs, ys).ok_or_else(|| InputError::File {
        path: path.into(),
        message: "curve needs at least 2 points with strictly increasing soc".into(),
    })
}

fn create(path: &Path) -> io::Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

/// Trace as CSV. `Tw_Nm` is the demand referred to the engine/motor shaft,
/// the torque the split conserves.
pub fn trace_csv(trace: &Trace) -> String {
    let mut out = String::with_capacity(200 * trace.rows.len());
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for r in &trace.rows {
        let fields = [
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
        ];
        for (i, x) in fields.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            let _ = write!(out, "{x}");
        }
        out.push('\n');
    }
    out
}

pub fn write_trace(path: &Path, trace: &Trace) -> io::Result<()> {
    let mut w = create(path)?;
    w.write_all(trace_csv(trace).as_bytes())?;
    w.flush()
}

/// Stage-0 value function and policy over the grid. Dead nodes get an empty
/// `u_opt`.
pub fn write_values(path: &Path, solution: &Solution) -> io::Result<()> {
    let mut w = create(path)?;
    writeln!(w, "{VALUES_HEADER}")?;
    for (node, &j) in solution.initial_values.iter().enumerate() {
        let s = solution.grid.node(node);
        match solution.control(0, node) {
            Some(u) => writeln!(w, "{},{},{j},{u}", s.soc, s.theta)?,
            None => writeln!(w, "{},{},{j},", s.soc, s.theta)?,
        }
    }
    w.flush()
}

/// Parses a trace CSV back into its numeric columns.
pub fn read_trace_columns(path: &Path) -> Result<Vec<[f64; 14]>, InputError> {
    let rows = records(path)?;
    let Some((line, header)) = rows.first() else {
        return Err(InputError::File { path: path.into(), message: "file is empty".into() });
    };
    let found: Vec<&str> = header.iter().collect();
    if found.join(",") != TRACE_HEADER {
        return Err(InputError::Line { path: path.into(), line: *line, message: "not a trace header".into() });
    }
    rows[1..]
        .iter()
        .map(|(line, record)| {
            let mut row = [0.0; 14];
            for (i, slot) in row.iter_mut().enumerate() {
                *slot = field(path, *line, record, i, "value")?;
            }
            Ok(row)
        })
        .collect()
}

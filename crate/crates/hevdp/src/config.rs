//! Flat dotted-key configuration.
//!
//! A run config is a TOML file whose keys are dotted paths such as
//! `battery.thermal.h_bar_1`. It is overlaid on the checked-in reference file
//! `config/defaults.toml`; unknown keys and wrongly typed values are errors.
//! The merged result is written back out verbatim as the run manifest.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use hevdp_core::dp::{Mode, ProblemConfig, StateBounds, TerminalWindow};
use hevdp_core::{
    Battery, BatteryElectricalParams, BatteryState, BatteryThermalParams, CoolingChannel, Efficiency,
    EngineModel, JouleResistance, MotorModel, Powertrain, Rollout, SocCurve, VehicleParams,
};

use crate::files::{load_curve, load_map, InputError};

pub const DEFAULTS: &str = include_str!("../../../config/defaults.toml");

/// Directory the default paths are relative to.
const DEFAULTS_DIR: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../config");

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Kind {
    Float,
    Int,
    Bool,
    Text,
    Path,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Value {
    Float(f64),
    Int(i64),
    Bool(bool),
    Text(String),
    Path(Option<PathBuf>),
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let quoted = |s: &str| toml::Value::String(s.to_string()).to_string();
        match self {
            Value::Float(x) if x.is_infinite() => write!(f, "{}inf", if *x < 0.0 { "-" } else { "" }),
            Value::Float(x) => write!(f, "{x:?}"),
            Value::Int(i) => write!(f, "{i}"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Text(s) => f.write_str(&quoted(s)),
            Value::Path(None) => f.write_str("\"\""),
            Value::Path(Some(p)) => f.write_str(&quoted(&p.to_string_lossy())),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Syntax { path: PathBuf, message: String },
    #[error("{path}: unknown key `{key}`")]
    UnknownKey { path: PathBuf, key: String },
    #[error("{path}: `{key}` must be {expected}")]
    WrongType { path: PathBuf, key: String, expected: &'static str },
    #[error("`{key}`: {reason}")]
    Invalid { key: String, reason: String },
    #[error(transparent)]
    Input(#[from] InputError),
}

/// Merged configuration: every known key with its value, paths absolute.
#[derive(Clone, Debug, PartialEq)]
pub struct Resolved {
    values: BTreeMap<String, Value>,
}

fn flatten(prefix: &str, table: &toml::Table, out: &mut Vec<(String, toml::Value)>) {
    for (k, v) in table {
        let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match v {
            toml::Value::Table(t) => flatten(&key, t, out),
            other => out.push((key, other.clone())),
        }
    }
}

fn parse_entries(text: &str, path: &Path) -> Result<Vec<(String, toml::Value)>, ConfigError> {
    let table: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| ConfigError::Syntax { path: path.to_path_buf(), message: e.to_string() })?;
    let mut out = Vec::new();
    flatten("", &table, &mut out);
    Ok(out)
}

fn kind_of(v: &Value) -> Kind {
    match v {
        Value::Float(_) => Kind::Float,
        Value::Int(_) => Kind::Int,
        Value::Bool(_) => Kind::Bool,
        Value::Text(_) => Kind::Text,
        Value::Path(_) => Kind::Path,
    }
}

fn convert(kind: Kind, raw: &toml::Value, base: &Path) -> Option<Value> {
    match (kind, raw) {
        (Kind::Float, toml::Value::Float(x)) => Some(Value::Float(*x)),
        (Kind::Float, toml::Value::Integer(i)) => Some(Value::Float(*i as f64)),
        (Kind::Int, toml::Value::Integer(i)) => Some(Value::Int(*i)),
        (Kind::Bool, toml::Value::Boolean(b)) => Some(Value::Bool(*b)),
        (Kind::Text, toml::Value::String(s)) => Some(Value::Text(s.clone())),
        (Kind::Path, toml::Value::String(s)) if s.is_empty() => Some(Value::Path(None)),
        (Kind::Path, toml::Value::String(s)) => {
            let joined = base.join(s);
            Some(Value::Path(Some(std::path::absolute(&joined).unwrap_or(joined))))
        }
        _ => None,
    }
}

fn expected(kind: Kind) -> &'static str {
    match kind {
        Kind::Float => "a number",
        Kind::Int => "an integer",
        Kind::Bool => "true or false",
        Kind::Text => "a string",
        Kind::Path => "a path string",
    }
}

fn path_keys() -> &'static [&'static str] {
    &[
        "cycle.path",
        "engine.efficiency_map",
        "motor.efficiency_map",
        "battery.ocv_curve",
        "battery.resistance_curve",
    ]
}

fn text_keys() -> &'static [&'static str] {
    &["battery.thermal.joule_resistance", "sim.rollout"]
}

impl Resolved {
    /// The reference defaults alone.
    pub fn defaults() -> Self {
        let path = Path::new(DEFAULTS_DIR).join("defaults.toml");
        let entries = parse_entries(DEFAULTS, &path).expect("reference defaults parse");
        let mut values = BTreeMap::new();
        for (key, raw) in entries {
            let kind = if path_keys().contains(&key.as_str()) {
                Kind::Path
            } else if text_keys().contains(&key.as_str()) {
                Kind::Text
            } else {
                match raw {
                    toml::Value::Integer(_) => Kind::Int,
                    toml::Value::Boolean(_) => Kind::Bool,
                    _ => Kind::Float,
                }
            };
            let v = convert(kind, &raw, Path::new(DEFAULTS_DIR)).expect("reference defaults are well typed");
            values.insert(key, v);
        }
        Self { values }
    }

    /// Defaults overlaid with the file at `path`.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let mut resolved = Self::defaults();
        resolved.overlay(&text, path, &base)?;
        Ok(resolved)
    }

    fn overlay(&mut self, text: &str, path: &Path, base: &Path) -> Result<(), ConfigError> {
        for (key, raw) in parse_entries(text, path)? {
            let Some(current) = self.values.get(&key) else {
                return Err(ConfigError::UnknownKey { path: path.to_path_buf(), key });
            };
            let kind = kind_of(current);
            let value = convert(kind, &raw, base).ok_or_else(|| ConfigError::WrongType {
                path: path.to_path_buf(),
                key: key.clone(),
                expected: expected(kind),
            })?;
            self.values.insert(key, value);
        }
        Ok(())
    }

    /// Applies `key = value` overrides given as TOML snippets.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let text = format!("{} = {value}", toml::Value::String(key.to_string()));
        self.overlay(&text, Path::new("<override>"), Path::new("."))
    }

    pub fn get(&self, key: &str) -> Option<&Value> {
        self.values.get(key)
    }

    /// Manifest text: one `key = value` line per key, sorted.
    pub fn to_manifest(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.values {
            out.push_str(&format!("{} = {v}\n", toml::Value::String(k.clone())));
        }
        out
    }

    fn float(&self, key: &str) -> f64 {
        match self.values.get(key) {
            Some(Value::Float(x)) => *x,
            other => panic!("`{key}` is not a float key: {other:?}"),
        }
    }

    fn int(&self, key: &str) -> i64 {
        match self.values.get(key) {
            Some(Value::Int(i)) => *i,
            other => panic!("`{key}` is not an integer key: {other:?}"),
        }
    }

    fn flag(&self, key: &str) -> bool {
        match self.values.get(key) {
            Some(Value::Bool(b)) => *b,
            other => panic!("`{key}` is not a boolean key: {other:?}"),
        }
    }

    fn text(&self, key: &str) -> &str {
        match self.values.get(key) {
            Some(Value::Text(s)) => s,
            other => panic!("`{key}` is not a string key: {other:?}"),
        }
    }

    fn path(&self, key: &str) -> Option<&Path> {
        match self.values.get(key) {
            Some(Value::Path(p)) => p.as_deref(),
            other => panic!("`{key}` is not a path key: {other:?}"),
        }
    }

    fn count(&self, key: &str) -> Result<usize, ConfigError> {
        usize::try_from(self.int(key))
            .map_err(|_| ConfigError::Invalid { key: key.into(), reason: "must be >= 0".into() })
    }
}

/// Everything a run needs, typed and validated.
#[derive(Clone, Debug)]
pub struct Experiment {
    pub cycle_path: PathBuf,
    /// Sample period override, s.
    pub cycle_dt: Option<f64>,
    pub powertrain: Powertrain,
    pub problem: ProblemConfig,
    pub rollout: Rollout,
    /// kg/L
    pub fuel_density: f64,
    /// kg
    pub fuel_order_tolerance: f64,
    pub plots: bool,
    pub value_dump: bool,
    pub resolved: Resolved,
}

fn efficiency(r: &Resolved, constant: &str, map: &str) -> Result<Efficiency, ConfigError> {
    Ok(match r.path(map) {
        Some(p) => Efficiency::Map(load_map(p)?),
        None => Efficiency::Constant(r.float(constant)),
    })
}

fn channel(r: &Resolved, n: u8) -> CoolingChannel {
    let f = |name: &str| r.float(&format!("battery.thermal.{name}_{n}"));
    CoolingChannel {
        h_bar: f("h_bar"),
        area: f("area"),
        air_density: f("air_density"),
        air_specific_heat: f("air_specific_heat"),
        air_flow: f("air_flow"),
        inlet_temp: f("inlet_temp"),
    }
}

impl Experiment {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        Self::from_resolved(Resolved::load(path)?)
    }

    pub fn from_resolved(r: Resolved) -> Result<Self, ConfigError> {
        let invalid = |key: &str, reason: &str| ConfigError::Invalid { key: key.into(), reason: reason.into() };

        let cycle_path = r.path("cycle.path").ok_or_else(|| invalid("cycle.path", "must be set"))?.to_path_buf();
        let dt = r.float("cycle.dt");
        if !(dt >= 0.0 && dt.is_finite()) {
            return Err(invalid("cycle.dt", "must be >= 0 (0 reads it from the file)"));
        }

        let vehicle = VehicleParams {
            mass: r.float("vehicle.mass"),
            wheel_radius: r.float("vehicle.wheel_radius"),
            rolling_force: r.float("vehicle.rolling_force"),
            aero_coeff: r.float("vehicle.aero_coeff"),
            grade_angle: r.float("vehicle.grade_angle"),
            disturbance_force: r.float("vehicle.disturbance_force"),
            gear_ratio: r.float("vehicle.gear_ratio"),
            driveline_efficiency: r.float("vehicle.driveline_efficiency"),
        };
        let engine = EngineModel {
            max_torque: r.float("engine.max_torque"),
            max_speed: r.float("engine.max_speed"),
            efficiency: efficiency(&r, "engine.efficiency", "engine.efficiency_map")?,
            lower_heating_value: r.float("engine.lower_heating_value"),
            idle_fuel_rate: r.float("engine.idle_fuel_rate"),
            loss_power: r.float("engine.loss_power"),
        };
        let motor = MotorModel {
            max_torque: r.float("motor.max_torque"),
            max_speed: r.float("motor.max_speed"),
            efficiency: efficiency(&r, "motor.efficiency", "motor.efficiency_map")?,
        };
        let series_cells = u32::try_from(r.int("battery.series_cells"))
            .map_err(|_| invalid("battery.series_cells", "must be a positive integer"))?;
        let electrical = BatteryElectricalParams {
            capacity: r.float("battery.capacity"),
            series_cells,
            ocv: match r.path("battery.ocv_curve") {
                Some(p) => SocCurve::Table(load_curve(p)?),
                None => SocCurve::Affine { offset: r.float("battery.ocv_offset"), slope: r.float("battery.ocv_slope") },
            },
            cell_resistance: match r.path("battery.resistance_curve") {
                Some(p) => SocCurve::Table(load_curve(p)?),
                None => SocCurve::Constant(r.float("battery.cell_resistance")),
            },
        };
        let joule_resistance = match r.text("battery.thermal.joule_resistance") {
            "pack" => JouleResistance::Pack,
            "cell" => JouleResistance::Cell,
            _ => return Err(invalid("battery.thermal.joule_resistance", "must be \"pack\" or \"cell\"")),
        };
        let thermal = BatteryThermalParams {
            cell_mass: r.float("battery.thermal.cell_mass"),
            specific_heat: r.float("battery.thermal.specific_heat"),
            channels: [channel(&r, 1), channel(&r, 2)],
            joule_resistance,
        };
        let powertrain = Powertrain { vehicle, engine, motor, battery: Battery::new(electrical, thermal) };
        powertrain.validate().map_err(|e| match e {
            hevdp_core::ModelError::InvalidParameter { name, reason } => invalid(name, reason),
            other => ConfigError::Invalid { key: "model".into(), reason: other.to_string() },
        })?;

        let problem = ProblemConfig {
            bounds: StateBounds {
                soc_low: r.float("dp.soc_low"),
                soc_high: r.float("dp.soc_high"),
                theta_low: r.float("dp.theta_low"),
                theta_high: r.float("dp.theta_high"),
            },
            window: TerminalWindow {
                soc_min: r.float("dp.soc_final_min"),
                soc_max: r.float("dp.soc_final_max"),
                theta_min: r.float("dp.theta_final_min"),
                theta_max: r.float("dp.theta_final_max"),
            },
            initial: BatteryState::new(r.float("dp.soc0"), r.float("dp.theta0")),
            n_soc: r.count("dp.n_soc")?,
            n_theta: r.count("dp.n_theta")?,
            n_u: r.count("dp.n_u")?,
            u_min: r.float("dp.u_min"),
            u_max: r.float("dp.u_max"),
            big_value: r.float("dp.big_value"),
            terminal_penalty_soc: r.float("dp.terminal_penalty_soc"),
            terminal_penalty_theta: r.float("dp.terminal_penalty_theta"),
            violation_tolerance: r.float("dp.violation_tolerance"),
            snap_transitions: r.flag("dp.snap_transitions"),
            keep_values: false,
        };
        problem.validate().map_err(|e| ConfigError::Invalid { key: "dp".into(), reason: e.to_string() })?;

        let rollout = match r.text("sim.rollout") {
            "interpolated" => Rollout::Interpolated,
            "snapped" => Rollout::Snapped,
            _ => return Err(invalid("sim.rollout", "must be \"interpolated\" or \"snapped\"")),
        };
        let fuel_density = r.float("report.fuel_density");
        if !(fuel_density > 0.0 && fuel_density.is_finite()) {
            return Err(invalid("report.fuel_density", "must be > 0"));
        }

        let fuel_order_tolerance = r.float("report.fuel_order_tolerance");
        if !(fuel_order_tolerance >= 0.0) {
            return Err(invalid("report.fuel_order_tolerance", "must be >= 0"));
        }

        Ok(Self {
            cycle_path,
            cycle_dt: (dt > 0.0).then_some(dt),
            powertrain,
            problem,
            rollout,
            fuel_density,
            fuel_order_tolerance,
            plots: r.flag("output.plots"),
            value_dump: r.flag("output.value_dump"),
            resolved: r,
        })
    }
}

/// Parses `soc-only` / `two-state`.
pub fn parse_mode(s: &str) -> Option<Mode> {
    match s {
        "soc-only" => Some(Mode::SocOnly),
        "two-state" => Some(Mode::TwoState),
        _ => None,
    }
}

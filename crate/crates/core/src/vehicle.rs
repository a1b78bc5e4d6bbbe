//! Longitudinal vehicle dynamics, the engine/motor torque split and the
//! engine and motor efficiency maps.
//!
//! Wheel demand is referred to the shared engine/motor shaft through a fixed
//! gear ratio; the split, the torque limits and both maps act on shaft
//! quantities.

use crate::battery::Battery;
use crate::cycle::{CycleError, DriveCycle};
use crate::interp::Table2d;

/// Standard gravity, m/s².
pub const GRAVITY: f64 = 9.81;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: &'static str },
    #[error("efficiency map queried outside its grid at speed {speed} rad/s, torque {torque} N·m")]
    MapDomain { speed: f64, torque: f64 },
}

pub(crate) fn require(ok: bool, name: &'static str, reason: &'static str) -> Result<(), ModelError> {
    if ok {
        Ok(())
    } else {
        Err(ModelError::InvalidParameter { name, reason })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VehicleParams {
    /// kg
    pub mass: f64,
    /// m
    pub wheel_radius: f64,
    /// Rolling resistance magnitude, N. Only acts while moving.
    pub rolling_force: f64,
    /// Lumped aerodynamic coefficient, N·s²/m².
    pub aero_coeff: f64,
    /// Road grade, rad.
    pub grade_angle: f64,
    /// Extra resistive force, N.
    pub disturbance_force: f64,
    /// Shaft speed over wheel speed.
    pub gear_ratio: f64,
    pub driveline_efficiency: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        Self {
            mass: 1800.0,
            wheel_radius: 0.3,
            rolling_force: 144.0,
            aero_coeff: 0.48,
            grade_angle: 0.0,
            disturbance_force: 0.0,
            gear_ratio: 6.0,
            driveline_efficiency: 1.0,
        }
    }
}

impl VehicleParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        require(self.mass > 0.0 && self.mass.is_finite(), "vehicle.mass", "must be > 0")?;
        require(self.wheel_radius > 0.0 && self.wheel_radius.is_finite(), "vehicle.wheel_radius", "must be > 0")?;
        require(self.rolling_force >= 0.0 && self.rolling_force.is_finite(), "vehicle.rolling_force", "must be >= 0")?;
        require(self.aero_coeff >= 0.0 && self.aero_coeff.is_finite(), "vehicle.aero_coeff", "must be >= 0")?;
        require(self.grade_angle.is_finite(), "vehicle.grade_angle", "must be finite")?;
        require(self.disturbance_force.is_finite(), "vehicle.disturbance_force", "must be finite")?;
        require(self.gear_ratio > 0.0 && self.gear_ratio.is_finite(), "vehicle.gear_ratio", "must be > 0")?;
        require(
            self.driveline_efficiency > 0.0 && self.driveline_efficiency <= 1.0,
            "vehicle.driveline_efficiency",
            "must be in (0, 1]",
        )
    }
}

/// Sum of the road loads opposing motion at speed `v`.
pub fn resistive_force(params: &VehicleParams, v: f64) -> f64 {
    let rolling = if v > 0.0 { params.rolling_force } else { 0.0 };
    rolling
        + params.aero_coeff * v * v
        + params.mass * GRAVITY * libm::sin(params.grade_angle)
        + params.disturbance_force
}

/// Torque and speed the powertrain must deliver during one stage.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StageDemand {
    pub step: usize,
    /// Wheel torque from the traction force, N·m.
    pub wheel_torque: f64,
    /// Wheel torque referred to the engine/motor shaft, N·m.
    pub shaft_torque: f64,
    /// Common engine/motor shaft speed, rad/s.
    pub shaft_speed: f64,
}

impl StageDemand {
    /// Demand specified directly at the shaft (gear ratio 1, lossless).
    pub fn at_shaft(step: usize, torque: f64, speed: f64) -> Self {
        Self { step, wheel_torque: torque, shaft_torque: torque, shaft_speed: speed }
    }
}

pub fn wheel_demand(
    params: &VehicleParams,
    cycle: &DriveCycle,
    k: usize,
) -> Result<StageDemand, CycleError> {
    let accel = cycle.accel_at(k)?;
    let v = cycle.speeds()[k];
    let traction = params.mass * accel + resistive_force(params, v);
    let wheel_torque = traction * params.wheel_radius;
    let shaft_torque = if wheel_torque >= 0.0 {
        wheel_torque / (params.gear_ratio * params.driveline_efficiency)
    } else {
        wheel_torque * params.driveline_efficiency / params.gear_ratio
    };
    Ok(StageDemand {
        step: k,
        wheel_torque,
        shaft_torque,
        shaft_speed: params.gear_ratio * v / params.wheel_radius,
    })
}

/// Constant efficiency or a gridded (speed, torque) map.
#[derive(Clone, Debug, PartialEq)]
pub enum Efficiency {
    Constant(f64),
    Map(Table2d),
}

impl Efficiency {
    fn validate(&self, name: &'static str) -> Result<(), ModelError> {
        let ok = |e: f64| e > 0.0 && e < 1.0;
        match self {
            Efficiency::Constant(e) => require(ok(*e), name, "efficiency must be in (0, 1)"),
            Efficiency::Map(t) => {
                require(t.values().iter().all(|&e| ok(e)), name, "map efficiencies must be in (0, 1)")
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EngineModel {
    /// N·m
    pub max_torque: f64,
    /// rad/s
    pub max_speed: f64,
    pub efficiency: Efficiency,
    /// J/kg
    pub lower_heating_value: f64,
    /// kg/s burnt while the engine delivers no torque.
    pub idle_fuel_rate: f64,
    /// Willans-line offset: friction and pumping power added to the shaft
    /// power whenever the engine delivers torque, W.
    pub loss_power: f64,
}

impl Default for EngineModel {
    fn default() -> Self {
        Self {
            max_torque: 199.0,
            max_speed: 503.0,
            efficiency: Efficiency::Constant(0.35),
            lower_heating_value: 44.4e6,
            idle_fuel_rate: 0.0,
            loss_power: 4000.0,
        }
    }
}

impl EngineModel {
    pub fn validate(&self) -> Result<(), ModelError> {
        require(self.max_torque > 0.0 && self.max_torque.is_finite(), "engine.max_torque", "must be > 0")?;
        require(self.max_speed > 0.0 && self.max_speed.is_finite(), "engine.max_speed", "must be > 0")?;
        require(
            self.lower_heating_value > 0.0 && self.lower_heating_value.is_finite(),
            "engine.lower_heating_value",
            "must be > 0",
        )?;
        require(
            self.idle_fuel_rate >= 0.0 && self.idle_fuel_rate.is_finite(),
            "engine.idle_fuel_rate",
            "must be >= 0",
        )?;
        require(self.loss_power >= 0.0 && self.loss_power.is_finite(), "engine.loss_power", "must be >= 0")?;
        self.efficiency.validate("engine.efficiency")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MotorModel {
    /// N·m, symmetric for motoring and generating.
    pub max_torque: f64,
    /// rad/s
    pub max_speed: f64,
    pub efficiency: Efficiency,
}

impl Default for MotorModel {
    fn default() -> Self {
        Self { max_torque: 133.0, max_speed: 600.0, efficiency: Efficiency::Constant(0.9) }
    }
}

impl MotorModel {
    pub fn validate(&self) -> Result<(), ModelError> {
        require(self.max_torque > 0.0 && self.max_torque.is_finite(), "motor.max_torque", "must be > 0")?;
        require(self.max_speed > 0.0 && self.max_speed.is_finite(), "motor.max_speed", "must be > 0")?;
        self.efficiency.validate("motor.efficiency")
    }
}

/// Outcome of splitting a shaft torque demand between motor and engine.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TorqueSplit {
    pub motor: f64,
    pub engine: f64,
    /// Friction brake torque (≤ 0 in practice).
    pub brake: f64,
    pub feasible: bool,
}

/// Splits the shaft demand with ratio `u = T_m / T`.
///
/// Positive demand: the motor takes `u·T` and the engine the rest. Negative
/// demand: the motor regenerates the fraction `clamp(u, 0, 1)` of it, capped
/// at its torque limit, and friction brakes absorb the remainder; `u = 1` is
/// full regeneration. Limit violations are reported through `feasible`,
/// never as errors.
///
/// One share of each split is truncated onto the floating-point grid of the
/// demand, which makes the other share an exact difference: `motor + engine
/// + brake` equals the demand bit for bit.
pub fn split_torque(
    demand: &StageDemand,
    u: f64,
    motor: &MotorModel,
    engine: &EngineModel,
) -> TorqueSplit {
    let total = demand.shaft_torque;
    let (t_m, t_e, brake) = if total > 0.0 {
        let (t_m, t_e) = exact_pair(total, u * total);
        (t_m, t_e, 0.0)
    } else {
        let t_m = on_grid(total, (u.clamp(0.0, 1.0) * total).max(-motor.max_torque));
        (t_m, 0.0, total - t_m)
    };
    let speed = demand.shaft_speed;
    let feasible = t_m.abs() <= motor.max_torque
        && t_e >= 0.0
        && t_e <= engine.max_torque
        && speed <= motor.max_speed
        && speed <= engine.max_speed;
    TorqueSplit { motor: t_m, engine: t_e, brake, feasible }
}

/// `(a, total - a)` with `a ≈ part` and both values exact. The larger share
/// is rounded; exact for `part / total` in `[-1, 2]`.
fn exact_pair(total: f64, part: f64) -> (f64, f64) {
    let rest = total - part;
    if part.abs() >= rest.abs() {
        let a = on_grid(total.abs().max(part.abs()), part);
        (a, total - a)
    } else {
        let b = on_grid(total.abs().max(rest.abs()), rest);
        (total - b, b)
    }
}

/// `x` truncated toward zero to a multiple of the unit in the last place of
/// `scale`.
fn on_grid(scale: f64, x: f64) -> f64 {
    if scale == 0.0 || !scale.is_finite() {
        return x;
    }
    let (_, exp) = libm::frexp(scale);
    let ulp = libm::ldexp(1.0, exp - 53);
    libm::trunc(x / ulp) * ulp
}

/// Engine fuel mass flow, kg/s.
pub fn fuel_rate(engine: &EngineModel, speed: f64, torque: f64) -> Result<f64, ModelError> {
    if torque <= 0.0 {
        return Ok(engine.idle_fuel_rate);
    }
    let eta = match &engine.efficiency {
        Efficiency::Constant(e) => *e,
        Efficiency::Map(t) => t.eval(speed, torque).ok_or(ModelError::MapDomain { speed, torque })?,
    };
    Ok((torque * speed + engine.loss_power) / eta / engine.lower_heating_value)
}

/// Electrical power drawn by the motor, W (negative when generating).
pub fn motor_electrical_power(motor: &MotorModel, speed: f64, torque: f64) -> f64 {
    let mechanical = torque * speed;
    let eta = match &motor.efficiency {
        Efficiency::Constant(e) => *e,
        Efficiency::Map(t) => t.eval_clamped(speed, torque.abs()),
    };
    if mechanical >= 0.0 {
        mechanical / eta
    } else {
        mechanical * eta
    }
}

/// Everything needed to evaluate one stage transition.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Powertrain {
    pub vehicle: VehicleParams,
    pub engine: EngineModel,
    pub motor: MotorModel,
    pub battery: Battery,
}

impl Powertrain {
    pub fn validate(&self) -> Result<(), ModelError> {
        self.vehicle.validate()?;
        self.engine.validate()?;
        self.motor.validate()?;
        self.battery.validate()
    }

    pub fn demand(&self, cycle: &DriveCycle, k: usize) -> Result<StageDemand, CycleError> {
        wheel_demand(&self.vehicle, cycle, k)
    }
}

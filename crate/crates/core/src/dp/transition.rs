use super::{Mode, StateBounds};
use crate::battery::{BatteryState, BatteryStep};
use crate::vehicle::{fuel_rate, motor_electrical_power, split_torque, Powertrain, StageDemand, TorqueSplit};

/// One stage of the composed powertrain/battery dynamics.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Transition {
    pub split: TorqueSplit,
    /// Motor electrical power, W.
    pub power: f64,
    /// Fuel burnt over the stage, kg.
    pub fuel: f64,
    /// Fuel mass flow, kg/s.
    pub fuel_rate: f64,
    /// Battery step; `None` when the power is outside the battery envelope.
    pub battery: Option<BatteryStep>,
    pub next: BatteryState,
    pub feasible: bool,
}

/// Applies split ratio `u` from `node` for one stage of length `dt`.
///
/// Torque split, motor power, battery step and fuel are evaluated in that
/// order. The transition is infeasible when the split violates a limit, the
/// battery cannot supply the power, the engine map rejects the operating
/// point, or the successor leaves the state box. In SOC-only mode the
/// temperature is carried through unchanged and is not constrained.
pub fn stage_transition(
    powertrain: &Powertrain,
    node: BatteryState,
    u: f64,
    demand: &StageDemand,
    dt: f64,
    bounds: &StateBounds,
    mode: Mode,
) -> Transition {
    let split = split_torque(demand, u, &powertrain.motor, &powertrain.engine);
    let speed = demand.shaft_speed;
    let power = motor_electrical_power(&powertrain.motor, speed, split.motor);
    let rate = fuel_rate(&powertrain.engine, speed, split.engine);
    let battery = powertrain.battery.step(node, power, dt).ok();
    let (fuel_rate, fuel) = match rate {
        Ok(r) => (r, r * dt),
        Err(_) => (f64::NAN, f64::NAN),
    };
    let mut next = battery.map_or(node, |b| b.next);
    if mode == Mode::SocOnly {
        next.theta = node.theta;
    }
    let in_box = next.soc >= bounds.soc_low
        && next.soc <= bounds.soc_high
        && (mode == Mode::SocOnly || (next.theta >= bounds.theta_low && next.theta <= bounds.theta_high));
    let feasible = split.feasible && rate.is_ok() && battery.is_some() && in_box;
    Transition { split, power, fuel, fuel_rate, battery, next, feasible }
}

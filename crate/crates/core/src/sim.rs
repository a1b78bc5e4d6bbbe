//! Forward rollout of an extracted policy and trace post-processing.

use alloc::vec::Vec;

use crate::battery::{heat_generation, Battery, BatteryState};
use crate::cycle::{CycleError, DriveCycle};
use crate::dp::{stage_transition, Mode, ProblemConfig, Solution};
use crate::interp::lerp;
use crate::vehicle::Powertrain;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("policy covers {policy} stages but the cycle has {cycle}")]
    StageMismatch { policy: usize, cycle: usize },
    #[error("stage {stage}: state (soc {soc}, theta {theta}) left the grid")]
    OutOfGrid { stage: usize, soc: f64, theta: f64 },
    #[error("stage {stage}: no feasible control stored around the current state")]
    DeadPolicy { stage: usize },
    #[error("stage {stage}: {reason}; the grid is probably too coarse")]
    Infeasible { stage: usize, reason: &'static str },
    #[error("trace covers zero distance")]
    ZeroDistance,
    #[error(transparent)]
    Cycle(#[from] CycleError),
}

/// How the rollout reads the stored policy.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Rollout {
    /// Continuous states; `u` blended bilinearly from the surrounding nodes,
    /// falling back to the heaviest live corner when any corner is dead.
    Interpolated,
    /// States snapped onto grid nodes after every stage, matching a DP
    /// solved with `snap_transitions`.
    Snapped,
}

/// One trace row. Stage rows describe stage `k` starting from the recorded
/// state; the final row holds the terminal state with zero demand.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceRow {
    pub time: f64,
    pub speed: f64,
    /// Demand at the engine/motor shaft, N·m.
    pub demand_torque: f64,
    pub wheel_torque: f64,
    pub u: f64,
    pub motor_torque: f64,
    pub engine_torque: f64,
    pub brake_torque: f64,
    /// Motor electrical power, W.
    pub motor_power: f64,
    pub current: f64,
    pub terminal_voltage: f64,
    pub soc: f64,
    pub theta: f64,
    /// kg/s
    pub fuel_rate: f64,
    /// Fuel burnt during this stage, kg.
    pub stage_fuel: f64,
    /// Fuel burnt up to the end of this stage, kg.
    pub cumulative_fuel: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trace {
    pub mode: Mode,
    pub dt: f64,
    pub rows: Vec<TraceRow>,
}

impl Trace {
    /// Rows for stages `0..N`, without the terminal row.
    pub fn stage_rows(&self) -> &[TraceRow] {
        &self.rows[..self.rows.len().saturating_sub(1)]
    }

    pub fn final_state(&self) -> BatteryState {
        let last = self.rows[self.rows.len() - 1];
        BatteryState::new(last.soc, last.theta)
    }

    /// Total fuel, kg, summed from the last stage backwards (the association
    /// used by the DP, so it reproduces `J_0` bit-for-bit on snapped runs).
    pub fn total_fuel(&self) -> f64 {
        self.stage_rows().iter().rev().fold(0.0, |acc, r| r.stage_fuel + acc)
    }

    pub fn distance(&self) -> f64 {
        self.stage_rows().iter().map(|r| r.speed * self.dt).sum()
    }

    pub fn max_theta(&self) -> f64 {
        self.rows.iter().map(|r| r.theta).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_theta(&self) -> f64 {
        self.rows.iter().map(|r| r.theta).fold(f64::INFINITY, f64::min)
    }

    pub fn min_soc(&self) -> f64 {
        self.rows.iter().map(|r| r.soc).fold(f64::INFINITY, f64::min)
    }

    pub fn max_soc(&self) -> f64 {
        self.rows.iter().map(|r| r.soc).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Snaps the tracked coordinates of `state` onto the grid.
fn snap_state(solution: &Solution, state: BatteryState) -> Option<BatteryState> {
    let grid = &solution.grid;
    match solution.mode() {
        Mode::TwoState => grid.snap(state),
        Mode::SocOnly => {
            let i = grid.soc.nearest(state.soc)?;
            Some(BatteryState { soc: grid.soc.points()[i], ..state })
        }
    }
}

/// Reads the control for `state` at stage `k`.
fn lookup_control(solution: &Solution, k: usize, state: BatteryState, rollout: Rollout) -> Result<f64, SimError> {
    let grid = &solution.grid;
    let out_of_grid = SimError::OutOfGrid { stage: k, soc: state.soc, theta: state.theta };
    if rollout == Rollout::Snapped {
        let node = grid.nearest(state).ok_or(out_of_grid)?;
        return solution.control(k, node).ok_or(SimError::DeadPolicy { stage: k });
    }

    let (i, ws, j, wt) = grid.cell(state).ok_or(out_of_grid)?;
    let soc_next = (i + 1).min(grid.n_soc() - 1);
    let theta_next = (j + 1).min(grid.n_theta() - 1);
    let corners = [
        (grid.index(i, j), (1.0 - ws) * (1.0 - wt)),
        (grid.index(soc_next, j), ws * (1.0 - wt)),
        (grid.index(i, theta_next), (1.0 - ws) * wt),
        (grid.index(soc_next, theta_next), ws * wt),
    ];
    let u_at = |node: usize| solution.control(k, node);
    let all_live = corners.iter().all(|&(node, w)| w == 0.0 || u_at(node).is_some());
    if all_live {
        let u = |node: usize| u_at(node).unwrap_or(0.0);
        let lower = lerp(u(corners[0].0), u(corners[1].0), ws);
        let upper = lerp(u(corners[2].0), u(corners[3].0), ws);
        return Ok(lerp(lower, upper, wt));
    }
    corners
        .iter()
        .filter_map(|&(node, w)| u_at(node).map(|u| (u, w)))
        .fold(None, |best: Option<(f64, f64)>, (u, w)| match best {
            Some((_, bw)) if bw >= w => best,
            _ => Some((u, w)),
        })
        .map(|(u, _)| u)
        .ok_or(SimError::DeadPolicy { stage: k })
}

/// Rolls the policy in `solution` forward over `cycle` from `initial`.
///
/// Battery temperature always evolves physically in the trace; in SOC-only
/// mode it is neither read by the policy nor constrained.
pub fn forward_simulate(
    solution: &Solution,
    cycle: &DriveCycle,
    powertrain: &Powertrain,
    config: &ProblemConfig,
    initial: BatteryState,
    rollout: Rollout,
) -> Result<Trace, SimError> {
    let stages = cycle.steps();
    if solution.stages() != stages {
        return Err(SimError::StageMismatch { policy: solution.stages(), cycle: stages });
    }
    let mode = solution.mode();
    let dt = cycle.dt();
    let mut state = initial;
    let mut cumulative = 0.0;
    let mut rows = Vec::with_capacity(stages + 1);

    for k in 0..stages {
        if rollout == Rollout::Snapped {
            state = snap_state(solution, state)
                .ok_or(SimError::OutOfGrid { stage: k, soc: state.soc, theta: state.theta })?;
        }
        let demand = powertrain.demand(cycle, k)?;
        let u = lookup_control(solution, k, state, rollout)?;
        let t = stage_transition(powertrain, state, u, &demand, dt, &config.bounds, mode);
        let Some(battery) = t.battery.filter(|_| t.feasible) else {
            let reason = if !t.split.feasible {
                "torque split violates a motor or engine limit"
            } else if t.battery.is_none() {
                "battery cannot supply the requested power"
            } else if !t.fuel.is_finite() {
                "engine map does not cover the operating point"
            } else {
                "state left the admissible box"
            };
            return Err(SimError::Infeasible { stage: k, reason });
        };
        cumulative += t.fuel;
        rows.push(TraceRow {
            time: cycle.time_at(k),
            speed: cycle.speeds()[k],
            demand_torque: demand.shaft_torque,
            wheel_torque: demand.wheel_torque,
            u,
            motor_torque: t.split.motor,
            engine_torque: t.split.engine,
            brake_torque: t.split.brake,
            motor_power: t.power,
            current: battery.current,
            terminal_voltage: battery.terminal_voltage,
            soc: state.soc,
            theta: state.theta,
            fuel_rate: t.fuel_rate,
            stage_fuel: t.fuel,
            cumulative_fuel: cumulative,
        });
        state = battery.next;
    }

    if rollout == Rollout::Snapped {
        state = snap_state(solution, state).unwrap_or(state);
    }
    rows.push(TraceRow {
        time: cycle.time_at(stages),
        speed: cycle.speeds()[stages],
        demand_torque: 0.0,
        wheel_torque: 0.0,
        u: 0.0,
        motor_torque: 0.0,
        engine_torque: 0.0,
        brake_torque: 0.0,
        motor_power: 0.0,
        current: 0.0,
        terminal_voltage: powertrain.battery.ocv(state.soc),
        soc: state.soc,
        theta: state.theta,
        fuel_rate: 0.0,
        stage_fuel: 0.0,
        cumulative_fuel: cumulative,
    });
    Ok(Trace { mode, dt, rows })
}

/// Fuel economy in litres per 100 km.
pub fn fuel_per_100km(trace: &Trace, fuel_density: f64) -> Result<f64, SimError> {
    let distance = trace.distance();
    if !(distance > 0.0) {
        return Err(SimError::ZeroDistance);
    }
    Ok(trace.total_fuel() / fuel_density / distance * 1e5)
}

/// Temperature trajectory from replaying a trace's current profile.
#[derive(Clone, Debug, PartialEq)]
pub struct ThermalReplay {
    /// One value per trace row, starting at the initial temperature.
    pub theta: Vec<f64>,
    pub max: f64,
}

/// Integrates the cell temperature over the recorded currents and SOCs,
/// starting from `theta0`.
pub fn post_hoc_thermal(trace: &Trace, battery: &Battery, theta0: f64) -> ThermalReplay {
    let mut theta = Vec::with_capacity(trace.rows.len());
    let mut current = theta0;
    theta.push(current);
    for row in trace.stage_rows() {
        let heat = heat_generation(battery.joule_resistance(row.soc), row.current);
        current = battery.next_theta_from_heat(current, heat, trace.dt);
        theta.push(current);
    }
    let max = theta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    ThermalReplay { theta, max }
}

//! Backward dynamic programming over a (SOC, θ) grid.
//!
//! Infeasible controls and states carry a finite big value `M` instead of
//! infinity. Cost-to-go between nodes is read by bilinear interpolation; any
//! cell corner that contributes to the interpolation and holds `M` makes the
//! interpolated value `M`, so dead nodes never leak optimism into their
//! neighbours.
//!
//! Missing the terminal window costs a penalty proportional to the distance
//! from the window rather than `M`. A stage moves the state by much less than
//! one grid cell, so a hard `M` boundary could never propagate backwards
//! through the interpolation. The penalty is reported separately as the
//! terminal violation; an infinite penalty weight restores the hard window.

mod brute;
mod grid;
mod solve;
mod transition;

pub use brute::{brute_force_solve, BruteForceSolution, MAX_SEQUENCES};
pub use grid::{build_grids, terminal_cost, terminal_penalty, ControlGrid, StateGrid};
pub use solve::{backward_step, solve, Backup, solve_mode, solve_soc_only, Policy, Solution, DEAD};
pub use transition::{stage_transition, Transition};

use crate::battery::BatteryState;
use crate::cycle::CycleError;
use crate::vehicle::ModelError;

/// Which states the optimiser tracks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mode {
    /// SOC only; battery temperature is held at its initial value.
    SocOnly,
    /// SOC and battery temperature.
    TwoState,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::SocOnly => "soc-only",
            Mode::TwoState => "two-state",
        }
    }
}

/// Hard box on the state at every stage.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StateBounds {
    pub soc_low: f64,
    pub soc_high: f64,
    /// °C
    pub theta_low: f64,
    /// °C
    pub theta_high: f64,
}

impl Default for StateBounds {
    fn default() -> Self {
        Self { soc_low: 0.4, soc_high: 0.7, theta_low: 10.0, theta_high: 30.0 }
    }
}

/// Target set for the final state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TerminalWindow {
    pub soc_min: f64,
    pub soc_max: f64,
    pub theta_min: f64,
    pub theta_max: f64,
}

impl Default for TerminalWindow {
    fn default() -> Self {
        Self { soc_min: 0.54, soc_max: 0.55, theta_min: 15.0, theta_max: 25.0 }
    }
}

impl TerminalWindow {
    /// Distances outside the window in SOC and θ, zero inside.
    pub fn distance(&self, state: BatteryState) -> (f64, f64) {
        let gap = |x: f64, lo: f64, hi: f64| (lo - x).max(x - hi).max(0.0);
        (gap(state.soc, self.soc_min, self.soc_max), gap(state.theta, self.theta_min, self.theta_max))
    }

    pub fn contains(&self, state: BatteryState, mode: Mode) -> bool {
        let soc_ok = state.soc >= self.soc_min && state.soc <= self.soc_max;
        match mode {
            Mode::SocOnly => soc_ok,
            Mode::TwoState => soc_ok && state.theta >= self.theta_min && state.theta <= self.theta_max,
        }
    }
}

/// Discretisation and constraint settings for one optimisation.
#[derive(Clone, Debug, PartialEq)]
pub struct ProblemConfig {
    pub bounds: StateBounds,
    pub window: TerminalWindow,
    pub initial: BatteryState,
    pub n_soc: usize,
    pub n_theta: usize,
    pub n_u: usize,
    pub u_min: f64,
    pub u_max: f64,
    /// Finite stand-in for infinite cost, kg.
    pub big_value: f64,
    /// Terminal penalty per unit of SOC outside the window, kg.
    pub terminal_penalty_soc: f64,
    /// Terminal penalty per °C outside the window, kg. Unused in SOC-only mode.
    pub terminal_penalty_theta: f64,
    /// Largest terminal violation (penalty, kg) at the initial state that
    /// still counts as reaching the window.
    pub violation_tolerance: f64,
    /// Snap every successor state onto its nearest grid node.
    pub snap_transitions: bool,
    /// Retain every stage's cost-to-go, not only `J_0`.
    pub keep_values: bool,
}

impl Default for ProblemConfig {
    fn default() -> Self {
        Self {
            bounds: StateBounds::default(),
            window: TerminalWindow::default(),
            initial: BatteryState::new(0.5, 20.0),
            n_soc: 201,
            n_theta: 101,
            n_u: 51,
            u_min: -1.0,
            u_max: 1.0,
            big_value: 1e9,
            terminal_penalty_soc: 100.0,
            terminal_penalty_theta: 10.0,
            violation_tolerance: 0.1,
            snap_transitions: false,
            keep_values: false,
        }
    }
}

impl ProblemConfig {
    pub fn validate(&self) -> Result<(), DpError> {
        let b = &self.bounds;
        let w = &self.window;
        let ordered = |lo: f64, hi: f64| lo.is_finite() && hi.is_finite() && lo < hi;
        if !ordered(b.soc_low, b.soc_high) || b.soc_low < 0.0 || b.soc_high > 1.0 {
            return Err(DpError::InvalidConfig("SOC bounds must satisfy 0 <= low < high <= 1"));
        }
        if !ordered(b.theta_low, b.theta_high) {
            return Err(DpError::InvalidConfig("temperature bounds must satisfy low < high"));
        }
        if !(w.soc_min <= w.soc_max && w.soc_min >= b.soc_low && w.soc_max <= b.soc_high) {
            return Err(DpError::InvalidConfig("terminal SOC window must lie inside the SOC bounds"));
        }
        if !(w.theta_min <= w.theta_max && w.theta_min >= b.theta_low && w.theta_max <= b.theta_high)
        {
            return Err(DpError::InvalidConfig(
                "terminal temperature window must lie inside the temperature bounds",
            ));
        }
        if self.n_soc < 2 || self.n_theta < 2 || self.n_u < 2 {
            return Err(DpError::InvalidConfig("grid resolutions must be at least 2"));
        }
        if self.n_u > usize::from(DEAD) {
            return Err(DpError::InvalidConfig("too many control values"));
        }
        if !(ordered(self.u_min, self.u_max) && self.u_min <= 0.0 && self.u_max >= 1.0) {
            return Err(DpError::InvalidConfig("control box must contain [0, 1]"));
        }
        if self.u_min < -1.0 || self.u_max > 2.0 {
            return Err(DpError::InvalidConfig("control box must lie within [-1, 2]"));
        }
        if !(self.big_value > 0.0 && self.big_value.is_finite()) {
            return Err(DpError::InvalidConfig("big value must be positive and finite"));
        }
        if !(self.terminal_penalty_soc > 0.0 && self.terminal_penalty_theta > 0.0) {
            return Err(DpError::InvalidConfig("terminal penalties must be positive"));
        }
        if !(self.violation_tolerance >= 0.0) {
            return Err(DpError::InvalidConfig("violation tolerance must be >= 0"));
        }
        let x0 = self.initial;
        if !(x0.soc >= b.soc_low && x0.soc <= b.soc_high) {
            return Err(DpError::InitialStateOutOfBounds);
        }
        if !(x0.theta >= b.theta_low && x0.theta <= b.theta_high) {
            return Err(DpError::InitialStateOutOfBounds);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DpError {
    #[error("invalid problem configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("initial state lies outside the state bounds")]
    InitialStateOutOfBounds,
    #[error("no feasible trajectory reaches the terminal window")]
    NoFeasibleTrajectory,
    #[error("brute force would enumerate {sequences} control sequences (limit {limit})")]
    TooLarge { sequences: u128, limit: u128 },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Cycle(#[from] CycleError),
}

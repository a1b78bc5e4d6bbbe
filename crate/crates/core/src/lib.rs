//! Offline energy management for a parallel hybrid electric vehicle.
//!
//! The crate solves the fuel-minimisation problem over a prescribed drive
//! cycle with finite-horizon dynamic programming. The battery is modelled as
//! an equivalent circuit coupled to a lumped, two-channel air-cooled thermal
//! model, so the optimiser can carry both state of charge and cell
//! temperature as states. A SOC-only solve (temperature ignored) is provided
//! as the baseline.
//!
//! Everything here is pure numerics on `alloc`; file formats, configuration
//! and the command line live in the companion `hevdp` crate.
//!
//! # Features
//! - `parallel`: sweep grid nodes with rayon during the backward pass. Pulls
//!   in `std`.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

#[cfg(feature = "parallel")]
extern crate std;

pub mod battery;
pub mod cycle;
pub mod dp;
pub mod interp;
pub mod sim;
pub mod vehicle;

pub use crate::battery::{
    Battery, BatteryElectricalParams, BatteryState, BatteryStep, BatteryThermalParams,
    CoolingChannel, CoolingCoefficients, InfeasiblePower, JouleResistance, SocCurve,
};
pub use crate::cycle::{compute_stats, CycleError, CycleStats, DriveCycle};
pub use crate::dp::{
    brute_force_solve, build_grids, solve, solve_soc_only, terminal_cost, BruteForceSolution,
    ControlGrid, DpError, Mode, Policy, ProblemConfig, Solution, StateBounds, StateGrid,
    TerminalWindow,
};
pub use crate::sim::{
    forward_simulate, fuel_per_100km, post_hoc_thermal, Rollout, SimError, Trace, TraceRow,
};
pub use crate::vehicle::{
    Efficiency, EngineModel, ModelError, MotorModel, Powertrain, StageDemand, TorqueSplit,
    VehicleParams,
};

use alloc::vec;
use alloc::vec::Vec;

use super::grid::{interpolate_cell, upper_if_unit};
use super::{build_grids, terminal_cost, ControlGrid, DpError, Mode, ProblemConfig, StateGrid};
use crate::battery::{battery_current, heat_generation};
use crate::cycle::DriveCycle;
use crate::vehicle::{fuel_rate, motor_electrical_power, split_torque, Powertrain, StageDemand};

/// Policy marker for nodes with no feasible control.
pub const DEAD: u16 = u16::MAX;

/// Optimal control index per stage and node.
#[derive(Clone, Debug, PartialEq)]
pub struct Policy {
    nodes: usize,
    indices: Vec<u16>,
}

impl Policy {
    pub fn new(stages: usize, nodes: usize) -> Self {
        Self { nodes, indices: vec![DEAD; stages * nodes] }
    }

    pub fn stages(&self) -> usize {
        if self.nodes == 0 {
            0
        } else {
            self.indices.len() / self.nodes
        }
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn stage(&self, k: usize) -> &[u16] {
        &self.indices[k * self.nodes..(k + 1) * self.nodes]
    }

    pub(crate) fn stage_mut(&mut self, k: usize) -> &mut [u16] {
        &mut self.indices[k * self.nodes..(k + 1) * self.nodes]
    }

    /// Control index at `(k, node)`, `None` for dead nodes.
    pub fn get(&self, k: usize, node: usize) -> Option<usize> {
        match self.indices[k * self.nodes + node] {
            DEAD => None,
            j => Some(usize::from(j)),
        }
    }
}

/// Output of a backward DP sweep.
#[derive(Clone, Debug)]
pub struct Solution {
    pub grid: StateGrid,
    pub controls: ControlGrid,
    pub policy: Policy,
    /// Cost-to-go at the initial state, kg, terminal penalty included.
    pub initial_cost: f64,
    /// Terminal penalty part of `initial_cost`, kg.
    pub initial_violation: f64,
    /// `J_0` over the grid.
    pub initial_values: Vec<f64>,
    /// `J_0 … J_N` when `keep_values` was set.
    pub values: Option<Vec<Vec<f64>>>,
    pub big_value: f64,
}

impl Solution {
    pub fn mode(&self) -> Mode {
        self.grid.mode
    }

    pub fn stages(&self) -> usize {
        self.policy.stages()
    }

    pub fn control(&self, k: usize, node: usize) -> Option<f64> {
        self.policy.get(k, node).map(|j| self.controls.values()[j])
    }
}

/// Per-candidate quantities that depend on the control only.
struct Candidate {
    index: u16,
    power: f64,
    fuel: f64,
}

/// Per-(SOC node, candidate) quantities.
#[derive(Clone, Copy)]
struct SocMove {
    feasible: bool,
    cell: usize,
    weight: f64,
    heat: f64,
}

const BLOCKED: SocMove = SocMove { feasible: false, cell: 0, weight: 0.0, heat: 0.0 };

/// Candidates with feasible splits, in descending control order. Controls
/// producing an identical split to a higher one are dropped: they cannot win
/// under the highest-`u` tie-break.
fn candidates(demand: &StageDemand, dt: f64, controls: &ControlGrid, powertrain: &Powertrain) -> Vec<Candidate> {
    let mut out: Vec<Candidate> = Vec::new();
    let mut seen: Vec<(u64, u64)> = Vec::new();
    for (j, &u) in controls.values().iter().enumerate().rev() {
        let split = split_torque(demand, u, &powertrain.motor, &powertrain.engine);
        if !split.feasible {
            continue;
        }
        let key = (split.motor.to_bits(), split.engine.to_bits());
        if seen.contains(&key) {
            continue;
        }
        seen.push(key);
        let speed = demand.shaft_speed;
        let Ok(rate) = fuel_rate(&powertrain.engine, speed, split.engine) else {
            continue;
        };
        out.push(Candidate {
            index: j as u16,
            power: motor_electrical_power(&powertrain.motor, speed, split.motor),
            fuel: rate * dt,
        });
    }
    out
}

/// Result of one Bellman backup.
#[derive(Clone, Debug, PartialEq)]
pub struct Backup {
    pub values: Vec<f64>,
    /// Terminal penalty carried along the arg-min successor.
    pub violation: Vec<f64>,
    pub policy: Vec<u16>,
}

/// One Bellman backup: `J_k` and the arg-min policy from `J_{k+1}`.
///
/// Evaluates exactly the arithmetic of [`super::stage_transition`] followed
/// by [`StateGrid::interpolate`], with control-only and SOC-only
/// sub-expressions hoisted out of the node loop.
#[allow(clippy::too_many_arguments)]
pub fn backward_step(
    next_values: &[f64],
    next_violation: &[f64],
    demand: &StageDemand,
    dt: f64,
    grid: &StateGrid,
    controls: &ControlGrid,
    powertrain: &Powertrain,
    config: &ProblemConfig,
) -> Backup {
    let mut out = Backup {
        values: vec![0.0; grid.len()],
        violation: vec![0.0; grid.len()],
        policy: vec![DEAD; grid.len()],
    };
    let next = (next_values, next_violation);
    let rows = (&mut out.values[..], &mut out.violation[..], &mut out.policy[..]);
    backward_step_into(next, demand, dt, grid, controls, powertrain, config, rows);
    out
}

#[allow(clippy::too_many_arguments)]
fn backward_step_into(
    (next_values, next_violation): (&[f64], &[f64]),
    demand: &StageDemand,
    dt: f64,
    grid: &StateGrid,
    controls: &ControlGrid,
    powertrain: &Powertrain,
    config: &ProblemConfig,
    (values, violation, policy): (&mut [f64], &mut [f64], &mut [u16]),
) {
    let big = config.big_value;
    let bounds = &config.bounds;
    let battery = &powertrain.battery;
    let snap = config.snap_transitions;
    let n_soc = grid.n_soc();
    let cands = candidates(demand, dt, controls, powertrain);
    let nc = cands.len();

    let mut moves = vec![BLOCKED; n_soc * nc];
    for (i, &soc) in grid.soc.points().iter().enumerate() {
        let ocv = battery.ocv(soc);
        let resistance = battery.resistance(soc);
        let joule = battery.joule_resistance(soc);
        for (c, cand) in cands.iter().enumerate() {
            let Ok(current) = battery_current(ocv, resistance, cand.power) else {
                continue;
            };
            let next_soc = battery.next_soc(soc, current, dt);
            if !(next_soc >= bounds.soc_low && next_soc <= bounds.soc_high) {
                continue;
            }
            let (cell, weight) = if snap {
                match grid.soc.nearest(next_soc) {
                    Some(idx) => (idx, 0.0),
                    None => continue,
                }
            } else {
                match grid.soc.locate(next_soc) {
                    Some(loc) => upper_if_unit(loc),
                    None => continue,
                }
            };
            moves[i * nc + c] =
                SocMove { feasible: true, cell, weight, heat: heat_generation(joule, current) };
        }
    }

    let fill_row = |t: usize, row_values: &mut [f64], row_violation: &mut [f64], row_policy: &mut [u16]| {
        let theta = grid.theta.points()[t];
        for i in 0..n_soc {
            let mut best = big;
            let mut best_j = DEAD;
            let mut best_at = (0, 0.0, 0, 0.0);
            for (c, cand) in cands.iter().enumerate() {
                let m = moves[i * nc + c];
                if !m.feasible {
                    continue;
                }
                let (tj, wt) = match grid.mode {
                    Mode::SocOnly => (0, 0.0),
                    Mode::TwoState => {
                        let next_theta = battery.next_theta_from_heat(theta, m.heat, dt);
                        if !(next_theta >= bounds.theta_low && next_theta <= bounds.theta_high) {
                            continue;
                        }
                        let loc = if snap {
                            grid.theta.nearest(next_theta).map(|idx| (idx, 0.0))
                        } else {
                            grid.theta.locate(next_theta).map(upper_if_unit)
                        };
                        match loc {
                            Some(loc) => loc,
                            None => continue,
                        }
                    }
                };
                let v = interpolate_cell(next_values, n_soc, m.cell, m.weight, tj, wt, big);
                let cost = cand.fuel + v;
                if cost < best {
                    best = cost;
                    best_j = cand.index;
                    best_at = (m.cell, m.weight, tj, wt);
                }
            }
            row_values[i] = best;
            row_policy[i] = best_j;
            row_violation[i] = if best_j == DEAD {
                big
            } else {
                let (ci, ws, tj, wt) = best_at;
                interpolate_cell(next_violation, n_soc, ci, ws, tj, wt, big)
            };
        }
    };

    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        values
            .par_chunks_mut(n_soc)
            .zip(violation.par_chunks_mut(n_soc))
            .zip(policy.par_chunks_mut(n_soc))
            .enumerate()
            .for_each(|(t, ((v, e), p))| fill_row(t, v, e, p));
    }
    #[cfg(not(feature = "parallel"))]
    {
        values
            .chunks_mut(n_soc)
            .zip(violation.chunks_mut(n_soc))
            .zip(policy.chunks_mut(n_soc))
            .enumerate()
            .for_each(|(t, ((v, e), p))| fill_row(t, v, e, p));
    }
}

/// Two-state (SOC, θ) solve.
pub fn solve(cycle: &DriveCycle, powertrain: &Powertrain, config: &ProblemConfig) -> Result<Solution, DpError> {
    solve_mode(cycle, powertrain, config, Mode::TwoState)
}

/// Baseline solve with the thermal state ignored.
pub fn solve_soc_only(
    cycle: &DriveCycle,
    powertrain: &Powertrain,
    config: &ProblemConfig,
) -> Result<Solution, DpError> {
    solve_mode(cycle, powertrain, config, Mode::SocOnly)
}

pub fn solve_mode(
    cycle: &DriveCycle,
    powertrain: &Powertrain,
    config: &ProblemConfig,
    mode: Mode,
) -> Result<Solution, DpError> {
    powertrain.validate()?;
    let (grid, controls) = build_grids(config, mode)?;
    let stages = cycle.steps();
    let dt = cycle.dt();
    let big = config.big_value;

    let mut next = terminal_cost(&grid, config);
    let mut next_violation = next.clone();
    let mut current = vec![0.0; grid.len()];
    let mut current_violation = vec![0.0; grid.len()];
    let mut policy = Policy::new(stages, grid.len());
    let mut kept = config.keep_values.then(|| {
        let mut v = Vec::with_capacity(stages + 1);
        v.push(next.clone());
        v
    });

    for k in (0..stages).rev() {
        let demand = powertrain.demand(cycle, k)?;
        backward_step_into(
            (&next, &next_violation),
            &demand,
            dt,
            &grid,
            &controls,
            powertrain,
            config,
            (&mut current, &mut current_violation, policy.stage_mut(k)),
        );
        core::mem::swap(&mut next, &mut current);
        core::mem::swap(&mut next_violation, &mut current_violation);
        if let Some(kept) = kept.as_mut() {
            kept.push(next.clone());
        }
    }
    if let Some(kept) = kept.as_mut() {
        kept.reverse();
    }

    let initial_cost = grid.interpolate(&next, config.initial, big);
    let initial_violation = grid.interpolate(&next_violation, config.initial, big);
    if initial_cost >= big || initial_violation > config.violation_tolerance {
        return Err(DpError::NoFeasibleTrajectory);
    }
    Ok(Solution {
        grid,
        controls,
        policy,
        initial_cost,
        initial_violation,
        initial_values: next,
        values: kept,
        big_value: big,
    })
}

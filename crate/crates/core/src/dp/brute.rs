//! Exhaustive search over control sequences. Only usable on toy instances;
//! it exists to check the backward sweep.

use alloc::vec;
use alloc::vec::Vec;

use super::{build_grids, stage_transition, terminal_cost, DpError, Mode, ProblemConfig};
use crate::cycle::DriveCycle;
use crate::vehicle::Powertrain;

/// Largest number of sequences `brute_force_solve` will enumerate.
pub const MAX_SEQUENCES: u128 = 10_000_000;

#[derive(Clone, Debug, PartialEq)]
pub struct BruteForceSolution {
    pub cost: f64,
    /// Terminal penalty part of `cost`.
    pub violation: f64,
    /// Optimal control index per stage.
    pub control_indices: Vec<usize>,
    pub controls: Vec<f64>,
}

/// Minimum-fuel feasible control sequence by enumeration.
///
/// Uses the same transitions, snapping and terminal cost as the DP, and
/// accumulates stage costs from the last stage backwards so sums associate
/// exactly like the Bellman recursion.
pub fn brute_force_solve(
    cycle: &DriveCycle,
    powertrain: &Powertrain,
    config: &ProblemConfig,
    mode: Mode,
) -> Result<BruteForceSolution, DpError> {
    powertrain.validate()?;
    let (grid, controls) = build_grids(config, mode)?;
    let stages = cycle.steps();
    let n_u = controls.len();
    let sequences = (n_u as u128).checked_pow(stages as u32).unwrap_or(u128::MAX);
    if sequences > MAX_SEQUENCES {
        return Err(DpError::TooLarge { sequences, limit: MAX_SEQUENCES });
    }
    let big = config.big_value;
    let terminal = terminal_cost(&grid, config);
    let demands = (0..stages).map(|k| powertrain.demand(cycle, k)).collect::<Result<Vec<_>, _>>()?;
    let dt = cycle.dt();

    let mut digits = vec![0usize; stages];
    let mut fuels = vec![0.0; stages];
    let mut best: Option<(f64, f64, Vec<usize>)> = None;
    'sequences: loop {
        let mut state = config.initial;
        let mut feasible = true;
        for k in 0..stages {
            let u = controls.values()[digits[k]];
            let t = stage_transition(powertrain, state, u, &demands[k], dt, &config.bounds, mode);
            if !t.feasible {
                feasible = false;
                break;
            }
            fuels[k] = t.fuel;
            state = if config.snap_transitions {
                match grid.snap(t.next) {
                    Some(s) => s,
                    None => {
                        feasible = false;
                        break;
                    }
                }
            } else {
                t.next
            };
        }
        if feasible {
            let penalty = grid.interpolate(&terminal, state, big);
            if penalty < big {
                let mut cost = penalty;
                for k in (0..stages).rev() {
                    cost = fuels[k] + cost;
                }
                let better = match &best {
                    None => true,
                    Some((c, _, _)) => cost < *c,
                };
                if better {
                    best = Some((cost, penalty, digits.clone()));
                }
            }
        }
        // Next sequence in mixed-radix order.
        for d in digits.iter_mut() {
            *d += 1;
            if *d < n_u {
                continue 'sequences;
            }
            *d = 0;
        }
        break;
    }

    match best {
        Some((cost, violation, control_indices))
            if cost < big && violation <= config.violation_tolerance =>
        {
            Ok(BruteForceSolution {
                cost,
                violation,
            controls: control_indices.iter().map(|&j| controls.values()[j]).collect(),
                control_indices,
            })
        }
        _ => Err(DpError::NoFeasibleTrajectory),
    }
}

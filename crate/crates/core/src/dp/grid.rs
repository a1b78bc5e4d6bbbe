use alloc::vec::Vec;

use super::{DpError, Mode, ProblemConfig};
use crate::battery::BatteryState;
use crate::interp::{lerp, Axis};

/// Discrete state space. In SOC-only mode the temperature axis is the single
/// point `θ₀`.
#[derive(Clone, Debug, PartialEq)]
pub struct StateGrid {
    pub mode: Mode,
    pub soc: Axis,
    pub theta: Axis,
}

impl StateGrid {
    pub fn n_soc(&self) -> usize {
        self.soc.len()
    }

    pub fn n_theta(&self) -> usize {
        self.theta.len()
    }

    pub fn len(&self) -> usize {
        self.soc.len() * self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Flat node index; SOC varies fastest.
    #[inline]
    pub fn index(&self, soc_idx: usize, theta_idx: usize) -> usize {
        theta_idx * self.soc.len() + soc_idx
    }

    pub fn node(&self, index: usize) -> BatteryState {
        let n = self.soc.len();
        BatteryState::new(self.soc.points()[index % n], self.theta.points()[index / n])
    }

    /// Whether `state` lies in the state box. SOC-only grids ignore θ.
    pub fn contains(&self, state: BatteryState) -> bool {
        self.soc.contains(state.soc)
            && match self.mode {
                Mode::SocOnly => true,
                Mode::TwoState => self.theta.contains(state.theta),
            }
    }

    /// Nearest grid node (flat index) to an in-box state.
    pub fn nearest(&self, state: BatteryState) -> Option<usize> {
        let i = self.soc.nearest(state.soc)?;
        let j = match self.mode {
            Mode::SocOnly => 0,
            Mode::TwoState => self.theta.nearest(state.theta)?,
        };
        Some(self.index(i, j))
    }

    pub fn snap(&self, state: BatteryState) -> Option<BatteryState> {
        self.nearest(state).map(|idx| self.node(idx))
    }

    /// Surrounding cell as `(soc index, soc weight, theta index, theta weight)`.
    /// A unit weight is moved onto the upper node so that only corners with
    /// positive weight are ever read.
    pub(crate) fn cell(&self, state: BatteryState) -> Option<(usize, f64, usize, f64)> {
        let (i, ws) = upper_if_unit(self.soc.locate(state.soc)?);
        let (j, wt) = match self.mode {
            Mode::SocOnly => (0, 0.0),
            Mode::TwoState => upper_if_unit(self.theta.locate(state.theta)?),
        };
        Some((i, ws, j, wt))
    }

    /// Bilinear cost-to-go at `state`; `big` outside the box or when any
    /// contributing corner is dead.
    pub fn interpolate(&self, values: &[f64], state: BatteryState, big: f64) -> f64 {
        match self.cell(state) {
            Some((i, ws, j, wt)) => interpolate_cell(values, self.soc.len(), i, ws, j, wt, big),
            None => big,
        }
    }
}

#[inline]
pub(crate) fn upper_if_unit((i, w): (usize, f64)) -> (usize, f64) {
    if w >= 1.0 {
        (i + 1, 0.0)
    } else {
        (i, w)
    }
}

/// Bilinear blend over one cell. Corners with zero weight are not read, so a
/// query exactly on a node returns that node's value bit-for-bit.
#[inline]
pub(crate) fn interpolate_cell(
    values: &[f64],
    n_soc: usize,
    i: usize,
    ws: f64,
    j: usize,
    wt: f64,
    big: f64,
) -> f64 {
    let row = j * n_soc;
    let a = values[row + i];
    if a >= big {
        return big;
    }
    let lower = if ws > 0.0 {
        let b = values[row + i + 1];
        if b >= big {
            return big;
        }
        lerp(a, b, ws)
    } else {
        a
    };
    if wt > 0.0 {
        let row = row + n_soc;
        let c = values[row + i];
        if c >= big {
            return big;
        }
        let upper = if ws > 0.0 {
            let d = values[row + i + 1];
            if d >= big {
                return big;
            }
            lerp(c, d, ws)
        } else {
            c
        };
        lerp(lower, upper, wt)
    } else {
        lower
    }
}

/// Ascending split ratios, always containing 0 (pure engine) and 1 (pure
/// electric).
#[derive(Clone, Debug, PartialEq)]
pub struct ControlGrid {
    values: Vec<f64>,
}

impl ControlGrid {
    pub fn new(values: Vec<f64>) -> Result<Self, DpError> {
        let axis = Axis::from_points(values)
            .ok_or(DpError::InvalidConfig("control values must be strictly ascending"))?;
        let values = axis.points().to_vec();
        if !values.contains(&0.0) || !values.contains(&1.0) {
            return Err(DpError::InvalidConfig("control grid must contain u = 0 and u = 1 exactly"));
        }
        if values.len() > usize::from(super::DEAD) {
            return Err(DpError::InvalidConfig("too many control values"));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Uniform state and control grids for `mode`.
pub fn build_grids(config: &ProblemConfig, mode: Mode) -> Result<(StateGrid, ControlGrid), DpError> {
    config.validate()?;
    let b = &config.bounds;
    let soc = Axis::uniform(b.soc_low, b.soc_high, config.n_soc);
    let theta = match mode {
        Mode::SocOnly => Axis::uniform(config.initial.theta, config.initial.theta, 1),
        Mode::TwoState => Axis::uniform(b.theta_low, b.theta_high, config.n_theta),
    };
    let controls = ControlGrid::new(Axis::uniform(config.u_min, config.u_max, config.n_u).points().to_vec())?;
    Ok((StateGrid { mode, soc, theta }, controls))
}

/// Stage-N cost: zero inside the terminal window, otherwise the weighted
/// distance to it, capped at `config.big_value`.
pub fn terminal_cost(grid: &StateGrid, config: &ProblemConfig) -> Vec<f64> {
    (0..grid.len()).map(|idx| terminal_penalty(config, grid.mode, grid.node(idx))).collect()
}

/// Terminal cost of an arbitrary final state.
pub fn terminal_penalty(config: &ProblemConfig, mode: Mode, state: BatteryState) -> f64 {
    let (ds, dt) = config.window.distance(state);
    let mut p = if ds > 0.0 { config.terminal_penalty_soc * ds } else { 0.0 };
    if mode == Mode::TwoState && dt > 0.0 {
        p += config.terminal_penalty_theta * dt;
    }
    p.min(config.big_value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dp::TerminalWindow;
    use alloc::vec;

    fn two_state() -> (StateGrid, ControlGrid) {
        build_grids(&ProblemConfig::default(), Mode::TwoState).unwrap()
    }

    #[test]
    fn default_grid_sizes() {
        let (g, u) = two_state();
        assert_eq!((g.n_soc(), g.n_theta(), u.len()), (201, 101, 51));
        assert_eq!(g.soc.first(), 0.4);
        assert_eq!(g.soc.last(), 0.7);
        assert_eq!(g.theta.first(), 10.0);
        assert_eq!(g.theta.last(), 30.0);
        assert!(u.values().contains(&0.0) && u.values().contains(&1.0));
    }

    #[test]
    fn small_grids() {
        let cfg = ProblemConfig { n_soc: 4, n_theta: 3, n_u: 3, ..ProblemConfig::default() };
        let (g, u) = build_grids(&cfg, Mode::TwoState).unwrap();
        assert_eq!(g.theta.points(), &[10.0, 20.0, 30.0]);
        assert_eq!(u.values(), &[-1.0, 0.0, 1.0]);
        let (g, _) = build_grids(&cfg, Mode::SocOnly).unwrap();
        assert_eq!(g.theta.points(), &[20.0]);
    }

    #[test]
    fn grid_errors() {
        let cfg = ProblemConfig { n_soc: 1, ..ProblemConfig::default() };
        assert!(build_grids(&cfg, Mode::TwoState).is_err());
        let mut cfg = ProblemConfig::default();
        cfg.bounds.soc_low = 0.8;
        assert!(build_grids(&cfg, Mode::TwoState).is_err());
        // 4 points on [-1, 1] miss u = 0.
        let cfg = ProblemConfig { n_u: 4, ..ProblemConfig::default() };
        assert!(build_grids(&cfg, Mode::TwoState).is_err());
    }

    #[test]
    fn terminal_cost_examples() {
        let mut cfg = ProblemConfig { n_soc: 61, n_theta: 5, ..ProblemConfig::default() };
        let (g, _) = build_grids(&cfg, Mode::TwoState).unwrap();
        let at = |tc: &[f64], soc: f64, theta: f64| tc[g.nearest(BatteryState::new(soc, theta)).unwrap()];

        let tc = terminal_cost(&g, &cfg);
        assert_eq!(at(&tc, 0.545, 20.0), 0.0);
        assert!((at(&tc, 0.5, 20.0) - 100.0 * 0.04).abs() < 1e-12);
        assert!((at(&tc, 0.545, 10.0) - 10.0 * 5.0).abs() < 1e-12);

        cfg.terminal_penalty_soc = f64::INFINITY;
        cfg.terminal_penalty_theta = f64::INFINITY;
        let hard = terminal_cost(&g, &cfg);
        assert_eq!(at(&hard, 0.545, 20.0), 0.0);
        assert_eq!(at(&hard, 0.5, 20.0), cfg.big_value);
        assert_eq!(at(&hard, 0.545, 10.0), cfg.big_value);

        cfg.window = TerminalWindow { soc_min: 0.4, soc_max: 0.7, theta_min: 10.0, theta_max: 30.0 };
        assert!(terminal_cost(&g, &cfg).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn interpolation_identity_and_dead_corners() {
        let cfg = ProblemConfig { n_soc: 3, n_theta: 2, ..ProblemConfig::default() };
        let (g, _) = build_grids(&cfg, Mode::TwoState).unwrap();
        let big = 1e9;
        let values = vec![1.0, 2.0, big, 3.0, 4.0, 5.0];
        for idx in 0..g.len() {
            assert_eq!(g.interpolate(&values, g.node(idx), big), values[idx]);
        }
        let mid = BatteryState::new(0.475, 20.0);
        assert_eq!(g.interpolate(&values, mid, big), 2.5);
        // The cell touching the dead node is dead.
        assert_eq!(g.interpolate(&values, BatteryState::new(0.6, 20.0), big), big);
        assert_eq!(g.interpolate(&values, BatteryState::new(0.3, 20.0), big), big);
    }
}

//! Breakpoint axes and piecewise-linear tables.
//!
//! All lookups are exact at breakpoints: a query that lands on a node returns
//! the stored value bit-for-bit. The DP relies on this for grid-snapped
//! transitions.

use alloc::vec::Vec;

/// Ascending breakpoints.
#[derive(Clone, Debug, PartialEq)]
pub struct Axis {
    points: Vec<f64>,
    /// `(first, 1/step)` when built uniform; speeds up `locate`.
    uniform: Option<(f64, f64)>,
}

impl Axis {
    /// Uniformly spaced axis with exact endpoints. A single-point axis is
    /// allowed and pins every query to that point.
    pub fn uniform(lo: f64, hi: f64, n: usize) -> Self {
        let points = match n {
            0 => Vec::new(),
            1 => alloc::vec![lo],
            _ => {
                let last = (n - 1) as f64;
                (0..n)
                    .map(|i| {
                        if i == n - 1 {
                            hi
                        } else {
                            lo + (hi - lo) * (i as f64) / last
                        }
                    })
                    .collect()
            }
        };
        let uniform = (n >= 2).then(|| (lo, (n - 1) as f64 / (hi - lo)));
        Self { points, uniform }
    }

    /// Axis from explicit breakpoints; `None` unless strictly ascending,
    /// finite and non-empty.
    pub fn from_points(points: Vec<f64>) -> Option<Self> {
        if points.is_empty() || points.iter().any(|p| !p.is_finite()) {
            return None;
        }
        if points.windows(2).any(|w| w[1] <= w[0]) {
            return None;
        }
        Some(Self { points, uniform: None })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn first(&self) -> f64 {
        self.points[0]
    }

    pub fn last(&self) -> f64 {
        self.points[self.points.len() - 1]
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.first() && x <= self.last()
    }

    /// Cell containing `x` as `(lower index, weight of upper node)`.
    ///
    /// Returns `None` outside `[first, last]`. On a node the weight is exactly
    /// 0 (or exactly 1 at the last node).
    pub fn locate(&self, x: f64) -> Option<(usize, f64)> {
        let n = self.points.len();
        if !(x >= self.first() && x <= self.last()) {
            return None;
        }
        if n == 1 {
            return Some((0, 0.0));
        }
        let p = &self.points;
        let i = match self.uniform {
            Some((lo, inv_step)) => {
                // Guess from the spacing, then settle on the last node <= x.
                let mut i = (((x - lo) * inv_step) as usize).min(n - 2);
                while i > 0 && p[i] > x {
                    i -= 1;
                }
                while i < n - 2 && p[i + 1] <= x {
                    i += 1;
                }
                i
            }
            None => (p.partition_point(|&q| q <= x) - 1).min(n - 2),
        };
        let (a, b) = (p[i], p[i + 1]);
        let w = if x == a { 0.0 } else { (x - a) / (b - a) };
        Some((i, w))
    }

    /// Like [`Axis::locate`] but clamps queries to the axis range.
    pub fn locate_clamped(&self, x: f64) -> (usize, f64) {
        let x = if x.is_nan() { self.first() } else { x.clamp(self.first(), self.last()) };
        self.locate(x).unwrap_or((0, 0.0))
    }

    /// Index of the breakpoint nearest to `x`; ties resolve to the lower node.
    pub fn nearest(&self, x: f64) -> Option<usize> {
        let (i, w) = self.locate(x)?;
        Some(if w > 0.5 { i + 1 } else { i })
    }
}

/// Piecewise-linear curve `y(x)`, constant beyond its end points.
#[derive(Clone, Debug, PartialEq)]
pub struct Curve {
    xs: Axis,
    ys: Vec<f64>,
}

impl Curve {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Option<Self> {
        if xs.len() != ys.len() || ys.iter().any(|y| !y.is_finite()) {
            return None;
        }
        Some(Self { xs: Axis::from_points(xs)?, ys })
    }

    pub fn xs(&self) -> &[f64] {
        self.xs.points()
    }

    pub fn ys(&self) -> &[f64] {
        &self.ys
    }

    pub fn eval(&self, x: f64) -> f64 {
        if self.ys.len() == 1 {
            return self.ys[0];
        }
        let (i, w) = self.xs.locate_clamped(x);
        lerp(self.ys[i], self.ys[i + 1], w)
    }

    pub fn min_value(&self) -> f64 {
        self.ys.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.ys.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Gridded table over (speed, torque), bilinear between nodes.
///
/// Values are stored row-major: one row per torque breakpoint.
#[derive(Clone, Debug, PartialEq)]
pub struct Table2d {
    speeds: Axis,
    torques: Axis,
    values: Vec<f64>,
}

impl Table2d {
    pub fn new(speeds: Vec<f64>, torques: Vec<f64>, values: Vec<f64>) -> Option<Self> {
        let speeds = Axis::from_points(speeds)?;
        let torques = Axis::from_points(torques)?;
        if speeds.len() < 2 || torques.len() < 2 || values.len() != speeds.len() * torques.len() {
            return None;
        }
        if values.iter().any(|v| !v.is_finite()) {
            return None;
        }
        Some(Self { speeds, torques, values })
    }

    pub fn speeds(&self) -> &Axis {
        &self.speeds
    }

    pub fn torques(&self) -> &Axis {
        &self.torques
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn at(&self, speed_idx: usize, torque_idx: usize) -> f64 {
        self.values[torque_idx * self.speeds.len() + speed_idx]
    }

    /// Bilinear lookup; `None` outside the gridded domain.
    pub fn eval(&self, speed: f64, torque: f64) -> Option<f64> {
        let (i, wx) = self.speeds.locate(speed)?;
        let (j, wy) = self.torques.locate(torque)?;
        Some(self.blend(i, wx, j, wy))
    }

    /// Bilinear lookup with the query clamped onto the domain.
    pub fn eval_clamped(&self, speed: f64, torque: f64) -> f64 {
        let (i, wx) = self.speeds.locate_clamped(speed);
        let (j, wy) = self.torques.locate_clamped(torque);
        self.blend(i, wx, j, wy)
    }

    fn blend(&self, i: usize, wx: f64, j: usize, wy: f64) -> f64 {
        let lo = lerp(self.at(i, j), self.at(i + 1, j), wx);
        let hi = lerp(self.at(i, j + 1), self.at(i + 1, j + 1), wx);
        lerp(lo, hi, wy)
    }
}

/// `(1 - w)·a + w·b`, exact at `w = 0` and `w = 1`.
#[inline]
pub fn lerp(a: f64, b: f64, w: f64) -> f64 {
    (1.0 - w) * a + w * b
}

//! Drive cycles: validated, uniformly sampled speed traces.

use alloc::string::String;
use alloc::vec::Vec;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CycleError {
    #[error("a drive cycle needs at least 2 samples, got {0}")]
    TooShort(usize),
    #[error("sample period must be positive and finite, got {0}")]
    InvalidPeriod(f64),
    #[error("sample {index}: speed {value} is negative or not finite")]
    InvalidSpeed { index: usize, value: f64 },
    #[error("step {k} out of range: cycle has {steps} steps")]
    StepOutOfRange { k: usize, steps: usize },
}

/// Uniformly sampled vehicle speed trace (m/s at a fixed period in s).
#[derive(Clone, Debug, PartialEq)]
pub struct DriveCycle {
    name: String,
    dt: f64,
    speeds: Vec<f64>,
}

impl DriveCycle {
    pub fn new(name: impl Into<String>, dt: f64, speeds: Vec<f64>) -> Result<Self, CycleError> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(CycleError::InvalidPeriod(dt));
        }
        if speeds.len() < 2 {
            return Err(CycleError::TooShort(speeds.len()));
        }
        if let Some((index, &value)) =
            speeds.iter().enumerate().find(|(_, v)| !(**v >= 0.0 && v.is_finite()))
        {
            return Err(CycleError::InvalidSpeed { index, value });
        }
        Ok(Self { name: name.into(), dt, speeds })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn speeds(&self) -> &[f64] {
        &self.speeds
    }

    /// Number of stages `N` (one fewer than samples).
    pub fn steps(&self) -> usize {
        self.speeds.len() - 1
    }

    pub fn time_at(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }

    /// Forward-difference acceleration over `[k, k+1]`, attributed to stage `k`.
    pub fn accel_at(&self, k: usize) -> Result<f64, CycleError> {
        if k >= self.steps() {
            return Err(CycleError::StepOutOfRange { k, steps: self.steps() });
        }
        Ok((self.speeds[k + 1] - self.speeds[k]) / self.dt)
    }

    pub fn stats(&self) -> CycleStats {
        compute_stats(self)
    }
}

/// Summary figures of a drive cycle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CycleStats {
    /// Left-endpoint rectangular integral of speed, m.
    pub distance: f64,
    pub duration: f64,
    pub max_speed: f64,
    /// distance / duration.
    pub mean_speed_overall: f64,
    /// Mean over samples with non-zero speed (0 for an all-zero cycle).
    pub mean_speed_moving: f64,
    /// Mean of the per-stage forward differences.
    pub mean_accel: f64,
}

pub fn compute_stats(cycle: &DriveCycle) -> CycleStats {
    let steps = cycle.steps();
    let v = cycle.speeds();
    let distance: f64 = v[..steps].iter().map(|s| s * cycle.dt).sum();
    let duration = steps as f64 * cycle.dt;
    let max_speed = v.iter().copied().fold(0.0, f64::max);
    let moving: Vec<f64> = v.iter().copied().filter(|&s| s > 0.0).collect();
    let mean_speed_moving =
        if moving.is_empty() { 0.0 } else { moving.iter().sum::<f64>() / moving.len() as f64 };
    let mean_accel = (v[steps] - v[0]) / duration;
    CycleStats {
        distance,
        duration,
        max_speed,
        mean_speed_overall: distance / duration,
        mean_speed_moving,
        mean_accel,
    }
}

//! Fixation-target trajectories and simulated yaw head traces.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const FAST_PEAK_SPEED: f64 = 157.0;
/// The slow peak is also quoted as 57 deg/s elsewhere; 52 is used unless configured.
pub const SLOW_PEAK_SPEED: f64 = 52.0;
pub const SWEEP_HALF_RANGE: f64 = 50.0;
pub const INTERVAL_DURATION: f64 = 2.5;
pub const SAMPLE_RATE: f64 = 90.0;

pub const DEFAULT_LAG_TAU: f64 = 0.1;
pub const DEFAULT_JITTER_SD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Condition {
    Slow,
    Fast,
}

impl Condition {
    pub const ALL: [Condition; 2] = [Condition::Slow, Condition::Fast];

    pub fn as_str(self) -> &'static str {
        match self {
            Condition::Slow => "slow",
            Condition::Fast => "fast",
        }
    }

    pub fn default_peak_speed(self) -> f64 {
        match self {
            Condition::Slow => SLOW_PEAK_SPEED,
            Condition::Fast => FAST_PEAK_SPEED,
        }
    }
}

impl std::fmt::Display for Condition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Condition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "slow" => Ok(Condition::Slow),
            "fast" => Ok(Condition::Fast),
            other => Err(Error::invalid(format!("unknown condition `{other}` (expected slow or fast)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Right,
    Left,
}

impl Direction {
    pub fn sign(self) -> f64 {
        match self {
            Direction::Right => 1.0,
            Direction::Left => -1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotionProfile {
    pub condition: Condition,
    /// deg/s
    pub peak_speed: f64,
    /// deg
    pub sweep_half_range: f64,
    /// s
    pub interval_duration: f64,
    /// Hz
    pub sample_rate: f64,
    /// deg
    pub start_azimuth: f64,
    pub direction: Direction,
}

impl MotionProfile {
    /// Default profile: starts at the edge of the sweep opposite its direction of travel.
    pub fn for_condition(condition: Condition) -> Self {
        Self {
            condition,
            peak_speed: condition.default_peak_speed(),
            sweep_half_range: SWEEP_HALF_RANGE,
            interval_duration: INTERVAL_DURATION,
            sample_rate: SAMPLE_RATE,
            start_azimuth: -SWEEP_HALF_RANGE,
            direction: Direction::Right,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("peak_speed", self.peak_speed),
            ("sample_rate", self.sample_rate),
            ("interval_duration", self.interval_duration),
            ("sweep_half_range", self.sweep_half_range),
        ];
        for (name, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::invalid(format!("{name} must be positive, got {value}")));
            }
        }
        if !(self.start_azimuth.abs() <= self.sweep_half_range) {
            return Err(Error::invalid(format!(
                "start azimuth {} lies outside ±{}",
                self.start_azimuth, self.sweep_half_range
            )));
        }
        Ok(())
    }

    /// Velocity cycle length chosen so that half a cycle sweeps the full range.
    pub fn cycle_period(&self) -> f64 {
        2.0 * PI * self.sweep_half_range / self.peak_speed
    }

    pub fn sample_count(&self) -> usize {
        (self.interval_duration * self.sample_rate + 1e-9).floor() as usize + 1
    }
}

/// Uniformly sampled azimuth track with its causal (backward-difference) speed.
#[derive(Debug, Clone, PartialEq)]
pub struct KinematicTrace {
    pub timestamps: Vec<f64>,
    pub azimuth: Vec<f64>,
    /// `|Δazimuth| / Δt` against the previous sample; 0 at the first sample.
    pub derived_speed: Vec<f64>,
    pub sweep_half_range: f64,
}

impl KinematicTrace {
    pub fn new(timestamps: Vec<f64>, azimuth: Vec<f64>, sweep_half_range: f64) -> Result<Self> {
        if timestamps.len() != azimuth.len() {
            return Err(Error::invalid("timestamps and azimuth differ in length"));
        }
        if timestamps.is_empty() {
            return Err(Error::invalid("trace has no samples"));
        }
        if timestamps.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("timestamps must be strictly increasing"));
        }
        let mut derived_speed = vec![0.0; azimuth.len()];
        for i in 1..azimuth.len() {
            derived_speed[i] = (azimuth[i] - azimuth[i - 1]).abs() / (timestamps[i] - timestamps[i - 1]);
        }
        Ok(Self { timestamps, azimuth, derived_speed, sweep_half_range })
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn peak_speed(&self) -> f64 {
        self.derived_speed.iter().copied().fold(0.0, f64::max)
    }

    pub fn path_length(&self) -> f64 {
        self.azimuth.windows(2).map(|w| (w[1] - w[0]).abs()).sum()
    }
}

/// Folds an unbounded azimuth back into `[-half, half]` by mirror reflection.
pub fn reflect_into_range(x: f64, half: f64) -> f64 {
    let period = 4.0 * half;
    let m = (x + half).rem_euclid(period);
    let m = if m > 2.0 * half { period - m } else { m };
    m - half
}

/// Raised-cosine fixation motion: speed follows `peak · |sin(2πt/T)|`, starting at rest.
pub fn fixation_trajectory(profile: &MotionProfile) -> Result<KinematicTrace> {
    profile.validate()?;
    let period = profile.cycle_period();
    let amplitude = profile.peak_speed * period / (2.0 * PI);
    let sign = profile.direction.sign();
    let n = profile.sample_count();
    let timestamps: Vec<f64> = (0..n).map(|i| i as f64 / profile.sample_rate).collect();
    let azimuth = timestamps
        .iter()
        .map(|&t| {
            let raw = profile.start_azimuth + sign * amplitude * (1.0 - (2.0 * PI * t / period).cos());
            reflect_into_range(raw, profile.sweep_half_range)
        })
        .collect();
    KinematicTrace::new(timestamps, azimuth, profile.sweep_half_range)
}

/// Head that follows `target` through a first-order lag with time constant `lag_tau`.
/// Gaussian motor jitter (sd `jitter_sd`, deg) perturbs the commanded azimuth before
/// the lag, so the head smooths it. Output is clipped to the sweep range.
pub fn simulate_head_trace(target: &KinematicTrace, lag_tau: f64, jitter_sd: f64, seed: u64) -> Result<KinematicTrace> {
    if !(lag_tau >= 0.0) || !(jitter_sd >= 0.0) {
        return Err(Error::invalid("lag_tau and jitter_sd must be non-negative"));
    }
    let noise = Normal::new(0.0, jitter_sd).map_err(|e| Error::invalid(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let half = target.sweep_half_range;
    let mut azimuth = Vec::with_capacity(target.len());
    let mut y = target.azimuth[0];
    azimuth.push(y);
    for i in 1..target.len() {
        let dt = target.timestamps[i] - target.timestamps[i - 1];
        let alpha = if lag_tau == 0.0 { 1.0 } else { 1.0 - (-dt / lag_tau).exp() };
        let commanded = if jitter_sd > 0.0 { target.azimuth[i] + noise.sample(&mut rng) } else { target.azimuth[i] };
        y += alpha * (commanded - y);
        y = y.clamp(-half, half);
        azimuth.push(y);
    }
    KinematicTrace::new(target.timestamps.clone(), azimuth, half)
}

/// Per-sample absolute speed by central differences (one-sided at the ends).
pub fn angular_speed(trace: &KinematicTrace) -> Result<Vec<f64>> {
    let n = trace.len();
    if n < 2 {
        return Err(Error::invalid("angular speed needs at least two samples"));
    }
    let (t, a) = (&trace.timestamps, &trace.azimuth);
    Ok((0..n)
        .map(|i| {
            let (lo, hi) = match i {
                0 => (0, 1),
                i if i == n - 1 => (n - 2, n - 1),
                i => (i - 1, i + 1),
            };
            ((a[hi] - a[lo]) / (t[hi] - t[lo])).abs()
        })
        .collect())
}

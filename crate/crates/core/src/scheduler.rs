//! Per-frame LOD selection from rotational speed.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::KinematicTrace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleMode {
    /// Reference below the threshold speed, one degraded level at or above it.
    Binary,
    /// Speed normalized by the reference peak and floor-quantized over the chain.
    Graded,
}

impl std::str::FromStr for ScheduleMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "binary" => Ok(ScheduleMode::Binary),
            "graded" => Ok(ScheduleMode::Graded),
            other => Err(Error::invalid(format!("unknown schedule mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchedulerConfig {
    pub mode: ScheduleMode,
    pub threshold_fraction: f64,
    /// deg/s; the expected maximum speed, here the fixation target's peak.
    pub reference_peak_speed: f64,
    pub degraded_level_index: usize,
    pub chain_level_count: usize,
    /// Binary mode only: once degraded, stay degraded until speed falls below
    /// `(threshold_fraction − hysteresis) × peak`. Zero disables it.
    #[serde(default)]
    pub hysteresis: f64,
}

impl SchedulerConfig {
    pub fn binary(reference_peak_speed: f64, threshold_fraction: f64, degraded_level_index: usize) -> Self {
        Self {
            mode: ScheduleMode::Binary,
            threshold_fraction,
            reference_peak_speed,
            degraded_level_index,
            chain_level_count: degraded_level_index + 1,
            hysteresis: 0.0,
        }
    }

    pub fn graded(reference_peak_speed: f64, chain_level_count: usize) -> Self {
        Self {
            mode: ScheduleMode::Graded,
            threshold_fraction: 0.5,
            reference_peak_speed,
            degraded_level_index: 1,
            chain_level_count,
            hysteresis: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.threshold_fraction > 0.0 && self.threshold_fraction < 1.0) {
            return Err(Error::invalid(format!("threshold fraction {} is outside (0, 1)", self.threshold_fraction)));
        }
        if !(self.reference_peak_speed > 0.0 && self.reference_peak_speed.is_finite()) {
            return Err(Error::invalid("reference peak speed must be positive"));
        }
        if !(0.0..self.threshold_fraction).contains(&self.hysteresis) {
            return Err(Error::invalid("hysteresis must lie in [0, threshold_fraction)"));
        }
        match self.mode {
            ScheduleMode::Binary if self.degraded_level_index < 1 => {
                Err(Error::invalid("binary mode needs a degraded level index of at least 1"))
            }
            ScheduleMode::Graded if self.chain_level_count < 1 => Err(Error::invalid("graded mode needs a non-empty chain")),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LodSchedule {
    pub timestamps: Vec<f64>,
    pub level_index: Vec<usize>,
    pub switch_count: usize,
}

impl LodSchedule {
    pub fn from_levels(timestamps: Vec<f64>, level_index: Vec<usize>) -> Self {
        let switch_count = level_index.windows(2).filter(|w| w[0] != w[1]).count();
        Self { timestamps, level_index, switch_count }
    }

    pub fn len(&self) -> usize {
        self.level_index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.level_index.is_empty()
    }
}

/// Schedules from the trace's causal per-frame speed, as a renderer would see it.
pub fn schedule(trace: &KinematicTrace, config: &SchedulerConfig) -> Result<LodSchedule> {
    schedule_speeds(&trace.timestamps, &trace.derived_speed, config)
}

pub fn schedule_speeds(timestamps: &[f64], speeds: &[f64], config: &SchedulerConfig) -> Result<LodSchedule> {
    config.validate()?;
    if speeds.is_empty() || timestamps.len() != speeds.len() {
        return Err(Error::invalid("schedule needs matching, non-empty timestamps and speeds"));
    }
    let levels = match config.mode {
        ScheduleMode::Binary => {
            let enter = config.threshold_fraction * config.reference_peak_speed;
            let exit = (config.threshold_fraction - config.hysteresis) * config.reference_peak_speed;
            let mut degraded = false;
            speeds
                .iter()
                .map(|&s| {
                    degraded = if degraded && config.hysteresis > 0.0 { s >= exit } else { s >= enter };
                    if degraded { config.degraded_level_index } else { 0 }
                })
                .collect()
        }
        ScheduleMode::Graded => {
            let top = config.chain_level_count - 1;
            speeds
                .iter()
                .map(|&s| {
                    let normalized = (s / config.reference_peak_speed).clamp(0.0, 1.0);
                    ((normalized * config.chain_level_count as f64).floor() as usize).min(top)
                })
                .collect()
        }
    };
    Ok(LodSchedule::from_levels(timestamps.to_vec(), levels))
}

/// Fraction of frames rendered at anything other than the reference.
pub fn degraded_fraction(schedule: &LodSchedule) -> Result<f64> {
    if schedule.is_empty() {
        return Err(Error::invalid("empty schedule"));
    }
    let degraded = schedule.level_index.iter().filter(|&&l| l > 0).count();
    Ok(degraded as f64 / schedule.len() as f64)
}

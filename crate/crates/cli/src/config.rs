use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use velod_core::experiment::{ExperimentDesign, ObserverPopulation, StimulusConfig};
use velod_core::kinematics::{Condition, MotionProfile, DEFAULT_JITTER_SD, DEFAULT_LAG_TAU};
use velod_core::psychofit::MIN_THRESHOLD_P;
use velod_core::scheduler::ScheduleMode;
use velod_core::simplify::{validate_ladder, DEFAULT_LADDER};

use crate::error::{CliError, CliResult, StageContext};
use crate::formats::{from_json, read_text};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeadModel {
    /// First-order lag time constant (s).
    pub lag_tau: f64,
    /// Per-sample Gaussian jitter on the commanded azimuth (deg).
    pub jitter_sd: f64,
}

impl Default for HeadModel {
    fn default() -> Self {
        Self { lag_tau: DEFAULT_LAG_TAU, jitter_sd: DEFAULT_JITTER_SD }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleSettings {
    pub mode: ScheduleMode,
    pub threshold_fraction: f64,
    pub hysteresis: f64,
}

impl Default for ScheduleSettings {
    fn default() -> Self {
        Self { mode: ScheduleMode::Binary, threshold_fraction: 0.5, hysteresis: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    /// Reference OBJ; the built-in statue stand-in when absent.
    pub mesh: Option<PathBuf>,
    pub ladder: Vec<f64>,
    pub deviation_samples: usize,
    pub slow: MotionProfile,
    pub fast: MotionProfile,
    pub head: HeadModel,
    pub scheduler: ScheduleSettings,
    pub design: ExperimentDesign,
    pub participants: u32,
    pub population: ObserverPopulation,
    /// Proportion correct at which thresholds are taken.
    pub performance: f64,
    pub outdir: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            mesh: None,
            ladder: DEFAULT_LADDER.to_vec(),
            deviation_samples: 20_000,
            slow: MotionProfile::for_condition(Condition::Slow),
            fast: MotionProfile::for_condition(Condition::Fast),
            head: HeadModel::default(),
            scheduler: ScheduleSettings::default(),
            design: ExperimentDesign::default(),
            participants: 15,
            population: ObserverPopulation::default(),
            performance: 0.75,
            outdir: None,
        }
    }
}

impl PipelineConfig {
    /// Reads a JSON config; a relative `mesh` path is taken relative to the file.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = read_text("config", path)?;
        let mut config: Self = from_json("config", path, &text)?;
        if let (Some(mesh), Some(dir)) = (&config.mesh, path.parent()) {
            if mesh.is_relative() {
                config.mesh = Some(dir.join(mesh));
            }
        }
        Ok(config)
    }

    pub fn profile(&self, condition: Condition) -> &MotionProfile {
        match condition {
            Condition::Slow => &self.slow,
            Condition::Fast => &self.fast,
        }
    }

    pub fn stimulus(&self) -> StimulusConfig {
        StimulusConfig {
            slow: self.slow.clone(),
            fast: self.fast.clone(),
            lag_tau: self.head.lag_tau,
            jitter_sd: self.head.jitter_sd,
            threshold_fraction: self.scheduler.threshold_fraction,
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        const STAGE: &str = "config";
        validate_ladder(&self.ladder).stage(STAGE)?;
        if self.deviation_samples == 0 {
            return Err(CliError::validation(STAGE, "deviation_samples must be positive"));
        }
        self.stimulus().validate().stage(STAGE)?;
        if !(0.0..self.scheduler.threshold_fraction).contains(&self.scheduler.hysteresis) {
            return Err(CliError::validation(STAGE, "hysteresis must lie in [0, threshold_fraction)"));
        }
        if !(self.scheduler.threshold_fraction < 1.0) {
            return Err(CliError::validation(STAGE, "threshold fraction must lie in (0, 1)"));
        }
        self.design.validate().stage(STAGE)?;
        self.population.validate().stage(STAGE)?;
        if self.participants < 2 {
            return Err(CliError::validation(STAGE, "a cohort needs at least two participants"));
        }
        if !(MIN_THRESHOLD_P..1.0).contains(&self.performance) {
            return Err(CliError::validation(STAGE, format!("performance must lie in [{MIN_THRESHOLD_P}, 1)")));
        }
        Ok(())
    }
}

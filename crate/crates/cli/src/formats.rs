//! On-disk formats shared by the subcommands and the pipeline. Every file
//! carries the tool version and seed: CSV as a leading `#` line, JSON in a
//! `meta` object, OBJ and SVG as comments.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use velod_core::kinematics::Condition;
use velod_core::psychofit::ResponseRow;

use crate::error::{CliError, CliResult};

pub const TOOL: &str = "velod";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    pub tool: String,
    pub version: String,
    pub seed: u64,
    pub command: String,
}

impl Meta {
    pub fn new(seed: u64, command: &str) -> Self {
        Self { tool: TOOL.into(), version: VERSION.into(), seed, command: command.into() }
    }

    /// Single-line form used in CSV, OBJ and SVG comments.
    pub fn line(&self) -> String {
        format!("{} {} seed={} command={}", self.tool, self.version, self.seed, self.command)
    }
}

/// Seed recorded in the first `#` line of a CSV/OBJ text, if any.
pub fn seed_from_comment(text: &str) -> Option<u64> {
    let line = text.lines().next()?.strip_prefix('#')?;
    line.split_whitespace().find_map(|w| w.strip_prefix("seed=")).and_then(|s| s.parse().ok())
}

pub fn read_text(stage: &str, path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::read(stage, path, e))
}

pub fn write_bytes(stage: &str, path: &Path, bytes: &[u8]) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::write(stage, dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| CliError::write(stage, path, e))
}

pub fn to_csv<T: Serialize>(stage: &str, meta: &Meta, rows: &[T]) -> CliResult<Vec<u8>> {
    let mut out = format!("# {}\n", meta.line()).into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut out);
        for r in rows {
            w.serialize(r).map_err(|e| CliError::runtime(stage, e.to_string()))?;
        }
        w.flush().map_err(|e| CliError::runtime(stage, e.to_string()))?;
    }
    Ok(out)
}

pub fn from_csv<T: DeserializeOwned>(stage: &str, path: &Path, text: &str) -> CliResult<Vec<T>> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(text.as_bytes());
    r.deserialize()
        .map(|row| row.map_err(|e| CliError::validation(stage, format!("{}: {e}", path.display()))))
        .collect()
}

pub fn to_json<T: Serialize>(stage: &str, value: &T) -> CliResult<Vec<u8>> {
    let mut v = serde_json::to_vec_pretty(value).map_err(|e| CliError::runtime(stage, e.to_string()))?;
    v.push(b'\n');
    Ok(v)
}

pub fn from_json<T: DeserializeOwned>(stage: &str, path: &Path, text: &str) -> CliResult<T> {
    serde_json::from_str(text).map_err(|e| CliError::validation(stage, format!("{}: {e}", path.display())))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t_s: f64,
    pub azimuth_deg: f64,
    pub speed_deg_per_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleRow {
    pub t_s: f64,
    pub level_index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub participant: u32,
    pub condition: Condition,
    pub trial: u32,
    pub aggressiveness_pct: f64,
    pub ref_interval: u8,
    pub response: u8,
    pub correct: u8,
}

/// Stimulus-pathway statistics for each trial, kept apart from the response log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StimulusRow {
    pub participant: u32,
    pub condition: Condition,
    pub trial: u32,
    pub degraded_frame_fraction: f64,
    pub lod_switches: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainFileLevel {
    pub index: usize,
    pub file: String,
    pub aggressiveness: f64,
    pub target_triangles: usize,
    pub achieved_triangles: usize,
    pub reached_target: bool,
    pub vertices: usize,
    pub mean_squared_deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainFile {
    pub meta: Meta,
    pub source: String,
    pub deviation_samples: usize,
    /// Level 0 is the reference mesh itself.
    pub levels: Vec<ChainFileLevel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitEntry {
    pub participant: u32,
    pub condition: Condition,
    pub mu: f64,
    pub sigma: f64,
    pub log_likelihood: f64,
    pub converged: bool,
    pub n_points: usize,
    /// Stimulus level at `FitsFile::performance`; absent for unconverged fits.
    pub threshold: Option<f64>,
    pub rows: Vec<ResponseRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitsFile {
    pub meta: Meta,
    pub performance: f64,
    pub fits: Vec<FitEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsFile {
    pub meta: Meta,
    #[serde(flatten)]
    pub stats: velod_core::psychofit::CohortStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub meta: Meta,
    pub files: Vec<ManifestEntry>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_keeps_seed() {
        let meta = Meta::new(7, "sim trace");
        let rows = vec![TraceRow { t_s: 0.0, azimuth_deg: -50.0, speed_deg_per_s: 0.0 }, TraceRow {
            t_s: 1.0 / 90.0,
            azimuth_deg: -49.9,
            speed_deg_per_s: 9.000000000000000001,
        }];
        let bytes = to_csv("t", &meta, &rows).unwrap();
        let text = String::from_utf8(bytes).unwrap();
        assert!(text.starts_with("# velod "));
        assert_eq!(text.lines().nth(1), Some("t_s,azimuth_deg,speed_deg_per_s"));
        assert_eq!(seed_from_comment(&text), Some(7));
        let back: Vec<TraceRow> = from_csv("t", Path::new("x"), &text).unwrap();
        assert_eq!(back, rows);
    }

    #[test]
    fn seed_comment_absent() {
        assert_eq!(seed_from_comment("t_s,level_index\n"), None);
        assert_eq!(seed_from_comment("# velod 0.1.0 command=x\n"), None);
    }

    #[test]
    fn trial_rows_use_lowercase_conditions() {
        let row = TrialRow {
            participant: 1,
            condition: Condition::Fast,
            trial: 0,
            aggressiveness_pct: 62.5,
            ref_interval: 2,
            response: 2,
            correct: 1,
        };
        let text = String::from_utf8(to_csv("t", &Meta::new(1, "sim run"), &[row]).unwrap()).unwrap();
        assert_eq!(text.lines().nth(1), Some("participant,condition,trial,aggressiveness_pct,ref_interval,response,correct"));
        assert_eq!(text.lines().nth(2), Some("1,fast,0,62.5,2,2,1"));
    }
}

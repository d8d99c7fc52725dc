use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use velod_core::experiment::derive_seed;
use velod_core::kinematics::Condition;
use velod_core::scheduler::{ScheduleMode, SchedulerConfig};

use crate::config::PipelineConfig;
use crate::error::{CliError, CliResult};
use crate::formats::*;
use crate::stages;

pub const COMMAND: &str = "pipeline";

/// Sub-seed for the head-model trace of one condition.
pub fn trace_seed(seed: u64, condition: Condition) -> u64 {
    derive_seed(seed, 100 + condition as u64)
}

fn relative(outdir: &Path, path: &Path) -> String {
    let rel = path.strip_prefix(outdir).unwrap_or(path);
    rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/")
}

pub fn manifest_for(outdir: &Path, files: &[PathBuf], meta: &Meta) -> CliResult<Manifest> {
    let mut entries = files
        .iter()
        .map(|p| {
            let bytes = fs::read(p).map_err(|e| CliError::read("manifest", p, e))?;
            Ok(ManifestEntry {
                path: relative(outdir, p),
                bytes: bytes.len() as u64,
                sha256: hex::encode(Sha256::digest(&bytes)),
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    entries.sort_by(|a, b| a.path.cmp(&b.path));
    entries.dedup_by(|a, b| a.path == b.path);
    Ok(Manifest { meta: meta.clone(), files: entries })
}

/// Runs gen → trace → schedule → sim → fit → analyze → report, then writes
/// `manifest.json` with a SHA-256 per produced file.
pub fn run_pipeline(config: &PipelineConfig, outdir: &Path, log: &dyn Fn(&str)) -> CliResult<Manifest> {
    config.validate()?;
    let meta = Meta::new(config.seed, COMMAND);
    let mut files = Vec::new();

    let resolved = outdir.join("config.json");
    write_bytes("config", &resolved, &to_json("config", config)?)?;
    files.push(resolved);

    log("gen: building LOD chain");
    let (mesh, source) = stages::load_mesh("gen", config.mesh.as_deref())?;
    let lod_dir = outdir.join("lod");
    files.extend(stages::gen_chain(&mesh, &source, &config.ladder, config.deviation_samples, &meta, &lod_dir)?);
    let chain = stages::read_chain("schedule", &lod_dir.join("chain.json"))?;
    let level_count = chain.levels.len();

    for condition in Condition::ALL {
        let name = condition.as_str();
        log(&format!("trace: {name}"));
        let profile = config.profile(condition);
        let trace = stages::make_trace(profile, Some(&config.head), trace_seed(config.seed, condition))?;
        let trace_path = outdir.join(format!("trace_{name}.csv"));
        stages::write_trace(&trace, &meta, &trace_path)?;
        files.push(trace_path.clone());

        log(&format!("schedule: {name}"));
        let (rows, _) = stages::read_trace("schedule", &trace_path)?;
        let scheduler = SchedulerConfig {
            mode: config.scheduler.mode,
            threshold_fraction: config.scheduler.threshold_fraction,
            reference_peak_speed: profile.peak_speed,
            degraded_level_index: level_count - 1,
            chain_level_count: level_count,
            hysteresis: if config.scheduler.mode == ScheduleMode::Binary { config.scheduler.hysteresis } else { 0.0 },
        };
        let schedule_path = outdir.join(format!("schedule_{name}.csv"));
        stages::schedule_trace(&rows, &scheduler, &meta, &schedule_path)?;
        files.push(schedule_path);
    }

    log("sim: simulating cohort");
    let design_path = outdir.join("design.json");
    write_bytes("sim", &design_path, &to_json("sim", &config.design)?)?;
    files.push(design_path.clone());
    let design = stages::read_design("sim", &design_path)?;
    let trials_path = outdir.join("trials.csv");
    let stimulus_path = outdir.join("stimulus.csv");
    files.extend(stages::sim_run(
        &design,
        config.participants,
        &config.population,
        &config.stimulus(),
        &meta,
        &trials_path,
        Some(&stimulus_path),
    )?);

    log("fit: fitting psychometric functions");
    let (trials, _) = stages::read_trials("fit", &trials_path)?;
    let fits = stages::fit_trials(&trials, config.performance, &meta)?;
    let fits_path = outdir.join("fits.json");
    write_bytes("fit", &fits_path, &to_json("fit", &fits)?)?;
    files.push(fits_path.clone());

    log("analyze: cohort statistics");
    let fits = stages::read_fits("analyze", &fits_path)?;
    let stats = stages::analyze(&fits, &meta)?;
    let stats_path = outdir.join("stats.json");
    write_bytes("analyze", &stats_path, &to_json("analyze", &stats)?)?;
    files.push(stats_path);
    log(&format!(
        "analyze: t = {:.3}, df = {}, p = {:.4}, excluded {:?}",
        stats.stats.t_statistic, stats.stats.degrees_of_freedom, stats.stats.p_value, stats.stats.excluded_ids
    ));

    log("report: plotting");
    let svg = stages::report(&fits, &meta)?;
    let svg_path = outdir.join("pf.svg");
    write_bytes("report", &svg_path, svg.as_bytes())?;
    files.push(svg_path);

    let manifest = manifest_for(outdir, &files, &meta)?;
    write_bytes("manifest", &outdir.join("manifest.json"), &to_json("manifest", &manifest)?)?;
    Ok(manifest)
}

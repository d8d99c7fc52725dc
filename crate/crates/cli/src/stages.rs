//! One function per pipeline stage. Each reads and writes only the declared
//! file formats, so the subcommands and `pipeline` share the same code.

use std::path::{Path, PathBuf};

use velod_core::corpus::statue_standin;
use velod_core::deviation::mean_squared_deviation;
use velod_core::experiment::{run_cohort, tabulate, ExperimentDesign, ObserverPopulation, StimulusConfig};
use velod_core::kinematics::{fixation_trajectory, simulate_head_trace, KinematicTrace, MotionProfile};
use velod_core::obj::{load_obj, write_obj};
use velod_core::psychofit::{cohort_stats, fit, threshold, ParticipantFit, PsychometricFit, Tail};
use velod_core::report::{render_pf_svg, PfSeries};
use velod_core::scheduler::{schedule_speeds, SchedulerConfig};
use velod_core::simplify::generate_lod_chain;
use velod_core::TriangleMesh;

use crate::config::HeadModel;
use crate::error::{CliError, CliResult, StageContext};
use crate::formats::*;

pub const STANDIN_SOURCE: &str = "builtin:statue-standin";

pub fn load_mesh(stage: &str, path: Option<&Path>) -> CliResult<(TriangleMesh, String)> {
    match path {
        None => Ok((statue_standin(), STANDIN_SOURCE.to_string())),
        Some(p) => {
            if !p.is_file() {
                return Err(CliError::validation(stage, format!("mesh file {} does not exist", p.display())));
            }
            let mesh = load_obj(p).map_err(|e| CliError::validation(stage, format!("{}: {e}", p.display())))?;
            Ok((mesh, p.display().to_string()))
        }
    }
}

/// Writes `lod_0.obj` (the reference) through `lod_N.obj` and `chain.json` into `outdir`.
pub fn gen_chain(
    mesh: &TriangleMesh,
    source: &str,
    ladder: &[f64],
    deviation_samples: usize,
    meta: &Meta,
    outdir: &Path,
) -> CliResult<Vec<PathBuf>> {
    const STAGE: &str = "gen";
    let chain = generate_lod_chain(mesh, ladder).stage(STAGE)?;
    let mut written = Vec::new();
    let mut levels = Vec::new();
    let mut emit = |index: usize, m: &TriangleMesh, aggressiveness: f64, target: usize, reached: bool| -> CliResult<()> {
        let file = format!("lod_{index}.obj");
        let header = [meta.line(), format!("level {index} aggressiveness {aggressiveness} triangles {}", m.triangle_count())];
        let text = write_obj(m, &header).stage(STAGE)?;
        let path = outdir.join(&file);
        write_bytes(STAGE, &path, text.as_bytes())?;
        written.push(path);
        let msd = if index == 0 {
            0.0
        } else {
            mean_squared_deviation(m, &chain.reference, deviation_samples, meta.seed).stage(STAGE)?
        };
        levels.push(ChainFileLevel {
            index,
            file,
            aggressiveness,
            target_triangles: target,
            achieved_triangles: m.triangle_count(),
            reached_target: reached,
            vertices: m.vertex_count(),
            mean_squared_deviation: msd,
        });
        Ok(())
    };
    for (i, level) in chain.levels.iter().enumerate() {
        emit(i, &level.mesh, level.aggressiveness, level.target_triangles, level.reached_target)?;
    }
    let file = ChainFile { meta: meta.clone(), source: source.to_string(), deviation_samples, levels };
    let path = outdir.join("chain.json");
    write_bytes(STAGE, &path, &to_json(STAGE, &file)?)?;
    written.push(path);
    Ok(written)
}

pub fn read_chain(stage: &str, path: &Path) -> CliResult<ChainFile> {
    from_json(stage, path, &read_text(stage, path)?)
}

/// Fixation-target trace, optionally passed through the head model.
pub fn make_trace(profile: &MotionProfile, head: Option<&HeadModel>, seed: u64) -> CliResult<KinematicTrace> {
    const STAGE: &str = "trace";
    let target = fixation_trajectory(profile).stage(STAGE)?;
    match head {
        None => Ok(target),
        Some(h) => simulate_head_trace(&target, h.lag_tau, h.jitter_sd, seed).stage(STAGE),
    }
}

pub fn write_trace(trace: &KinematicTrace, meta: &Meta, out: &Path) -> CliResult<()> {
    let rows: Vec<TraceRow> = (0..trace.len())
        .map(|i| TraceRow {
            t_s: trace.timestamps[i],
            azimuth_deg: trace.azimuth[i],
            speed_deg_per_s: trace.derived_speed[i],
        })
        .collect();
    write_bytes("trace", out, &to_csv("trace", meta, &rows)?)
}

pub fn read_trace(stage: &str, path: &Path) -> CliResult<(Vec<TraceRow>, Option<u64>)> {
    let text = read_text(stage, path)?;
    let rows: Vec<TraceRow> = from_csv(stage, path, &text)?;
    if rows.is_empty() {
        return Err(CliError::validation(stage, format!("{} holds no samples", path.display())));
    }
    Ok((rows, seed_from_comment(&text)))
}

/// Schedules a trace CSV using its recorded per-sample speeds.
pub fn schedule_trace(rows: &[TraceRow], config: &SchedulerConfig, meta: &Meta, out: &Path) -> CliResult<()> {
    const STAGE: &str = "schedule";
    let t: Vec<f64> = rows.iter().map(|r| r.t_s).collect();
    let speeds: Vec<f64> = rows.iter().map(|r| r.speed_deg_per_s).collect();
    let s = schedule_speeds(&t, &speeds, config).stage(STAGE)?;
    let out_rows: Vec<ScheduleRow> =
        s.timestamps.iter().zip(&s.level_index).map(|(&t_s, &level_index)| ScheduleRow { t_s, level_index }).collect();
    write_bytes(STAGE, out, &to_csv(STAGE, meta, &out_rows)?)
}

pub fn read_design(stage: &str, path: &Path) -> CliResult<ExperimentDesign> {
    let d: ExperimentDesign = from_json(stage, path, &read_text(stage, path)?)?;
    d.validate().stage(stage)?;
    Ok(d)
}

/// Simulates the cohort and writes the trial log plus, optionally, per-trial stimulus statistics.
pub fn sim_run(
    design: &ExperimentDesign,
    participants: u32,
    population: &ObserverPopulation,
    stimulus: &StimulusConfig,
    meta: &Meta,
    out: &Path,
    stimulus_out: Option<&Path>,
) -> CliResult<Vec<PathBuf>> {
    const STAGE: &str = "sim";
    let (_, records) = run_cohort(participants, design, population, stimulus, meta.seed).stage(STAGE)?;
    let trials: Vec<TrialRow> = records
        .iter()
        .map(|r| TrialRow {
            participant: r.participant,
            condition: r.condition,
            trial: r.trial_index,
            aggressiveness_pct: r.aggressiveness_pct,
            ref_interval: r.reference_interval,
            response: r.response_interval,
            correct: r.correct as u8,
        })
        .collect();
    write_bytes(STAGE, out, &to_csv(STAGE, meta, &trials)?)?;
    let mut written = vec![out.to_path_buf()];
    if let Some(path) = stimulus_out {
        let rows: Vec<StimulusRow> = records
            .iter()
            .map(|r| StimulusRow {
                participant: r.participant,
                condition: r.condition,
                trial: r.trial_index,
                degraded_frame_fraction: r.degraded_frame_fraction,
                lod_switches: r.lod_switches,
            })
            .collect();
        write_bytes(STAGE, path, &to_csv(STAGE, meta, &rows)?)?;
        written.push(path.to_path_buf());
    }
    Ok(written)
}

pub fn read_trials(stage: &str, path: &Path) -> CliResult<(Vec<TrialRow>, Option<u64>)> {
    let text = read_text(stage, path)?;
    let rows: Vec<TrialRow> = from_csv(stage, path, &text)?;
    if let Some(r) = rows.iter().find(|r| r.correct > 1 || !matches!(r.ref_interval, 1 | 2) || !matches!(r.response, 1 | 2)) {
        return Err(CliError::validation(stage, format!("{}: malformed trial {} of participant {}", path.display(), r.trial, r.participant)));
    }
    if let Some(r) = rows.iter().find(|r| (r.correct == 1) != (r.ref_interval == r.response)) {
        return Err(CliError::validation(
            stage,
            format!("{}: trial {} of participant {} marks correctness inconsistently", path.display(), r.trial, r.participant),
        ));
    }
    Ok((rows, seed_from_comment(&text)))
}

/// Fits every (participant, condition) table in a trial log.
pub fn fit_trials(rows: &[TrialRow], performance: f64, meta: &Meta) -> CliResult<FitsFile> {
    const STAGE: &str = "fit";
    let tables =
        tabulate(rows.iter().map(|r| (r.participant, r.condition, r.aggressiveness_pct, r.correct == 1))).stage(STAGE)?;
    let fits = tables
        .into_iter()
        .map(|t| {
            let f = fit(&t).map_err(|e| CliError::core(STAGE, e))?;
            let thr = if f.converged { Some(threshold(&f, performance).stage(STAGE)?) } else { None };
            Ok(FitEntry {
                participant: t.participant,
                condition: t.condition,
                mu: f.mu,
                sigma: f.sigma,
                log_likelihood: f.log_likelihood,
                converged: f.converged,
                n_points: f.n_points,
                threshold: thr,
                rows: t.rows,
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    Ok(FitsFile { meta: meta.clone(), performance, fits })
}

pub fn read_fits(stage: &str, path: &Path) -> CliResult<FitsFile> {
    from_json(stage, path, &read_text(stage, path)?)
}

fn participant_fits(fits: &FitsFile) -> Vec<ParticipantFit> {
    fits.fits
        .iter()
        .map(|e| ParticipantFit {
            participant: e.participant,
            condition: e.condition,
            fit: PsychometricFit {
                mu: e.mu,
                sigma: e.sigma,
                log_likelihood: e.log_likelihood,
                converged: e.converged,
                n_points: e.n_points,
            },
        })
        .collect()
}

/// One-tailed paired test that fast thresholds exceed slow ones.
pub fn analyze(fits: &FitsFile, meta: &Meta) -> CliResult<StatsFile> {
    // Too few fittable participants is an outcome of the data, not of the arguments.
    let stats = cohort_stats(&participant_fits(fits), fits.performance, Tail::Greater)
        .map_err(|e| CliError::runtime("analyze", e.to_string()))?;
    Ok(StatsFile { meta: meta.clone(), stats })
}

pub fn report(fits: &FitsFile, meta: &Meta) -> CliResult<String> {
    let series: Vec<PfSeries> = participant_fits(fits)
        .into_iter()
        .zip(&fits.fits)
        .map(|(pf, e)| PfSeries {
            participant: e.participant,
            condition: e.condition,
            mu: e.mu,
            sigma: e.sigma,
            converged: e.converged,
            rows: e.rows.clone(),
            threshold: threshold(&pf.fit, 0.75).ok(),
        })
        .collect();
    render_pf_svg(&series, &[meta.line(), "75% thresholds marked; dotted curves did not converge".into()]).stage("report")
}

//! WebAssembly bindings for the static demo page in `www/`. Each export
//! returns a JSON string; the plain `*_view` functions hold the logic.

use std::cell::OnceCell;

use serde::Serialize;
use velod_core::corpus::statue_standin;
use velod_core::deviation::mean_squared_deviation;
use velod_core::experiment::{aggregate, fraction_to_percent, run_participant, ExperimentDesign, ObserverModel, StimulusConfig};
use velod_core::kinematics::{fixation_trajectory, simulate_head_trace, Condition, MotionProfile};
use velod_core::psychofit::{fit, psychometric, threshold};
use velod_core::scheduler::{degraded_fraction, schedule, SchedulerConfig};
use velod_core::simplify::{lod_target, simplify, DEFAULT_LADDER};
use velod_core::TriangleMesh;
use wasm_bindgen::prelude::*;

thread_local! {
    static STATUE: OnceCell<TriangleMesh> = const { OnceCell::new() };
}

fn statue() -> TriangleMesh {
    STATUE.with(|c| c.get_or_init(statue_standin).clone())
}

#[derive(Debug, Serialize)]
pub struct SimplifyView {
    pub reference_triangles: usize,
    pub target_triangles: usize,
    pub triangles: usize,
    pub mean_squared_deviation: f64,
    /// xyz triples.
    pub positions: Vec<f32>,
    pub indices: Vec<u32>,
}

pub fn simplify_view(aggressiveness: f64) -> Result<SimplifyView, String> {
    if !(0.0..1.0).contains(&aggressiveness) {
        return Err(format!("aggressiveness must lie in [0, 1), got {aggressiveness}"));
    }
    let reference = statue();
    let target = lod_target(reference.triangle_count(), aggressiveness);
    let out = simplify(&reference, target).map_err(|e| e.to_string())?;
    let msd = mean_squared_deviation(&out.mesh, &reference, 4000, 1).map_err(|e| e.to_string())?;
    Ok(SimplifyView {
        reference_triangles: reference.triangle_count(),
        target_triangles: target,
        triangles: out.achieved_triangle_count,
        mean_squared_deviation: msd,
        positions: out.mesh.vertices.iter().flat_map(|v| [v.x as f32, v.y as f32, v.z as f32]).collect(),
        indices: out.mesh.triangles.iter().flatten().copied().collect(),
    })
}

#[derive(Debug, Serialize)]
pub struct TraceView {
    pub t: Vec<f64>,
    pub target_azimuth: Vec<f64>,
    pub head_azimuth: Vec<f64>,
    pub speed: Vec<f64>,
    pub level: Vec<usize>,
    pub threshold_speed: f64,
    pub degraded_fraction: f64,
    pub switches: usize,
}

pub fn trace_view(condition: &str, threshold_fraction: f64, lag_tau: f64, jitter_sd: f64, seed: u64) -> Result<TraceView, String> {
    let condition: Condition = condition.parse().map_err(|e: velod_core::Error| e.to_string())?;
    let profile = MotionProfile::for_condition(condition);
    let target = fixation_trajectory(&profile).map_err(|e| e.to_string())?;
    let head = simulate_head_trace(&target, lag_tau, jitter_sd, seed).map_err(|e| e.to_string())?;
    let config = SchedulerConfig::binary(profile.peak_speed, threshold_fraction, DEFAULT_LADDER.len());
    let s = schedule(&head, &config).map_err(|e| e.to_string())?;
    Ok(TraceView {
        degraded_fraction: degraded_fraction(&s).map_err(|e| e.to_string())?,
        switches: s.switch_count,
        threshold_speed: threshold_fraction * profile.peak_speed,
        t: head.timestamps.clone(),
        target_azimuth: target.azimuth,
        head_azimuth: head.azimuth,
        speed: head.derived_speed,
        level: s.level_index,
    })
}

#[derive(Debug, Serialize)]
pub struct FitView {
    pub levels: Vec<f64>,
    pub proportions: Vec<f64>,
    pub trials_per_level: u32,
    pub mu: f64,
    pub sigma: f64,
    pub converged: bool,
    pub threshold: Option<f64>,
    /// `(aggressiveness %, fitted ψ, true ψ)` samples for plotting.
    pub curve: Vec<[f64; 3]>,
}

pub fn fit_view(mu: f64, sigma: f64, lapse: f64, repetitions: u32, seed: u64) -> Result<FitView, String> {
    let observer = ObserverModel { lapse_rate: lapse, ..ObserverModel::uniform(mu, sigma) };
    let design = ExperimentDesign { conditions: vec![Condition::Slow], repetitions_per_level: repetitions, seed, ..Default::default() };
    let records = run_participant(1, &design, &observer, &StimulusConfig::default()).map_err(|e| e.to_string())?;
    let table = aggregate(&records).map_err(|e| e.to_string())?.remove(0);
    let f = fit(&table).map_err(|e| e.to_string())?;
    let lo = fraction_to_percent(DEFAULT_LADDER[0]) - 10.0;
    let hi = 100.0;
    let curve = (0..=100)
        .map(|i| {
            let a = lo + (hi - lo) * i as f64 / 100.0;
            [a, psychometric(a, f.mu, f.sigma, 0.0), observer.p_correct(a, Condition::Slow)]
        })
        .collect();
    Ok(FitView {
        levels: table.rows.iter().map(|r| r.aggressiveness).collect(),
        proportions: table.rows.iter().map(|r| r.proportion()).collect(),
        trials_per_level: repetitions,
        mu: f.mu,
        sigma: f.sigma,
        converged: f.converged,
        threshold: threshold(&f, 0.75).ok(),
        curve,
    })
}

fn to_js<T: Serialize>(r: Result<T, String>) -> Result<String, JsError> {
    let v = r.map_err(|e| JsError::new(&e))?;
    serde_json::to_string(&v).map_err(|e| JsError::new(&e.to_string()))
}

/// Simplifies the built-in statue stand-in; returns `SimplifyView` JSON.
#[wasm_bindgen]
pub fn simplify_statue(aggressiveness: f64) -> Result<String, JsError> {
    to_js(simplify_view(aggressiveness))
}

/// Head trace and binary LOD schedule for one condition; returns `TraceView` JSON.
#[wasm_bindgen]
pub fn trace_schedule(condition: &str, threshold_fraction: f64, lag_tau: f64, jitter_sd: f64, seed: u32) -> Result<String, JsError> {
    to_js(trace_view(condition, threshold_fraction, lag_tau, jitter_sd, seed as u64))
}

/// Simulates one observer under the default design and fits it; returns `FitView` JSON.
#[wasm_bindgen]
pub fn simulate_and_fit(mu: f64, sigma: f64, lapse: f64, repetitions: u32, seed: u32) -> Result<String, JsError> {
    to_js(fit_view(mu, sigma, lapse, repetitions, seed as u64))
}

//! Simulated two-interval forced-choice experiment using the method of
//! constant stimuli.
//!
//! Observers are parametric: each response is a Bernoulli draw from the
//! observer's psychometric function. Every trial still runs the stimulus
//! pathway (fixation motion, head trace, LOD schedule) and records how much
//! of the degraded interval was actually rendered degraded.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::{
    fixation_trajectory, simulate_head_trace, Condition, Direction, MotionProfile, DEFAULT_JITTER_SD, DEFAULT_LAG_TAU,
};
use crate::psychofit::{psychometric, ResponseRow, ResponseTable};
use crate::scheduler::{degraded_fraction, schedule, SchedulerConfig};
use crate::simplify::{validate_ladder, DEFAULT_LADDER};

/// SplitMix64 finalizer, used to derive independent sub-seeds.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentDesign {
    /// Fractions of triangles removed, strictly increasing in (0, 1).
    pub aggressiveness_levels: Vec<f64>,
    pub repetitions_per_level: u32,
    pub conditions: Vec<Condition>,
    pub interleaved: bool,
    pub seed: u64,
}

impl Default for ExperimentDesign {
    fn default() -> Self {
        Self {
            aggressiveness_levels: DEFAULT_LADDER.to_vec(),
            repetitions_per_level: 20,
            conditions: Condition::ALL.to_vec(),
            interleaved: true,
            seed: 0,
        }
    }
}

impl ExperimentDesign {
    pub fn validate(&self) -> Result<()> {
        validate_ladder(&self.aggressiveness_levels)?;
        if self.repetitions_per_level == 0 {
            return Err(Error::invalid("repetitions per level must be positive"));
        }
        if self.conditions.is_empty() {
            return Err(Error::invalid("design has no conditions"));
        }
        let mut c = self.conditions.clone();
        c.sort();
        c.dedup();
        if c.len() != self.conditions.len() {
            return Err(Error::invalid("design lists a condition twice"));
        }
        Ok(())
    }

    pub fn total_trials(&self) -> usize {
        self.aggressiveness_levels.len() * self.repetitions_per_level as usize * self.conditions.len()
    }
}

/// Percent of triangles removed, rounded to 1e-6 so ladder fractions map to clean keys.
pub fn fraction_to_percent(fraction: f64) -> f64 {
    (fraction * 1e8).round() / 1e6
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlannedTrial {
    pub trial_index: u32,
    pub condition: Condition,
    /// Index into the LOD chain (1-based; 0 is the reference).
    pub level_index: usize,
    pub aggressiveness: f64,
    pub reference_interval: u8,
}

/// Shuffled trial order for one participant. Reference intervals are balanced
/// exactly (odd totals get one random extra) and then shuffled independently.
pub fn build_design(design: &ExperimentDesign) -> Result<Vec<PlannedTrial>> {
    design.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(design.seed);
    let mut blocks: Vec<Vec<(Condition, usize)>> = Vec::new();
    for &condition in &design.conditions {
        let mut cells = Vec::new();
        for level in 0..design.aggressiveness_levels.len() {
            for _ in 0..design.repetitions_per_level {
                cells.push((condition, level));
            }
        }
        blocks.push(cells);
    }
    let order: Vec<(Condition, usize)> = if design.interleaved {
        let mut all: Vec<_> = blocks.into_iter().flatten().collect();
        all.shuffle(&mut rng);
        all
    } else {
        blocks
            .into_iter()
            .flat_map(|mut b| {
                b.shuffle(&mut rng);
                b
            })
            .collect()
    };

    let n = order.len();
    let mut intervals: Vec<u8> = (0..n).map(|i| if i < n / 2 { 1 } else { 2 }).collect();
    if n % 2 == 1 {
        intervals[n - 1] = rng.random_range(1..=2);
    }
    intervals.shuffle(&mut rng);

    Ok(order
        .into_iter()
        .zip(intervals)
        .enumerate()
        .map(|(i, ((condition, level), reference_interval))| PlannedTrial {
            trial_index: i as u32,
            condition,
            level_index: level + 1,
            aggressiveness: design.aggressiveness_levels[level],
            reference_interval,
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObserverParams {
    /// Aggressiveness (%) at which the observer is 75% correct.
    pub mu: f64,
    /// Spread in aggressiveness (%), > 0.
    pub sigma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObserverModel {
    pub slow: ObserverParams,
    pub fast: ObserverParams,
    pub lapse_rate: f64,
}

pub const MAX_LAPSE: f64 = 0.06;

impl ObserverModel {
    pub fn uniform(mu: f64, sigma: f64) -> Self {
        let p = ObserverParams { mu, sigma };
        Self { slow: p, fast: p, lapse_rate: 0.0 }
    }

    pub fn params(&self, condition: Condition) -> ObserverParams {
        match condition {
            Condition::Slow => self.slow,
            Condition::Fast => self.fast,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.slow.sigma > 0.0 && self.fast.sigma > 0.0) {
            return Err(Error::invalid("observer sigma must be positive"));
        }
        if !(0.0..=MAX_LAPSE).contains(&self.lapse_rate) {
            return Err(Error::invalid(format!("lapse rate must lie in [0, {MAX_LAPSE}]")));
        }
        Ok(())
    }

    pub fn p_correct(&self, aggressiveness_pct: f64, condition: Condition) -> f64 {
        let p = self.params(condition);
        psychometric(aggressiveness_pct, p.mu, p.sigma, self.lapse_rate)
    }
}

/// One Bernoulli draw: `true` when the observer picks the reference interval.
pub fn simulate_response(aggressiveness_pct: f64, observer: &ObserverModel, condition: Condition, rng: &mut impl Rng) -> bool {
    rng.random::<f64>() < observer.p_correct(aggressiveness_pct, condition)
}

/// Gaussian population from which each participant's observer is drawn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ObserverPopulation {
    /// Mean μ (%) for (slow, fast).
    pub mu_mean: (f64, f64),
    pub mu_sd: (f64, f64),
    /// Within-participant correlation of slow and fast μ.
    pub mu_correlation: f64,
    pub sigma_mean: f64,
    pub sigma_sd: f64,
    /// Drawn σ values are floored here.
    pub sigma_min: f64,
    pub lapse_rate: f64,
}

impl Default for ObserverPopulation {
    fn default() -> Self {
        Self {
            mu_mean: (74.6, 82.2),
            mu_sd: (14.8, 13.1),
            mu_correlation: 0.8,
            sigma_mean: 10.0,
            sigma_sd: 2.0,
            sigma_min: 2.0,
            lapse_rate: 0.0,
        }
    }
}

impl ObserverPopulation {
    pub fn fixed(observer: &ObserverModel) -> Self {
        Self {
            mu_mean: (observer.slow.mu, observer.fast.mu),
            mu_sd: (0.0, 0.0),
            mu_correlation: 0.0,
            sigma_mean: observer.slow.sigma,
            sigma_sd: 0.0,
            sigma_min: observer.slow.sigma.min(observer.fast.sigma),
            lapse_rate: observer.lapse_rate,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(-1.0..=1.0).contains(&self.mu_correlation) {
            return Err(Error::invalid("mu correlation must lie in [-1, 1]"));
        }
        if self.mu_sd.0 < 0.0 || self.mu_sd.1 < 0.0 || self.sigma_sd < 0.0 {
            return Err(Error::invalid("population standard deviations must be non-negative"));
        }
        if !(self.sigma_min > 0.0) {
            return Err(Error::invalid("sigma floor must be positive"));
        }
        if !(0.0..=MAX_LAPSE).contains(&self.lapse_rate) {
            return Err(Error::invalid(format!("lapse rate must lie in [0, {MAX_LAPSE}]")));
        }
        Ok(())
    }

    pub fn draw(&self, rng: &mut impl Rng) -> ObserverModel {
        let z1: f64 = StandardNormal.sample(rng);
        let z2: f64 = StandardNormal.sample(rng);
        let zs: f64 = StandardNormal.sample(rng);
        let zf: f64 = StandardNormal.sample(rng);
        let rho = self.mu_correlation;
        let slow_mu = self.mu_mean.0 + self.mu_sd.0 * z1;
        let fast_mu = self.mu_mean.1 + self.mu_sd.1 * (rho * z1 + (1.0 - rho * rho).sqrt() * z2);
        let sigma = |z: f64| (self.sigma_mean + self.sigma_sd * z).max(self.sigma_min);
        ObserverModel {
            slow: ObserverParams { mu: slow_mu, sigma: sigma(zs) },
            fast: ObserverParams { mu: fast_mu, sigma: sigma(zf) },
            lapse_rate: self.lapse_rate,
        }
    }
}

/// Parameters of the per-trial stimulus pathway.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StimulusConfig {
    /// Start azimuth and direction are redrawn for every trial.
    pub slow: MotionProfile,
    pub fast: MotionProfile,
    pub lag_tau: f64,
    pub jitter_sd: f64,
    pub threshold_fraction: f64,
}

impl Default for StimulusConfig {
    fn default() -> Self {
        Self {
            slow: MotionProfile::for_condition(Condition::Slow),
            fast: MotionProfile::for_condition(Condition::Fast),
            lag_tau: DEFAULT_LAG_TAU,
            jitter_sd: DEFAULT_JITTER_SD,
            threshold_fraction: 0.5,
        }
    }
}

impl StimulusConfig {
    pub fn profile(&self, condition: Condition) -> &MotionProfile {
        match condition {
            Condition::Slow => &self.slow,
            Condition::Fast => &self.fast,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.slow.validate()?;
        self.fast.validate()?;
        if self.slow.condition != Condition::Slow || self.fast.condition != Condition::Fast {
            return Err(Error::invalid("stimulus profiles must be labelled slow and fast respectively"));
        }
        if !(self.lag_tau >= 0.0 && self.jitter_sd >= 0.0) {
            return Err(Error::invalid("head-model lag and jitter must be non-negative"));
        }
        if !(self.threshold_fraction > 0.0 && self.threshold_fraction.is_finite()) {
            return Err(Error::invalid("threshold fraction must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub participant: u32,
    pub condition: Condition,
    pub trial_index: u32,
    pub aggressiveness_pct: f64,
    pub reference_interval: u8,
    pub response_interval: u8,
    pub correct: bool,
    /// Share of frames in the degraded interval that showed the degraded model.
    pub degraded_frame_fraction: f64,
    pub lod_switches: usize,
}

struct StimulusOutcome {
    degraded_frame_fraction: f64,
    lod_switches: usize,
}

fn run_stimulus(trial: &PlannedTrial, stimulus: &StimulusConfig, rng: &mut ChaCha8Rng) -> Result<StimulusOutcome> {
    let mut profile = stimulus.profile(trial.condition).clone();
    profile.direction = if rng.random::<bool>() { Direction::Right } else { Direction::Left };
    profile.start_azimuth = rng.random_range(-profile.sweep_half_range..=profile.sweep_half_range);
    let target = fixation_trajectory(&profile)?;
    let head = simulate_head_trace(&target, stimulus.lag_tau, stimulus.jitter_sd, rng.random())?;
    let config = SchedulerConfig::binary(profile.peak_speed, stimulus.threshold_fraction, trial.level_index);
    let s = schedule(&head, &config)?;
    Ok(StimulusOutcome { degraded_frame_fraction: degraded_fraction(&s)?, lod_switches: s.switch_count })
}

/// Runs one participant through their trial list.
pub fn run_participant(
    participant: u32,
    design: &ExperimentDesign,
    observer: &ObserverModel,
    stimulus: &StimulusConfig,
) -> Result<Vec<TrialRecord>> {
    observer.validate()?;
    let trials = build_design(design)?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(design.seed, 0x5EED));
    trials
        .iter()
        .map(|t| {
            let stim = run_stimulus(t, stimulus, &mut rng)?;
            let pct = fraction_to_percent(t.aggressiveness);
            let correct = simulate_response(pct, observer, t.condition, &mut rng);
            let response_interval = if correct { t.reference_interval } else { 3 - t.reference_interval };
            Ok(TrialRecord {
                participant,
                condition: t.condition,
                trial_index: t.trial_index,
                aggressiveness_pct: pct,
                reference_interval: t.reference_interval,
                response_interval,
                correct,
                degraded_frame_fraction: stim.degraded_frame_fraction,
                lod_switches: stim.lod_switches,
            })
        })
        .collect()
}

/// A cohort of `n_participants` (ids 1..=n) with observers drawn from `population`.
/// Each participant gets their own design seed derived from `seed`.
pub fn run_cohort(
    n_participants: u32,
    design: &ExperimentDesign,
    population: &ObserverPopulation,
    stimulus: &StimulusConfig,
    seed: u64,
) -> Result<(Vec<ObserverModel>, Vec<TrialRecord>)> {
    if n_participants < 2 {
        return Err(Error::invalid("a cohort needs at least two participants"));
    }
    design.validate()?;
    population.validate()?;
    stimulus.validate()?;
    let mut observers = Vec::with_capacity(n_participants as usize);
    let mut records = Vec::with_capacity(n_participants as usize * design.total_trials());
    for participant in 1..=n_participants {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, participant as u64));
        let observer = population.draw(&mut rng);
        let own = ExperimentDesign { seed: rng.random(), ..design.clone() };
        records.extend(run_participant(participant, &own, &observer, stimulus)?);
        observers.push(observer);
    }
    Ok((observers, records))
}

/// Per-(participant, condition) tables with one row per level, ascending.
pub fn aggregate(records: &[TrialRecord]) -> Result<Vec<ResponseTable>> {
    tabulate(records.iter().map(|r| (r.participant, r.condition, r.aggressiveness_pct, r.correct)))
}

/// [`aggregate`] over bare `(participant, condition, aggressiveness %, correct)` tuples.
pub fn tabulate(responses: impl IntoIterator<Item = (u32, Condition, f64, bool)>) -> Result<Vec<ResponseTable>> {
    let mut cells: BTreeMap<(u32, Condition), BTreeMap<i64, (f64, u32, u32)>> = BTreeMap::new();
    for (participant, condition, pct, correct) in responses {
        if !pct.is_finite() {
            return Err(Error::invalid(format!("non-finite aggressiveness for participant {participant}")));
        }
        let key = (pct * 1e6).round() as i64;
        let cell = cells.entry((participant, condition)).or_default().entry(key).or_insert((pct, 0, 0));
        cell.1 += 1;
        cell.2 += correct as u32;
    }
    if cells.is_empty() {
        return Err(Error::invalid("no trial records to aggregate"));
    }
    Ok(cells
        .into_iter()
        .map(|((participant, condition), rows)| ResponseTable {
            participant,
            condition,
            rows: rows
                .into_values()
                .map(|(aggressiveness, n_trials, n_correct)| ResponseRow { aggressiveness, n_trials, n_correct })
                .collect(),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::psychofit::normal_cdf;

    #[test]
    fn default_design_has_280_trials() {
        let d = ExperimentDesign::default();
        let trials = build_design(&d).unwrap();
        assert_eq!(trials.len(), 280);
        assert_eq!(d.total_trials(), 280);
        let mut cells: BTreeMap<(Condition, usize), usize> = BTreeMap::new();
        for t in &trials {
            *cells.entry((t.condition, t.level_index)).or_default() += 1;
        }
        assert_eq!(cells.len(), 14);
        assert!(cells.values().all(|&n| n == 20));
        let first = trials.iter().filter(|t| t.reference_interval == 1).count();
        assert!((first as f64 / 280.0 - 0.5).abs() <= 0.1);
        // Interleaving mixes conditions within the first block of trials.
        assert!(trials[..40].iter().any(|t| t.condition == Condition::Slow));
        assert!(trials[..40].iter().any(|t| t.condition == Condition::Fast));
    }

    #[test]
    fn blocked_design_groups_conditions() {
        let d = ExperimentDesign { interleaved: false, ..Default::default() };
        let trials = build_design(&d).unwrap();
        assert!(trials[..140].iter().all(|t| t.condition == Condition::Slow));
        assert!(trials[140..].iter().all(|t| t.condition == Condition::Fast));
    }

    #[test]
    fn minimal_design() {
        let d = ExperimentDesign {
            aggressiveness_levels: vec![0.5],
            repetitions_per_level: 1,
            conditions: vec![Condition::Fast],
            interleaved: true,
            seed: 3,
        };
        assert_eq!(build_design(&d).unwrap().len(), 1);
    }

    #[test]
    fn designs_are_seeded() {
        let d = ExperimentDesign { seed: 99, ..Default::default() };
        assert_eq!(build_design(&d).unwrap(), build_design(&d).unwrap());
        let e = ExperimentDesign { seed: 100, ..Default::default() };
        assert_ne!(build_design(&d).unwrap(), build_design(&e).unwrap());
    }

    #[test]
    fn response_probability() {
        let obs = ObserverModel::uniform(70.0, 8.0);
        assert!((obs.p_correct(70.0, Condition::Slow) - 0.75).abs() < 1e-15);
        assert!((obs.p_correct(1e6, Condition::Fast) - 1.0).abs() < 1e-15);
        let expected = 0.5 + 0.5 * normal_cdf(-3.0);
        assert!((obs.p_correct(70.0 - 24.0, Condition::Slow) - expected).abs() < 1e-15);
        assert!((expected - 0.500675).abs() < 1e-6);
        let lapsing = ObserverModel { lapse_rate: 0.06, ..obs };
        assert!((lapsing.p_correct(1e6, Condition::Slow) - 0.97).abs() < 1e-12);
    }

    #[test]
    fn empirical_rate_converges() {
        let obs = ObserverModel::uniform(75.0, 10.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 10_000;
        for a in [55.0, 75.0, 88.0] {
            let p = obs.p_correct(a, Condition::Slow);
            let k = (0..n).filter(|_| simulate_response(a, &obs, Condition::Slow, &mut rng)).count();
            let half_width = 2.5758 * (p * (1.0 - p) / n as f64).sqrt();
            assert!((k as f64 / n as f64 - p).abs() <= half_width, "a = {a}");
        }
    }

    #[test]
    fn cohort_shape() {
        let (observers, records) =
            run_cohort(15, &ExperimentDesign::default(), &ObserverPopulation::default(), &StimulusConfig::default(), 42)
                .unwrap();
        assert_eq!(observers.len(), 15);
        assert_eq!(records.len(), 4200);
        let tables = aggregate(&records).unwrap();
        assert_eq!(tables.len(), 30);
        for t in &tables {
            assert_eq!(t.rows.len(), 7);
            assert!(t.rows.iter().all(|r| r.n_trials == 20));
        }
        assert_eq!(tables[0].rows[1].aggressiveness, 62.5);
        for r in &records {
            assert_eq!(r.correct, r.response_interval == r.reference_interval);
            assert!((0.0..=1.0).contains(&r.degraded_frame_fraction));
        }
    }

    #[test]
    fn cohort_errors_and_determinism() {
        let d = ExperimentDesign::default();
        let pop = ObserverPopulation::default();
        let s = StimulusConfig::default();
        assert!(run_cohort(1, &d, &pop, &s, 0).is_err());
        let a = run_cohort(2, &d, &pop, &s, 5).unwrap();
        let b = run_cohort(2, &d, &pop, &s, 5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_variance_population() {
        let obs = ObserverModel::uniform(80.0, 6.0);
        let pop = ObserverPopulation::fixed(&obs);
        let (observers, _) = run_cohort(4, &ExperimentDesign::default(), &pop, &StimulusConfig::default(), 1).unwrap();
        assert!(observers.iter().all(|o| *o == obs));
    }

    #[test]
    fn aggregate_counts() {
        let rec = |correct| TrialRecord {
            participant: 1,
            condition: Condition::Slow,
            trial_index: 0,
            aggressiveness_pct: 77.5,
            reference_interval: 1,
            response_interval: if correct { 1 } else { 2 },
            correct,
            degraded_frame_fraction: 0.5,
            lod_switches: 2,
        };
        let records: Vec<_> = (0..20).map(|i| rec(i < 15)).collect();
        let tables = aggregate(&records).unwrap();
        assert_eq!(tables[0].rows[0].proportion(), 0.75);
        assert!(aggregate(&[]).is_err());
    }
}

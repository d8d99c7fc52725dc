use serde::{Deserialize, Serialize};

use super::normal::{normal_cdf, normal_quantile};
use super::optim::{nelder_mead, NelderMeadOptions};
use super::stats::ln_gamma;
use crate::error::{Error, Result};
use crate::kinematics::Condition;

/// Probabilities are kept this far from 0 and 1 before taking logs.
const PROB_CLAMP: f64 = 1e-9;

/// Lowest target performance accepted by [`threshold`]; closer to chance the threshold diverges.
pub const MIN_THRESHOLD_P: f64 = 0.501;

/// `λ/2 + (1 − λ)·(0.5 + 0.5·Φ((a − μ)/σ))`. With `lapse = 0` this is the fitted model.
pub fn psychometric(a: f64, mu: f64, sigma: f64, lapse: f64) -> f64 {
    lapse / 2.0 + (1.0 - lapse) * (0.5 + 0.5 * normal_cdf((a - mu) / sigma))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResponseRow {
    /// Percent of reference triangles removed.
    pub aggressiveness: f64,
    pub n_trials: u32,
    pub n_correct: u32,
}

impl ResponseRow {
    pub fn proportion(&self) -> f64 {
        if self.n_trials == 0 {
            0.0
        } else {
            self.n_correct as f64 / self.n_trials as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseTable {
    pub participant: u32,
    pub condition: Condition,
    pub rows: Vec<ResponseRow>,
}

impl ResponseTable {
    pub fn validate(&self) -> Result<()> {
        if let Some(r) = self.rows.iter().find(|r| r.n_correct > r.n_trials) {
            return Err(Error::invalid(format!(
                "row at {} has {} correct out of {} trials",
                r.aggressiveness, r.n_correct, r.n_trials
            )));
        }
        let mut levels: Vec<f64> = self.rows.iter().map(|r| r.aggressiveness).collect();
        levels.sort_by(f64::total_cmp);
        if levels.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid("aggressiveness values in a response table must be distinct"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsychometricFit {
    pub mu: f64,
    pub sigma: f64,
    pub log_likelihood: f64,
    pub converged: bool,
    pub n_points: usize,
}

/// Binomial negative log-likelihood of the table under `(mu, sigma)`.
pub fn nll(mu: f64, sigma: f64, table: &ResponseTable) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::invalid(format!("sigma must be positive, got {sigma}")));
    }
    Ok(nll_unchecked(mu, sigma, &table.rows))
}

fn ln_choose(n: u32, k: u32) -> f64 {
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

fn nll_unchecked(mu: f64, sigma: f64, rows: &[ResponseRow]) -> f64 {
    nll_kernel(mu, sigma, rows) - ln_binomial_sum(rows)
}

fn ln_binomial_sum(rows: &[ResponseRow]) -> f64 {
    rows.iter().filter(|r| r.n_trials > 0).map(|r| ln_choose(r.n_trials, r.n_correct)).sum()
}

/// NLL without the parameter-free binomial coefficients.
fn nll_kernel(mu: f64, sigma: f64, rows: &[ResponseRow]) -> f64 {
    rows.iter()
        .filter(|r| r.n_trials > 0)
        .map(|r| {
            let p = psychometric(r.aggressiveness, mu, sigma, 0.0).clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
            let (k, n) = (r.n_correct as f64, r.n_trials as f64);
            -(k * p.ln() + (n - k) * (1.0 - p).ln())
        })
        .sum()
}

#[derive(Debug, Clone)]
pub struct FitOptions {
    pub grid_mu: usize,
    pub grid_sigma: usize,
    /// σ search bounds as multiples of the stimulus range.
    pub sigma_bounds: (f64, f64),
    /// μ may move this many stimulus ranges beyond either end of the levels.
    pub mu_margin: f64,
    /// Simplex tolerance in range-normalized parameters.
    pub tolerance: f64,
    pub max_iter: usize,
    /// Tables whose every proportion is at or below this carry no information.
    pub chance_ceiling: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            grid_mu: 25,
            grid_sigma: 20,
            sigma_bounds: (0.01, 3.0),
            mu_margin: 2.0,
            tolerance: 1e-6,
            max_iter: 4000,
            chance_ceiling: 0.55,
        }
    }
}

pub fn fit(table: &ResponseTable) -> Result<PsychometricFit> {
    fit_with(table, &FitOptions::default())
}

/// Maximum-likelihood fit: grid search for a start, then Nelder–Mead on
/// `u = (μ − lo)/range`, `v = ln(σ/range)` inside the configured bounds.
pub fn fit_with(table: &ResponseTable, opts: &FitOptions) -> Result<PsychometricFit> {
    table.validate()?;
    let rows: Vec<ResponseRow> = table.rows.iter().copied().filter(|r| r.n_trials > 0).collect();
    if rows.len() < 3 {
        return Err(Error::invalid(format!(
            "fitting needs at least 3 stimulus levels with trials, found {}",
            rows.len()
        )));
    }
    let lo = rows.iter().map(|r| r.aggressiveness).fold(f64::INFINITY, f64::min);
    let hi = rows.iter().map(|r| r.aggressiveness).fold(f64::NEG_INFINITY, f64::max);
    let range = hi - lo;

    let normalized: Vec<ResponseRow> =
        rows.iter().map(|r| ResponseRow { aggressiveness: (r.aggressiveness - lo) / range, ..*r }).collect();
    let (v_lo, v_hi) = (opts.sigma_bounds.0.ln(), opts.sigma_bounds.1.ln());
    let (u_lo, u_hi) = (-opts.mu_margin, 1.0 + opts.mu_margin);
    let objective = |x: &[f64]| {
        let u = x[0].clamp(u_lo, u_hi);
        let v = x[1].clamp(v_lo, v_hi);
        let outside = (x[0] - u).powi(2) + (x[1] - v).powi(2);
        nll_kernel(u, v.exp(), &normalized) + 1e3 * outside
    };

    let mut start = [0.0, 0.0];
    let mut best = f64::INFINITY;
    let (g_lo, g_hi) = ((1.0f64 / 20.0).ln(), 0.0f64);
    for i in 0..opts.grid_mu {
        let u = i as f64 / (opts.grid_mu - 1) as f64;
        for j in 0..opts.grid_sigma {
            let v = g_lo + (g_hi - g_lo) * j as f64 / (opts.grid_sigma - 1) as f64;
            let f = objective(&[u, v]);
            if f < best {
                best = f;
                start = [u, v];
            }
        }
    }

    let nm = nelder_mead(
        objective,
        &start,
        &NelderMeadOptions {
            initial_step: vec![0.05, 0.1],
            x_tol: opts.tolerance,
            f_tol: 1e-10,
            max_iter: opts.max_iter,
        },
    );
    let u = nm.x[0].clamp(u_lo, u_hi);
    let v = nm.x[1].clamp(v_lo, v_hi);
    let nll_value = nll_unchecked(u, v.exp(), &normalized);

    let edge = 10.0 * opts.tolerance;
    let on_sigma_ceiling = v >= v_hi - edge;
    let on_mu_bound = u <= u_lo + edge || u >= u_hi - edge;
    let uninformative = rows.iter().all(|r| r.proportion() <= opts.chance_ceiling);

    Ok(PsychometricFit {
        mu: lo + u * range,
        sigma: v.exp() * range,
        log_likelihood: -nll_value,
        converged: nm.converged && !on_sigma_ceiling && !on_mu_bound && !uninformative,
        n_points: rows.len(),
    })
}

/// Stimulus level giving performance `p`: `μ + σ·Φ⁻¹(2p − 1)`.
pub fn threshold(fit: &PsychometricFit, p: f64) -> Result<f64> {
    if !(MIN_THRESHOLD_P..1.0).contains(&p) {
        return Err(Error::invalid(format!("threshold performance must lie in [{MIN_THRESHOLD_P}, 1), got {p}")));
    }
    if !fit.converged {
        return Err(Error::Numeric("cannot take a threshold from an unconverged fit".into()));
    }
    Ok(fit.mu + fit.sigma * normal_quantile(2.0 * p - 1.0)?)
}

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::fit::{threshold, PsychometricFit};
use crate::error::{Error, Result};
use crate::kinematics::Condition;

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural log of the gamma function for `x > 0` (Lanczos, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // Reflection keeps the series in its accurate region.
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Continued fraction for the incomplete beta function (modified Lentz).
fn beta_continued_fraction(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=500 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    h
}

/// `I_x(a, b)`.
pub fn regularized_incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_continued_fraction(a, b, x) / a
    } else {
        1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b
    }
}

/// Upper tail `P(T > t)` of Student's t with `df` degrees of freedom.
pub fn student_t_sf(t: f64, df: f64) -> f64 {
    let tail = 0.5 * regularized_incomplete_beta(df / 2.0, 0.5, df / (df + t * t));
    if t >= 0.0 {
        tail
    } else {
        1.0 - tail
    }
}

pub fn student_t_cdf(t: f64, df: f64) -> f64 {
    student_t_sf(-t, df)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tail {
    /// Alternative: the second sample's mean exceeds the first's.
    Greater,
    Less,
    TwoSided,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    pub df: f64,
    pub p: f64,
}

/// Sample mean and standard deviation (n − 1 denominator).
pub fn mean_and_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 { xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (mean, var.sqrt())
}

/// Paired t-test on `d = second − first`.
pub fn paired_t_test(first: &[f64], second: &[f64], tail: Tail) -> Result<TTest> {
    if first.len() != second.len() {
        return Err(Error::invalid(format!("paired samples differ in length: {} vs {}", first.len(), second.len())));
    }
    if first.len() < 2 {
        return Err(Error::invalid("paired t-test needs at least two pairs"));
    }
    let d: Vec<f64> = first.iter().zip(second).map(|(a, b)| b - a).collect();
    let (mean, sd) = mean_and_sd(&d);
    if !(sd > 0.0) {
        return Err(Error::Numeric("paired differences have zero variance".into()));
    }
    let n = d.len() as f64;
    let t = mean / (sd / n.sqrt());
    let df = n - 1.0;
    let p = match tail {
        Tail::Greater => student_t_sf(t, df),
        Tail::Less => student_t_cdf(t, df),
        Tail::TwoSided => (2.0 * student_t_sf(t.abs(), df)).min(1.0),
    };
    Ok(TTest { t, df, p })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParticipantFit {
    pub participant: u32,
    pub condition: Condition,
    pub fit: PsychometricFit,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Exclusion {
    pub included: Vec<u32>,
    pub excluded: Vec<u32>,
}

/// Drops every participant with at least one unconverged condition fit.
pub fn exclude_unfittable(fits: &[ParticipantFit]) -> Exclusion {
    let mut ok: BTreeMap<u32, bool> = BTreeMap::new();
    for f in fits {
        *ok.entry(f.participant).or_insert(true) &= f.fit.converged;
    }
    let (included, excluded): (Vec<_>, Vec<_>) = ok.into_iter().partition(|&(_, good)| good);
    Exclusion {
        included: included.into_iter().map(|(p, _)| p).collect(),
        excluded: excluded.into_iter().map(|(p, _)| p).collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionSummary {
    pub condition: Condition,
    /// `(participant, threshold)` for included participants, by participant id.
    pub thresholds: Vec<(u32, f64)>,
    pub mean: f64,
    pub sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortStats {
    pub performance: f64,
    pub slow: ConditionSummary,
    pub fast: ConditionSummary,
    pub tail: Tail,
    pub t_statistic: f64,
    pub degrees_of_freedom: f64,
    pub p_value: f64,
    pub n_included: usize,
    pub excluded_ids: Vec<u32>,
}

/// Thresholds at `performance` for every included participant and a paired
/// t-test of fast against slow.
pub fn cohort_stats(fits: &[ParticipantFit], performance: f64, tail: Tail) -> Result<CohortStats> {
    let exclusion = exclude_unfittable(fits);
    let lookup = |p: u32, c: Condition| fits.iter().find(|f| f.participant == p && f.condition == c);
    let mut included = Vec::new();
    let mut excluded = exclusion.excluded.clone();
    for &p in &exclusion.included {
        match (lookup(p, Condition::Slow), lookup(p, Condition::Fast)) {
            (Some(s), Some(f)) => included.push((p, s.fit, f.fit)),
            _ => excluded.push(p),
        }
    }
    excluded.sort_unstable();

    let summarize = |condition: Condition, pick: &dyn Fn(&(u32, PsychometricFit, PsychometricFit)) -> PsychometricFit| {
        let thresholds =
            included.iter().map(|row| Ok((row.0, threshold(&pick(row), performance)?))).collect::<Result<Vec<_>>>()?;
        let values: Vec<f64> = thresholds.iter().map(|t| t.1).collect();
        let (mean, sd) = mean_and_sd(&values);
        Ok::<_, Error>(ConditionSummary { condition, thresholds, mean, sd })
    };
    let slow = summarize(Condition::Slow, &|r| r.1)?;
    let fast = summarize(Condition::Fast, &|r| r.2)?;
    let xs: Vec<f64> = slow.thresholds.iter().map(|t| t.1).collect();
    let ys: Vec<f64> = fast.thresholds.iter().map(|t| t.1).collect();
    let test = paired_t_test(&xs, &ys, tail)?;
    Ok(CohortStats {
        performance,
        n_included: included.len(),
        slow,
        fast,
        tail,
        t_statistic: test.t,
        degrees_of_freedom: test.df,
        p_value: test.p,
        excluded_ids: excluded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::distribution::{ContinuousCDF, StudentsT};

    #[test]
    fn ln_gamma_known_values() {
        assert!(ln_gamma(1.0).abs() < 1e-14);
        assert!(ln_gamma(2.0).abs() < 1e-14);
        assert!((ln_gamma(5.0) - 24f64.ln()).abs() < 1e-13);
        assert!((ln_gamma(0.5) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-14);
        assert!((ln_gamma(171.0) - statrs::function::gamma::ln_gamma(171.0)).abs() < 1e-10);
    }

    #[test]
    fn t_distribution_against_statrs() {
        for df in [1.0, 2.0, 3.0, 5.0, 14.0, 30.0, 120.0] {
            let oracle = StudentsT::new(0.0, 1.0, df).unwrap();
            for i in -60..=60 {
                let t = i as f64 * 0.1;
                assert!((student_t_cdf(t, df) - oracle.cdf(t)).abs() < 1e-9, "df {df} t {t}");
            }
        }
    }

    #[test]
    fn t_distribution_closed_forms() {
        // df = 1 is Cauchy; df = 2 has F(t) = ½ + t / (2√(2 + t²)).
        for t in [-3.0, -0.4, 0.0, 0.7, 2.5, 12.0] {
            let cauchy = 0.5 + (t as f64).atan() / std::f64::consts::PI;
            assert!((student_t_cdf(t, 1.0) - cauchy).abs() < 1e-12);
            let two = 0.5 + t / (2.0 * (2.0 + t * t as f64).sqrt());
            assert!((student_t_cdf(t, 2.0) - two).abs() < 1e-12);
        }
    }

    #[test]
    fn paired_test_basics() {
        let slow = [70.0, 72.0, 65.0, 80.0];
        let fast = [76.0, 75.0, 73.0, 83.0];
        let r = paired_t_test(&slow, &fast, Tail::Greater).unwrap();
        // d = (6, 3, 8, 3): mean 5, sd √6
        let t = 5.0 / (6.0f64.sqrt() / 2.0);
        assert!((r.t - t).abs() < 1e-12);
        assert_eq!(r.df, 3.0);
        let swapped = paired_t_test(&fast, &slow, Tail::Greater).unwrap();
        assert!((swapped.t + r.t).abs() < 1e-12);
        assert!((swapped.p - (1.0 - r.p)).abs() < 1e-12);
        let two = paired_t_test(&slow, &fast, Tail::TwoSided).unwrap();
        assert!((two.p - 2.0 * r.p).abs() < 1e-12);
    }

    #[test]
    fn paired_test_errors() {
        assert!(paired_t_test(&[1.0, 2.0], &[1.0], Tail::Greater).is_err());
        assert!(paired_t_test(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0], Tail::Greater).is_err());
        assert!(paired_t_test(&[1.0], &[2.0], Tail::Greater).is_err());
        let r = paired_t_test(&[0.0, 0.0, 0.0], &[1.0, 1.0 + 1e-9, 1.0 - 1e-9], Tail::Greater).unwrap();
        assert!(r.t > 1e6 && r.p < 1e-12);
    }

    fn pf(participant: u32, condition: Condition, mu: f64, converged: bool) -> ParticipantFit {
        ParticipantFit {
            participant,
            condition,
            fit: PsychometricFit { mu, sigma: 8.0, log_likelihood: -10.0, converged, n_points: 7 },
        }
    }

    #[test]
    fn exclusion_rules() {
        let fits = vec![
            pf(1, Condition::Slow, 70.0, true),
            pf(1, Condition::Fast, 80.0, true),
            pf(2, Condition::Slow, 70.0, true),
            pf(2, Condition::Fast, 80.0, false),
            pf(3, Condition::Slow, 75.0, true),
            pf(3, Condition::Fast, 79.0, true),
        ];
        let e = exclude_unfittable(&fits);
        assert_eq!(e.included, vec![1, 3]);
        assert_eq!(e.excluded, vec![2]);
        let all_ok: Vec<_> = fits.iter().filter(|f| f.participant != 2).copied().collect();
        assert!(exclude_unfittable(&all_ok).excluded.is_empty());

        let stats = cohort_stats(&fits, 0.75, Tail::Greater).unwrap();
        assert_eq!(stats.n_included, 2);
        assert_eq!(stats.excluded_ids, vec![2]);
        assert_eq!(stats.degrees_of_freedom, 1.0);
        assert_eq!(stats.slow.thresholds, vec![(1, 70.0), (3, 75.0)]);
        assert!((stats.fast.mean - 79.5).abs() < 1e-12);
        assert!((0.0..=1.0).contains(&stats.p_value));
    }
}

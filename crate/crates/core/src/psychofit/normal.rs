use std::f64::consts::{PI, SQRT_2};

use crate::error::{Error, Result};

/// Standard normal CDF via the complementary error function; accurate to
/// well under 1e-15 absolute.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / SQRT_2)
}

pub fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

// Acklam's rational approximation, used only as the starting point.
const A: [f64; 6] = [
    -3.969683028665376e+01,
    2.209460984245205e+02,
    -2.759285104469687e+02,
    1.383577518672690e+02,
    -3.066479806614716e+01,
    2.506628277459239e+00,
];
const B: [f64; 5] = [
    -5.447609879822406e+01,
    1.615858368580409e+02,
    -1.556989798598866e+02,
    6.680131188771972e+01,
    -1.328068155288572e+01,
];
const C: [f64; 6] = [
    -7.784894002430293e-03,
    -3.223964580411365e-01,
    -2.400758277161838e+00,
    -2.549671010115349e+00,
    4.374664141464968e+00,
    2.938163982698783e+00,
];
const D: [f64; 4] = [7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00, 3.754408661907416e+00];

fn acklam(p: f64) -> f64 {
    const LOW: f64 = 0.02425;
    if p < LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p > 1.0 - LOW {
        -acklam(1.0 - p)
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    }
}

/// Inverse of [`normal_cdf`]: an approximate start polished by Halley steps on
/// `normal_cdf` itself, with a bisection fallback that keeps the result bracketed.
pub fn normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::invalid(format!("quantile needs p in (0, 1), got {p}")));
    }
    if p == 0.5 {
        return Ok(0.0);
    }
    let mut x = acklam(p);
    for _ in 0..4 {
        let e = normal_cdf(x) - p;
        let density = normal_pdf(x);
        if density == 0.0 {
            break;
        }
        let u = e / density;
        let step = u / (1.0 + 0.5 * x * u);
        x -= step;
        if step.abs() <= 1e-15 * x.abs().max(1.0) {
            break;
        }
    }
    if (normal_cdf(x) - p).abs() > 1e-10 {
        x = bisect(p);
    }
    Ok(x)
}

fn bisect(p: f64) -> f64 {
    let (mut lo, mut hi) = (-40.0, 40.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if normal_cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent oracle: Φ(z) = ½ + φ(z)·Σ z^(2n+1)/(2n+1)!!, all terms positive.
    fn series_cdf(z: f64) -> f64 {
        let mut term = z;
        let mut sum = z;
        let mut k = 1.0;
        while term.abs() > 1e-300 && k < 2000.0 {
            term *= z * z / (2.0 * k + 1.0);
            sum += term;
            if term.abs() < sum.abs() * 1e-18 {
                break;
            }
            k += 1.0;
        }
        0.5 + normal_pdf(z) * sum
    }

    #[test]
    fn centre_and_symmetry() {
        assert_eq!(normal_cdf(0.0), 0.5);
        for i in -80..=80 {
            let z = i as f64 * 0.1;
            assert!((normal_cdf(z) + normal_cdf(-z) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn matches_series_oracle() {
        for i in -800..=800 {
            let z = i as f64 * 0.01;
            assert!((normal_cdf(z) - series_cdf(z)).abs() < 1e-12, "z = {z}");
        }
    }

    #[test]
    fn known_quantile() {
        assert!((normal_cdf(1.6448536269514722) - 0.95).abs() < 1e-9);
        assert!((normal_quantile(0.95).unwrap() - 1.6448536269514722).abs() < 1e-9);
        assert_eq!(normal_quantile(0.5).unwrap(), 0.0);
        assert!(normal_quantile(0.0).is_err());
        assert!(normal_quantile(1.0).is_err());
    }

    #[test]
    fn round_trip() {
        for i in 1..=999 {
            let p = i as f64 / 1000.0;
            let x = normal_quantile(p).unwrap();
            assert!((normal_cdf(x) - p).abs() < 1e-10);
        }
    }
}

//! Psychometric-function plots as standalone SVG.

use std::fmt::Write;

use crate::error::{Error, Result};
use crate::kinematics::Condition;
use crate::psychofit::{psychometric, ResponseRow};

#[derive(Debug, Clone, PartialEq)]
pub struct PfSeries {
    pub participant: u32,
    pub condition: Condition,
    pub mu: f64,
    pub sigma: f64,
    pub converged: bool,
    pub rows: Vec<ResponseRow>,
    /// 75%-correct threshold, drawn as a marker when present.
    pub threshold: Option<f64>,
}

const WIDTH: f64 = 960.0;
const HEIGHT: f64 = 420.0;
const PANEL_W: f64 = 420.0;
const PANEL_H: f64 = 320.0;
const MARGIN_L: f64 = 60.0;
const MARGIN_T: f64 = 40.0;
const PANEL_GAP: f64 = 60.0;
const CURVE_SAMPLES: usize = 120;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace("--", "- -")
}

fn palette(i: usize) -> &'static str {
    const COLORS: [&str; 10] =
        ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"];
    COLORS[i % COLORS.len()]
}

/// Renders one panel per condition (slow left, fast right). `comments` become
/// leading XML comments, one per entry.
pub fn render_pf_svg(series: &[PfSeries], comments: &[String]) -> Result<String> {
    if series.is_empty() {
        return Err(Error::InvalidInput("nothing to plot".into()));
    }
    let levels = series.iter().flat_map(|s| s.rows.iter().map(|r| r.aggressiveness));
    let (mut x_lo, mut x_hi) = levels.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
    if !x_lo.is_finite() {
        x_lo = series.iter().map(|s| s.mu).fold(f64::INFINITY, f64::min) - 10.0;
        x_hi = series.iter().map(|s| s.mu).fold(f64::NEG_INFINITY, f64::max) + 10.0;
    }
    let pad = ((x_hi - x_lo) * 0.05).max(1.0);
    let (x_lo, x_hi) = (x_lo - pad, x_hi + pad);

    let mut out = String::new();
    let w = &mut out;
    writeln!(w, r#"<?xml version="1.0" encoding="UTF-8"?>"#).unwrap();
    for c in comments {
        writeln!(w, "<!-- {} -->", escape(c)).unwrap();
    }
    writeln!(
        w,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    writeln!(w, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();

    for (panel, condition) in Condition::ALL.iter().enumerate() {
        let ox = MARGIN_L + panel as f64 * (PANEL_W + PANEL_GAP);
        let oy = MARGIN_T;
        let px = |x: f64| ox + (x - x_lo) / (x_hi - x_lo) * PANEL_W;
        let py = |p: f64| oy + (1.0 - (p - 0.4) / 0.6) * PANEL_H;

        writeln!(w, r#"<g class="panel" id="panel-{condition}">"#).unwrap();
        writeln!(w, r#"<rect x="{ox:.2}" y="{oy:.2}" width="{PANEL_W}" height="{PANEL_H}" fill="none" stroke="black"/>"#).unwrap();
        writeln!(w, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="14">{condition}</text>"#, ox + PANEL_W / 2.0, oy - 12.0)
            .unwrap();
        for p in [0.5, 0.75, 1.0] {
            writeln!(
                w,
                r##"<line x1="{ox:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#ccc" stroke-dasharray="4 3"/><text x="{:.2}" y="{:.2}" text-anchor="end">{p:.2}</text>"##,
                ox + PANEL_W,
                ox - 6.0,
                py(p) + 4.0,
                y = py(p)
            )
            .unwrap();
        }
        let step = if x_hi - x_lo > 40.0 { 10.0 } else { 5.0 };
        let mut tick = (x_lo / step).ceil() * step;
        while tick <= x_hi {
            writeln!(
                w,
                r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{tick}</text>"#,
                oy + PANEL_H,
                oy + PANEL_H + 5.0,
                oy + PANEL_H + 18.0,
                x = px(tick)
            )
            .unwrap();
            tick += step;
        }
        writeln!(
            w,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">triangles removed (%)</text>"#,
            ox + PANEL_W / 2.0,
            oy + PANEL_H + 36.0
        )
        .unwrap();
        writeln!(
            w,
            r#"<text transform="translate({:.2},{:.2}) rotate(-90)" text-anchor="middle">proportion correct</text>"#,
            ox - 42.0,
            oy + PANEL_H / 2.0
        )
        .unwrap();

        for s in series.iter().filter(|s| s.condition == *condition) {
            let color = palette(s.participant as usize);
            writeln!(w, r#"<g class="participant" data-participant="{}">"#, s.participant).unwrap();
            if s.sigma > 0.0 && s.mu.is_finite() {
                let mut d = String::new();
                for k in 0..=CURVE_SAMPLES {
                    let x = x_lo + (x_hi - x_lo) * k as f64 / CURVE_SAMPLES as f64;
                    let y = psychometric(x, s.mu, s.sigma, 0.0);
                    write!(d, "{}{:.2},{:.2}", if k == 0 { "M" } else { " L" }, px(x), py(y)).unwrap();
                }
                let dash = if s.converged { "" } else { r#" stroke-dasharray="2 3""# };
                writeln!(w, r#"<path class="pf" d="{d}" fill="none" stroke="{color}" stroke-width="1.2"{dash}/>"#).unwrap();
            }
            for r in s.rows.iter().filter(|r| r.n_trials > 0) {
                writeln!(
                    w,
                    r#"<circle class="data" cx="{:.2}" cy="{:.2}" r="2.5" fill="{color}"/>"#,
                    px(r.aggressiveness),
                    py(r.proportion().max(0.4))
                )
                .unwrap();
            }
            if let Some(t) = s.threshold.filter(|t| (x_lo..=x_hi).contains(t)) {
                writeln!(
                    w,
                    r#"<line class="threshold" x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="{color}" stroke-width="2"/>"#,
                    py(0.75) - 6.0,
                    py(0.75) + 6.0,
                    x = px(t)
                )
                .unwrap();
            }
            writeln!(w, "</g>").unwrap();
        }
        writeln!(w, "</g>").unwrap();
    }
    writeln!(w, "</svg>").unwrap();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(condition: Condition, threshold: Option<f64>) -> PfSeries {
        PfSeries {
            participant: 3,
            condition,
            mu: 75.0,
            sigma: 10.0,
            converged: true,
            rows: vec![
                ResponseRow { aggressiveness: 50.0, n_trials: 20, n_correct: 11 },
                ResponseRow { aggressiveness: 95.0, n_trials: 20, n_correct: 19 },
            ],
            threshold,
        }
    }

    #[test]
    fn contains_curves_points_and_markers() {
        let svg = render_pf_svg(
            &[series(Condition::Slow, Some(75.0)), series(Condition::Fast, None)],
            &["seed 1 -- v0".into()],
        )
        .unwrap();
        assert!(svg.contains("<!-- seed 1 - - v0 -->"));
        assert_eq!(svg.matches(r#"class="pf""#).count(), 2);
        assert_eq!(svg.matches(r#"class="data""#).count(), 4);
        assert_eq!(svg.matches(r#"class="threshold""#).count(), 1);
        assert!(svg.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn empty_input_rejected() {
        assert!(render_pf_svg(&[], &[]).is_err());
    }
}

//! Minimal SVG charts on a fixed canvas. Output depends only on the inputs,
//! so reruns produce byte-identical files.

use std::fmt::Write;

use crate::breaks::BreakEstimate;
use crate::counterfactual::ProjectionPoint;
use crate::month::YearMonth;
use crate::robustness::RollingResult;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Marker {
    Circle,
    Triangle,
    Diamond,
}

#[derive(Debug, Clone)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
    /// Per-point `(low, high)` whiskers, aligned with `points`.
    pub whiskers: Option<Vec<(f64, f64)>>,
    pub marker: Marker,
    pub color: &'static str,
}

#[derive(Debug, Clone)]
pub struct Line {
    pub points: Vec<(f64, f64)>,
    pub color: &'static str,
    pub dashed: bool,
}

/// Chart with a month axis: x values are month indices.
#[derive(Debug, Clone, Default)]
pub struct Chart {
    pub title: String,
    pub y_label: String,
    pub series: Vec<Series>,
    pub lines: Vec<Line>,
    pub vlines: Vec<f64>,
    pub bands: Vec<(f64, f64)>,
    pub zero_line: bool,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn nice_step(span: f64, target: usize) -> f64 {
    let raw = span / target as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let norm = raw / mag;
    let step = if norm < 1.5 {
        1.0
    } else if norm < 3.0 {
        2.0
    } else if norm < 7.0 {
        5.0
    } else {
        10.0
    };
    step * mag
}

impl Chart {
    fn bounds(&self) -> (f64, f64, f64, f64) {
        let mut xs: Vec<f64> = Vec::new();
        let mut ys: Vec<f64> = Vec::new();
        for s in &self.series {
            for (i, &(x, y)) in s.points.iter().enumerate() {
                xs.push(x);
                ys.push(y);
                if let Some(w) = &s.whiskers {
                    ys.push(w[i].0);
                    ys.push(w[i].1);
                }
            }
        }
        for l in &self.lines {
            xs.extend(l.points.iter().map(|p| p.0));
            ys.extend(l.points.iter().map(|p| p.1));
        }
        xs.extend(self.vlines.iter().copied());
        for &(a, b) in &self.bands {
            xs.push(a);
            xs.push(b);
        }
        if self.zero_line {
            ys.push(0.0);
        }
        let xs: Vec<f64> = xs.into_iter().filter(|v| v.is_finite()).collect();
        let ys: Vec<f64> = ys.into_iter().filter(|v| v.is_finite()).collect();
        let fold = |v: &[f64]| {
            v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
        };
        let (mut x0, mut x1) = if xs.is_empty() { (0.0, 1.0) } else { fold(&xs) };
        let (mut y0, mut y1) = if ys.is_empty() { (0.0, 1.0) } else { fold(&ys) };
        if x1 - x0 < 1.0 {
            x0 -= 1.0;
            x1 += 1.0;
        }
        if y1 - y0 < 1e-9 {
            y0 -= 1.0;
            y1 += 1.0;
        }
        let pad = (y1 - y0) * 0.05;
        (x0 - 1.0, x1 + 1.0, y0 - pad, y1 + pad)
    }

    pub fn render(&self) -> String {
        let (x0, x1, y0, y1) = self.bounds();
        let pw = WIDTH - LEFT - RIGHT;
        let ph = HEIGHT - TOP - BOTTOM;
        let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
        let sy = |y: f64| TOP + (y1 - y) / (y1 - y0) * ph;
        let mut out = String::new();
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(out, r##"<rect width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>"##);
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
            WIDTH / 2.0,
            escape(&self.title)
        );

        for &(a, b) in &self.bands {
            let (l, r) = (sx(a.min(b)), sx(a.max(b)));
            let _ = writeln!(
                out,
                r##"<rect x="{l:.2}" y="{TOP:.2}" width="{:.2}" height="{ph:.2}" fill="#cccccc" fill-opacity="0.5"/>"##,
                r - l
            );
        }

        // axes and ticks
        let _ = writeln!(
            out,
            r##"<rect x="{LEFT:.2}" y="{TOP:.2}" width="{pw:.2}" height="{ph:.2}" fill="none" stroke="#000000"/>"##
        );
        let ystep = nice_step(y1 - y0, 6);
        let mut y = (y0 / ystep).ceil() * ystep;
        while y <= y1 + 1e-9 {
            let py = sy(y);
            let label = if y.abs() < ystep * 1e-6 { 0.0 } else { y };
            let _ = writeln!(
                out,
                r##"<line x1="{:.2}" y1="{py:.2}" x2="{LEFT:.2}" y2="{py:.2}" stroke="#000000"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"##,
                LEFT - 5.0,
                LEFT - 8.0,
                py + 4.0,
                trim_number(label)
            );
            y += ystep;
        }
        let span_years = (x1 - x0) / 12.0;
        let year_step = nice_step(span_years.max(1.0), 8).max(1.0) as i32;
        let first_year = (x0 / 12.0).ceil() as i32;
        let mut yr = first_year;
        while f64::from(yr * 12) <= x1 {
            if yr % year_step == 0 {
                let px = sx(f64::from(yr * 12));
                let _ = writeln!(
                    out,
                    r##"<line x1="{px:.2}" y1="{:.2}" x2="{px:.2}" y2="{:.2}" stroke="#000000"/><text x="{px:.2}" y="{:.2}" text-anchor="middle">{yr}</text>"##,
                    TOP + ph,
                    TOP + ph + 5.0,
                    TOP + ph + 20.0
                );
            }
            yr += 1;
        }
        let _ = writeln!(
            out,
            r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">{}</text>"#,
            TOP + ph / 2.0,
            TOP + ph / 2.0,
            escape(&self.y_label)
        );

        if self.zero_line && y0 < 0.0 && y1 > 0.0 {
            let py = sy(0.0);
            let _ = writeln!(
                out,
                r##"<line x1="{LEFT:.2}" y1="{py:.2}" x2="{:.2}" y2="{py:.2}" stroke="#888888"/>"##,
                LEFT + pw
            );
        }
        for &v in &self.vlines {
            let px = sx(v);
            let _ = writeln!(
                out,
                r##"<line x1="{px:.2}" y1="{TOP:.2}" x2="{px:.2}" y2="{:.2}" stroke="#b22222" stroke-dasharray="6,4"/>"##,
                TOP + ph
            );
        }
        for l in &self.lines {
            let pts: Vec<String> = l.points.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
            let dash = if l.dashed { r#" stroke-dasharray="4,3""# } else { "" };
            let _ = writeln!(
                out,
                r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="2"{dash}/>"#,
                pts.join(" "),
                l.color
            );
        }
        for s in &self.series {
            for (i, &(x, y)) in s.points.iter().enumerate() {
                if !(x.is_finite() && y.is_finite()) {
                    continue;
                }
                let (px, py) = (sx(x), sy(y));
                if let Some(w) = &s.whiskers {
                    let _ = writeln!(
                        out,
                        r#"<line x1="{px:.2}" y1="{:.2}" x2="{px:.2}" y2="{:.2}" stroke="{}" stroke-opacity="0.6"/>"#,
                        sy(w[i].0),
                        sy(w[i].1),
                        s.color
                    );
                }
                out.push_str(&marker(s.marker, px, py, s.color));
                out.push('\n');
            }
        }
        // legend
        for (k, s) in self.series.iter().enumerate() {
            let lx = LEFT + 10.0 + 160.0 * k as f64;
            let ly = HEIGHT - 15.0;
            out.push_str(&marker(s.marker, lx, ly - 4.0, s.color));
            let _ = writeln!(out, r#"<text x="{:.2}" y="{ly:.2}">{}</text>"#, lx + 10.0, escape(&s.name));
        }
        out.push_str("</svg>\n");
        out
    }
}

fn marker(kind: Marker, x: f64, y: f64, color: &str) -> String {
    match kind {
        Marker::Circle => format!(r#"<circle cx="{x:.2}" cy="{y:.2}" r="3.5" fill="{color}"/>"#),
        Marker::Triangle => format!(
            r#"<polygon points="{:.2},{:.2} {:.2},{:.2} {:.2},{:.2}" fill="{color}"/>"#,
            x,
            y - 5.0,
            x - 4.5,
            y + 3.5,
            x + 4.5,
            y + 3.5
        ),
        Marker::Diamond => format!(
            r#"<polygon points="{:.2},{:.2} {:.2},{:.2} {:.2},{:.2} {:.2},{:.2}" fill="{color}"/>"#,
            x,
            y - 5.0,
            x + 4.5,
            y,
            x,
            y + 5.0,
            x - 4.5,
            y
        ),
    }
}

fn trim_number(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".to_string() } else { s.to_string() }
}

fn mx(m: YearMonth) -> f64 {
    f64::from(m.index())
}

/// OLS line through `pts`, evaluated at its x extremes.
fn ols_segment(pts: &[(f64, f64)]) -> Option<Vec<(f64, f64)>> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let xm = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let ym = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - xm).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - xm) * (p.1 - ym)).sum();
    let b = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let a = ym - b * xm;
    let lo = pts.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let hi = pts.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    Some(vec![(lo, a + b * lo), (hi, a + b * hi)])
}

/// One monthly observation for a raw-data plot.
#[derive(Debug, Clone, Copy)]
pub struct RawPoint {
    pub month: YearMonth,
    pub value: f64,
    pub range: Option<(f64, f64)>,
}

/// Monthly scatter with min/max whiskers, a dashed cutoff line, side-wise
/// linear fits and an optional shaded exclusion window.
pub fn raw_rd_svg(
    title: &str,
    y_label: &str,
    points: &[RawPoint],
    cutoff: YearMonth,
    exclusion: Option<(YearMonth, YearMonth)>,
) -> String {
    let kept = |p: &&RawPoint| exclusion.is_none_or(|(a, b)| p.month < a || p.month > b);
    let whiskers = points.iter().all(|p| p.range.is_some());
    let series = Series {
        name: y_label.to_string(),
        points: points.iter().map(|p| (mx(p.month), p.value)).collect(),
        whiskers: whiskers.then(|| points.iter().map(|p| p.range.unwrap()).collect()),
        marker: Marker::Circle,
        color: "#1f4e79",
    };
    let pre: Vec<(f64, f64)> = points.iter().filter(kept).filter(|p| p.month < cutoff).map(|p| (mx(p.month), p.value)).collect();
    let post: Vec<(f64, f64)> = points.iter().filter(kept).filter(|p| p.month >= cutoff).map(|p| (mx(p.month), p.value)).collect();
    let lines = [ols_segment(&pre), ols_segment(&post)]
        .into_iter()
        .flatten()
        .map(|points| Line { points, color: "#d9822b", dashed: false })
        .collect();
    Chart {
        title: title.to_string(),
        y_label: y_label.to_string(),
        series: vec![series],
        lines,
        vlines: vec![mx(cutoff) - 0.5],
        bands: exclusion.map(|(a, b)| vec![(mx(a) - 0.5, mx(b) + 0.5)]).unwrap_or_default(),
        zero_line: false,
    }
    .render()
}

/// Rolling estimates: triangles where significant, circles elsewhere, with an
/// optional shaded window.
pub fn rolling_svg(title: &str, rolling: &RollingResult<f64>, shade: Option<(YearMonth, YearMonth)>) -> String {
    let pick = |sig: bool| -> Vec<(f64, f64)> {
        rolling
            .entries
            .iter()
            .filter(|e| e.significant_at_05 == sig)
            .filter_map(|e| e.estimate.map(|v| (mx(e.cutoff), v)))
            .collect()
    };
    Chart {
        title: title.to_string(),
        y_label: "RD estimate".to_string(),
        series: vec![
            Series {
                name: "not significant".into(),
                points: pick(false),
                whiskers: None,
                marker: Marker::Circle,
                color: "#555555",
            },
            Series {
                name: "p < 0.05".into(),
                points: pick(true),
                whiskers: None,
                marker: Marker::Triangle,
                color: "#b22222",
            },
        ],
        lines: vec![],
        vlines: vec![],
        bands: shade.map(|(a, b)| vec![(mx(a) - 0.5, mx(b) + 0.5)]).unwrap_or_default(),
        zero_line: true,
    }
    .render()
}

/// Projected (triangles) against actual (diamonds) monthly civilian deaths.
pub fn projection_svg(title: &str, points: &[ProjectionPoint]) -> String {
    Chart {
        title: title.to_string(),
        y_label: "civilian deaths".to_string(),
        series: vec![
            Series {
                name: "projected".into(),
                points: points.iter().map(|p| (mx(p.month), p.projected)).collect(),
                whiskers: None,
                marker: Marker::Triangle,
                color: "#b22222",
            },
            Series {
                name: "actual".into(),
                points: points.iter().map(|p| (mx(p.month), p.actual)).collect(),
                whiskers: None,
                marker: Marker::Diamond,
                color: "#1f4e79",
            },
        ],
        ..Chart::default()
    }
    .render()
}

/// Series with estimated break dates marked and their intervals shaded.
pub fn breaks_svg(title: &str, series: &[(YearMonth, f64)], est: &BreakEstimate<f64>) -> String {
    Chart {
        title: title.to_string(),
        y_label: "monthly value".to_string(),
        series: vec![Series {
            name: "observed".into(),
            points: series.iter().map(|&(m, v)| (mx(m), v)).collect(),
            whiskers: None,
            marker: Marker::Circle,
            color: "#1f4e79",
        }],
        lines: vec![],
        vlines: est.break_months.iter().map(|&m| mx(m) - 0.5).collect(),
        bands: est.ci_per_break.iter().map(|c| (mx(c.low) - 0.5, mx(c.high) + 0.5)).collect(),
        zero_line: false,
    }
    .render()
}

//! Minimal standalone SVG line plots.

use std::fmt::Write as _;

use crate::error::{Error, Result};

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    /// STL EmL outputs versus multipath delay.
    EnvelopeFig1,
    /// VTL EmL outputs versus multipath delay.
    EnvelopeFig2,
    /// Detector I PD versus PFA.
    RocFig3,
    /// Detector II PD versus PFA.
    RocFig4,
    /// Detector metric and threshold versus time.
    TimelineFig6Style,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlotSpec {
    pub kind: PlotKind,
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub x_range: Option<(f64, f64)>,
    pub y_range: Option<(f64, f64)>,
    pub log_x: bool,
}

impl PlotSpec {
    pub fn new(kind: PlotKind, title: impl Into<String>) -> Self {
        let (x, y, log_x) = match kind {
            PlotKind::EnvelopeFig1 | PlotKind::EnvelopeFig2 => ("multipath delay (chips)", "amplitude / A0", false),
            PlotKind::RocFig3 | PlotKind::RocFig4 => ("PFA", "PD", true),
            PlotKind::TimelineFig6Style => ("time (s)", "metric", false),
        };
        let y_range = matches!(kind, PlotKind::RocFig3 | PlotKind::RocFig4).then_some((0.0, 1.0));
        Self {
            kind,
            title: title.into(),
            x_label: x.into(),
            y_label: y.into(),
            x_range: None,
            y_range,
            log_x,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl Series {
    pub fn new(label: impl Into<String>, x: Vec<f64>, y: Vec<f64>) -> Self {
        Self {
            label: label.into(),
            x,
            y,
        }
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn span(values: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    values.filter(|v| v.is_finite()).fold(None, |acc, v| match acc {
        None => Some((v, v)),
        Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
    })
}

fn padded((lo, hi): (f64, f64)) -> (f64, f64) {
    if hi > lo {
        (lo, hi)
    } else {
        (lo - 0.5, hi + 0.5)
    }
}

fn tick_label(v: f64, log: bool) -> String {
    if log {
        format!("1e{}", v.round() as i64)
    } else if v != 0.0 && (v.abs() >= 1e4 || v.abs() < 1e-2) {
        format!("{v:.1e}")
    } else {
        format!("{v:.2}")
    }
}

/// Renders the series as one polyline each on an 800x500 canvas. Points with
/// a non-finite coordinate (or non-positive x on a log axis) are skipped.
pub fn render_svg(spec: &PlotSpec, series: &[Series]) -> Result<String> {
    for s in series {
        if s.x.len() != s.y.len() {
            return Err(Error::invalid("series", format!("{}: x and y lengths differ", s.label)));
        }
    }
    let tx = |x: f64| if spec.log_x { x.log10() } else { x };
    let usable = |x: f64, y: f64| tx(x).is_finite() && y.is_finite();
    let points = || {
        series
            .iter()
            .flat_map(|s| s.x.iter().zip(&s.y).map(|(&x, &y)| (x, y)))
            .filter(|&(x, y)| usable(x, y))
    };
    let (x0, x1) = padded(
        spec.x_range
            .map(|(a, b)| (tx(a), tx(b)))
            .or_else(|| span(points().map(|(x, _)| tx(x))))
            .unwrap_or((0.0, 1.0)),
    );
    let (y0, y1) = padded(spec.y_range.or_else(|| span(points().map(|(_, y)| y))).unwrap_or((0.0, 1.0)));
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let px = |x: f64| LEFT + (tx(x) - x0) / (x1 - x0) * pw;
    let py = |y: f64| TOP + (y1 - y) / (y1 - y0) * ph;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {WIDTH} {HEIGHT}" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        LEFT + pw / 2.0,
        escape(&spec.title)
    );
    let _ = writeln!(
        svg,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    for k in 0..=5 {
        let f = k as f64 / 5.0;
        let xv = x0 + f * (x1 - x0);
        let xp = LEFT + f * pw;
        let yv = y0 + f * (y1 - y0);
        let yp = TOP + (1.0 - f) * ph;
        let _ = writeln!(
            svg,
            r##"<line x1="{xp:.2}" y1="{TOP}" x2="{xp:.2}" y2="{:.2}" stroke="#dddddd"/><text x="{xp:.2}" y="{:.2}" text-anchor="middle">{}</text>"##,
            TOP + ph,
            TOP + ph + 18.0,
            tick_label(xv, spec.log_x)
        );
        let _ = writeln!(
            svg,
            r##"<line x1="{LEFT}" y1="{yp:.2}" x2="{:.2}" y2="{yp:.2}" stroke="#dddddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"##,
            LEFT + pw,
            LEFT - 6.0,
            yp + 4.0,
            tick_label(yv, false)
        );
    }
    let _ = writeln!(
        svg,
        r#"<text class="x-label" x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 16.0,
        escape(&spec.x_label)
    );
    let _ = writeln!(
        svg,
        r#"<text class="y-label" x="20" y="{:.2}" text-anchor="middle" transform="rotate(-90 20 {:.2})">{}</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0,
        escape(&spec.y_label)
    );
    for (i, s) in series.iter().enumerate() {
        let colour = PALETTE[i % PALETTE.len()];
        let mut pts = String::new();
        for (&x, &y) in s.x.iter().zip(&s.y) {
            if usable(x, y) {
                let _ = write!(pts, "{:.2},{:.2} ", px(x), py(y));
            }
        }
        let _ = writeln!(
            svg,
            r#"<polyline data-label="{}" fill="none" stroke="{colour}" stroke-width="1.5" points="{}"/>"#,
            escape(&s.label),
            pts.trim_end()
        );
        let ly = TOP + 16.0 + 18.0 * i as f64;
        let lx = WIDTH - RIGHT + 12.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{colour}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#,
            lx + 20.0,
            lx + 26.0,
            ly + 4.0,
            escape(&s.label)
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

//! Minimal SVG line charts for RMSE-versus-SNR curves.

use std::fmt::Write;

use crate::estimator::EstimatorKind;
use crate::montecarlo::{RmseRecord, SweepResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Marker {
    Circle,
    Square,
    Triangle,
    Diamond,
}

impl Marker {
    pub fn for_index(i: usize) -> Self {
        [Marker::Circle, Marker::Square, Marker::Triangle, Marker::Diamond][i % 4]
    }

    fn svg(self, x: f64, y: f64, color: &str) -> String {
        let r = 3.5;
        match self {
            Marker::Circle => format!(r#"<circle cx="{x:.2}" cy="{y:.2}" r="{r}" fill="{color}"/>"#),
            Marker::Square => format!(
                r#"<rect x="{:.2}" y="{:.2}" width="{}" height="{}" fill="{color}"/>"#,
                x - r,
                y - r,
                2.0 * r,
                2.0 * r
            ),
            Marker::Triangle => format!(
                r#"<polygon points="{:.2},{:.2} {:.2},{:.2} {:.2},{:.2}" fill="{color}"/>"#,
                x,
                y - r,
                x - r,
                y + r,
                x + r,
                y + r
            ),
            Marker::Diamond => format!(
                r#"<polygon points="{:.2},{:.2} {:.2},{:.2} {:.2},{:.2} {:.2},{:.2}" fill="{color}"/>"#,
                x,
                y - r,
                x + r,
                y,
                x,
                y + r,
                x - r,
                y
            ),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    /// `None` values break the line.
    pub points: Vec<(f64, Option<f64>)>,
    pub dashed: bool,
    pub marker: Marker,
    pub color: &'static str,
}

#[derive(Debug, Clone)]
pub struct LineChart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    /// Logarithmic y axis; non-positive values are dropped.
    pub log_y: bool,
    pub series: Vec<Series>,
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

impl LineChart {
    fn y_value(&self, v: f64) -> Option<f64> {
        match self.log_y {
            true if v > 0.0 => Some(v.log10()),
            true => None,
            false => v.is_finite().then_some(v),
        }
    }

    pub fn to_svg(&self) -> String {
        let xs = self.series.iter().flat_map(|s| s.points.iter().map(|p| p.0));
        let ys = self
            .series
            .iter()
            .flat_map(|s| s.points.iter().filter_map(|p| p.1.and_then(|v| self.y_value(v))));
        let (x0, x1) = bounds(xs).unwrap_or((0.0, 1.0));
        let (mut y0, mut y1) = bounds(ys).unwrap_or((0.0, 1.0));
        if self.log_y {
            y0 = y0.floor();
            y1 = y1.ceil().max(y0 + 1.0);
        }
        let pw = WIDTH - LEFT - RIGHT;
        let ph = HEIGHT - TOP - BOTTOM;
        let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
        let sy = |y: f64| TOP + (y1 - y) / (y1 - y0) * ph;

        let mut svg = String::new();
        let _ = writeln!(
            svg,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
            LEFT + pw / 2.0,
            escape(&self.title)
        );
        let _ = writeln!(
            svg,
            r##"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="#333"/>"##
        );

        for i in 0..=5 {
            let x = x0 + (x1 - x0) * i as f64 / 5.0;
            let _ = writeln!(
                svg,
                r##"<line x1="{0:.2}" y1="{TOP}" x2="{0:.2}" y2="{1}" stroke="#ddd"/><text x="{0:.2}" y="{2}" text-anchor="middle">{3}</text>"##,
                sx(x),
                TOP + ph,
                TOP + ph + 16.0,
                tick(x)
            );
        }
        let y_ticks: Vec<f64> = if self.log_y {
            (y0 as i32..=y1 as i32).map(f64::from).collect()
        } else {
            (0..=5).map(|i| y0 + (y1 - y0) * i as f64 / 5.0).collect()
        };
        for y in y_ticks {
            let label = if self.log_y { format!("1e{}", y as i32) } else { tick(y) };
            let _ = writeln!(
                svg,
                r##"<line x1="{LEFT}" y1="{0:.2}" x2="{1}" y2="{0:.2}" stroke="#ddd"/><text x="{2}" y="{3:.2}" text-anchor="end">{label}</text>"##,
                sy(y),
                LEFT + pw,
                LEFT - 6.0,
                sy(y) + 4.0
            );
        }
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{}" text-anchor="middle">{}</text>"#,
            LEFT + pw / 2.0,
            HEIGHT - 12.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            svg,
            r#"<text transform="translate(18 {:.1}) rotate(-90)" text-anchor="middle">{}</text>"#,
            TOP + ph / 2.0,
            escape(&self.y_label)
        );

        for (i, s) in self.series.iter().enumerate() {
            let dash = if s.dashed { r#" stroke-dasharray="6 4""# } else { "" };
            let mut run: Vec<(f64, f64)> = Vec::new();
            let flush = |run: &mut Vec<(f64, f64)>, svg: &mut String| {
                if run.len() > 1 {
                    let pts: Vec<String> = run.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
                    let _ = writeln!(
                        svg,
                        r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="1.6"{dash}/>"#,
                        pts.join(" "),
                        s.color
                    );
                }
                run.clear();
            };
            for &(x, v) in &s.points {
                match v.and_then(|v| self.y_value(v)) {
                    Some(y) => {
                        let (px, py) = (sx(x), sy(y));
                        run.push((px, py));
                        svg.push_str(&s.marker.svg(px, py, s.color));
                        svg.push('\n');
                    }
                    None => flush(&mut run, &mut svg),
                }
            }
            flush(&mut run, &mut svg);

            let ly = TOP + 10.0 + 18.0 * i as f64;
            let lx = WIDTH - RIGHT + 12.0;
            let _ = writeln!(
                svg,
                r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{}" stroke-width="1.6"{dash}/>{}<text x="{}" y="{}">{}</text>"#,
                lx + 28.0,
                s.color,
                s.marker.svg(lx + 14.0, ly, s.color),
                lx + 34.0,
                ly + 4.0,
                escape(&s.label)
            );
        }
        svg.push_str("</svg>\n");
        svg
    }
}

fn bounds(values: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        return None;
    }
    if hi - lo < 1e-12 {
        return Some((lo - 0.5, hi + 0.5));
    }
    Some((lo, hi))
}

fn tick(v: f64) -> String {
    let s = format!("{v:.3}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

/// Metrics plotted by [`sweep_charts`]: file stem, axis label, accessor.
pub type Metric = (&'static str, &'static str, fn(&RmseRecord) -> Option<f64>);

pub const METRICS: [Metric; 4] = [
    ("rmse_aoa", "RMSE azimuth [deg]", |r| r.aoa_deg.rmse()),
    ("rmse_eoa", "RMSE elevation [deg]", |r| r.eoa_deg.rmse()),
    ("rmse_delay", "RMSE normalized delay", |r| r.delay.rmse()),
    ("rmse_power", "RMSE normalized power [dB]", |r| r.power_db.rmse()),
];

/// One chart per metric: solid CCR and dashed CML curves, one color and
/// marker per path. Non-finite SNR points are left out.
pub fn sweep_charts(sweep: &SweepResult) -> Vec<(&'static str, LineChart)> {
    let mut snrs: Vec<f64> = sweep.records.iter().map(|r| r.snr_db).filter(|s| s.is_finite()).collect();
    snrs.sort_by(f64::total_cmp);
    snrs.dedup();
    let mut kinds: Vec<EstimatorKind> = sweep.records.iter().map(|r| r.estimator).collect();
    kinds.sort_by_key(|k| std::cmp::Reverse(*k));
    kinds.dedup();
    let paths = sweep.records.iter().map(|r| r.path).max().unwrap_or(0);

    METRICS
        .iter()
        .map(|&(stem, label, metric)| {
            let mut series = Vec::new();
            for &kind in &kinds {
                for path in 1..=paths {
                    let points: Vec<(f64, Option<f64>)> = snrs
                        .iter()
                        .map(|&s| (s, sweep.record(kind, s, path).and_then(metric)))
                        .collect();
                    if points.iter().all(|p| p.1.is_none()) {
                        continue;
                    }
                    series.push(Series {
                        label: format!("{} path {path}", kind.as_str().to_uppercase()),
                        points,
                        dashed: kind == EstimatorKind::Cml,
                        marker: Marker::for_index(path - 1),
                        color: PALETTE[(path - 1) % PALETTE.len()],
                    });
                }
            }
            let chart = LineChart {
                title: label.replace("RMSE ", "RMSE of ").to_string(),
                x_label: "SNR [dB]".into(),
                y_label: label.into(),
                log_y: true,
                series,
            };
            (stem, chart)
        })
        .collect()
}

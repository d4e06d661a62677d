//! Minimal SVG line charts rendered from experiment CSV text.
//!
//! Rendering reads only the CSV, so regenerating a plot from the same CSV
//! always yields the same bytes.

use std::fmt::Write;

use super::ExperimentKind;
use crate::error::{Error, Result};

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 190.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

struct Parsed {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

fn parse(csv: &str) -> Result<Parsed> {
    let mut lines = csv.lines().filter(|l| !l.starts_with('#') && !l.is_empty());
    let header = lines
        .next()
        .ok_or_else(|| Error::Config("empty CSV".into()))?
        .split(',')
        .map(str::to_string)
        .collect::<Vec<_>>();
    let rows = lines.map(|l| l.split(',').map(str::to_string).collect()).collect();
    Ok(Parsed { header, rows })
}

impl Parsed {
    fn col(&self, name: &str) -> Result<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Config(format!("CSV lacks column {name}")))
    }
}

struct Series {
    label: String,
    points: Vec<(f64, f64)>,
}

fn num(s: &str) -> Option<f64> {
    s.parse::<f64>().ok().filter(|v| v.is_finite())
}

fn series_by_column(p: &Parsed, x: &str, ys: &[(&str, &str)]) -> Result<Vec<Series>> {
    let xi = p.col(x)?;
    ys.iter()
        .map(|&(col, label)| {
            let yi = p.col(col)?;
            let points = p.rows.iter().filter_map(|r| Some((num(&r[xi])?, num(&r[yi])?))).collect();
            Ok(Series { label: label.to_string(), points })
        })
        .collect()
}

fn series_by_group(p: &Parsed, group: &str, x: &str, y: &str) -> Result<Vec<Series>> {
    let (gi, xi, yi) = (p.col(group)?, p.col(x)?, p.col(y)?);
    let mut out: Vec<Series> = Vec::new();
    for r in &p.rows {
        let Some(pt) = num(&r[xi]).zip(num(&r[yi])) else { continue };
        match out.iter_mut().find(|s| s.label == r[gi]) {
            Some(s) => s.points.push(pt),
            None => out.push(Series { label: r[gi].clone(), points: vec![pt] }),
        }
    }
    Ok(out)
}

fn nice_ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = (hi - lo).max(1e-12);
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| span / s <= 6.0).unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|i| i as f64 * step).collect()
}

fn tick_label(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.to_string() }
}

fn render(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let all: Vec<(f64, f64)> = series.iter().flat_map(|s| s.points.iter().copied()).collect();
    let (mut x0, mut x1, mut y0, mut y1) = all.iter().fold(
        (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY),
        |(a, b, c, d), &(x, y)| (a.min(x), b.max(x), c.min(y), d.max(y)),
    );
    if all.is_empty() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    y0 = y0.min(0.0);
    if y1 <= y0 {
        y1 = y0 + 1.0;
    }
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| TOP + ph - (y - y0) / (y1 - y0) * ph;

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{title}</text>"#, LEFT + pw / 2.0);
    for t in nice_ticks(x0, x1) {
        let x = sx(t);
        let _ = writeln!(out, r##"<line x1="{x:.2}" y1="{TOP}" x2="{x:.2}" y2="{:.2}" stroke="#e6e6e6"/>"##, TOP + ph);
        let _ = writeln!(out, r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, TOP + ph + 18.0, tick_label(t));
    }
    for t in nice_ticks(y0, y1) {
        let y = sy(t);
        let _ = writeln!(out, r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#e6e6e6"/>"##, LEFT + pw);
        let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#, LEFT - 6.0, y + 4.0, tick_label(t));
    }
    let _ = writeln!(out, r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);
    let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{x_label}</text>"#, LEFT + pw / 2.0, HEIGHT - 18.0);
    let _ = writeln!(
        out,
        r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">{y_label}</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0
    );
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = s.points.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        let _ = writeln!(out, r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#, pts.join(" "));
        let ly = TOP + 10.0 + 20.0 * i as f64;
        let lx = LEFT + pw + 12.0;
        let _ = writeln!(out, r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/>"#, lx + 24.0);
        let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}">{}</text>"#, lx + 30.0, ly + 4.0, s.label);
    }
    out.push_str("</svg>\n");
    out
}

/// Render the chart for an experiment's CSV.
pub fn render_svg(kind: ExperimentKind, csv: &str) -> Result<String> {
    let p = parse(csv)?;
    Ok(match kind {
        ExperimentKind::RateRegion => render(
            "Two-user rate region",
            "cell-center rate [bit/symbol]",
            "cell-edge rate [bit/symbol]",
            &series_by_group(&p, "curve", "r_center", "r_edge")?,
        ),
        ExperimentKind::SumRateVsM2User => render(
            "Maximum two-user sum rate",
            "antennas M",
            "sum rate [bit/symbol]",
            &series_by_column(&p, "M", &[("r_max_noma", "NOMA"), ("r_max_mmimo", "massive MIMO")])?,
        ),
        ExperimentKind::SumRateVsK => render(
            "Average sum rate vs users",
            "users K",
            "sum rate [bit/symbol]",
            &series_by_column(&p, "K", &[("avg_sum_noma", "NOMA"), ("avg_sum_mmimo", "massive MIMO")])?,
        ),
        ExperimentKind::SumRateVsM => render(
            "Average sum rate vs antennas",
            "antennas M",
            "sum rate [bit/symbol]",
            &series_by_column(&p, "M", &[("avg_sum_noma", "NOMA"), ("avg_sum_mmimo", "massive MIMO")])?,
        ),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const CSV: &str = "# schema_version=1\nM,r_max_noma,r_max_mmimo,p1_mmimo,p2_mmimo,mmimo_ahead\n3,6.4,4.9,1,0,0\n4,6.8,5.8,1,0,0\n";

    #[test]
    fn renders_deterministically() {
        let a = render_svg(ExperimentKind::SumRateVsM2User, CSV).unwrap();
        let b = render_svg(ExperimentKind::SumRateVsM2User, CSV).unwrap();
        assert_eq!(a, b);
        assert!(a.starts_with("<svg"));
        assert_eq!(a.matches("<polyline").count(), 2);
    }

    #[test]
    fn missing_column_is_an_error() {
        assert!(render_svg(ExperimentKind::SumRateVsK, CSV).is_err());
    }

    #[test]
    fn ticks() {
        assert_eq!(nice_ticks(0.0, 10.0), vec![0.0, 2.0, 4.0, 6.0, 8.0, 10.0]);
        assert_eq!(tick_label(0.5), "0.5");
    }
}

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{SweepReport, SweepRow};
use crate::error::Result;

pub const CSV_HEADER: &str = "parameter,measured_wp,coupling_bound,theoretical_bound,terms,seed";

/// Rows as CSV; an unknown theoretical bound is an empty field.
pub fn report_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in rows {
        let theory = r.theoretical_bound.map(|t| t.to_string()).unwrap_or_default();
        let _ = writeln!(s, "{},{},{},{},{},{}", r.parameter, r.measured_wp, r.coupling_bound, theory, r.terms, r.seed);
    }
    s
}

/// A polyline in the plot.
#[derive(Debug, Clone)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
    pub dashed: bool,
}

const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// Log-log line plot. Nonpositive points are dropped.
pub fn plot_svg(title: &str, xlabel: &str, series: &[Series]) -> String {
    let (w, h, m) = (640.0, 440.0, 60.0);
    let pts = || series.iter().flat_map(|s| s.points.iter()).filter(|(x, y)| *x > 0.0 && *y > 0.0);
    let range = |f: fn(&(f64, f64)) -> f64| {
        let (lo, hi) =
            pts().map(|p| f(p).log10()).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        if lo.is_finite() {
            let pad = ((hi - lo) * 0.05).max(0.05);
            (lo - pad, hi + pad)
        } else {
            (-1.0, 0.0)
        }
    };
    let (x0, x1) = range(|p| p.0);
    let (y0, y1) = range(|p| p.1);
    let sx = |x: f64| m + (x.log10() - x0) / (x1 - x0) * (w - 2.0 * m);
    let sy = |y: f64| h - m - (y.log10() - y0) / (y1 - y0) * (h - 2.0 * m);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#, w / 2.0, escape(title));
    let _ = writeln!(
        s,
        r#"<rect x="{m}" y="{m}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        w - 2.0 * m,
        h - 2.0 * m
    );
    for e in (x0.ceil() as i32)..=(x1.floor() as i32) {
        let x = sx(10f64.powi(e));
        let _ = writeln!(
            s,
            r#"<line x1="{x:.2}" y1="{}" x2="{x:.2}" y2="{}" stroke="black"/><text x="{x:.2}" y="{}" text-anchor="middle">1e{e}</text>"#,
            h - m,
            h - m + 5.0,
            h - m + 18.0
        );
    }
    for e in (y0.ceil() as i32)..=(y1.floor() as i32) {
        let y = sy(10f64.powi(e));
        let _ = writeln!(
            s,
            r#"<line x1="{}" y1="{y:.2}" x2="{m}" y2="{y:.2}" stroke="black"/><text x="{}" y="{:.2}" text-anchor="end">1e{e}</text>"#,
            m - 5.0,
            m - 8.0,
            y + 4.0
        );
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, w / 2.0, h - 15.0, escape(xlabel));
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">W_p</text>"#,
        h / 2.0,
        h / 2.0
    );
    for (i, ser) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let mut p: Vec<(f64, f64)> = ser.points.iter().copied().filter(|(x, y)| *x > 0.0 && *y > 0.0).collect();
        p.sort_by(|a, b| a.0.total_cmp(&b.0));
        let coords: Vec<String> = p.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        let dash = if ser.dashed { r#" stroke-dasharray="6 4""# } else { "" };
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"{dash}/>"#,
            coords.join(" ")
        );
        if !ser.dashed {
            for &(x, y) in &p {
                let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#, sx(x), sy(y));
            }
        }
        let ly = m + 16.0 + 16.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="1.5"{dash}/><text x="{}" y="{}">{}</text>"#,
            w - m - 150.0,
            w - m - 125.0,
            w - m - 120.0,
            ly + 4.0,
            escape(&ser.name)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Measured distances per label plus the bound of each asserted label.
pub fn report_series(report: &SweepReport) -> Vec<Series> {
    let mut labels: Vec<&str> = Vec::new();
    for r in &report.rows {
        if !labels.contains(&r.label.as_str()) {
            labels.push(&r.label);
        }
    }
    let mut out = Vec::new();
    for l in labels {
        let rows: Vec<&SweepRow> = report.rows.iter().filter(|r| r.label == l).collect();
        out.push(Series {
            name: format!("{l} W_p"),
            points: rows.iter().map(|r| (r.parameter, r.measured_wp)).collect(),
            dashed: false,
        });
        let bound: Vec<(f64, f64)> =
            rows.iter().filter_map(|r| r.theoretical_bound.map(|t| (r.parameter, t))).collect();
        if !bound.is_empty() {
            out.push(Series { name: format!("{l} bound"), points: bound, dashed: true });
        }
    }
    out
}

/// Write `report.csv`, `report.json` and `plot.svg` into `dir`.
pub fn write_report(report: &SweepReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("report.csv"), report_csv(&report.rows))?;
    fs::write(dir.join("report.json"), serde_json::to_string_pretty(report)?)?;
    let xlabel = if report.kind.contains("-h") || report.kind == "tail" { "h" } else { "N" };
    fs::write(dir.join("plot.svg"), plot_svg(&report.kind, xlabel, &report_series(report)))?;
    Ok(())
}

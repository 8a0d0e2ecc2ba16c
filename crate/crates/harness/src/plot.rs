//! SVG chart of cumulative regret against the round index, one polyline per
//! run listed in a summary CSV. Curves are read from the per-round files next
//! to the summary; runs written with `--summary-only` are drawn as a dashed
//! segment from the origin to their final regret.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{io_err, HarnessError, Result};
use crate::runner::rounds_path;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 220.0;
const TOP: f64 = 20.0;
const BOTTOM: f64 = 50.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub dashed: bool,
}

fn config_err(path: &Path, e: impl std::fmt::Display) -> HarnessError {
    HarnessError::Config(format!("{}: {e}", path.display()))
}

/// Reads the series referenced by a summary CSV.
pub fn load_series(summary: &Path) -> Result<Vec<Series>> {
    let text = std::fs::read_to_string(summary).map_err(|e| config_err(summary, e))?;
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    let dir = summary.parent().unwrap_or(Path::new("."));
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let headers = r.headers().map_err(|e| config_err(summary, e))?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| config_err(summary, format!("missing column {name}")))
    };
    let (ie, is, it, ir) = (col("experiment")?, col("seed")?, col("T")?, col("final_regret")?);
    let mut series = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| config_err(summary, e))?;
        let experiment = rec[ie].to_string();
        let seed: u64 = rec[is].parse().map_err(|e| config_err(summary, e))?;
        let label = format!("{experiment} seed {seed}");
        let rounds = rounds_path(dir, &experiment, seed);
        if rounds.exists() {
            series.push(Series {
                label,
                points: read_curve(&rounds)?,
                dashed: false,
            });
        } else {
            let t: f64 = rec[it].parse().map_err(|e| config_err(summary, e))?;
            let regret: f64 = rec[ir].parse().map_err(|e| config_err(summary, e))?;
            series.push(Series {
                label,
                points: vec![(0.0, 0.0), (t, regret)],
                dashed: true,
            });
        }
    }
    Ok(series)
}

fn read_curve(path: &Path) -> Result<Vec<(f64, f64)>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| config_err(path, e))?;
    let headers = r.headers().map_err(|e| config_err(path, e))?.clone();
    let it = headers.iter().position(|h| h == "t").ok_or_else(|| config_err(path, "missing column t"))?;
    let ir = headers
        .iter()
        .position(|h| h == "cum_regret")
        .ok_or_else(|| config_err(path, "missing column cum_regret"))?;
    let mut pts = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| config_err(path, e))?;
        let t: f64 = rec[it].parse().map_err(|e| config_err(path, e))?;
        let v: f64 = rec[ir].parse().map_err(|e| config_err(path, e))?;
        pts.push((t, v));
    }
    Ok(pts)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn render_svg(series: &[Series]) -> String {
    let all = series.iter().flat_map(|s| s.points.iter());
    let (mut x_max, mut y_min, mut y_max) = (1.0f64, 0.0f64, 1.0f64);
    for &(x, y) in all {
        x_max = x_max.max(x);
        y_min = y_min.min(y);
        y_max = y_max.max(y);
    }
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + x / x_max * pw;
    let sy = |y: f64| TOP + (y_max - y) / (y_max - y_min) * ph;

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let (x0, x1, y0, y1) = (LEFT, LEFT + pw, TOP + ph, TOP);
    let _ = writeln!(out, r#"<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>"#);
    let _ = writeln!(out, r#"<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>"#);
    for k in 0..=4 {
        let f = k as f64 / 4.0;
        let (xv, yv) = (f * x_max, y_min + f * (y_max - y_min));
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            sx(xv),
            y0 + 18.0,
            fmt_tick(xv)
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
            x0 - 6.0,
            sy(yv) + 4.0,
            fmt_tick(yv)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">round t</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 10.0
    );
    let _ = writeln!(
        out,
        r#"<text x="15" y="{:.1}" text-anchor="middle" transform="rotate(-90 15 {:.1})">cumulative regret</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0
    );

    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = s
            .points
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let dash = if s.dashed { r#" stroke-dasharray="6 4""# } else { "" };
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5"{dash} points="{}"/>"#,
            pts.join(" ")
        );
        let ly = TOP + 10.0 + 18.0 * i as f64;
        let lx = WIDTH - RIGHT + 15.0;
        let _ = writeln!(
            out,
            r#"<g class="legend"><line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"{dash}/><text x="{}" y="{}">{}</text></g>"#,
            lx + 20.0,
            lx + 26.0,
            ly + 4.0,
            escape(&s.label)
        );
    }
    out.push_str("</svg>\n");
    out
}

fn fmt_tick(v: f64) -> String {
    if v.abs() >= 1e4 || (v != 0.0 && v.abs() < 1e-2) {
        format!("{v:.1e}")
    } else {
        format!("{}", (v * 100.0).round() / 100.0)
    }
}

pub fn plot(summary: &Path, out: &Path) -> Result<usize> {
    let series = load_series(summary)?;
    std::fs::write(out, render_svg(&series)).map_err(|e| io_err(out, e))?;
    Ok(series.len())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_input_gives_axes_only() {
        let svg = render_svg(&[]);
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches("<polyline").count(), 0);
        assert_eq!(svg.matches("<line").count(), 2);
    }

    #[test]
    fn one_polyline_and_legend_entry_per_series() {
        let s = |label: &str| Series {
            label: label.into(),
            points: vec![(1.0, 0.5), (2.0, 1.5), (3.0, 1.0)],
            dashed: false,
        };
        let svg = render_svg(&[s("a seed 1"), s("b <2>")]);
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert_eq!(svg.matches(r#"class="legend""#).count(), 2);
        assert!(svg.contains("b &lt;2&gt;"));
    }
}

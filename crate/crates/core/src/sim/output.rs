//! CSV tables and SVG plots of sweep results.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::sweep::SweepResult;
use crate::error::{Error, Result};

pub const CSV_HEADER: [&str; 6] = ["noise_level", "median", "mean", "q25", "q75", "failures"];

fn io(e: impl std::fmt::Display) -> Error {
    Error::Io(e.to_string())
}

pub fn csv_string(result: &SweepResult) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER).map_err(io)?;
    for r in &result.rows {
        w.write_record([
            r.noise_level.to_string(),
            r.median.to_string(),
            r.mean.to_string(),
            r.q25.to_string(),
            r.q75.to_string(),
            r.failures.to_string(),
        ])
        .map_err(io)?;
    }
    String::from_utf8(w.into_inner().map_err(io)?).map_err(io)
}

pub fn write_csv(result: &SweepResult, path: &Path) -> Result<()> {
    std::fs::write(path, csv_string(result)?).map_err(io)
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

/// Median error against noise level, one polyline per series, with the
/// interquartile band drawn as error bars.
pub fn svg_string(series: &[&SweepResult], title: &str) -> String {
    let (w, h) = (640.0, 420.0);
    let (left, right, top, bottom) = (70.0, 170.0, 40.0, 50.0);
    let pw = w - left - right;
    let ph = h - top - bottom;
    let finite = |v: f64| v.is_finite();
    let xs = series.iter().flat_map(|s| s.rows.iter().map(|r| r.noise_level));
    let ys = series.iter().flat_map(|s| s.rows.iter().flat_map(|r| [r.median, r.q75]));
    let xmax = xs.filter(|v| finite(*v)).fold(0.0f64, f64::max).max(1e-12);
    let ymax = ys.filter(|v| finite(*v)).fold(0.0f64, f64::max).max(1e-12);
    let px = |x: f64| left + pw * x / xmax;
    let py = |y: f64| top + ph * (1.0 - y / ymax);

    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" font-family="sans-serif" font-size="14" text-anchor="middle">{}</text>"#, left + pw / 2.0, escape(title));
    let _ = writeln!(s, r#"<g stroke="black" stroke-width="1" fill="none"><rect x="{left}" y="{top}" width="{pw}" height="{ph}"/></g>"#);
    for i in 0..=5 {
        let fx = xmax * i as f64 / 5.0;
        let fy = ymax * i as f64 / 5.0;
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="10" text-anchor="middle">{}</text>"#, px(fx), top + ph + 16.0, tick(fx));
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="10" text-anchor="end">{}</text>"#, left - 6.0, py(fy) + 3.0, tick(fy));
    }
    let xlabel = series.first().map(|r| format!("noise ({})", r.noise_kind.unit())).unwrap_or_else(|| "noise".into());
    let ylabel = series.first().map(|r| r.experiment.error_label()).unwrap_or("error");
    let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="12" text-anchor="middle">{}</text>"#, left + pw / 2.0, h - 12.0, escape(&xlabel));
    let _ = writeln!(s, r#"<text x="16" y="{:.2}" font-family="sans-serif" font-size="12" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#, top + ph / 2.0, top + ph / 2.0, escape(ylabel));

    for (k, result) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let pts: Vec<String> = result
            .rows
            .iter()
            .filter(|r| finite(r.median))
            .map(|r| format!("{:.2},{:.2}", px(r.noise_level), py(r.median)))
            .collect();
        let _ = writeln!(s, r#"<g class="series" data-preset="{}">"#, escape(&result.preset));
        let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, pts.join(" "));
        for r in result.rows.iter().filter(|r| finite(r.q25) && finite(r.q75)) {
            let x = px(r.noise_level);
            let _ = writeln!(s, r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="{color}" stroke-width="1"/>"#, py(r.q25), py(r.q75));
        }
        let ly = top + 14.0 + 18.0 * k as f64;
        let lx = left + pw + 12.0;
        let _ = writeln!(s, r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/>"#, lx + 20.0);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="11">{}</text>"#, lx + 26.0, ly + 4.0, escape(&result.preset));
        let _ = writeln!(s, "</g>");
    }
    s.push_str("</svg>\n");
    s
}

fn tick(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 0.01 && v.abs() < 1e4 {
        format!("{v:.3}")
    } else {
        format!("{v:.2e}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

pub fn write_svg(series: &[&SweepResult], title: &str, path: &Path) -> Result<()> {
    std::fs::write(path, svg_string(series, title)).map_err(io)
}

/// Writes `<stem>_<preset>.csv` for each series and `<stem>.svg` holding all
/// of them. Returns the paths written.
pub fn emit_outputs(series: &[SweepResult], dir: &Path, stem: &str) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(io)?;
    let mut paths = Vec::new();
    for r in series {
        let p = dir.join(format!("{stem}_{}.csv", r.preset));
        write_csv(r, &p)?;
        paths.push(p);
    }
    let p = dir.join(format!("{stem}.svg"));
    let refs: Vec<&SweepResult> = series.iter().collect();
    write_svg(&refs, stem, &p)?;
    paths.push(p);
    Ok(paths)
}

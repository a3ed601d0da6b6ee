//! Output artifacts: CSV tables, JSON manifests and hand-rolled SVG plots.
//!
//! Floats are written in shortest round-trip form, so reruns with the same
//! configuration produce byte-identical files.

use anyhow::{Context, Result};
use serde::Serialize;
use std::fmt::Write as _;
use std::path::Path;

pub fn write_csv(path: &Path, header: &[String], rows: &[Vec<f64>]) -> Result<()> {
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        let mut first = true;
        for v in row {
            if !first {
                out.push(',');
            }
            first = false;
            write!(out, "{v}").unwrap();
        }
        out.push('\n');
    }
    std::fs::write(path, out).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut lines = text.lines();
    let header: Vec<String> = lines
        .next()
        .context("empty csv")?
        .split(',')
        .map(|s| s.trim().to_string())
        .collect();
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .with_context(|| format!("parsing row {}", i + 2))?;
        rows.push(row);
    }
    Ok((header, rows))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

const PLOT_W: f64 = 720.0;
const PLOT_H: f64 = 480.0;
const MARGIN: f64 = 56.0;
const COLORS: [&str; 6] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"];

fn axis_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() || !hi.is_finite() {
        return (0.0, 1.0);
    }
    if lo == hi {
        return (lo - 0.5, hi + 0.5);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

/// Polyline plot of several series over a shared abscissa.
pub fn line_plot_svg(
    x_label: &str,
    x: &[f64],
    series: &[(String, Vec<f64>)],
) -> String {
    let (x0, x1) = axis_range(x.iter().copied());
    let (y0, y1) = axis_range(series.iter().flat_map(|(_, ys)| ys.iter().copied()));
    let sx = |v: f64| MARGIN + (v - x0) / (x1 - x0) * (PLOT_W - 2.0 * MARGIN);
    let sy = |v: f64| PLOT_H - MARGIN - (v - y0) / (y1 - y0) * (PLOT_H - 2.0 * MARGIN);
    let mut svg = String::new();
    write!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{PLOT_W}\" height=\"{PLOT_H}\" viewBox=\"0 0 {PLOT_W} {PLOT_H}\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    )
    .unwrap();
    // axes
    write!(
        svg,
        "<line x1=\"{m}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/>\n\
         <line x1=\"{m}\" y1=\"{t}\" x2=\"{m}\" y2=\"{b}\" stroke=\"black\"/>\n",
        m = MARGIN,
        b = PLOT_H - MARGIN,
        r = PLOT_W - MARGIN,
        t = MARGIN
    )
    .unwrap();
    write!(
        svg,
        "<text x=\"{}\" y=\"{}\" font-size=\"12\">{x_label}</text>\n\
         <text x=\"{}\" y=\"{}\" font-size=\"11\">{x0:.3}</text>\n\
         <text x=\"{}\" y=\"{}\" font-size=\"11\">{x1:.3}</text>\n\
         <text x=\"4\" y=\"{}\" font-size=\"11\">{y1:.3e}</text>\n\
         <text x=\"4\" y=\"{}\" font-size=\"11\">{y0:.3e}</text>\n",
        PLOT_W / 2.0,
        PLOT_H - 12.0,
        MARGIN,
        PLOT_H - MARGIN + 16.0,
        PLOT_W - MARGIN - 24.0,
        PLOT_H - MARGIN + 16.0,
        MARGIN - 8.0,
        PLOT_H - MARGIN
    )
    .unwrap();
    for (i, (name, ys)) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let pts: Vec<String> = x
            .iter()
            .zip(ys)
            .map(|(&xa, &ya)| format!("{:.2},{:.2}", sx(xa), sy(ya)))
            .collect();
        write!(
            svg,
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>\n\
             <text x=\"{}\" y=\"{}\" font-size=\"11\" fill=\"{color}\">{name}</text>\n",
            pts.join(" "),
            PLOT_W - MARGIN + 4.0,
            MARGIN + 14.0 * i as f64,
        )
        .unwrap();
    }
    svg.push_str("</svg>\n");
    svg
}

/// Heat map over a rectangular grid (row-major values).
pub fn heat_map_svg(
    x_label: &str,
    y_label: &str,
    xs: &[f64],
    ys: &[f64],
    values: &[f64],
) -> String {
    let (v0, v1) = axis_range(values.iter().copied());
    let cell_w = (PLOT_W - 2.0 * MARGIN) / xs.len() as f64;
    let cell_h = (PLOT_H - 2.0 * MARGIN) / ys.len() as f64;
    let mut svg = String::new();
    write!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{PLOT_W}\" height=\"{PLOT_H}\" viewBox=\"0 0 {PLOT_W} {PLOT_H}\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    )
    .unwrap();
    for (j, _) in ys.iter().enumerate() {
        for (i, _) in xs.iter().enumerate() {
            let v = values[j * xs.len() + i];
            let t = if v1 > v0 { (v - v0) / (v1 - v0) } else { 0.5 };
            let r = (255.0 * t) as u8;
            let b = (255.0 * (1.0 - t)) as u8;
            let g = (96.0 + 64.0 * (1.0 - (2.0 * t - 1.0).abs())) as u8;
            write!(
                svg,
                "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"rgb({r},{g},{b})\"/>\n",
                MARGIN + i as f64 * cell_w,
                PLOT_H - MARGIN - (j as f64 + 1.0) * cell_h,
                cell_w + 0.5,
                cell_h + 0.5,
            )
            .unwrap();
        }
    }
    write!(
        svg,
        "<text x=\"{}\" y=\"{}\" font-size=\"12\">{x_label} in [{:.3}, {:.3}]</text>\n\
         <text x=\"4\" y=\"16\" font-size=\"12\">{y_label} in [{:.3}, {:.3}]; value in [{v0:.3e}, {v1:.3e}]</text>\n",
        PLOT_W / 2.0 - 60.0,
        PLOT_H - 12.0,
        xs.first().unwrap_or(&0.0),
        xs.last().unwrap_or(&0.0),
        ys.first().unwrap_or(&0.0),
        ys.last().unwrap_or(&0.0),
    )
    .unwrap();
    svg.push_str("</svg>\n");
    svg
}

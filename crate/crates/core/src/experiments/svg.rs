//! Deterministic line-chart rendering to standalone SVG.
//!
//! One polyline per group, drawn in sorted group order with a fixed palette
//! and fixed coordinate formatting, so identical tables produce identical
//! bytes. When the y column is named `mean_<suffix>` and a `std_<suffix>`
//! column exists, each point gets a vertical error bar of plus/minus one
//! standard deviation.

use std::path::Path;

use super::table::Table;
use super::ExperimentError;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const MARGIN_LEFT: f64 = 64.0;
const MARGIN_RIGHT: f64 = 140.0;
const MARGIN_TOP: f64 = 24.0;
const MARGIN_BOTTOM: f64 = 48.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f",
];

fn escape_xml(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

struct Series {
    label: String,
    /// (x, y, optional half-height of the error bar)
    points: Vec<(f64, f64, Option<f64>)>,
}

/// Renders `table` as a grouped line chart and writes it to `path`.
///
/// `x_col` and `y_col` must hold numeric cells; rows where either is
/// non-numeric are skipped. `group_col` labels the polylines; a missing
/// group cell is skipped too. Errors if a named column does not exist or
/// if no plottable points remain.
pub fn render_svg_lines(
    table: &Table,
    x_col: &str,
    y_col: &str,
    group_col: &str,
    path: &Path,
) -> Result<(), ExperimentError> {
    let svg = svg_lines_string(table, x_col, y_col, group_col)?;
    std::fs::write(path, svg).map_err(|source| ExperimentError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Builds the SVG document for [`render_svg_lines`] without touching the
/// filesystem.
pub fn svg_lines_string(
    table: &Table,
    x_col: &str,
    y_col: &str,
    group_col: &str,
) -> Result<String, ExperimentError> {
    let xi = require_column(table, x_col)?;
    let yi = require_column(table, y_col)?;
    let gi = require_column(table, group_col)?;
    let si = y_col
        .strip_prefix("mean_")
        .and_then(|suffix| table.column_index(&format!("std_{suffix}")));

    let mut series: Vec<Series> = Vec::new();
    for row in table.rows() {
        let (Some(x), Some(y)) = (row[xi].as_f64(), row[yi].as_f64()) else {
            continue;
        };
        let Some(label) = row[gi].label() else {
            continue;
        };
        let bar = si.and_then(|i| row[i].as_f64()).filter(|s| s.is_finite() && *s >= 0.0);
        if !(x.is_finite() && y.is_finite()) {
            continue;
        }
        match series.iter_mut().find(|s| s.label == label) {
            Some(s) => s.points.push((x, y, bar)),
            None => series.push(Series {
                label,
                points: vec![(x, y, bar)],
            }),
        }
    }
    series.sort_by(|a, b| a.label.cmp(&b.label));
    for s in &mut series {
        s.points
            .sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite by construction"));
    }
    if series.is_empty() {
        return Err(ExperimentError::EmptyPlot);
    }

    let (mut x_min, mut x_max) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y_min, mut y_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for s in &series {
        for &(x, y, bar) in &s.points {
            let half = bar.unwrap_or(0.0);
            x_min = x_min.min(x);
            x_max = x_max.max(x);
            y_min = y_min.min(y - half);
            y_max = y_max.max(y + half);
        }
    }
    if (x_max - x_min).abs() < f64::EPSILON {
        x_min -= 1.0;
        x_max += 1.0;
    }
    if (y_max - y_min).abs() < f64::EPSILON {
        y_min -= 1.0;
        y_max += 1.0;
    }
    let pad_y = 0.05 * (y_max - y_min);
    y_min -= pad_y;
    y_max += pad_y;

    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let px = |x: f64| MARGIN_LEFT + (x - x_min) / (x_max - x_min) * plot_w;
    let py = |y: f64| MARGIN_TOP + (y_max - y) / (y_max - y_min) * plot_h;
    let fmt = |v: f64| format!("{v:.3}");

    let mut out = String::new();
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    ));
    out.push_str(&format!(
        "  <rect x=\"0\" y=\"0\" width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"#ffffff\"/>\n"
    ));
    out.push_str(&format!(
        "  <rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#333333\"/>\n",
        fmt(MARGIN_LEFT),
        fmt(MARGIN_TOP),
        fmt(plot_w),
        fmt(plot_h)
    ));

    for frac in [0.0, 0.5, 1.0] {
        let xv = x_min + frac * (x_max - x_min);
        let yv = y_min + frac * (y_max - y_min);
        out.push_str(&format!(
            "  <text x=\"{}\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\" fill=\"#333333\">{}</text>\n",
            fmt(px(xv)),
            fmt(HEIGHT - MARGIN_BOTTOM + 18.0),
            escape_xml(&format!("{xv:.4}"))
        ));
        out.push_str(&format!(
            "  <text x=\"{}\" y=\"{}\" font-size=\"12\" text-anchor=\"end\" fill=\"#333333\">{}</text>\n",
            fmt(MARGIN_LEFT - 6.0),
            fmt(py(yv) + 4.0),
            escape_xml(&format!("{yv:.4}"))
        ));
    }
    out.push_str(&format!(
        "  <text x=\"{}\" y=\"{}\" font-size=\"13\" text-anchor=\"middle\" fill=\"#333333\">{}</text>\n",
        fmt(MARGIN_LEFT + plot_w / 2.0),
        fmt(HEIGHT - 8.0),
        escape_xml(x_col)
    ));
    out.push_str(&format!(
        "  <text x=\"{}\" y=\"{}\" font-size=\"13\" text-anchor=\"middle\" fill=\"#333333\" \
         transform=\"rotate(-90 {} {})\">{}</text>\n",
        fmt(16.0),
        fmt(MARGIN_TOP + plot_h / 2.0),
        fmt(16.0),
        fmt(MARGIN_TOP + plot_h / 2.0),
        escape_xml(y_col)
    ));

    for (idx, s) in series.iter().enumerate() {
        let color = PALETTE[idx % PALETTE.len()];
        for &(x, y, bar) in &s.points {
            if let Some(half) = bar {
                let (cx, top, bottom) = (px(x), py(y + half), py(y - half));
                out.push_str(&format!(
                    "  <line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"{3}\" stroke-width=\"1\"/>\n",
                    fmt(cx),
                    fmt(top),
                    fmt(bottom),
                    color
                ));
                for tip in [top, bottom] {
                    out.push_str(&format!(
                        "  <line x1=\"{}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"{3}\" stroke-width=\"1\"/>\n",
                        fmt(cx - 3.0),
                        fmt(tip),
                        fmt(cx + 3.0),
                        color
                    ));
                }
            }
        }
        let points = s
            .points
            .iter()
            .map(|&(x, y, _)| format!("{},{}", fmt(px(x)), fmt(py(y))))
            .collect::<Vec<_>>()
            .join(" ");
        out.push_str(&format!(
            "  <polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{points}\"/>\n"
        ));
        for &(x, y, _) in &s.points {
            out.push_str(&format!(
                "  <circle cx=\"{}\" cy=\"{}\" r=\"2.5\" fill=\"{color}\"/>\n",
                fmt(px(x)),
                fmt(py(y))
            ));
        }
        let ly = MARGIN_TOP + 16.0 + 18.0 * idx as f64;
        out.push_str(&format!(
            "  <line x1=\"{}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"{color}\" stroke-width=\"1.5\"/>\n",
            fmt(WIDTH - MARGIN_RIGHT + 10.0),
            fmt(ly - 4.0),
            fmt(WIDTH - MARGIN_RIGHT + 30.0)
        ));
        out.push_str(&format!(
            "  <text x=\"{}\" y=\"{}\" font-size=\"12\" fill=\"#333333\">{}</text>\n",
            fmt(WIDTH - MARGIN_RIGHT + 36.0),
            fmt(ly),
            escape_xml(&s.label)
        ));
    }
    out.push_str("</svg>\n");
    Ok(out)
}

fn require_column(table: &Table, name: &str) -> Result<usize, ExperimentError> {
    table
        .column_index(name)
        .ok_or_else(|| ExperimentError::MissingColumn {
            column: name.to_string(),
        })
}

//! Deterministic SVG emission for phase portraits, density heatmaps,
//! sensitivity curves, estimator curves, and recurrence raster
//! pass-through. Identical inputs produce byte-identical output.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::io::{atomic_write, parse_pgm};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlotKind {
    PhasePortrait,
    Density,
    Recurrence,
    Sensitivity,
    DivergenceCurve,
    CorrelationCurve,
}

/// Plot request; kind-specific required inputs are validated up front.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlotSpec {
    pub kind: PlotKind,
    /// Replicator field CSV (phase_portrait only, optional).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<PathBuf>,
    /// Trajectory CSVs (phase_portrait).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub traces: Vec<PathBuf>,
    /// Single input file for the other kinds.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_range: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y_range: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
    pub out: PathBuf,
}

const W: f64 = 640.0;
const H: f64 = 640.0;
const MARGIN: f64 = 56.0;

struct Canvas {
    x_lo: f64,
    x_hi: f64,
    y_lo: f64,
    y_hi: f64,
    body: String,
}

impl Canvas {
    fn new(x_range: (f64, f64), y_range: (f64, f64)) -> Self {
        Canvas {
            x_lo: x_range.0,
            x_hi: x_range.1,
            y_lo: y_range.0,
            y_hi: y_range.1,
            body: String::new(),
        }
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x_lo) / (self.x_hi - self.x_lo) * (W - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        H - MARGIN - (y - self.y_lo) / (self.y_hi - self.y_lo) * (H - 2.0 * MARGIN)
    }

    fn line(&mut self, x1: f64, y1: f64, x2: f64, y2: f64, stroke: &str, width: f64) {
        self.body.push_str(&format!(
            "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"{}\" stroke-width=\"{:.2}\"/>\n",
            self.px(x1), self.py(y1), self.px(x2), self.py(y2), stroke, width
        ));
    }

    fn polyline(&mut self, points: &[(f64, f64)], stroke: &str, width: f64) {
        let mut d = String::new();
        for &(x, y) in points {
            d.push_str(&format!("{:.2},{:.2} ", self.px(x), self.py(y)));
        }
        self.body.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"{:.2}\"/>\n",
            d.trim_end(),
            stroke,
            width
        ));
    }

    fn circle(&mut self, x: f64, y: f64, r_px: f64, fill: &str) {
        self.body.push_str(&format!(
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"{:.2}\" fill=\"{}\"/>\n",
            self.px(x),
            self.py(y),
            r_px,
            fill
        ));
    }

    fn star(&mut self, x: f64, y: f64, r_px: f64, fill: &str) {
        let cx = self.px(x);
        let cy = self.py(y);
        let mut pts = String::new();
        for k in 0..10 {
            let r = if k % 2 == 0 { r_px } else { r_px * 0.45 };
            let a = -std::f64::consts::FRAC_PI_2 + k as f64 * std::f64::consts::PI / 5.0;
            pts.push_str(&format!("{:.2},{:.2} ", cx + r * a.cos(), cy + r * a.sin()));
        }
        self.body.push_str(&format!(
            "<polygon points=\"{}\" fill=\"{}\"/>\n",
            pts.trim_end(),
            fill
        ));
    }

    fn rect_data(&mut self, x: f64, y: f64, w: f64, h: f64, fill: &str) {
        let px = self.px(x);
        let py = self.py(y + h);
        let pw = (self.px(x + w) - px).abs();
        let ph = (self.py(y) - py).abs();
        self.body.push_str(&format!(
            "<rect x=\"{px:.2}\" y=\"{py:.2}\" width=\"{pw:.2}\" height=\"{ph:.2}\" fill=\"{fill}\"/>\n"
        ));
    }

    fn text(&mut self, px: f64, py: f64, size: f64, content: &str) {
        self.body.push_str(&format!(
            "<text x=\"{px:.2}\" y=\"{py:.2}\" font-size=\"{size:.1}\" font-family=\"sans-serif\">{content}</text>\n"
        ));
    }

    fn axes(&mut self, x_label: &str, y_label: &str) {
        self.body.push_str(&format!(
            "<rect x=\"{m:.2}\" y=\"{m:.2}\" width=\"{w:.2}\" height=\"{h:.2}\" fill=\"none\" stroke=\"black\" stroke-width=\"1\"/>\n",
            m = MARGIN,
            w = W - 2.0 * MARGIN,
            h = H - 2.0 * MARGIN
        ));
        for t in 0..=4 {
            let fx = self.x_lo + (self.x_hi - self.x_lo) * t as f64 / 4.0;
            let fy = self.y_lo + (self.y_hi - self.y_lo) * t as f64 / 4.0;
            self.text(self.px(fx) - 12.0, H - MARGIN + 18.0, 11.0, &format!("{fx:.2}"));
            self.text(8.0, self.py(fy) + 4.0, 11.0, &format!("{fy:.2}"));
        }
        self.text(W / 2.0 - 30.0, H - 12.0, 12.0, x_label);
        self.text(12.0, MARGIN - 16.0, 12.0, y_label);
    }

    fn render(self, comment: Option<&str>) -> String {
        let mut out = String::from(
            "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n",
        );
        if let Some(c) = comment {
            out.push_str(&format!("<!-- {c} -->\n"));
        }
        out.push_str(&format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n<rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n"
        ));
        out.push_str(&self.body);
        out.push_str("</svg>\n");
        out
    }
}

/// Read a CSV with a header; returns (header fields, rows of f64).
fn read_numeric_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut lines = text.lines();
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| Error::Parse {
            path: path.display().to_string(),
            message: "empty file".to_string(),
        })?
        .split(',')
        .map(|s| s.to_string())
        .collect();
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|s| s.parse::<f64>().unwrap_or(f64::NAN))
            .collect();
        if row.len() != header.len() {
            return Err(Error::Parse {
                path: path.display().to_string(),
                message: format!("line {}: expected {} fields", i + 2, header.len()),
            });
        }
        rows.push(row);
    }
    Ok((header, rows))
}

fn require_column(header: &[String], name: &str, path: &Path) -> Result<usize> {
    header.iter().position(|h| h == name).ok_or_else(|| Error::Parse {
        path: path.display().to_string(),
        message: format!("missing column `{name}`"),
    })
}

fn finite_range(range: Option<[f64; 2]>, key: &str) -> Result<Option<(f64, f64)>> {
    match range {
        None => Ok(None),
        Some([lo, hi]) => {
            if !lo.is_finite() || !hi.is_finite() || !(lo < hi) {
                Err(Error::config(key, "axis range must be finite with lo < hi"))
            } else {
                Ok(Some((lo, hi)))
            }
        }
    }
}

fn comment_of(spec: &PlotSpec) -> Option<String> {
    spec.config_hash
        .as_ref()
        .map(|h| format!("config_hash: {h}"))
}

/// Render a plot spec to its output file (atomic; no partial output on
/// error).
pub fn render_plot(spec: &PlotSpec) -> Result<()> {
    let comment = comment_of(spec);
    match spec.kind {
        PlotKind::PhasePortrait => render_phase_portrait(spec, comment.as_deref()),
        PlotKind::Density => render_density(spec, comment.as_deref()),
        PlotKind::Recurrence => render_recurrence(spec),
        PlotKind::Sensitivity => render_sensitivity(spec, comment.as_deref()),
        PlotKind::DivergenceCurve => {
            render_curve(spec, comment.as_deref(), "z", "mean_log_d", false)
        }
        PlotKind::CorrelationCurve => {
            render_curve(spec, comment.as_deref(), "radius", "c_r", true)
        }
    }
}

fn render_phase_portrait(spec: &PlotSpec, comment: Option<&str>) -> Result<()> {
    if spec.traces.is_empty() && spec.field.is_none() {
        return Err(Error::config(
            "traces",
            "phase_portrait needs at least one trace or a field file",
        ));
    }
    let x_range = finite_range(spec.x_range, "x_range")?.unwrap_or((0.0, 1.0));
    let y_range = finite_range(spec.y_range, "y_range")?.unwrap_or((0.0, 1.0));
    let mut canvas = Canvas::new(x_range, y_range);
    canvas.axes("P(action 0), agent 0", "P(action 0), agent 1");

    if let Some(field_path) = &spec.field {
        let (header, rows) = read_numeric_csv(field_path)?;
        let xi = require_column(&header, "x", field_path)?;
        let yi = require_column(&header, "y", field_path)?;
        let dxi = require_column(&header, "dx", field_path)?;
        let dyi = require_column(&header, "dy", field_path)?;
        let max_mag = rows
            .iter()
            .map(|r| (r[dxi] * r[dxi] + r[dyi] * r[dyi]).sqrt())
            .fold(0.0f64, f64::max);
        let scale = if max_mag > 0.0 { 0.05 / max_mag } else { 0.0 };
        for r in &rows {
            let (x, y, dx, dy) = (r[xi], r[yi], r[dxi] * scale, r[dyi] * scale);
            if dx == 0.0 && dy == 0.0 {
                continue;
            }
            canvas.line(x, y, x + dx, y + dy, "#9aa7b8", 1.0);
            // Arrow head: small circle marks the tip.
            canvas.circle(x + dx, y + dy, 1.2, "#9aa7b8");
        }
    }

    let colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b", "#e377c2"];
    for (t, trace_path) in spec.traces.iter().enumerate() {
        let (header, rows) = read_numeric_csv(trace_path)?;
        let xi = require_column(&header, "theta_0", trace_path)?;
        let yi = require_column(&header, "theta_1", trace_path)?;
        if header.iter().any(|h| h == "theta_2") {
            return Err(Error::Contract(format!(
                "`{}` has more than two coordinates; project the trace first",
                trace_path.display()
            )));
        }
        if rows.is_empty() {
            return Err(Error::Parse {
                path: trace_path.display().to_string(),
                message: "trajectory file has no data rows".to_string(),
            });
        }
        let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r[xi], r[yi])).collect();
        let color = colors[t % colors.len()];
        canvas.polyline(&pts, color, 1.2);
        let (sx, sy) = pts[0];
        let (ex, ey) = *pts.last().expect("non-empty");
        canvas.circle(sx, sy, 5.0, color);
        canvas.star(ex, ey, 8.0, color);
    }

    atomic_write(&spec.out, canvas.render(comment).as_bytes())
}

fn density_color(t: f64) -> String {
    // White to dark blue ramp.
    let t = t.clamp(0.0, 1.0);
    let r = (255.0 - 225.0 * t) as u8;
    let g = (255.0 - 195.0 * t) as u8;
    let b = (255.0 - 115.0 * t) as u8;
    format!("#{r:02x}{g:02x}{b:02x}")
}

fn render_density(spec: &PlotSpec, comment: Option<&str>) -> Result<()> {
    let input = spec
        .input
        .as_ref()
        .ok_or_else(|| Error::config("input", "density plots need an input CSV"))?;
    let (header, rows) = read_numeric_csv(input)?;
    let xi = require_column(&header, "x_center", input)?;
    let yi = require_column(&header, "y_center", input)?;
    let di = require_column(&header, "density", input)?;
    if rows.is_empty() {
        return Err(Error::Parse {
            path: input.display().to_string(),
            message: "density file has no data rows".to_string(),
        });
    }
    let mut xs: Vec<f64> = rows.iter().map(|r| r[xi]).collect();
    let mut ys: Vec<f64> = rows.iter().map(|r| r[yi]).collect();
    xs.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    xs.dedup();
    ys.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    ys.dedup();
    let wx = if xs.len() > 1 { xs[1] - xs[0] } else { 1.0 };
    let wy = if ys.len() > 1 { ys[1] - ys[0] } else { 1.0 };
    let x_range = finite_range(spec.x_range, "x_range")?
        .unwrap_or((xs[0] - wx / 2.0, xs[xs.len() - 1] + wx / 2.0));
    let y_range = finite_range(spec.y_range, "y_range")?
        .unwrap_or((ys[0] - wy / 2.0, ys[ys.len() - 1] + wy / 2.0));
    let max_d = rows.iter().map(|r| r[di]).fold(0.0f64, f64::max);

    let mut canvas = Canvas::new(x_range, y_range);
    for r in &rows {
        let t = if max_d > 0.0 { r[di] / max_d } else { 0.0 };
        if t > 0.0 {
            canvas.rect_data(r[xi] - wx / 2.0, r[yi] - wy / 2.0, wx, wy, &density_color(t));
        }
    }
    canvas.axes("theta, agent 0", "theta, agent 1");
    atomic_write(&spec.out, canvas.render(comment).as_bytes())
}

fn render_recurrence(spec: &PlotSpec) -> Result<()> {
    let input = spec
        .input
        .as_ref()
        .ok_or_else(|| Error::config("input", "recurrence plots need an input PGM"))?;
    let bytes = fs::read(input).map_err(|e| Error::io(input.display().to_string(), e))?;
    parse_pgm(&bytes, &input.display().to_string())?;
    // Validated pass-through; the raster already carries its own header
    // comments (hash, orientation).
    atomic_write(&spec.out, &bytes)
}

fn render_sensitivity(spec: &PlotSpec, comment: Option<&str>) -> Result<()> {
    let input = spec
        .input
        .as_ref()
        .ok_or_else(|| Error::config("input", "sensitivity plots need sensitivity.csv"))?;
    let (header, rows) = read_numeric_csv(input)?;
    let vi = require_column(&header, "param_value", input)?;
    let lm = require_column(&header, "lambda_mean", input)?;
    let ls = require_column(&header, "lambda_sd", input)?;
    let dm = require_column(&header, "d2_mean", input)?;
    let ds = require_column(&header, "d2_sd", input)?;
    let ok_rows: Vec<&Vec<f64>> = rows.iter().filter(|r| r[lm].is_finite()).collect();
    if ok_rows.is_empty() {
        return Err(Error::Parse {
            path: input.display().to_string(),
            message: "no successful sweep points to plot".to_string(),
        });
    }
    let x_lo = ok_rows.iter().map(|r| r[vi]).fold(f64::INFINITY, f64::min);
    let x_hi = ok_rows.iter().map(|r| r[vi]).fold(f64::NEG_INFINITY, f64::max);
    let mut y_lo = f64::INFINITY;
    let mut y_hi = f64::NEG_INFINITY;
    for r in &ok_rows {
        for (m, s) in [(lm, ls), (dm, ds)] {
            y_lo = y_lo.min(r[m] - r[s]);
            y_hi = y_hi.max(r[m] + r[s]);
        }
    }
    if y_lo == y_hi {
        y_lo -= 0.5;
        y_hi += 0.5;
    }
    let pad = (y_hi - y_lo) * 0.08;
    let x_range = finite_range(spec.x_range, "x_range")?.unwrap_or((x_lo, x_hi.max(x_lo + 1e-9)));
    let y_range = finite_range(spec.y_range, "y_range")?.unwrap_or((y_lo - pad, y_hi + pad));

    let mut canvas = Canvas::new(x_range, y_range);
    canvas.axes("swept parameter", "diagnostic");
    for (mean_col, sd_col, color, label, label_y) in
        [(lm, ls, "#1f77b4", "lambda_max", MARGIN + 16.0), (dm, ds, "#d62728", "D2", MARGIN + 32.0)]
    {
        let pts: Vec<(f64, f64)> = ok_rows.iter().map(|r| (r[vi], r[mean_col])).collect();
        canvas.polyline(&pts, color, 1.5);
        for r in &ok_rows {
            let (x, m, s) = (r[vi], r[mean_col], r[sd_col]);
            canvas.line(x, m - s, x, m + s, color, 1.0);
            canvas.circle(x, m, 2.5, color);
        }
        canvas.text(W - MARGIN - 110.0, label_y, 12.0, label);
        let swatch_y = label_y - 4.0;
        canvas.body.push_str(&format!(
            "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"18\" height=\"4\" fill=\"{}\"/>\n",
            W - MARGIN - 134.0,
            swatch_y,
            color
        ));
    }
    atomic_write(&spec.out, canvas.render(comment).as_bytes())
}

fn render_curve(
    spec: &PlotSpec,
    comment: Option<&str>,
    x_col: &str,
    y_col: &str,
    log_log: bool,
) -> Result<()> {
    let input = spec
        .input
        .as_ref()
        .ok_or_else(|| Error::config("input", "curve plots need an input CSV"))?;
    let (header, rows) = read_numeric_csv(input)?;
    let xi = require_column(&header, x_col, input)?;
    let yi = require_column(&header, y_col, input)?;
    let wi = header.iter().position(|h| h == "in_fit_window");
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter_map(|r| {
            let (x, y) = (r[xi], r[yi]);
            if log_log {
                (x > 0.0 && y > 0.0).then(|| (x.ln(), y.ln()))
            } else {
                (x.is_finite() && y.is_finite()).then_some((x, y))
            }
        })
        .collect();
    if pts.is_empty() {
        return Err(Error::Parse {
            path: input.display().to_string(),
            message: "curve file has no plottable rows".to_string(),
        });
    }
    let x_lo = pts.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let x_hi = pts.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    let y_lo = pts.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let y_hi = pts.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let (x_lo, x_hi) = if x_lo == x_hi { (x_lo - 0.5, x_hi + 0.5) } else { (x_lo, x_hi) };
    let (y_lo, y_hi) = if y_lo == y_hi { (y_lo - 0.5, y_hi + 0.5) } else { (y_lo, y_hi) };
    let pad_x = (x_hi - x_lo) * 0.05;
    let pad_y = (y_hi - y_lo) * 0.05;
    let mut canvas = Canvas::new((x_lo - pad_x, x_hi + pad_x), (y_lo - pad_y, y_hi + pad_y));
    let labels = if log_log { ("log r", "log C(r)") } else { (x_col, y_col) };
    canvas.axes(labels.0, labels.1);
    canvas.polyline(&pts, "#1f77b4", 1.5);
    // Highlight fit-window points when present.
    if let Some(w) = wi {
        for r in rows.iter().filter(|r| r[w] == 1.0) {
            let (x, y) = (r[xi], r[yi]);
            let p = if log_log {
                if x > 0.0 && y > 0.0 {
                    Some((x.ln(), y.ln()))
                } else {
                    None
                }
            } else {
                Some((x, y))
            };
            if let Some((x, y)) = p {
                canvas.circle(x, y, 3.0, "#d62728");
            }
        }
    }
    atomic_write(&spec.out, canvas.render(comment).as_bytes())
}

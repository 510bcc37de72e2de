//! File emission: CSV of sweep rows, an SVG line chart, a run manifest,
//! and the validation report.
//!
//! The CSV is the contractual artifact — fixed header, 17 significant
//! digits (exact f64 round-trip), rows sorted by (capacity, area) so output
//! bytes are independent of evaluation order. The chart is best-effort
//! decoration. All files are written atomically (temp + rename) so a failed
//! run never leaves a partial file behind.

use crate::error::{Error, Result};
use crate::model::EvalMethod;
use crate::sweep::{Mode, SweepSpec, ValidationReport};
use serde::Serialize;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

/// Exact column list of the emitted CSV.
pub const CSV_HEADER: &str =
    "lambda_u,area_m2,b,capacity,normalized_delay,absolute_delay,method,error_bound,mc_mean,mc_stderr";

/// One evaluated grid point, as it appears in the CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputRow {
    pub lambda_u: f64,
    pub area_m2: f64,
    /// Mean user count; always `lambda_u * area_m2`.
    pub b: f64,
    pub capacity: u64,
    pub normalized_delay: f64,
    /// `normalized_delay * d_ctrl`, in seconds.
    pub absolute_delay: f64,
    pub method: EvalMethod,
    pub error_bound: f64,
    /// Monte Carlo mean in normalized units, when a simulation ran.
    pub mc_mean: Option<f64>,
    pub mc_stderr: Option<f64>,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.16e}")).unwrap_or_default()
}

/// Serializes rows in their given order; `emit_outputs` sorts first.
pub fn rows_to_csv(rows: &[OutputRow]) -> String {
    let mut out = String::with_capacity(64 + rows.len() * 160);
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{:.16e},{:.16e},{:.16e},{},{:.16e},{:.16e},{},{:.16e},{},{}",
            r.lambda_u,
            r.area_m2,
            r.b,
            r.capacity,
            r.normalized_delay,
            r.absolute_delay,
            r.method,
            r.error_bound,
            fmt_opt(r.mc_mean),
            fmt_opt(r.mc_stderr),
        );
    }
    out
}

fn parse_field<T: FromStr>(raw: &str, line: usize, what: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    raw.parse().map_err(|e| Error::InvalidInput {
        field: "csv",
        reason: format!("line {line}: bad {what} `{raw}`: {e}"),
    })
}

fn parse_opt(raw: &str, line: usize, what: &str) -> Result<Option<f64>> {
    if raw.is_empty() {
        Ok(None)
    } else {
        parse_field(raw, line, what).map(Some)
    }
}

/// Parses text produced by [`rows_to_csv`] back into rows.
pub fn parse_csv(text: &str) -> Result<Vec<OutputRow>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == CSV_HEADER => {}
        other => {
            return Err(Error::InvalidInput {
                field: "csv",
                reason: format!("bad header: {:?}", other.map(|(_, h)| h)),
            })
        }
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 10 {
            return Err(Error::InvalidInput {
                field: "csv",
                reason: format!("line {}: expected 10 fields, got {}", i + 1, fields.len()),
            });
        }
        rows.push(OutputRow {
            lambda_u: parse_field(fields[0], i + 1, "lambda_u")?,
            area_m2: parse_field(fields[1], i + 1, "area_m2")?,
            b: parse_field(fields[2], i + 1, "b")?,
            capacity: parse_field(fields[3], i + 1, "capacity")?,
            normalized_delay: parse_field(fields[4], i + 1, "normalized_delay")?,
            absolute_delay: parse_field(fields[5], i + 1, "absolute_delay")?,
            method: EvalMethod::from_str(fields[6]).map_err(|e| Error::InvalidInput {
                field: "csv",
                reason: format!("line {}: {e}", i + 1),
            })?,
            error_bound: parse_field(fields[7], i + 1, "error_bound")?,
            mc_mean: parse_opt(fields[8], i + 1, "mc_mean")?,
            mc_stderr: parse_opt(fields[9], i + 1, "mc_stderr")?,
        });
    }
    Ok(rows)
}

/// Rows in canonical emission order: (capacity, area) ascending.
pub fn sorted_rows(rows: &[OutputRow]) -> Vec<OutputRow> {
    let mut rows = rows.to_vec();
    rows.sort_by(|a, b| {
        a.capacity
            .cmp(&b.capacity)
            .then(a.area_m2.total_cmp(&b.area_m2))
    });
    rows
}

// ---------------------------------------------------------------------------
// SVG chart

const CANVAS_W: f64 = 800.0;
const CANVAS_H: f64 = 520.0;
const PLOT_X0: f64 = 80.0;
const PLOT_X1: f64 = 620.0;
const PLOT_Y0: f64 = 50.0;
const PLOT_Y1: f64 = 450.0;
const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
];

/// Tick positions with a human-friendly step, covering [min, max].
fn nice_ticks(min: f64, max: f64) -> (Vec<f64>, f64) {
    let span = (max - min).max(f64::MIN_POSITIVE);
    let raw = span / 5.0;
    let mag = 10.0_f64.powf((raw.log10()).floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|&s| raw <= s)
        .unwrap_or(10.0 * mag);
    let mut ticks = Vec::new();
    let mut t = (min / step).ceil() * step;
    while t <= max + 1e-9 * step {
        ticks.push(t);
        t += step;
    }
    (ticks, step)
}

fn fmt_tick(v: f64, step: f64) -> String {
    if step >= 1.0 {
        format!("{v:.0}")
    } else {
        let decimals = (-step.log10().floor()) as usize;
        format!("{v:.*}", decimals)
    }
}

struct Curve {
    label: String,
    points: Vec<(f64, f64)>,
}

/// Renders labeled curves to a standalone SVG document. Returns `None`
/// when there is nothing to draw (fewer than two points on every curve).
fn render_svg(curves: &[Curve], log_x: bool, x_label: &str, title: &str) -> Option<String> {
    let drawable: Vec<&Curve> = curves.iter().filter(|c| c.points.len() >= 2).collect();
    if drawable.is_empty() {
        return None;
    }
    let xs = |x: f64| if log_x { x.log10() } else { x };
    let mut x_min = f64::INFINITY;
    let mut x_max = f64::NEG_INFINITY;
    let mut y_max = 0.0_f64;
    for c in &drawable {
        for &(x, y) in &c.points {
            x_min = x_min.min(xs(x));
            x_max = x_max.max(xs(x));
            y_max = y_max.max(y);
        }
    }
    if !(x_max > x_min) {
        return None;
    }
    let y_top = (y_max * 1.08).max(1e-12);
    let px = |x: f64| PLOT_X0 + (xs(x) - x_min) / (x_max - x_min) * (PLOT_X1 - PLOT_X0);
    let py = |y: f64| PLOT_Y1 - y / y_top * (PLOT_Y1 - PLOT_Y0);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {CANVAS_W:.0} {CANVAS_H:.0}\" font-family=\"sans-serif\">"
    );
    let _ = writeln!(
        svg,
        "  <rect width=\"{CANVAS_W:.0}\" height=\"{CANVAS_H:.0}\" fill=\"white\"/>"
    );
    let _ = writeln!(
        svg,
        "  <text x=\"{:.1}\" y=\"28\" text-anchor=\"middle\" font-size=\"16\">{title}</text>",
        (PLOT_X0 + PLOT_X1) / 2.0
    );

    // Axes.
    let _ = writeln!(
        svg,
        "  <line x1=\"{PLOT_X0:.1}\" y1=\"{PLOT_Y1:.1}\" x2=\"{PLOT_X1:.1}\" y2=\"{PLOT_Y1:.1}\" stroke=\"black\"/>"
    );
    let _ = writeln!(
        svg,
        "  <line x1=\"{PLOT_X0:.1}\" y1=\"{PLOT_Y0:.1}\" x2=\"{PLOT_X0:.1}\" y2=\"{PLOT_Y1:.1}\" stroke=\"black\"/>"
    );

    // X ticks: decades when log-scaled, nice steps otherwise.
    if log_x {
        let lo = x_min.ceil() as i64;
        let hi = x_max.floor() as i64;
        for k in lo..=hi {
            let x = PLOT_X0 + (k as f64 - x_min) / (x_max - x_min) * (PLOT_X1 - PLOT_X0);
            let _ = writeln!(
                svg,
                "  <line x1=\"{x:.1}\" y1=\"{PLOT_Y1:.1}\" x2=\"{x:.1}\" y2=\"{:.1}\" stroke=\"black\"/>",
                PLOT_Y1 + 6.0
            );
            let _ = writeln!(
                svg,
                "  <text x=\"{x:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-size=\"12\">1e{k}</text>",
                PLOT_Y1 + 22.0
            );
        }
    } else {
        let (ticks, step) = nice_ticks(
            drawable
                .iter()
                .flat_map(|c| c.points.iter().map(|p| p.0))
                .fold(f64::INFINITY, f64::min),
            drawable
                .iter()
                .flat_map(|c| c.points.iter().map(|p| p.0))
                .fold(f64::NEG_INFINITY, f64::max),
        );
        for t in ticks {
            let x = px(t);
            let _ = writeln!(
                svg,
                "  <line x1=\"{x:.1}\" y1=\"{PLOT_Y1:.1}\" x2=\"{x:.1}\" y2=\"{:.1}\" stroke=\"black\"/>",
                PLOT_Y1 + 6.0
            );
            let _ = writeln!(
                svg,
                "  <text x=\"{x:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-size=\"12\">{}</text>",
                PLOT_Y1 + 22.0,
                fmt_tick(t, step)
            );
        }
    }

    // Y ticks.
    let (yticks, ystep) = nice_ticks(0.0, y_top);
    for t in yticks {
        let y = py(t);
        let _ = writeln!(
            svg,
            "  <line x1=\"{:.1}\" y1=\"{y:.1}\" x2=\"{PLOT_X0:.1}\" y2=\"{y:.1}\" stroke=\"black\"/>",
            PLOT_X0 - 6.0
        );
        let _ = writeln!(
            svg,
            "  <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\" font-size=\"12\">{}</text>",
            PLOT_X0 - 10.0,
            y + 4.0,
            fmt_tick(t, ystep)
        );
    }

    // Axis titles.
    let _ = writeln!(
        svg,
        "  <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-size=\"14\">{x_label}</text>",
        (PLOT_X0 + PLOT_X1) / 2.0,
        PLOT_Y1 + 48.0
    );
    let _ = writeln!(
        svg,
        "  <text x=\"24\" y=\"{:.1}\" text-anchor=\"middle\" font-size=\"14\" transform=\"rotate(-90 24 {:.1})\">expected delay / d_ctrl</text>",
        (PLOT_Y0 + PLOT_Y1) / 2.0,
        (PLOT_Y0 + PLOT_Y1) / 2.0
    );

    // Curves and legend.
    for (i, c) in drawable.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut pts = String::new();
        for &(x, y) in &c.points {
            let _ = write!(pts, "{:.2},{:.2} ", px(x), py(y));
        }
        let _ = writeln!(
            svg,
            "  <polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.8\"/>",
            pts.trim_end()
        );
        let ly = PLOT_Y0 + 16.0 + 22.0 * i as f64;
        let _ = writeln!(
            svg,
            "  <line x1=\"{:.1}\" y1=\"{ly:.1}\" x2=\"{:.1}\" y2=\"{ly:.1}\" stroke=\"{color}\" stroke-width=\"1.8\"/>",
            PLOT_X1 + 14.0,
            PLOT_X1 + 44.0
        );
        let _ = writeln!(
            svg,
            "  <text x=\"{:.1}\" y=\"{:.1}\" font-size=\"13\">{}</text>",
            PLOT_X1 + 50.0,
            ly + 4.0,
            c.label
        );
    }
    svg.push_str("</svg>\n");
    Some(svg)
}

fn sweep_chart(rows: &[OutputRow], mode: Mode) -> Option<String> {
    match mode {
        Mode::SweepArea => {
            let mut by_capacity: BTreeMap<u64, Vec<(f64, f64)>> = BTreeMap::new();
            for r in rows {
                by_capacity
                    .entry(r.capacity)
                    .or_default()
                    .push((r.area_m2, r.normalized_delay));
            }
            let curves: Vec<Curve> = by_capacity
                .into_iter()
                .map(|(c, mut points)| {
                    points.sort_by(|a, b| a.0.total_cmp(&b.0));
                    Curve {
                        label: format!("C = {c}"),
                        points,
                    }
                })
                .collect();
            render_svg(
                &curves,
                true,
                "cell area A (m²)",
                "Expected packet delay vs cell area",
            )
        }
        Mode::SweepMatchedCapacity => {
            let mut points: Vec<(f64, f64)> = rows
                .iter()
                .map(|r| (r.capacity as f64, r.normalized_delay))
                .collect();
            points.sort_by(|a, b| a.0.total_cmp(&b.0));
            let curves = [Curve {
                label: "b = C".to_string(),
                points,
            }];
            render_svg(
                &curves,
                false,
                "flow table capacity C (matched load b = C)",
                "Expected packet delay at matched load",
            )
        }
        _ => None,
    }
}

// ---------------------------------------------------------------------------
// Files

#[derive(Serialize)]
struct Manifest<'a> {
    /// Echo of the run's full input, defaults filled in.
    spec: &'a SweepSpec,
    /// Seed actually used, when the run involved sampling.
    seed: Option<u64>,
    version: &'a str,
}

fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, contents).map_err(|source| Error::Io {
        path: tmp.clone(),
        source,
    })?;
    fs::rename(&tmp, path).map_err(|source| {
        let _ = fs::remove_file(&tmp);
        Error::Io {
            path: path.to_path_buf(),
            source,
        }
    })
}

/// Writes the run's artifacts into `dest` and returns the paths written.
///
/// Always: `manifest.json`. With rows: `results.csv`, plus `plot.svg` for
/// sweep modes unless `no_plot`. With a report: `report.json`.
pub fn emit_outputs(
    rows: &[OutputRow],
    report: Option<&ValidationReport>,
    spec: &SweepSpec,
    dest: &Path,
    no_plot: bool,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dest).map_err(|source| Error::Io {
        path: dest.to_path_buf(),
        source,
    })?;
    let mut written = Vec::new();

    if !rows.is_empty() {
        let csv_path = dest.join("results.csv");
        write_atomic(&csv_path, &rows_to_csv(&sorted_rows(rows)))?;
        written.push(csv_path);

        if !no_plot {
            if let Some(svg) = sweep_chart(rows, spec.mode) {
                let svg_path = dest.join("plot.svg");
                write_atomic(&svg_path, &svg)?;
                written.push(svg_path);
            }
        }
    }

    if let Some(report) = report {
        let mut body = serde_json::to_string_pretty(report).expect("report serializes");
        body.push('\n');
        let report_path = dest.join("report.json");
        write_atomic(&report_path, &body)?;
        written.push(report_path);
    }

    let manifest = Manifest {
        spec,
        seed: spec.sim.map(|s| s.seed),
        version: env!("CARGO_PKG_VERSION"),
    };
    let mut body = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    body.push('\n');
    let manifest_path = dest.join("manifest.json");
    write_atomic(&manifest_path, &body)?;
    written.push(manifest_path);

    Ok(written)
}

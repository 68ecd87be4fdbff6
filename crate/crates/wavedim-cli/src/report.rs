//! Post-processing of a persisted sweep: flat CSV summary, scaling-law
//! fits, and a self-contained log-log SVG plot.
//!
//! Every artifact is byte-deterministic for a given manifest. The CSV
//! column set is stable:
//!
//! ```text
//! gamma,mode_count,lower_proxy,ky_dimension,exponent_sum,bd_estimate,
//! upper_d1_root,upper_d1_simple,upper_d2,upper_d3,equilibrium_dim
//! ```
//!
//! Cells whose quantity does not apply to the run stay empty.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::sweep::{fit_scaling, FitResult, GammaResult, RunRecord};

pub const SUMMARY_HEADER: &str = "gamma,mode_count,lower_proxy,ky_dimension,exponent_sum,\
bd_estimate,upper_d1_root,upper_d1_simple,upper_d2,upper_d3,equilibrium_dim";

/// Scaling fits against ln(1/γ) for the headline quantities; a fit is
/// present only when the sweep has at least four γ points and the
/// quantity is positive at every one of them.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FitsFile {
    pub ky_dimension: Option<FitResult>,
    pub lower_proxy: Option<FitResult>,
    pub upper_bound: Option<FitResult>,
    pub equilibrium_dim: Option<FitResult>,
}

fn cell_f64(value: Option<f64>) -> String {
    value.map(|v| v.to_string()).unwrap_or_default()
}

fn cell_usize(value: Option<usize>) -> String {
    value.map(|v| v.to_string()).unwrap_or_default()
}

/// The single most restrictive closed-form upper bound a result carries.
fn upper_bound_of(result: &GammaResult) -> Option<f64> {
    result
        .bounds
        .upper_d1
        .as_ref()
        .map(|b| b.root)
        .or(result.bounds.upper_d2)
        .or(result.bounds.upper_d3)
}

pub fn summary_csv(record: &RunRecord) -> String {
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for result in &record.results {
        let exponent_sum = result.seeds.first().map(|s| s.exponent_sum);
        let row = [
            result.gamma.to_string(),
            cell_usize(result.mode_count),
            cell_f64(result.lower_proxy),
            result.ky_dimension.to_string(),
            cell_f64(exponent_sum),
            result.bd_estimate.to_string(),
            cell_f64(result.bounds.upper_d1.as_ref().map(|b| b.root)),
            cell_f64(result.bounds.upper_d1_simple),
            cell_f64(result.bounds.upper_d2),
            cell_f64(result.bounds.upper_d3),
            cell_f64(result.bounds.equilibrium_dim),
        ];
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

fn fit_if_clean(gammas: &[f64], values: &[Option<f64>]) -> Option<FitResult> {
    if gammas.len() < 4 {
        return None;
    }
    let cleaned: Option<Vec<f64>> = values
        .iter()
        .map(|v| v.filter(|x| *x > 0.0 && x.is_finite()))
        .collect();
    fit_scaling(gammas, &cleaned?).ok()
}

pub fn compute_fits(record: &RunRecord) -> FitsFile {
    let gammas: Vec<f64> = record.results.iter().map(|r| r.gamma).collect();
    let ky: Vec<Option<f64>> = record
        .results
        .iter()
        .map(|r| Some(r.ky_dimension))
        .collect();
    let lower: Vec<Option<f64>> = record.results.iter().map(|r| r.lower_proxy).collect();
    let upper: Vec<Option<f64>> = record.results.iter().map(upper_bound_of).collect();
    let equilibrium: Vec<Option<f64>> = record
        .results
        .iter()
        .map(|r| r.bounds.equilibrium_dim)
        .collect();
    FitsFile {
        ky_dimension: fit_if_clean(&gammas, &ky),
        lower_proxy: fit_if_clean(&gammas, &lower),
        upper_bound: fit_if_clean(&gammas, &upper),
        equilibrium_dim: fit_if_clean(&gammas, &equilibrium),
    }
}

const SVG_WIDTH: f64 = 640.0;
const SVG_HEIGHT: f64 = 480.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 20.0;
const MARGIN_BOTTOM: f64 = 50.0;

struct Series<'a> {
    label: &'a str,
    color: &'a str,
    /// (1/γ, value) pairs, positive values only.
    points: Vec<(f64, f64)>,
}

fn log_map(value: f64, lo: f64, hi: f64, px_lo: f64, px_hi: f64) -> f64 {
    let span = (hi.ln() - lo.ln()).max(f64::EPSILON);
    px_lo + (value.ln() - lo.ln()) / span * (px_hi - px_lo)
}

fn decade_ticks(lo: f64, hi: f64) -> Vec<f64> {
    let mut ticks = Vec::new();
    let mut exp = lo.log10().floor() as i32;
    while 10f64.powi(exp) <= hi * (1.0 + 1e-12) {
        let tick = 10f64.powi(exp);
        if tick >= lo * (1.0 - 1e-12) {
            ticks.push(tick);
        }
        exp += 1;
    }
    ticks
}

/// Log-log plot of dimension quantities against 1/γ. Series without any
/// positive point are dropped; `None` when nothing remains to draw.
pub fn plot_svg(record: &RunRecord) -> Option<String> {
    let collect = |pick: &dyn Fn(&GammaResult) -> Option<f64>| -> Vec<(f64, f64)> {
        record
            .results
            .iter()
            .filter_map(|r| pick(r).filter(|v| *v > 0.0).map(|v| (1.0 / r.gamma, v)))
            .collect()
    };
    let mut series = Vec::new();
    for (label, color, points) in [
        (
            "lower proxy",
            "#1f77b4",
            collect(&|r: &GammaResult| r.lower_proxy),
        ),
        (
            "KY dimension",
            "#d62728",
            collect(&|r: &GammaResult| Some(r.ky_dimension)),
        ),
        ("upper bound", "#2ca02c", collect(&upper_bound_of)),
        (
            "equilibrium dim",
            "#9467bd",
            collect(&|r: &GammaResult| r.bounds.equilibrium_dim),
        ),
    ] {
        if !points.is_empty() {
            series.push(Series {
                label,
                color,
                points,
            });
        }
    }
    if series.is_empty() {
        return None;
    }

    let all_points = series.iter().flat_map(|s| s.points.iter());
    let (mut x_lo, mut x_hi, mut y_lo, mut y_hi) =
        (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in all_points {
        x_lo = x_lo.min(x);
        x_hi = x_hi.max(x);
        y_lo = y_lo.min(y);
        y_hi = y_hi.max(y);
    }
    // Pad degenerate ranges so a single point still renders mid-plot.
    if x_hi <= x_lo {
        x_lo /= 2.0;
        x_hi *= 2.0;
    }
    if y_hi <= y_lo {
        y_lo /= 2.0;
        y_hi *= 2.0;
    }
    let px = |x: f64| log_map(x, x_lo, x_hi, MARGIN_LEFT, SVG_WIDTH - MARGIN_RIGHT);
    let py = |y: f64| log_map(y, y_lo, y_hi, SVG_HEIGHT - MARGIN_BOTTOM, MARGIN_TOP);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SVG_WIDTH}" height="{SVG_HEIGHT}" viewBox="0 0 {SVG_WIDTH} {SVG_HEIGHT}">"#
    );
    let _ = writeln!(
        svg,
        r#"<rect width="{SVG_WIDTH}" height="{SVG_HEIGHT}" fill="white"/>"#
    );
    let x_axis_y = SVG_HEIGHT - MARGIN_BOTTOM;
    let _ = writeln!(
        svg,
        r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="black"/>"#,
        MARGIN_LEFT,
        x_axis_y,
        SVG_WIDTH - MARGIN_RIGHT,
        x_axis_y
    );
    let _ = writeln!(
        svg,
        r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="black"/>"#,
        MARGIN_LEFT, MARGIN_TOP, MARGIN_LEFT, x_axis_y
    );
    for tick in decade_ticks(x_lo, x_hi) {
        let x = px(tick);
        let _ = writeln!(
            svg,
            r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/>"#,
            x_axis_y,
            x_axis_y + 6.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{x:.2}" y="{:.2}" font-size="12" text-anchor="middle">{tick}</text>"#,
            x_axis_y + 20.0
        );
    }
    for tick in decade_ticks(y_lo, y_hi) {
        let y = py(tick);
        let _ = writeln!(
            svg,
            r#"<line x1="{:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="black"/>"#,
            MARGIN_LEFT - 6.0,
            MARGIN_LEFT
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="end">{tick}</text>"#,
            MARGIN_LEFT - 10.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" font-size="13" text-anchor="middle">1/γ</text>"#,
        (MARGIN_LEFT + SVG_WIDTH - MARGIN_RIGHT) / 2.0,
        SVG_HEIGHT - 12.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{:.2}" font-size="13" text-anchor="middle" transform="rotate(-90 16 {:.2})">dimension</text>"#,
        SVG_HEIGHT / 2.0,
        SVG_HEIGHT / 2.0
    );

    for s in &series {
        if s.points.len() > 1 {
            let path: Vec<String> = s
                .points
                .iter()
                .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
                .collect();
            let _ = writeln!(
                svg,
                r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="1.5"/>"#,
                path.join(" "),
                s.color
            );
        }
        for &(x, y) in &s.points {
            let _ = writeln!(
                svg,
                r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{}"/>"#,
                px(x),
                py(y),
                s.color
            );
        }
    }
    for (i, s) in series.iter().enumerate() {
        let y = MARGIN_TOP + 14.0 + 16.0 * i as f64;
        let _ = writeln!(
            svg,
            r#"<rect x="{:.2}" y="{:.2}" width="10" height="10" fill="{}"/>"#,
            MARGIN_LEFT + 10.0,
            y - 9.0,
            s.color
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" font-size="12">{}</text>"#,
            MARGIN_LEFT + 26.0,
            y,
            s.label
        );
    }
    svg.push_str("</svg>\n");
    Some(svg)
}

/// Writes summary.csv, fits.json, and (when there is data) plot.svg next
/// to the manifest.
pub fn write_report(record: &RunRecord, dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("summary.csv"), summary_csv(record))?;
    let fits = compute_fits(record);
    let fits_text = serde_json::to_string_pretty(&fits)
        .map_err(|e| CliError::Numeric(format!("fits serialization: {e}")))?;
    fs::write(dir.join("fits.json"), fits_text + "\n")?;
    if let Some(svg) = plot_svg(record) {
        fs::write(dir.join("plot.svg"), svg)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sweep::{BoundsSet, SeedResult};
    use wavedim::bounds::upper_bound_d1;

    fn seed_result(ky: f64) -> SeedResult {
        SeedResult {
            seed: 1,
            ky_dimension: ky,
            exponent_sum: -1.25,
            exponents: vec![0.1, -0.2, -0.4],
            q_curve: None,
            bd_estimate: 1.4,
            convergence_variation: 0.01,
        }
    }

    fn gamma_result(gamma: f64, count: usize, ky: f64) -> GammaResult {
        let d1 = upper_bound_d1(gamma, 2, std::f64::consts::PI, 1.4).unwrap();
        GammaResult {
            gamma,
            mode_count: Some(count),
            lower_proxy: Some(2.0 * count as f64),
            ky_dimension: ky,
            bd_estimate: 1.4,
            tangent_count: 30,
            bounds: BoundsSet {
                upper_d1_simple: Some(d1.majorant),
                upper_d1: Some(d1),
                upper_d2: None,
                upper_d3: None,
                equilibrium_dim: Some(10.0 / gamma),
            },
            seeds: vec![seed_result(ky)],
        }
    }

    fn record(gammas: &[f64]) -> RunRecord {
        let counts = [4usize, 9, 19, 39];
        RunRecord {
            config_hash: "deadbeefdeadbeef".into(),
            code_version: "0.0.0".into(),
            config: crate::config::tests_fixture(),
            results: gammas
                .iter()
                .zip(counts)
                .map(|(&g, c)| gamma_result(g, c, 1.5 / g))
                .collect(),
            failures: Vec::new(),
        }
    }

    #[test]
    fn csv_has_stable_header_and_one_row_per_gamma() {
        let rec = record(&[0.2, 0.1]);
        let csv = summary_csv(&rec);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], SUMMARY_HEADER);
        assert_eq!(lines.len(), 3);
        let first: Vec<&str> = lines[1].split(',').collect();
        assert_eq!(first.len(), 11);
        assert_eq!(first[0], "0.2");
        assert_eq!(first[1], "4");
        assert_eq!(first[2], "8");
        // Planar and spatial bounds stay empty on an interval run.
        assert_eq!(first[8], "");
        assert_eq!(first[9], "");
    }

    #[test]
    fn empty_record_yields_header_only_csv_and_no_plot() {
        let rec = record(&[]);
        assert_eq!(summary_csv(&rec), format!("{SUMMARY_HEADER}\n"));
        assert!(plot_svg(&rec).is_none());
        let fits = compute_fits(&rec);
        assert_eq!(fits, FitsFile::default());
    }

    #[test]
    fn fits_need_four_points() {
        assert!(compute_fits(&record(&[0.2, 0.1, 0.05])).ky_dimension.is_none());
        let fits = compute_fits(&record(&[0.2, 0.1, 0.05, 0.025]));
        let ky = fits.ky_dimension.unwrap();
        assert!((ky.slope - 1.0).abs() < 1e-9);
        assert!(fits.lower_proxy.is_some());
        assert!(fits.upper_bound.is_some());
        assert!(fits.equilibrium_dim.is_some());
    }

    #[test]
    fn plot_draws_every_series_with_lower_below_upper() {
        let rec = record(&[0.2, 0.1, 0.05, 0.025]);
        let svg = plot_svg(&rec).unwrap();
        for color in ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"] {
            assert!(svg.contains(color), "missing series {color}");
        }
        assert!(svg.contains("<polyline"));
        // Pixel y grows downward, so a smaller quantity maps to a larger y.
        let y_lower = log_map(8.0, 1.0, 2000.0, 430.0, 20.0);
        let y_upper = log_map(1000.0, 1.0, 2000.0, 430.0, 20.0);
        assert!(y_lower > y_upper);
    }

    #[test]
    fn report_writes_deterministic_files() {
        let tmp = tempfile::tempdir().unwrap();
        let rec = record(&[0.2, 0.1, 0.05, 0.025]);
        write_report(&rec, tmp.path()).unwrap();
        let first = std::fs::read(tmp.path().join("plot.svg")).unwrap();
        write_report(&rec, tmp.path()).unwrap();
        let second = std::fs::read(tmp.path().join("plot.svg")).unwrap();
        assert_eq!(first, second);
        assert!(tmp.path().join("summary.csv").exists());
        assert!(tmp.path().join("fits.json").exists());
    }
}

//! γ-sweep orchestration: per-damping simulation, exponent spectra,
//! closed-form bounds, persistence, and scaling-law fits.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use wavedim::bounds::{
    equilibrium_lyapunov_dim, unstable_mode_count, upper_bound_d1, upper_bound_d1_simple,
    upper_bound_d2, upper_bound_d3plus, CLRConstants, D1Bound,
};
use wavedim::lyapunov::{compute_exponents, LyapunovConfig};
use wavedim::spectral::build_spectrum;

use crate::config::SweepConfig;
use crate::error::{CliError, CliResult};

/// Everything recorded about one (γ, seed) exponent run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    pub ky_dimension: f64,
    /// Sum of all computed exponents.
    pub exponent_sum: f64,
    /// Exponents sorted descending, all tangents.
    pub exponents: Vec<f64>,
    /// Averaged n-trace curve when collected.
    pub q_curve: Option<Vec<f64>>,
    pub bd_estimate: f64,
    pub convergence_variation: f64,
}

/// Closed-form dimension bounds at one damping value, evaluated with the
/// numerically estimated B_d. Only the bounds applicable to the domain
/// dimension are present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsSet {
    pub upper_d1: Option<D1Bound>,
    pub upper_d1_simple: Option<f64>,
    pub upper_d2: Option<f64>,
    pub upper_d3: Option<f64>,
    /// Kaplan–Yorke dimension of the zero-equilibrium linearization,
    /// interval domains with rotation only.
    pub equilibrium_dim: Option<f64>,
}

/// Aggregated results at one damping value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaResult {
    pub gamma: f64,
    /// Unstable conjugate pairs of the zero linearization; rotation only.
    pub mode_count: Option<usize>,
    /// 2 × mode_count: phase-space dimensions the unstable manifold spans.
    pub lower_proxy: Option<f64>,
    /// Largest Kaplan–Yorke dimension over the seeds. Uniform exponents
    /// are defined through suprema, so the max is the faithful aggregate.
    pub ky_dimension: f64,
    /// Largest B_d estimate over the seeds.
    pub bd_estimate: f64,
    pub tangent_count: usize,
    pub bounds: BoundsSet,
    pub seeds: Vec<SeedResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaFailure {
    pub gamma: f64,
    pub error: String,
}

/// One persisted sweep: the config, its hash, and per-γ outcomes.
/// Timestamps deliberately live in a sibling metadata file so the manifest
/// is byte-identical across re-runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config_hash: String,
    pub code_version: String,
    pub config: SweepConfig,
    pub results: Vec<GammaResult>,
    pub failures: Vec<GammaFailure>,
}

/// Wall-clock envelope of one sweep execution; the only non-deterministic
/// artifact.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunMeta {
    pub config_hash: String,
    pub started_unix_ms: u128,
    pub finished_unix_ms: u128,
}

pub struct SweepRun {
    pub record: RunRecord,
    pub dir: PathBuf,
    /// True when an existing manifest was left untouched.
    pub skipped: bool,
}

/// Directory that holds one config's artifacts.
pub fn record_dir(config: &SweepConfig, out_override: Option<&Path>) -> PathBuf {
    let base = out_override.unwrap_or(&config.output_dir);
    base.join(config.hash())
}

pub fn manifest_path(dir: &Path) -> PathBuf {
    dir.join("manifest.json")
}

pub fn load_record(dir: &Path) -> CliResult<RunRecord> {
    let path = manifest_path(dir);
    let text = fs::read_to_string(&path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// Tangent batch size for one damping value: twice the unstable-mode
/// count plus headroom when rotation is active, a small fixed batch
/// otherwise, always within the phase dimension.
pub fn auto_tangent_count(config: &SweepConfig, gamma: f64) -> CliResult<usize> {
    let full = 2 * config.discretization.modes * config.discretization.components;
    if config.sweep.tangent_count > 0 {
        if config.sweep.tangent_count > full {
            return Err(CliError::Config(format!(
                "tangent_count {} exceeds the phase dimension {full}",
                config.sweep.tangent_count
            )));
        }
        return Ok(config.sweep.tangent_count);
    }
    let spec = config.nonlinearity(gamma)?;
    let base = if spec.rotational {
        let scalar = build_spectrum(config.domain, config.discretization.modes, 1)?;
        let unstable =
            unstable_mode_count(gamma, config.scenario_params.a, spec.rotation_b, &scalar)?;
        unstable.instability_index + 12
    } else {
        16
    };
    Ok(base.clamp(8, full))
}

fn run_seed(
    config: &SweepConfig,
    gamma: f64,
    seed: u64,
    tangent_count: usize,
) -> Result<SeedResult, wavedim::Error> {
    let d = &config.discretization;
    let system = match config.system(gamma) {
        Ok(system) => system,
        Err(CliError::Numeric(msg)) | Err(CliError::Config(msg)) => {
            return Err(wavedim::Error::InvalidInput(msg))
        }
        Err(other) => return Err(wavedim::Error::InvalidInput(other.to_string())),
    };
    let state0 = config.initial_state(&system, seed);
    let burn = config.sweep.burn_in.unwrap_or(if gamma > 0.0 { 20.0 / gamma } else { 0.0 });
    let trajectory = system.simulate(state0, burn + d.t_final, d.dt, d.sample_stride)?;
    let bd_estimate = system.estimate_bd(&trajectory, config.domain.dim(), burn)?;
    let settled = trajectory.states.last().expect("trajectory non-empty").clone();

    let mut lyap = LyapunovConfig::new(tangent_count, config.sweep.averaging_time);
    lyap.burn_in = Some(0.0);
    lyap.collect_q = config.sweep.collect_q;
    lyap.require_convergence = config.sweep.require_convergence;
    let report = compute_exponents(&system, settled, &lyap)?;

    Ok(SeedResult {
        seed,
        ky_dimension: report.ky_dimension,
        exponent_sum: report.exponents.iter().sum(),
        exponents: report.exponents,
        q_curve: report.q_samples,
        bd_estimate,
        convergence_variation: report.convergence_variation,
    })
}

pub(crate) fn closed_form_bounds(
    config: &SweepConfig,
    gamma: f64,
    bd: f64,
) -> CliResult<BoundsSet> {
    let n = config.discretization.components;
    let spec = config.nonlinearity(gamma)?;
    let mut bounds = BoundsSet {
        upper_d1: None,
        upper_d1_simple: None,
        upper_d2: None,
        upper_d3: None,
        equilibrium_dim: None,
    };
    match config.domain.dim() {
        1 => {
            let len = config.domain.sides()[0];
            // A vanishing force bound degenerates the root equation; the
            // elementary bound already collapses to zero there.
            if bd > 0.0 {
                bounds.upper_d1 = Some(upper_bound_d1(gamma, n, len, bd)?);
            }
            bounds.upper_d1_simple = Some(upper_bound_d1_simple(gamma, n, len, bd)?);
            if spec.rotational {
                bounds.equilibrium_dim = Some(equilibrium_lyapunov_dim(
                    gamma,
                    spec.rotation_b,
                    len,
                )?);
            }
        }
        2 => {
            bounds.upper_d2 = Some(upper_bound_d2(gamma, n, config.domain.measure(), bd)?);
        }
        _ => {
            bounds.upper_d3 = Some(upper_bound_d3plus(gamma, n, bd, &CLRConstants::d3())?);
        }
    }
    Ok(bounds)
}

fn run_gamma(config: &SweepConfig, gamma: f64) -> Result<GammaResult, GammaFailure> {
    let fail = |e: String| GammaFailure { gamma, error: e };
    let tangent_count =
        auto_tangent_count(config, gamma).map_err(|e| fail(e.to_string()))?;
    let mut seeds = Vec::with_capacity(config.sweep.seeds.len());
    for &seed in &config.sweep.seeds {
        let result =
            run_seed(config, gamma, seed, tangent_count).map_err(|e| fail(e.to_string()))?;
        seeds.push(result);
    }
    let ky_dimension = seeds.iter().map(|s| s.ky_dimension).fold(0.0, f64::max);
    let bd_estimate = seeds.iter().map(|s| s.bd_estimate).fold(0.0, f64::max);

    let spec = config.nonlinearity(gamma).map_err(|e| fail(e.to_string()))?;
    let (mode_count, lower_proxy) = if spec.rotational {
        let scalar = build_spectrum(config.domain, config.discretization.modes, 1)
            .map_err(|e| fail(e.to_string()))?;
        let unstable =
            unstable_mode_count(gamma, config.scenario_params.a, spec.rotation_b, &scalar)
                .map_err(|e| fail(e.to_string()))?;
        (Some(unstable.count), Some(unstable.instability_index as f64))
    } else {
        (None, None)
    };
    let bounds =
        closed_form_bounds(config, gamma, bd_estimate).map_err(|e| fail(e.to_string()))?;

    Ok(GammaResult {
        gamma,
        mode_count,
        lower_proxy,
        ky_dimension,
        bd_estimate,
        tangent_count,
        bounds,
        seeds,
    })
}

/// Runs the whole γ grid, persists one `RunRecord` under
/// `outputDir/<hash>/`, and reports per-γ failures without aborting the
/// grid. An existing manifest short-circuits the run unless `force`.
pub fn run_sweep(
    config: &SweepConfig,
    out_override: Option<&Path>,
    force: bool,
) -> CliResult<SweepRun> {
    let dir = record_dir(config, out_override);
    if manifest_path(&dir).exists() && !force {
        let record = load_record(&dir)?;
        return Ok(SweepRun {
            record,
            dir,
            skipped: true,
        });
    }
    let started = now_ms();
    let outcomes: Vec<Result<GammaResult, GammaFailure>> = config
        .sweep
        .gammas
        .par_iter()
        .map(|&gamma| run_gamma(config, gamma))
        .collect();
    let mut results = Vec::new();
    let mut failures = Vec::new();
    for outcome in outcomes {
        match outcome {
            Ok(result) => results.push(result),
            Err(failure) => failures.push(failure),
        }
    }
    let record = RunRecord {
        config_hash: config.hash(),
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        config: config.clone(),
        results,
        failures,
    };
    persist(&record, &dir, started)?;
    if record.results.is_empty() {
        let detail = record
            .failures
            .first()
            .map(|f| f.error.clone())
            .unwrap_or_default();
        return Err(CliError::Numeric(format!(
            "every damping value failed; first error: {detail}"
        )));
    }
    Ok(SweepRun {
        record,
        dir,
        skipped: false,
    })
}

fn now_ms() -> u128 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0)
}

fn persist(record: &RunRecord, dir: &Path, started: u128) -> CliResult<()> {
    fs::create_dir_all(dir)?;
    let manifest = serde_json::to_string_pretty(record)
        .map_err(|e| CliError::Numeric(format!("manifest serialization: {e}")))?;
    fs::write(manifest_path(dir), manifest + "\n")?;
    let meta = RunMeta {
        config_hash: record.config_hash.clone(),
        started_unix_ms: started,
        finished_unix_ms: now_ms(),
    };
    let meta_text = serde_json::to_string_pretty(&meta)
        .map_err(|e| CliError::Numeric(format!("meta serialization: {e}")))?;
    fs::write(dir.join("run_meta.json"), meta_text + "\n")?;
    Ok(())
}

/// Least-squares fit of log(values) against log(1/γ).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Fits the γ-scaling exponent of a per-γ quantity. Needs at least four
/// points; zero or negative values make the log fit degenerate.
pub fn fit_scaling(gammas: &[f64], values: &[f64]) -> CliResult<FitResult> {
    if gammas.len() != values.len() {
        return Err(CliError::Numeric(format!(
            "{} damping values against {} quantities",
            gammas.len(),
            values.len()
        )));
    }
    if gammas.len() < 4 {
        return Err(CliError::Numeric(format!(
            "scaling fit needs at least 4 points, got {}",
            gammas.len()
        )));
    }
    if gammas.iter().any(|&g| !(g > 0.0)) {
        return Err(CliError::Numeric("damping values must be positive".into()));
    }
    if values.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(CliError::Numeric(
            "scaling fit is degenerate: quantity has non-positive values".into(),
        ));
    }
    let xs: Vec<f64> = gammas.iter().map(|&g| -(g.ln())).collect();
    let ys: Vec<f64> = values.iter().map(|&v| v.ln()).collect();
    let n = xs.len() as f64;
    let xbar = xs.iter().sum::<f64>() / n;
    let ybar = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - xbar) * (x - xbar)).sum();
    if sxx == 0.0 {
        return Err(CliError::Numeric(
            "scaling fit is degenerate: all damping values equal".into(),
        ));
    }
    let sxy: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (x - xbar) * (y - ybar))
        .sum();
    let slope = sxy / sxx;
    let intercept = ybar - slope * xbar;
    let ss_tot: f64 = ys.iter().map(|y| (y - ybar) * (y - ybar)).sum();
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let fit = intercept + slope * x;
            (y - fit) * (y - fit)
        })
        .sum();
    let r_squared = if ss_tot <= f64::EPSILON * ybar.abs().max(1.0) {
        1.0
    } else {
        1.0 - ss_res / ss_tot
    };
    Ok(FitResult {
        slope,
        intercept,
        r_squared,
    })
}

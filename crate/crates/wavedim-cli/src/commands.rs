//! Single-purpose subcommands: spectrum dump, one trajectory, one
//! exponent spectrum, closed-form bound tables, and instability counts.

use std::fs;
use std::path::Path;

use serde::Serialize;

use wavedim::bounds::{lower_bound_scaling, unstable_mode_count, ScalingFit};
use wavedim::lyapunov::{compute_exponents, LyapunovConfig, LyapunovReport};
use wavedim::spectral::{build_spectrum, weyl_estimate};

use crate::config::SweepConfig;
use crate::error::{CliError, CliResult};
use crate::sweep::{auto_tangent_count, closed_form_bounds};

fn cell(value: Option<f64>) -> String {
    value.map(|v| v.to_string()).unwrap_or_default()
}

/// Writes `spectrum.csv` (index, eigenvalue, per-axis mode numbers) and
/// prints the range together with the counting-function estimate.
pub fn cmd_spectrum(config: &SweepConfig, out: &Path) -> CliResult<()> {
    let d = &config.discretization;
    let spectrum = build_spectrum(config.domain, d.modes, d.components)
        .map_err(|e| CliError::Numeric(e.to_string()))?;
    let mut csv = String::from("j,lambda,ix,iy,iz\n");
    for (j, (lambda, idx)) in spectrum.lambdas.iter().zip(&spectrum.indices).enumerate() {
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            j + 1,
            lambda,
            idx[0],
            idx[1],
            idx[2]
        ));
    }
    fs::create_dir_all(out)?;
    fs::write(out.join("spectrum.csv"), csv)?;
    let weyl = weyl_estimate(config.domain, d.modes)
        .map_err(|e| CliError::Numeric(e.to_string()))?;
    println!(
        "spectrum: {} modes, lambda_1 = {}, lambda_M = {}, counting estimate for lambda_M = {weyl}",
        d.modes,
        spectrum.lambda1(),
        spectrum.lambdas[d.modes - 1]
    );
    Ok(())
}

/// Integrates one seeded trajectory at the first damping value and writes
/// `trajectory.csv`. The descent-functional column stays empty when the
/// force has a rotational part.
pub fn cmd_simulate(
    config: &SweepConfig,
    out: &Path,
    seed_override: Option<u64>,
) -> CliResult<()> {
    let d = &config.discretization;
    let gamma = config.sweep.gammas[0];
    let seed = seed_override.unwrap_or(config.sweep.seeds[0]);
    let system = config.system(gamma)?;
    let state0 = config.initial_state(&system, seed);
    let trajectory = system
        .simulate(state0, d.t_final, d.dt, d.sample_stride)
        .map_err(|e| CliError::Numeric(e.to_string()))?;

    let mut csv = String::from("t,energy,psi,descent,u_linf\n");
    for (i, &t) in trajectory.times.iter().enumerate() {
        let descent = trajectory.lyapunov.as_ref().map(|l| l[i]);
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            t,
            trajectory.energy[i],
            trajectory.psi[i],
            cell(descent),
            trajectory.u_linf[i]
        ));
    }
    fs::create_dir_all(out)?;
    fs::write(out.join("trajectory.csv"), csv)?;
    println!(
        "simulate: gamma = {gamma}, seed = {seed}, {} samples, final energy = {}",
        trajectory.len(),
        trajectory.energy.last().unwrap()
    );
    Ok(())
}

#[derive(Serialize)]
struct LyapunovFile<'a> {
    gamma: f64,
    seed: u64,
    tangent_count: usize,
    report: &'a LyapunovReport,
}

/// Computes one exponent spectrum at the first damping value and writes
/// `exponents.csv` plus the full report as `lyapunov.json`.
pub fn cmd_lyapunov(
    config: &SweepConfig,
    out: &Path,
    seed_override: Option<u64>,
) -> CliResult<()> {
    let gamma = config.sweep.gammas[0];
    let seed = seed_override.unwrap_or(config.sweep.seeds[0]);
    let tangent_count = auto_tangent_count(config, gamma)?;
    let system = config.system(gamma)?;
    let state0 = config.initial_state(&system, seed);

    let mut lyap = LyapunovConfig::new(tangent_count, config.sweep.averaging_time);
    lyap.burn_in = config.sweep.burn_in;
    lyap.collect_q = config.sweep.collect_q;
    lyap.require_convergence = config.sweep.require_convergence;
    let report =
        compute_exponents(&system, state0, &lyap).map_err(|e| CliError::Numeric(e.to_string()))?;

    let mut csv = String::from("rank,exponent,cumulative\n");
    for (i, (e, c)) in report.exponents.iter().zip(&report.cumulative).enumerate() {
        csv.push_str(&format!("{},{},{}\n", i + 1, e, c));
    }
    fs::create_dir_all(out)?;
    fs::write(out.join("exponents.csv"), csv)?;
    let file = LyapunovFile {
        gamma,
        seed,
        tangent_count,
        report: &report,
    };
    let json = serde_json::to_string_pretty(&file)
        .map_err(|e| CliError::Numeric(format!("report serialization: {e}")))?;
    fs::write(out.join("lyapunov.json"), json + "\n")?;
    println!(
        "lyapunov: gamma = {gamma}, k = {tangent_count}, top exponent = {}, KY dimension = {}",
        report.exponents[0], report.ky_dimension
    );
    Ok(())
}

/// Tabulates the closed-form bounds per damping value with the declared
/// force bound B_d from the scenario parameters.
pub fn cmd_bounds(config: &SweepConfig, out: &Path) -> CliResult<()> {
    let bd = config.scenario_params.bd;
    let mut csv =
        String::from("gamma,upper_d1_root,upper_d1_majorant,upper_d1_simple,upper_d2,upper_d3,equilibrium_dim\n");
    for &gamma in &config.sweep.gammas {
        let bounds = closed_form_bounds(config, gamma, bd)?;
        csv.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            gamma,
            cell(bounds.upper_d1.as_ref().map(|b| b.root)),
            cell(bounds.upper_d1.as_ref().map(|b| b.majorant)),
            cell(bounds.upper_d1_simple),
            cell(bounds.upper_d2),
            cell(bounds.upper_d3),
            cell(bounds.equilibrium_dim)
        ));
    }
    fs::create_dir_all(out)?;
    fs::write(out.join("bounds.csv"), csv)?;
    println!(
        "bounds: {} damping values with B_d = {bd}",
        config.sweep.gammas.len()
    );
    Ok(())
}

#[derive(Serialize)]
struct CountRow {
    gamma: f64,
    count: usize,
    instability_index: usize,
    max_growth_rate: Option<f64>,
}

#[derive(Serialize)]
struct LowerBoundFile {
    counts: Vec<CountRow>,
    /// Power-law fit of the counts; present only with at least four
    /// damping values spanning a wide enough range.
    fit: Option<ScalingFit>,
}

/// Counts unstable linearization modes per damping value and fits their
/// growth law; rotation must be active for instability to exist.
pub fn cmd_lower_bound(config: &SweepConfig, out: &Path) -> CliResult<()> {
    let gamma0 = config.sweep.gammas[0];
    let spec = config.nonlinearity(gamma0)?;
    if !spec.rotational {
        return Err(CliError::Config(
            "instability counts need the rotational scenario or a custom rotational force".into(),
        ));
    }
    let a = config.scenario_params.a;
    let b = spec.rotation_b;
    let scalar = build_spectrum(config.domain, config.discretization.modes, 1)
        .map_err(|e| CliError::Numeric(e.to_string()))?;

    let mut rows = Vec::new();
    let mut csv = String::from("gamma,count,instability_index,max_growth_rate\n");
    for &gamma in &config.sweep.gammas {
        let unstable = unstable_mode_count(gamma, a, b, &scalar)
            .map_err(|e| CliError::Numeric(e.to_string()))?;
        let max_rate = unstable
            .growth_rates
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        let max_rate = (unstable.count > 0).then_some(max_rate);
        csv.push_str(&format!(
            "{},{},{},{}\n",
            gamma,
            unstable.count,
            unstable.instability_index,
            cell(max_rate)
        ));
        rows.push(CountRow {
            gamma,
            count: unstable.count,
            instability_index: unstable.instability_index,
            max_growth_rate: max_rate,
        });
    }
    let fit = lower_bound_scaling(&config.sweep.gammas, a, b, &config.domain).ok();

    fs::create_dir_all(out)?;
    fs::write(out.join("lower_bound.csv"), csv)?;
    let file = LowerBoundFile { counts: rows, fit };
    let json = serde_json::to_string_pretty(&file)
        .map_err(|e| CliError::Numeric(format!("serialization: {e}")))?;
    fs::write(out.join("lower_bound.json"), json + "\n")?;
    println!(
        "lower-bound: counts {:?} over gammas {:?}",
        file.counts.iter().map(|r| r.count).collect::<Vec<_>>(),
        config.sweep.gammas
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::tests_fixture;

    #[test]
    fn spectrum_csv_lists_every_mode_in_order() {
        let tmp = tempfile::tempdir().unwrap();
        let config = tests_fixture();
        cmd_spectrum(&config, tmp.path()).unwrap();
        let csv = fs::read_to_string(tmp.path().join("spectrum.csv")).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 1 + config.discretization.modes);
        assert_eq!(lines[0], "j,lambda,ix,iy,iz");
        assert_eq!(lines[1], "1,1,1,0,0");
        assert_eq!(lines[2], "2,4,2,0,0");
    }

    #[test]
    fn bounds_table_has_one_row_per_gamma() {
        let tmp = tempfile::tempdir().unwrap();
        let config = tests_fixture();
        cmd_bounds(&config, tmp.path()).unwrap();
        let csv = fs::read_to_string(tmp.path().join("bounds.csv")).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 3);
        let row: Vec<&str> = lines[1].split(',').collect();
        assert_eq!(row[0], "0.2");
        assert!(!row[1].is_empty());
        assert!(row[4].is_empty());
        assert!(!row[6].is_empty());
    }

    #[test]
    fn lower_bound_counts_match_the_threshold() {
        let tmp = tempfile::tempdir().unwrap();
        let config = tests_fixture();
        cmd_lower_bound(&config, tmp.path()).unwrap();
        let csv = fs::read_to_string(tmp.path().join("lower_bound.csv")).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert!(lines[1].starts_with("0.2,4,8,"));
        assert!(lines[2].starts_with("0.1,9,18,"));
        // Two damping values cannot support a four-point fit.
        let json = fs::read_to_string(tmp.path().join("lower_bound.json")).unwrap();
        assert!(json.contains("\"fit\": null"));
    }

    #[test]
    fn lower_bound_rejects_gradient_scenarios() {
        let tmp = tempfile::tempdir().unwrap();
        let mut config = tests_fixture();
        config.scenario = crate::config::Scenario::GradientCubic;
        match cmd_lower_bound(&config, tmp.path()) {
            Err(CliError::Config(_)) => {}
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn simulate_writes_the_trajectory_table() {
        let tmp = tempfile::tempdir().unwrap();
        let mut config = tests_fixture();
        config.discretization.modes = 8;
        config.discretization.t_final = 1.0;
        cmd_simulate(&config, tmp.path(), Some(3)).unwrap();
        let csv = fs::read_to_string(tmp.path().join("trajectory.csv")).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "t,energy,psi,descent,u_linf");
        assert!(lines.len() > 5);
        // Rotation blocks the descent functional, so its cells are empty.
        let row: Vec<&str> = lines[1].split(',').collect();
        assert_eq!(row.len(), 5);
        assert!(row[3].is_empty());
    }
}

//! Randomized verification campaigns for the gradient-family
//! inequalities, one per domain dimension, with CSV rows per seed and a
//! JSON roll-up.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use wavedim::bounds::CLRConstants;
use wavedim::ineq::{
    campaign_mode, eigen_family, gen_suborth, hat_family, rho_bound_d1, rho_bound_d2,
    rho_bound_d3, verify_sub_lemma, GenMode, InequalityCheck, SuborthFamily,
};
use wavedim::spectral::{build_spectrum, Domain};

use crate::error::{CliError, CliResult};

pub const ROWS_HEADER: &str = "seed,n,lhs,rhs,margin,pass";

#[derive(Debug, Clone, Copy)]
pub struct IneqParams {
    /// Domain dimension of the campaign, 1 to 3.
    pub dimension: usize,
    /// Family sizes cycle through 1..=n_max.
    pub n_max: usize,
    pub seeds: u64,
    /// Quadrature resolution per axis; `None` picks the per-dimension
    /// default (1024 for intervals, 32 for boxes; the planar check is
    /// exact in coefficients and ignores it).
    pub grid: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct Row {
    seed: u64,
    n: usize,
    lhs: f64,
    rhs: f64,
    margin: f64,
    pass: bool,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ModeTally {
    pub orthonormal: usize,
    pub contracted: usize,
    pub projected: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LemmaAggregate {
    pub checked: usize,
    pub failures: usize,
    pub min_margin: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IneqSummary {
    pub dimension: usize,
    pub seeds: u64,
    pub failures: usize,
    pub min_margin: f64,
    pub mode_tally: ModeTally,
    /// Trace-comparison inequality over the same families, weights 1/j.
    pub lemma: LemmaAggregate,
    /// Interval campaigns: peak-function share of the sharp constant.
    pub hat_sharpness: Option<f64>,
    /// Spatial campaigns: prefix-growth exponent of the critical norm for
    /// the deterministic eigenfunction family, limit rate 1/3.
    pub scaling_exponent: Option<f64>,
    pub grid_points: Option<usize>,
}

fn campaign_domain(dimension: usize) -> CliResult<Domain> {
    let pi = std::f64::consts::PI;
    match dimension {
        1 => Ok(Domain::Interval { len: pi }),
        2 => Ok(Domain::Rectangle { lx: pi, ly: pi }),
        3 => Ok(Domain::Box3 {
            lx: pi,
            ly: pi,
            lz: pi,
        }),
        other => Err(CliError::Config(format!(
            "inequality campaigns cover dimensions 1 to 3, got {other}"
        ))),
    }
}

struct SeedOutcome {
    row: Row,
    mode: GenMode,
    lemma: InequalityCheck,
}

fn run_one(
    domain: Domain,
    modes: usize,
    grid: usize,
    n_max: usize,
    seed: u64,
) -> Result<SeedOutcome, wavedim::Error> {
    let n = 1 + (seed as usize) % n_max;
    let mode = campaign_mode(seed);
    let family = gen_suborth(domain, 1, n, modes, seed, mode)?;
    let check = match domain.dim() {
        1 => rho_bound_d1(&family, grid)?,
        2 => rho_bound_d2(&family)?,
        _ => rho_bound_d3(&family, &CLRConstants::d3(), grid)?.check,
    };
    let lemma = lemma_check(&family);
    Ok(SeedOutcome {
        row: Row {
            seed,
            n,
            lhs: check.lhs,
            rhs: check.rhs,
            margin: check.margin(),
            pass: check.pass,
        },
        mode,
        lemma,
    })
}

/// Trace comparison with the harmonic weights μ_j = 1/j over the ambient
/// dimension of `family`.
fn lemma_check(family: &SuborthFamily) -> InequalityCheck {
    let ambient = family.mode_count() * family.n_components();
    let mu: Vec<f64> = (1..=ambient).map(|j| 1.0 / j as f64).collect();
    verify_sub_lemma(&mu, &family.ambient_vectors())
}

/// Runs the campaign, writes `ineq_rows.csv` and `ineq_summary.json`
/// under `out_dir`, and fails with a numeric error when any seed
/// violates its inequality.
pub fn run_ineq(params: &IneqParams, out_dir: &Path) -> CliResult<IneqSummary> {
    if params.n_max == 0 || params.seeds == 0 {
        return Err(CliError::Config(
            "campaign needs n_max >= 1 and at least one seed".into(),
        ));
    }
    let domain = campaign_domain(params.dimension)?;
    let modes = params.n_max.max(64);
    let grid = params.grid.unwrap_or(match params.dimension {
        1 => 1024,
        _ => 32,
    });

    let outcomes: Result<Vec<SeedOutcome>, wavedim::Error> = (0..params.seeds)
        .into_par_iter()
        .map(|seed| run_one(domain, modes, grid, params.n_max, seed))
        .collect();
    let outcomes = outcomes.map_err(|e| CliError::Numeric(e.to_string()))?;

    let mut tally = ModeTally::default();
    let mut lemma = LemmaAggregate {
        checked: 0,
        failures: 0,
        min_margin: f64::INFINITY,
    };
    let mut failures = 0;
    let mut min_margin = f64::INFINITY;
    for outcome in &outcomes {
        match outcome.mode {
            GenMode::Orthonormal => tally.orthonormal += 1,
            GenMode::Contracted => tally.contracted += 1,
            GenMode::Projected => tally.projected += 1,
        }
        if !outcome.row.pass {
            failures += 1;
        }
        min_margin = min_margin.min(outcome.row.margin);
        lemma.checked += 1;
        lemma.min_margin = lemma.min_margin.min(outcome.lemma.margin());
        if !outcome.lemma.pass {
            lemma.failures += 1;
        }
    }

    let hat_sharpness = if params.dimension == 1 {
        let witness = hat_family(domain.sides()[0], modes)?;
        let check = rho_bound_d1(&witness, grid)?;
        Some(check.lhs / check.rhs)
    } else {
        None
    };
    let scaling_exponent = if params.dimension == 3 {
        let spectrum = build_spectrum(domain, 512, 1)?;
        let family = eigen_family(&spectrum, 256)?;
        let grid = grid.max(48);
        rho_bound_d3(&family, &CLRConstants::d3(), grid)?.scaling_exponent
    } else {
        None
    };

    let lemma_failures = lemma.failures;
    let summary = IneqSummary {
        dimension: params.dimension,
        seeds: params.seeds,
        failures,
        min_margin,
        mode_tally: tally,
        lemma,
        hat_sharpness,
        scaling_exponent,
        grid_points: if params.dimension == 2 {
            None
        } else {
            Some(grid)
        },
    };

    fs::create_dir_all(out_dir)?;
    let mut csv = String::from(ROWS_HEADER);
    csv.push('\n');
    for outcome in &outcomes {
        let r = &outcome.row;
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.seed, r.n, r.lhs, r.rhs, r.margin, r.pass
        ));
    }
    fs::write(out_dir.join("ineq_rows.csv"), csv)?;
    let json = serde_json::to_string_pretty(&summary)
        .map_err(|e| CliError::Numeric(format!("summary serialization: {e}")))?;
    fs::write(out_dir.join("ineq_summary.json"), json + "\n")?;

    if failures > 0 || lemma_failures > 0 {
        return Err(CliError::Numeric(format!(
            "{failures} density and {lemma_failures} trace-comparison violations out of {} seeds",
            params.seeds
        )));
    }
    Ok(summary)
}

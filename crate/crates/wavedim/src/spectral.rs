//! Domain geometry and Dirichlet Laplacian spectra on axis-aligned boxes.
//!
//! On a box with side lengths ℓ₁..ℓ_d the eigenpairs are closed form:
//! λ = Σ_a (n_a π / ℓ_a)² over positive integer index tuples, with
//! eigenfunctions ∏_a √(2/ℓ_a) sin(n_a π x_a / ℓ_a). Spectra carry an
//! N-fold vector multiplicity for ℝᴺ-valued problems.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Axis-aligned box domain in dimension 1, 2 or 3.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Domain {
    Interval { len: f64 },
    Rectangle { lx: f64, ly: f64 },
    Box3 { lx: f64, ly: f64, lz: f64 },
}

impl Domain {
    pub fn dim(&self) -> usize {
        match self {
            Domain::Interval { .. } => 1,
            Domain::Rectangle { .. } => 2,
            Domain::Box3 { .. } => 3,
        }
    }

    /// Lebesgue measure |Ω|.
    pub fn measure(&self) -> f64 {
        self.sides().iter().product()
    }

    pub fn sides(&self) -> Vec<f64> {
        match *self {
            Domain::Interval { len } => vec![len],
            Domain::Rectangle { lx, ly } => vec![lx, ly],
            Domain::Box3 { lx, ly, lz } => vec![lx, ly, lz],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sides().iter().all(|&l| l > 0.0 && l.is_finite()) {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!(
                "all side lengths must be positive and finite, got {:?}",
                self.sides()
            )))
        }
    }
}

/// The first M Dirichlet eigenvalues of a box, with N-fold vector multiplicity.
///
/// `lambdas` is non-decreasing; ties are ordered by the lexicographic order of
/// the index tuples so spectra are reproducible. `bold_lambdas` repeats each
/// scalar eigenvalue `n_components` times, preserving the ordering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub domain: Domain,
    pub lambdas: Vec<f64>,
    /// Per-axis mode numbers of each eigenvalue, 1-based; unused axes are 0.
    pub indices: Vec<[u32; 3]>,
    pub n_components: usize,
    pub bold_lambdas: Vec<f64>,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }

    pub fn lambda1(&self) -> f64 {
        self.lambdas[0]
    }
}

/// Builds the first `m` eigenvalues of `domain` with component count `n_components`.
pub fn build_spectrum(domain: Domain, m: usize, n_components: usize) -> Result<Spectrum> {
    domain.validate()?;
    if m == 0 {
        return Err(Error::InvalidInput("mode count must be at least 1".into()));
    }
    if n_components == 0 {
        return Err(Error::InvalidInput(
            "component count must be at least 1".into(),
        ));
    }

    let sides = domain.sides();
    let rates: Vec<f64> = sides.iter().map(|l| (PI / l).powi(2)).collect();

    // Enumerate index tuples below a cutoff, growing the cutoff until at
    // least m eigenvalues are collected.
    let mut cap = rates.iter().sum::<f64>() * 4.0 * (m as f64).powf(2.0 / sides.len() as f64);
    let mut entries: Vec<(f64, [u32; 3])> = Vec::new();
    loop {
        entries.clear();
        collect_below(&rates, cap, &mut entries);
        if entries.len() >= m {
            break;
        }
        cap *= 2.0;
    }
    entries.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    entries.truncate(m);

    let lambdas: Vec<f64> = entries.iter().map(|e| e.0).collect();
    let indices: Vec<[u32; 3]> = entries.iter().map(|e| e.1).collect();
    let mut bold_lambdas = Vec::with_capacity(m * n_components);
    for &l in &lambdas {
        bold_lambdas.extend(std::iter::repeat_n(l, n_components));
    }

    Ok(Spectrum {
        domain,
        lambdas,
        indices,
        n_components,
        bold_lambdas,
    })
}

fn collect_below(rates: &[f64], cap: f64, out: &mut Vec<(f64, [u32; 3])>) {
    let kmax = |rate: f64, budget: f64| -> u32 {
        if budget <= rate {
            0
        } else {
            (budget / rate).sqrt().floor() as u32
        }
    };
    match rates.len() {
        1 => {
            for i in 1..=kmax(rates[0], cap) {
                out.push((rates[0] * (i * i) as f64, [i, 0, 0]));
            }
        }
        2 => {
            for i in 1..=kmax(rates[0], cap) {
                let li = rates[0] * (i * i) as f64;
                for j in 1..=kmax(rates[1], cap - li) {
                    out.push((li + rates[1] * (j * j) as f64, [i, j, 0]));
                }
            }
        }
        3 => {
            for i in 1..=kmax(rates[0], cap) {
                let li = rates[0] * (i * i) as f64;
                for j in 1..=kmax(rates[1], cap - li) {
                    let lj = li + rates[1] * (j * j) as f64;
                    for k in 1..=kmax(rates[2], cap - lj) {
                        out.push((lj + rates[2] * (k * k) as f64, [i, j, k]));
                    }
                }
            }
        }
        _ => unreachable!("domains are 1-, 2- or 3-dimensional"),
    }
}

/// Volume of the unit ball in dimension d, via ω_d = (2π/d)·ω_{d−2}.
pub(crate) fn unit_ball_volume(d: usize) -> f64 {
    match d {
        0 => 1.0,
        1 => 2.0,
        2 => PI,
        _ => 2.0 * PI / d as f64 * unit_ball_volume(d - 2),
    }
}

/// Principal Weyl term for the n-th eigenvalue,
/// λ_n ≈ ((2π)^d / (ω_d |Ω|))^{2/d} n^{2/d}.
///
/// Cross-check only; bound evaluation never consumes this.
pub fn weyl_estimate(domain: Domain, n: usize) -> Result<f64> {
    domain.validate()?;
    if n == 0 {
        return Err(Error::InvalidInput("index must be at least 1".into()));
    }
    let d = domain.dim();
    let coeff = (2.0 * PI).powi(d as i32) / (unit_ball_volume(d) * domain.measure());
    Ok(coeff.powf(2.0 / d as f64) * (n as f64).powf(2.0 / d as f64))
}

/// Two-dimensional Li-Yau lower bounds for vector spectra.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LiYauBound {
    /// Lower bound for Σ_{j≤n} boldλ_j, namely (2π/(N|Ω|)) n².
    pub cumulative: f64,
    /// Lower bound for boldλ_n itself, namely (2π/(N|Ω|)) n.
    pub per_index: f64,
}

/// Li-Yau lower bound for cumulative sums of the N-vector spectrum; d = 2 only.
pub fn li_yau_lower(domain: Domain, n: usize, n_components: usize) -> Result<LiYauBound> {
    domain.validate()?;
    if domain.dim() != 2 {
        return Err(Error::UnsupportedDimension {
            got: domain.dim(),
            need: "2",
        });
    }
    if n == 0 || n_components == 0 {
        return Err(Error::InvalidInput(
            "index and component count must be at least 1".into(),
        ));
    }
    let rate = 2.0 * PI / (n_components as f64 * domain.measure());
    Ok(LiYauBound {
        cumulative: rate * (n as f64).powi(2),
        per_index: rate * n as f64,
    })
}

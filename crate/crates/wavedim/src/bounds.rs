//! Closed-form attractor-dimension estimates.
//!
//! Upper bounds come in four flavors keyed to the spatial dimension: the
//! root of a log-corrected equation on an interval, an elementary quadratic
//! interval bound, an area-quadratic bound on planar domains, and a
//! CLR-constant volume bound for d ≥ 3. Lower bounds count the linearly
//! unstable modes produced by a rotational coupling and fit the count
//! against 1/γ; equilibrium spectra give the same count as a Morse index.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::spectral::{unit_ball_volume, Domain, Spectrum};
use crate::{Error, Result};

/// Constant in the Cwikel-Lieb-Rozenblum eigenvalue-counting estimate
/// N ≤ L_{0,d} ∫ V₋^{d/2} for the number of negative eigenvalues of −Δ − V.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CLRConstants {
    pub dim: usize,
    pub l0d: f64,
}

impl CLRConstants {
    /// Semiclassical value ω_d/(2π)^d, the greatest lower bound any valid
    /// constant must respect.
    pub fn classical(dim: usize) -> f64 {
        unit_ball_volume(dim) / (2.0 * std::f64::consts::PI).powi(dim as i32)
    }

    pub fn new(dim: usize, l0d: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("dimension must be at least 1".into()));
        }
        let floor = Self::classical(dim);
        if !(l0d >= floor) {
            return Err(Error::InvalidInput(format!(
                "CLR constant {l0d} below the semiclassical floor {floor} in dimension {dim}"
            )));
        }
        Ok(CLRConstants { dim, l0d })
    }

    /// Best published three-dimensional value.
    pub fn d3() -> Self {
        CLRConstants { dim: 3, l0d: 0.116 }
    }
}

/// Prefactor c_d = 8^d (d/(d−2))^{d/2} L_{0,d} of the volume bound.
pub fn volume_constant(clr: &CLRConstants) -> Result<f64> {
    if clr.dim < 3 {
        return Err(Error::UnsupportedDimension {
            got: clr.dim,
            need: "at least 3",
        });
    }
    let d = clr.dim as f64;
    Ok(8.0f64.powi(clr.dim as i32) * (d / (d - 2.0)).powf(d / 2.0) * clr.l0d)
}

/// Volume upper bound N·c_d·γ^{−d}·B_dᵈ for d ≥ 3.
pub fn upper_bound_d3plus(
    gamma: f64,
    n_components: usize,
    b_d: f64,
    clr: &CLRConstants,
) -> Result<f64> {
    if !(gamma > 0.0) || b_d < 0.0 || n_components == 0 {
        return Err(Error::InvalidInput(
            "need gamma > 0, B_d >= 0 and at least one component".into(),
        ));
    }
    let c = volume_constant(clr)?;
    let d = clr.dim as i32;
    Ok(n_components as f64 * c * gamma.powi(-d) * b_d.powi(d))
}

/// Interval bound obtained as the root of n = A ln(en).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct D1Bound {
    /// Coefficient A = N(8/π)γ⁻¹ℓB₁ of the root equation.
    pub coefficient: f64,
    /// Unique root n* of n = A ln(en), the dimension bound itself.
    pub root: f64,
    /// Closed-form majorant 2A ln A, valid for A ≥ e; below that the root
    /// is reported as its own majorant.
    pub majorant: f64,
}

/// Log-corrected interval upper bound.
///
/// Solves n = A ln(en) with A = N(8/π)γ⁻¹ℓB₁ by bisection on the fixed
/// bracket [max(1, A), max(e, 4A ln(A+e))]. The objective n − A(1 + ln n)
/// is increasing past n = A, so the bracket pins the unique root ≥ 1;
/// for A ≤ 1 the equation degenerates and the bound collapses to 1.
pub fn upper_bound_d1(gamma: f64, n_components: usize, len: f64, b1: f64) -> Result<D1Bound> {
    if !(gamma > 0.0 && len > 0.0) || b1 < 0.0 || n_components == 0 {
        return Err(Error::InvalidInput(
            "need gamma, length > 0, B1 >= 0 and at least one component".into(),
        ));
    }
    let a = n_components as f64 * (8.0 / std::f64::consts::PI) * len * b1 / gamma;
    if !(a > 0.0) {
        return Err(Error::InvalidInput(format!(
            "root-equation coefficient must be positive, got {a}"
        )));
    }
    let objective = |n: f64| n - a * (1.0 + n.ln());
    let mut lo = a.max(1.0);
    let mut hi = (4.0 * a * (a + std::f64::consts::E).ln()).max(std::f64::consts::E);
    let root = if objective(lo) >= 0.0 {
        lo
    } else {
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if objective(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    let majorant = if a >= std::f64::consts::E {
        2.0 * a * a.ln()
    } else {
        root
    };
    Ok(D1Bound {
        coefficient: a,
        root,
        majorant,
    })
}

/// Planar upper bound N·(128/π)·γ⁻²·|Ω|·B₂².
pub fn upper_bound_d2(gamma: f64, n_components: usize, area: f64, b2: f64) -> Result<f64> {
    if !(gamma > 0.0 && area > 0.0) || b2 < 0.0 || n_components == 0 {
        return Err(Error::InvalidInput(
            "need gamma, area > 0, B2 >= 0 and at least one component".into(),
        ));
    }
    Ok(n_components as f64 * (128.0 / std::f64::consts::PI) * gamma.powi(-2) * area * b2 * b2)
}

/// Elementary interval upper bound N·(16/γ²)·ℓ·B₁², without the log
/// correction. Larger than the root bound once γ is small.
pub fn upper_bound_d1_simple(gamma: f64, n_components: usize, len: f64, b1: f64) -> Result<f64> {
    if !(gamma > 0.0 && len > 0.0) || b1 < 0.0 || n_components == 0 {
        return Err(Error::InvalidInput(
            "need gamma, length > 0, B1 >= 0 and at least one component".into(),
        ));
    }
    Ok(n_components as f64 * 16.0 / (gamma * gamma) * len * b1 * b1)
}

/// Unstable modes of the linearization at zero under a rotational coupling
/// with symbol a + ib per Laplacian eigenvalue.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnstableModes {
    /// Number of eigenvalues whose conjugate pair crosses into Re μ > 0.
    pub count: usize,
    /// Positions into `spectrum.lambdas` of the unstable modes.
    pub positions: Vec<usize>,
    /// Re μ₊ for each unstable mode, aligned with `positions`.
    pub growth_rates: Vec<f64>,
    /// Real dimensions contributed: 2 per unstable conjugate pair.
    pub instability_index: usize,
}

/// Counts modes where μ² + γμ + (λ + a) + ib has a root with Re μ > 0.
///
/// The root condition reduces algebraically to λ + a < (b/γ)², which the
/// counting loop uses verbatim: it is exact at marginal modes, where the
/// complex square root would sit on rounding noise. Growth rates are then
/// evaluated from the quadratic for the flagged modes only.
pub fn unstable_mode_count(
    gamma: f64,
    a: f64,
    b: f64,
    spectrum: &Spectrum,
) -> Result<UnstableModes> {
    if !(gamma > 0.0) {
        return Err(Error::InvalidInput("damping must be positive".into()));
    }
    if b == 0.0 {
        return Err(Error::InvalidInput(
            "rotational part must be nonzero; without it no mode destabilizes".into(),
        ));
    }
    if spectrum.n_components != 1 {
        return Err(Error::InvalidInput(
            "pass the scalar spectrum; each scalar eigenvalue contributes one conjugate pair"
                .into(),
        ));
    }
    let threshold = (b / gamma) * (b / gamma);
    let mut positions = Vec::new();
    let mut growth_rates = Vec::new();
    for (pos, &lambda) in spectrum.lambdas.iter().enumerate() {
        if lambda + a < threshold {
            positions.push(pos);
            growth_rates.push(growth_rate(gamma, lambda + a, b));
        }
    }
    let count = positions.len();
    Ok(UnstableModes {
        count,
        positions,
        growth_rates,
        instability_index: 2 * count,
    })
}

/// Re μ₊ of μ² + γμ + c + ib = 0.
fn growth_rate(gamma: f64, c: f64, b: f64) -> f64 {
    let disc = Complex64::new(gamma * gamma - 4.0 * c, -4.0 * b);
    0.5 * (disc.sqrt().re - gamma)
}

/// Least-squares fit of log(unstable count) against log(1/γ).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub gammas: Vec<f64>,
    pub counts: Vec<usize>,
    /// Fitted slope; ≈ d when the counts follow the γ⁻ᵈ law.
    pub exponent: f64,
}

/// Fits the γ-scaling of the unstable-mode count over a whole domain.
///
/// Counts every Laplacian mode below the instability threshold directly on
/// the index lattice, so no truncation parameter is involved.
pub fn lower_bound_scaling(gammas: &[f64], a: f64, b: f64, domain: &Domain) -> Result<ScalingFit> {
    domain.validate()?;
    if gammas.len() < 4 {
        return Err(Error::InsufficientSamples {
            got: gammas.len(),
            need: 4,
        });
    }
    if gammas.iter().any(|&g| !(g > 0.0)) {
        return Err(Error::InvalidInput("damping values must be positive".into()));
    }
    let gmin = gammas.iter().cloned().fold(f64::INFINITY, f64::min);
    let gmax = gammas.iter().cloned().fold(0.0f64, f64::max);
    if gmax / gmin < 8.0 {
        return Err(Error::InvalidInput(format!(
            "damping values span a factor {:.3}, need at least 8",
            gmax / gmin
        )));
    }
    if b == 0.0 {
        return Err(Error::InvalidInput("rotational part must be nonzero".into()));
    }
    let mut counts = Vec::with_capacity(gammas.len());
    for &g in gammas {
        let cap = (b / g) * (b / g) - a;
        let count = lattice_count_below(domain, cap);
        if count == 0 {
            return Err(Error::DegenerateFit(format!(
                "no unstable modes at gamma = {g}; cannot fit a log-log slope"
            )));
        }
        counts.push(count);
    }
    let xs: Vec<f64> = gammas.iter().map(|g| (1.0 / g).ln()).collect();
    let ys: Vec<f64> = counts.iter().map(|&c| (c as f64).ln()).collect();
    let n = xs.len() as f64;
    let xbar = xs.iter().sum::<f64>() / n;
    let ybar = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - xbar) * (x - xbar)).sum();
    let sxy: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (x - xbar) * (y - ybar))
        .sum();
    if sxx == 0.0 {
        return Err(Error::DegenerateFit(
            "damping values are all equal; slope is undefined".into(),
        ));
    }
    Ok(ScalingFit {
        gammas: gammas.to_vec(),
        counts,
        exponent: sxy / sxx,
    })
}

/// Number of Dirichlet modes with λ strictly below `cap`, exhaustively over
/// the index lattice.
fn lattice_count_below(domain: &Domain, cap: f64) -> usize {
    let sides = domain.sides();
    let rates: Vec<f64> = sides
        .iter()
        .map(|l| (std::f64::consts::PI / l) * (std::f64::consts::PI / l))
        .collect();
    let kmax = |rate: f64, room: f64| -> u64 {
        if room <= rate {
            0
        } else {
            let mut k = (room / rate).sqrt().ceil() as u64;
            while k >= 1 && (k * k) as f64 * rate >= room {
                k -= 1;
            }
            k
        }
    };
    match rates.len() {
        1 => kmax(rates[0], cap) as usize,
        2 => {
            let mut count = 0usize;
            for i in 1..=kmax(rates[0], cap) {
                let used = (i * i) as f64 * rates[0];
                count += kmax(rates[1], cap - used) as usize;
            }
            count
        }
        3 => {
            let mut count = 0usize;
            for i in 1..=kmax(rates[0], cap) {
                let used_i = (i * i) as f64 * rates[0];
                for j in 1..=kmax(rates[1], cap - used_i) {
                    let used = used_i + (j * j) as f64 * rates[1];
                    count += kmax(rates[2], cap - used) as usize;
                }
            }
            count
        }
        _ => 0,
    }
}

/// Eigenvalues of the linearized flow at an equilibrium whose second-order
/// pencil has spectrum ν_j: the two branches (−γ ∓ √(γ² − 4ν_j))/2.
#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumSpectrum {
    /// Branch with the minus sign; always Re ≤ −γ/2.
    pub branch_minus: Vec<Complex64>,
    /// Branch with the plus sign; crosses zero exactly when ν_j < 0.
    pub branch_plus: Vec<Complex64>,
}

impl EquilibriumSpectrum {
    /// Unstable real directions: one per positive-real-part eigenvalue.
    /// Equals the Morse index of the pencil.
    pub fn instability_index(&self) -> usize {
        self.branch_plus.iter().filter(|m| m.re > 0.0).count()
            + self.branch_minus.iter().filter(|m| m.re > 0.0).count()
    }
}

pub fn equilibrium_spectrum(gamma: f64, nus: &[f64]) -> Result<EquilibriumSpectrum> {
    if !(gamma > 0.0) {
        return Err(Error::InvalidInput("damping must be positive".into()));
    }
    if nus.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidInput(
            "pencil eigenvalues must be sorted non-decreasing".into(),
        ));
    }
    let mut branch_minus = Vec::with_capacity(nus.len());
    let mut branch_plus = Vec::with_capacity(nus.len());
    for &nu in nus {
        let root = Complex64::new(gamma * gamma - 4.0 * nu, 0.0).sqrt();
        branch_minus.push((Complex64::new(-gamma, 0.0) - root) * 0.5);
        branch_plus.push((Complex64::new(-gamma, 0.0) + root) * 0.5);
    }
    Ok(EquilibriumSpectrum {
        branch_minus,
        branch_plus,
    })
}

/// Lyapunov dimension of the zero equilibrium on an interval: the positive
/// root of γn = (bℓ/π) H(n), with the harmonic sum H interpolated linearly
/// between integers. Returns 0 when even the first mode is stable.
pub fn equilibrium_lyapunov_dim(gamma: f64, b: f64, len: f64) -> Result<f64> {
    if !(gamma > 0.0 && b > 0.0 && len > 0.0) {
        return Err(Error::InvalidInput(
            "damping, coupling and length must be positive".into(),
        ));
    }
    let coeff = b * len / std::f64::consts::PI;
    if coeff - gamma < 0.0 {
        return Ok(0.0);
    }
    let mut harmonic = 0.0f64;
    let mut prev = 0.0f64;
    // φ(k) = coeff·H_k − γk rises while k + 1 < coeff/γ, then falls without
    // bound; the first sign change brackets the root in one unit cell.
    for k in 1..=1_000_000_000u64 {
        harmonic += 1.0 / k as f64;
        let phi = coeff * harmonic - gamma * k as f64;
        if phi < 0.0 {
            return Ok((k - 1) as f64 + prev / (prev - phi));
        }
        prev = phi;
    }
    Err(Error::InvalidInput(
        "equilibrium dimension exceeds 1e9; damping too small".into(),
    ))
}

/// One evaluated upper bound with the inputs that produced it, for reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    /// Which estimate produced the number: "clr_volume", "interval_log_root",
    /// "area_quadratic" or "interval_elementary".
    pub formula: String,
    pub upper_bound: f64,
    pub gamma: f64,
    pub n_components: usize,
    pub dim: usize,
    /// Interval length for dim 1, domain measure otherwise.
    pub geometry: f64,
    pub b_d: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub majorant: Option<f64>,
}

//! Lyapunov analysis along Galerkin trajectories: the equation of
//! variations in the shifted variables (φ, ψ) = (φ, ∂tφ + εφ), discrete QR
//! extraction of the exponent spectrum in the energy inner product,
//! Kaplan-Yorke interpolation, and the time-averaged n-trace q(n) that
//! majorates every sum of leading exponents.
//!
//! In the shifted variables the variational equation reads
//! ∂tξ + Λ_ε ξ + F'(u(t))ξ = 0 with
//! Λ_ε = (εI, −I; −Δ − ε(γ−ε)I, (γ−ε)I) and F' = (0, 0; f'(u), 0).
//! Tangents are integrated in plain (δu, ∂tδu) coordinates by the same
//! exponential stepper as the base flow; the shift only changes the inner
//! product in which they are re-orthonormalized, so it is applied when
//! building the QR coordinates and undone right after.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::dynamics::{GalerkinState, TangentBatch, WaveSystem};
use crate::{Error, Result};

/// Largest admissible shift ε₀ = min(γ/4, λ₁/(2γ)); the shifted norm stays
/// equivalent to the energy norm below it.
pub fn shift_ceiling(gamma: f64, lambda1: f64) -> f64 {
    if gamma == 0.0 {
        return 0.0;
    }
    (gamma / 4.0).min(lambda1 / (2.0 * gamma))
}

fn resolve_epsilon(system: &WaveSystem, requested: Option<f64>) -> Result<f64> {
    let ceiling = shift_ceiling(system.spec.gamma, system.spectrum.lambda1());
    match requested {
        None => Ok(ceiling),
        Some(eps) => {
            if !eps.is_finite() || eps < 0.0 || eps > ceiling * (1.0 + 1e-12) {
                return Err(Error::InvalidInput(format!(
                    "shift {eps} outside [0, {ceiling}]"
                )));
            }
            Ok(eps)
        }
    }
}

/// Tangent family in the shifted variables, stored as M×(N·k) coefficient
/// blocks: columns t·N..(t+1)·N hold tangent t.
#[derive(Debug, Clone)]
pub struct VariationalBundle {
    pub epsilon: f64,
    pub phi: Array2<f64>,
    pub psi: Array2<f64>,
}

impl VariationalBundle {
    pub fn tangent_count(&self, n_components: usize) -> usize {
        self.phi.ncols() / n_components
    }
}

/// Applies −Λ_ε − F'(u) to every tangent of the bundle, returning the
/// (∂tφ, ∂tψ) coefficient blocks. The Jacobian action f'(u)φ is evaluated
/// pseudo-spectrally on the collocation grid.
pub fn variational_rhs(
    system: &WaveSystem,
    base: &GalerkinState,
    bundle: &VariationalBundle,
) -> Result<(Array2<f64>, Array2<f64>)> {
    let m = system.modes();
    let n = system.n_components;
    if bundle.phi.dim() != bundle.psi.dim() || bundle.phi.nrows() != m {
        return Err(Error::GridMismatch {
            expected: m,
            got: bundle.phi.nrows(),
        });
    }
    if !bundle.phi.ncols().is_multiple_of(n) {
        return Err(Error::GridMismatch {
            expected: n,
            got: bundle.phi.ncols(),
        });
    }
    if base.u.dim() != (m, n) {
        return Err(Error::GridMismatch {
            expected: m * n,
            got: base.u.len(),
        });
    }
    let eps = bundle.epsilon;
    let gamma = system.spec.gamma;
    let k = bundle.phi.ncols() / n;

    // f'(u)·φ for all tangents in one grid round trip.
    let coupled = if system.spec.has_nonlinearity() {
        let base_grid = system.synth_grid(&base.u);
        let jac = system.jacobian_field(&base_grid);
        let phi_grid = system.synth_grid(&bundle.phi);
        let points = phi_grid.nrows();
        let mut out = Array2::zeros((points, n * k));
        for p in 0..points {
            for t in 0..k {
                for i in 0..n {
                    let mut acc = 0.0;
                    for j in 0..n {
                        acc += jac[[p, i, j]] * phi_grid[[p, t * n + j]];
                    }
                    out[[p, t * n + i]] = acc;
                }
            }
        }
        Some(system.analyze_grid(&out))
    } else {
        None
    };

    let mut dphi = Array2::zeros(bundle.phi.dim());
    let mut dpsi = Array2::zeros(bundle.psi.dim());
    for (j, &lambda) in system.spectrum.lambdas.iter().enumerate() {
        for c in 0..bundle.phi.ncols() {
            let phi = bundle.phi[[j, c]];
            let psi = bundle.psi[[j, c]];
            dphi[[j, c]] = -eps * phi + psi;
            dpsi[[j, c]] = -(lambda - eps * (gamma - eps)) * phi - (gamma - eps) * psi;
            if let Some(cp) = &coupled {
                dpsi[[j, c]] -= cp[[j, c]];
            }
        }
    }
    Ok((dphi, dpsi))
}

/// Inputs of a QR exponent run.
#[derive(Debug, Clone)]
pub struct LyapunovConfig {
    /// Number of tangents k ≤ 2MN.
    pub tangent_count: usize,
    /// Averaging window after burn-in.
    pub averaging_time: f64,
    /// Base-flow settling time before tangents start logging; default 20/γ.
    pub burn_in: Option<f64>,
    /// Re-orthonormalization period.
    pub qr_interval: f64,
    /// Shift ε; default is the ceiling min(γ/4, λ₁/(2γ)).
    pub epsilon: Option<f64>,
    /// Unlogged co-integration window after burn-in that lets the tangents
    /// align with the leading subspaces; default 20 QR intervals.
    pub align_time: Option<f64>,
    /// Also sample the n-trace q(n) for n = 1..k at every QR time.
    pub collect_q: bool,
    /// Fail when the two halves of the window disagree by more than 5% of
    /// the exponent spread. Disable for short diagnostic windows whose
    /// quantities are exact pathwise, like the trace identity.
    pub require_convergence: bool,
}

impl LyapunovConfig {
    pub fn new(tangent_count: usize, averaging_time: f64) -> Self {
        LyapunovConfig {
            tangent_count,
            averaging_time,
            burn_in: None,
            qr_interval: 0.5,
            epsilon: None,
            align_time: None,
            collect_q: false,
            require_convergence: true,
        }
    }
}

/// Exponent spectrum of one run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LyapunovReport {
    /// Time-averaged exponents, sorted descending.
    pub exponents: Vec<f64>,
    /// cumulative[n-1] = μ₁ + … + μ_n.
    pub cumulative: Vec<f64>,
    pub ky_dimension: f64,
    /// Averaged q(n) for n = 1..k when collected.
    pub q_samples: Option<Vec<f64>>,
    pub epsilon: f64,
    pub averaging_time: f64,
    /// Half-window disagreement relative to the exponent spread.
    pub convergence_variation: f64,
}

/// Discrete QR method: integrate k tangents along the base trajectory,
/// re-orthonormalize in the shifted energy product every `qr_interval`,
/// and average the log diagonal entries.
pub fn compute_exponents(
    system: &WaveSystem,
    state0: GalerkinState,
    config: &LyapunovConfig,
) -> Result<LyapunovReport> {
    let m = system.modes();
    let n = system.n_components;
    let full_dim = 2 * m * n;
    let k = config.tangent_count;
    if k == 0 || k > full_dim {
        return Err(Error::InvalidInput(format!(
            "tangent count {k} outside 1..={full_dim}"
        )));
    }
    if !(config.qr_interval > 0.0) || !(config.averaging_time > 0.0) {
        return Err(Error::InvalidInput(
            "QR interval and averaging time must be positive".into(),
        ));
    }
    let eps = resolve_epsilon(system, config.epsilon)?;
    let gamma = system.spec.gamma;
    let lambda_max = *system.spectrum.lambdas.last().expect("nonempty spectrum");
    let steps_per_interval =
        (config.qr_interval * lambda_max.sqrt() / 0.5).ceil().max(1.0) as usize;
    let dt = config.qr_interval / steps_per_interval as f64;

    let mut state = state0;
    let burn_in = config
        .burn_in
        .unwrap_or(if gamma > 0.0 { 20.0 / gamma } else { 0.0 });
    let burn_steps = (burn_in / dt).round() as usize;
    for _ in 0..burn_steps {
        system.advance(&mut state, None, dt)?;
    }

    let mut batch = TangentBatch::new(m, n, k);
    seed_canonical(system, &mut batch, eps);

    // Alignment: co-integrate and renormalize without logging until the
    // family settles onto the leading subspaces.
    let align = config.align_time.unwrap_or(20.0 * config.qr_interval);
    for _ in 0..(align / config.qr_interval).ceil() as usize {
        for _ in 0..steps_per_interval {
            system.advance(&mut state, Some(&mut batch), dt)?;
        }
        let mut z = tangents_to_shifted(system, &batch, eps);
        orthonormalize_columns(&mut z)?;
        shifted_to_tangents(system, &z, eps, &mut batch);
    }

    let intervals = ((config.averaging_time / config.qr_interval).ceil() as usize).max(2);
    let half = intervals / 2;
    let mut logs = vec![0.0f64; k];
    let mut first_half = vec![0.0f64; k];
    let mut first_half_time = 0.0;
    let mut q_acc = vec![0.0f64; k];
    let mut q_count = 0usize;

    for interval in 0..intervals {
        for _ in 0..steps_per_interval {
            system.advance(&mut state, Some(&mut batch), dt)?;
        }
        let mut z = tangents_to_shifted(system, &batch, eps);
        let diag = orthonormalize_columns(&mut z)?;
        shifted_to_tangents(system, &z, eps, &mut batch);
        for (t, r) in diag.iter().enumerate() {
            let l = r.ln();
            if !l.is_finite() || l.abs() > 200.0 {
                return Err(Error::Instability {
                    time: state.time,
                    factor: *r,
                });
            }
            logs[t] += l;
            if interval < half {
                first_half[t] += l;
            }
        }
        if interval < half {
            first_half_time += config.qr_interval;
        }
        if config.collect_q {
            let sums = trace_partial_sums(system, &state.u, eps, k);
            for (acc, s) in q_acc.iter_mut().zip(&sums) {
                *acc += s;
            }
            q_count += 1;
        }
    }

    let total_time = intervals as f64 * config.qr_interval;
    let mut exponents: Vec<f64> = logs.iter().map(|l| l / total_time).collect();
    exponents.sort_by(|a, b| b.partial_cmp(a).expect("finite exponents"));

    // Convergence diagnostic: first-half vs second-half averages, scaled
    // by the spread of the full estimates.
    let second_time = total_time - first_half_time;
    let variation = logs
        .iter()
        .zip(&first_half)
        .map(|(&full, &fh)| {
            let a = fh / first_half_time;
            let b = (full - fh) / second_time;
            (a - b).abs()
        })
        .fold(0.0f64, f64::max);
    let spread = (exponents[0] - exponents[k - 1]).max(exponents[0].abs()).max(1e-9);
    let relative_variation = variation / spread;
    if config.require_convergence && relative_variation > 0.05 {
        return Err(Error::NonConverged {
            variation: relative_variation,
            limit: 0.05,
        });
    }

    let cumulative: Vec<f64> = exponents
        .iter()
        .scan(0.0, |acc, &x| {
            *acc += x;
            Some(*acc)
        })
        .collect();
    let ky = ky_dimension(&exponents);
    Ok(LyapunovReport {
        ky_dimension: ky,
        q_samples: config.collect_q.then(|| {
            q_acc.iter().map(|a| a / q_count as f64).collect()
        }),
        exponents,
        cumulative,
        epsilon: eps,
        averaging_time: total_time,
        convergence_variation: relative_variation,
    })
}

/// Kaplan-Yorke interpolation of sorted exponents: the largest n₀ with
/// μ₁ + … + μ_{n₀} ≥ 0, plus the fractional step into the next exponent.
/// Returns 0 without expansion and the list length when every partial sum
/// is nonnegative.
pub fn ky_dimension(exponents: &[f64]) -> f64 {
    debug_assert!(
        exponents.windows(2).all(|w| w[0] >= w[1]),
        "exponents must be sorted descending"
    );
    if exponents.is_empty() || exponents[0] < 0.0 {
        return 0.0;
    }
    let mut acc = 0.0;
    let mut n0 = 0usize;
    let mut at_n0 = 0.0;
    for (i, &mu) in exponents.iter().enumerate() {
        acc += mu;
        if acc >= 0.0 {
            n0 = i + 1;
            at_n0 = acc;
        }
    }
    if n0 == exponents.len() {
        return n0 as f64;
    }
    n0 as f64 + at_n0 / exponents[n0].abs()
}

/// Time average of the n-trace of the shifted variational generator: the
/// sum of the n largest eigenvalues of its symmetric part in the energy
/// product, sampled along the base trajectory.
pub fn q_of_n(
    system: &WaveSystem,
    state0: GalerkinState,
    n: usize,
    averaging_time: f64,
    burn_in: Option<f64>,
    epsilon: Option<f64>,
) -> Result<f64> {
    let full_dim = 2 * system.modes() * system.n_components;
    if n > full_dim {
        return Err(Error::InvalidInput(format!(
            "trace order {n} exceeds phase dimension {full_dim}"
        )));
    }
    if n == 0 {
        return Ok(0.0);
    }
    let eps = resolve_epsilon(system, epsilon)?;
    let gamma = system.spec.gamma;
    let lambda_max = *system.spectrum.lambdas.last().expect("nonempty spectrum");
    let sample_interval = 0.5;
    let steps_per_interval = (sample_interval * lambda_max.sqrt() / 0.5).ceil().max(1.0) as usize;
    let dt = sample_interval / steps_per_interval as f64;
    let mut state = state0;
    let burn = burn_in.unwrap_or(if gamma > 0.0 { 20.0 / gamma } else { 0.0 });
    for _ in 0..(burn / dt).round() as usize {
        system.advance(&mut state, None, dt)?;
    }
    let intervals = ((averaging_time / sample_interval).ceil() as usize).max(1);
    let mut acc = 0.0;
    for _ in 0..intervals {
        for _ in 0..steps_per_interval {
            system.advance(&mut state, None, dt)?;
        }
        acc += trace_partial_sums(system, &state.u, eps, n)[n - 1];
    }
    Ok(acc / intervals as f64)
}

/// Canonical start: the first k vectors of the shifted-energy orthonormal
/// basis, interleaving the two slots of each (mode, component) pair.
fn seed_canonical(system: &WaveSystem, batch: &mut TangentBatch, eps: f64) {
    let n = system.n_components;
    for t in 0..batch.count {
        let pair = t / 2;
        let j = pair / n;
        let c = pair % n;
        if t % 2 == 0 {
            let phi = 1.0 / system.spectrum.lambdas[j].sqrt();
            batch.u[[j, t * n + c]] = phi;
            batch.v[[j, t * n + c]] = -eps * phi;
        } else {
            batch.v[[j, t * n + c]] = 1.0;
        }
    }
}

/// Shifted-energy coordinates of the batch: rows (j·N + c) hold √λ_j·φ,
/// rows MN + (j·N + c) hold ψ = δv + εδu; one column per tangent.
fn tangents_to_shifted(system: &WaveSystem, batch: &TangentBatch, eps: f64) -> Array2<f64> {
    let m = system.modes();
    let n = system.n_components;
    let mn = m * n;
    let mut z = Array2::zeros((2 * mn, batch.count));
    for t in 0..batch.count {
        for j in 0..m {
            let root = system.spectrum.lambdas[j].sqrt();
            for c in 0..n {
                let u = batch.u[[j, t * n + c]];
                let v = batch.v[[j, t * n + c]];
                z[[j * n + c, t]] = root * u;
                z[[mn + j * n + c, t]] = v + eps * u;
            }
        }
    }
    z
}

fn shifted_to_tangents(system: &WaveSystem, z: &Array2<f64>, eps: f64, batch: &mut TangentBatch) {
    let m = system.modes();
    let n = system.n_components;
    let mn = m * n;
    for t in 0..batch.count {
        for j in 0..m {
            let root = system.spectrum.lambdas[j].sqrt();
            for c in 0..n {
                let u = z[[j * n + c, t]] / root;
                let psi = z[[mn + j * n + c, t]];
                batch.u[[j, t * n + c]] = u;
                batch.v[[j, t * n + c]] = psi - eps * u;
            }
        }
    }
}

/// Modified Gram-Schmidt with a second orthogonalization pass; returns the
/// diagonal of R. Columns are normalized in place.
pub(crate) fn orthonormalize_columns(z: &mut Array2<f64>) -> Result<Vec<f64>> {
    let k = z.ncols();
    let mut diag = Vec::with_capacity(k);
    for i in 0..k {
        for _ in 0..2 {
            for prev in 0..i {
                let proj = z.column(i).dot(&z.column(prev));
                let prev_col = z.column(prev).to_owned();
                z.column_mut(i).scaled_add(-proj, &prev_col);
            }
        }
        let norm = z.column(i).dot(&z.column(i)).sqrt();
        if !norm.is_finite() || norm < 1e-300 {
            return Err(Error::RankDeficient { pivot: norm, column: i });
        }
        z.column_mut(i).mapv_inplace(|x| x / norm);
        diag.push(norm);
    }
    Ok(diag)
}

/// Partial sums of the n largest eigenvalues of the symmetric part of
/// −Λ_ε − F'(u) in the energy product, for n = 1..=max_n. The supremum of
/// the n-trace over orthonormal families is attained on eigenvectors, so
/// this is exact on the Galerkin space.
fn trace_partial_sums(
    system: &WaveSystem,
    base_u: &Array2<f64>,
    eps: f64,
    max_n: usize,
) -> Vec<f64> {
    let m = system.modes();
    let n = system.n_components;
    let mn = m * n;
    let gamma = system.spec.gamma;
    let mut g = nalgebra::DMatrix::<f64>::zeros(2 * mn, 2 * mn);
    for j in 0..m {
        let lambda = system.spectrum.lambdas[j];
        let beta = eps * (gamma - eps) / (2.0 * lambda.sqrt());
        for c in 0..n {
            let p = j * n + c;
            g[(p, p)] = -eps;
            g[(mn + p, mn + p)] = -(gamma - eps);
            g[(p, mn + p)] = beta;
            g[(mn + p, p)] = beta;
        }
    }
    if system.spec.has_nonlinearity() {
        // Coupling K[(j,c),(i,e)] = ∫ f'(u)_{ce} e_i e_j, assembled on the
        // collocation grid, entering the ψ-rows against √λ-scaled φ-columns.
        let grid = system.synth_grid(base_u);
        let jac = system.jacobian_field(&grid);
        let synth = system.synth_matrix();
        let weight = system.quadrature_weight();
        let points = grid.nrows();
        for c in 0..n {
            for e in 0..n {
                let mut scaled = synth.to_owned();
                for p in 0..points {
                    let w = weight * jac[[p, c, e]];
                    scaled.row_mut(p).mapv_inplace(|x| x * w);
                }
                let coupling = synth.t().dot(&scaled);
                for j in 0..m {
                    for i in 0..m {
                        let entry =
                            -0.5 * coupling[[j, i]] / system.spectrum.lambdas[i].sqrt();
                        g[(mn + j * n + c, i * n + e)] += entry;
                        g[(i * n + e, mn + j * n + c)] += entry;
                    }
                }
            }
        }
    }
    let mut eigs: Vec<f64> = g.symmetric_eigen().eigenvalues.iter().copied().collect();
    eigs.sort_by(|a, b| b.partial_cmp(a).expect("finite eigenvalues"));
    eigs.iter()
        .take(max_n)
        .scan(0.0, |acc, &x| {
            *acc += x;
            Some(*acc)
        })
        .collect()
}

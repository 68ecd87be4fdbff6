//! Spectral Galerkin integration of the damped hyperbolic system
//! ∂t²u + γ∂tu − Δu + f(u) = g with Dirichlet boundary, u taking values
//! in ℝᴺ. States live in the energy space, ‖ξ‖²_E = ‖∇u‖² + ‖∂tu‖².
//!
//! The nonlinearity splits as f = Φ + f_rot: Φ = ∇F₀ for a polynomial
//! potential F₀, and f_rot(u) = γ(sin(bu₂/γ), −sin(bu₁/γ)) is an optional
//! rotational coupling for N = 2 whose linearization at zero has
//! eigenvalues ±ib. Time stepping is exponential: the linear flow of each
//! mode is advanced by its exact 2×2 propagator and the nonlinear part by
//! a Runge-Kutta 4 rule in interaction-picture coordinates, so stiffness
//! of the highest retained mode never limits accuracy, only the sampling
//! constraint dt·√λ_M ≤ 1/2 does.

use ndarray::{Array2, Array3};

use crate::basis::{BoxGrid, SineTable};
use crate::spectral::{build_spectrum, Domain, Spectrum};
use crate::{Error, Result};

/// One monomial coeff·u₁^p₁···u_N^p_N of the potential F₀.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialTerm {
    pub coeff: f64,
    pub powers: Vec<u32>,
}

impl PotentialTerm {
    pub fn total_degree(&self) -> u32 {
        self.powers.iter().sum()
    }
}

/// Full description of the right-hand side: potential part, rotational
/// part, damping and forcing.
#[derive(Debug, Clone, PartialEq)]
pub struct NonlinearitySpec {
    /// Monomials of F₀; Φ = ∇F₀ enters the equation.
    pub potential: Vec<PotentialTerm>,
    /// Enables f_rot(u) = γ(sin(bu₂/γ), −sin(bu₁/γ)); needs N = 2, γ > 0.
    pub rotational: bool,
    pub gamma: f64,
    /// Off-diagonal of f_rot'(0); the construction realizes eigenvalues
    /// ±ib there. Ignored unless `rotational`.
    pub rotation_b: f64,
    /// Forcing g as M×N eigenbasis coefficients; 0×0 means unforced.
    pub forcing: Array2<f64>,
}

impl NonlinearitySpec {
    /// Purely linear equation: no potential, no rotation.
    pub fn linear(gamma: f64) -> Self {
        NonlinearitySpec {
            potential: Vec::new(),
            rotational: false,
            gamma,
            rotation_b: 1.0,
            forcing: Array2::zeros((0, 0)),
        }
    }

    /// Gradient case f = ∇F₀.
    pub fn gradient(gamma: f64, potential: Vec<PotentialTerm>) -> Self {
        NonlinearitySpec {
            potential,
            rotational: false,
            gamma,
            rotation_b: 1.0,
            forcing: Array2::zeros((0, 0)),
        }
    }

    /// Rotational coupling with unit spectral radius at zero, N = 2.
    pub fn rotational(gamma: f64) -> Self {
        NonlinearitySpec {
            potential: Vec::new(),
            rotational: true,
            gamma,
            rotation_b: 1.0,
            forcing: Array2::zeros((0, 0)),
        }
    }

    pub fn with_forcing(mut self, forcing: Array2<f64>) -> Self {
        self.forcing = forcing;
        self
    }

    pub fn validate(&self, n_components: usize) -> Result<()> {
        if n_components == 0 {
            return Err(Error::InvalidInput("need at least one component".into()));
        }
        if !self.gamma.is_finite() || self.gamma < 0.0 {
            return Err(Error::InvalidInput(format!(
                "damping must be finite and non-negative, got {}",
                self.gamma
            )));
        }
        if self.rotational {
            if n_components != 2 {
                return Err(Error::InvalidInput(
                    "rotational coupling is defined for exactly two components".into(),
                ));
            }
            if self.gamma == 0.0 {
                return Err(Error::InvalidInput(
                    "rotational coupling degenerates at zero damping".into(),
                ));
            }
            if !(self.rotation_b.is_finite()) || self.rotation_b == 0.0 {
                return Err(Error::InvalidInput(
                    "rotation strength must be finite and nonzero".into(),
                ));
            }
        }
        for term in &self.potential {
            if term.powers.len() != n_components {
                return Err(Error::InvalidInput(format!(
                    "potential term has {} exponents for {} components",
                    term.powers.len(),
                    n_components
                )));
            }
            if term.total_degree() == 0 {
                return Err(Error::InvalidInput(
                    "constant potential terms have no gradient; drop them".into(),
                ));
            }
            if !term.coeff.is_finite() {
                return Err(Error::InvalidInput("potential coefficient not finite".into()));
            }
        }
        Ok(())
    }

    /// Heuristic probe for inf F₀ > −∞: samples a fan of directions at two
    /// radii and requires growth along each. Advisory only; a false
    /// positive voids the dissipation diagnostics, not the integrator.
    pub fn potential_looks_bounded_below(&self, n_components: usize) -> bool {
        if self.potential.is_empty() {
            return true;
        }
        let mut dirs: Vec<Vec<f64>> = Vec::new();
        for i in 0..n_components {
            for sign in [1.0, -1.0] {
                let mut d = vec![0.0; n_components];
                d[i] = sign;
                dirs.push(d);
            }
        }
        if n_components > 1 {
            for mask in 0..(1u32 << n_components) {
                let d: Vec<f64> = (0..n_components)
                    .map(|i| if mask >> i & 1 == 1 { -1.0 } else { 1.0 })
                    .collect();
                dirs.push(d);
            }
        }
        dirs.iter().all(|d| {
            let far: Vec<f64> = d.iter().map(|x| x * 1e3).collect();
            let near: Vec<f64> = d.iter().map(|x| x * 500.0).collect();
            self.potential_at(&far) >= self.potential_at(&near) - 1e-9
        })
    }

    /// Highest total degree over the potential monomials, 0 if none.
    fn potential_degree(&self) -> u32 {
        self.potential
            .iter()
            .map(PotentialTerm::total_degree)
            .max()
            .unwrap_or(0)
    }

    pub(crate) fn has_nonlinearity(&self) -> bool {
        !self.potential.is_empty() || self.rotational
    }

    /// F₀(u) at one point.
    pub(crate) fn potential_at(&self, u: &[f64]) -> f64 {
        let mut acc = 0.0;
        for term in &self.potential {
            let mut m = term.coeff;
            for (x, &p) in u.iter().zip(&term.powers) {
                m *= x.powi(p as i32);
            }
            acc += m;
        }
        acc
    }

    /// f(u) = ∇F₀(u) + f_rot(u) at one point, accumulated into `out`.
    pub(crate) fn force_at(&self, u: &[f64], out: &mut [f64]) {
        for term in &self.potential {
            for i in 0..u.len() {
                let p = term.powers[i];
                if p == 0 {
                    continue;
                }
                let mut m = term.coeff * p as f64 * u[i].powi(p as i32 - 1);
                for (k, (x, &q)) in u.iter().zip(&term.powers).enumerate() {
                    if k != i {
                        m *= x.powi(q as i32);
                    }
                }
                out[i] += m;
            }
        }
        if self.rotational {
            let s = self.rotation_b / self.gamma;
            out[0] += self.gamma * (s * u[1]).sin();
            out[1] -= self.gamma * (s * u[0]).sin();
        }
    }

    /// Jacobian f'(u) at one point, accumulated into row-major `out` (N×N).
    pub(crate) fn jacobian_at(&self, u: &[f64], out: &mut [f64]) {
        let n = u.len();
        for term in &self.potential {
            for i in 0..n {
                let pi = term.powers[i];
                if pi == 0 {
                    continue;
                }
                for j in 0..n {
                    let pj = term.powers[j];
                    let factor = if i == j {
                        if pi < 2 {
                            continue;
                        }
                        pi as f64 * (pi - 1) as f64 * u[i].powi(pi as i32 - 2)
                    } else {
                        if pj == 0 {
                            continue;
                        }
                        pi as f64 * pj as f64 * u[i].powi(pi as i32 - 1) * u[j].powi(pj as i32 - 1)
                    };
                    let mut m = term.coeff * factor;
                    for (k, (x, &q)) in u.iter().zip(&term.powers).enumerate() {
                        if k != i && k != j {
                            m *= x.powi(q as i32);
                        }
                    }
                    out[i * n + j] += m;
                }
            }
        }
        if self.rotational {
            let s = self.rotation_b / self.gamma;
            out[1] += self.rotation_b * (s * u[1]).cos();
            out[n] -= self.rotation_b * (s * u[0]).cos();
        }
    }
}

/// Galerkin phase-space point: eigenbasis coefficients of u and ∂tu.
#[derive(Debug, Clone, PartialEq)]
pub struct GalerkinState {
    /// M×N coefficients of u.
    pub u: Array2<f64>,
    /// M×N coefficients of ∂tu.
    pub v: Array2<f64>,
    pub time: f64,
}

impl GalerkinState {
    pub fn zero(modes: usize, n_components: usize) -> Self {
        GalerkinState {
            u: Array2::zeros((modes, n_components)),
            v: Array2::zeros((modes, n_components)),
            time: 0.0,
        }
    }

    pub fn from_coeffs(u: Array2<f64>, v: Array2<f64>) -> Self {
        assert_eq!(u.dim(), v.dim());
        GalerkinState { u, v, time: 0.0 }
    }
}

/// Sampled observables of one run, plus the sampled states themselves for
/// downstream estimators.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// Energy norm ‖ξ‖_E.
    pub energy: Vec<f64>,
    pub psi: Vec<f64>,
    /// Only recorded in the gradient case, where it is monotone.
    pub lyapunov: Option<Vec<f64>>,
    pub u_linf: Vec<f64>,
    pub states: Vec<GalerkinState>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Default truncation: resolve the whole band of potentially unstable
/// modes (√λ < b/γ) with a factor-4 margin, never below 64.
pub fn suggested_mode_count(gamma: f64, b: f64, lambda1: f64) -> usize {
    let band = (b / (gamma * lambda1.sqrt())).ceil() as usize;
    (4 * band).max(64)
}

enum GridKind {
    Line(SineTable),
    Tensor { grid: BoxGrid, modes: Array2<f64> },
}

/// Discretized system: scalar spectrum, collocation grid sized for the
/// nonlinearity degree, and the right-hand-side description.
pub struct WaveSystem {
    pub spectrum: Spectrum,
    pub n_components: usize,
    pub spec: NonlinearitySpec,
    grid: GridKind,
}

impl WaveSystem {
    pub fn new(
        domain: Domain,
        modes: usize,
        n_components: usize,
        spec: NonlinearitySpec,
    ) -> Result<Self> {
        spec.validate(n_components)?;
        let spectrum = build_spectrum(domain, modes, 1)?;
        if !spec.forcing.is_empty() && spec.forcing.dim() != (modes, n_components) {
            return Err(Error::GridMismatch {
                expected: modes * n_components,
                got: spec.forcing.len(),
            });
        }
        // Collocation resolution: a degree-D potential needs P ≥ DM/2 for
        // alias-free products; the transcendental rotational term gets the
        // 3/2 oversampling rule and spectral (not exact) accuracy.
        let degree = spec.potential_degree() as usize;
        let max_index = spectrum
            .indices
            .iter()
            .flat_map(|idx| idx[..domain.dim()].iter())
            .copied()
            .max()
            .unwrap_or(1) as usize;
        let mut points = max_index;
        if degree > 0 {
            points = points.max((degree * max_index).div_ceil(2) + 1);
        }
        if spec.rotational {
            points = points.max(3 * max_index / 2 + 1);
        }
        let grid = match domain {
            Domain::Interval { len } => GridKind::Line(SineTable::new(len, modes, points)),
            _ => {
                let grid = BoxGrid::for_spectrum(&spectrum, points);
                let modes = grid.mode_matrix(&spectrum.indices);
                GridKind::Tensor { grid, modes }
            }
        };
        Ok(WaveSystem {
            spectrum,
            n_components,
            spec,
            grid,
        })
    }

    pub fn modes(&self) -> usize {
        self.spectrum.len()
    }

    pub fn grid_points(&self) -> usize {
        match &self.grid {
            GridKind::Line(t) => t.points,
            GridKind::Tensor { grid, .. } => grid.total_points(),
        }
    }

    pub(crate) fn quadrature_weight(&self) -> f64 {
        match &self.grid {
            GridKind::Line(t) => t.weight,
            GridKind::Tensor { grid, .. } => grid.cell_weight,
        }
    }

    /// Grid-points × modes synthesis matrix of the collocation grid.
    pub(crate) fn synth_matrix(&self) -> &Array2<f64> {
        match &self.grid {
            GridKind::Line(t) => &t.synth,
            GridKind::Tensor { modes, .. } => modes,
        }
    }

    pub(crate) fn synth_grid(&self, coeffs: &Array2<f64>) -> Array2<f64> {
        match &self.grid {
            GridKind::Line(t) => t.to_grid(coeffs.view()),
            GridKind::Tensor { modes, .. } => modes.dot(coeffs),
        }
    }

    pub(crate) fn analyze_grid(&self, grid: &Array2<f64>) -> Array2<f64> {
        match &self.grid {
            GridKind::Line(t) => t.to_coeffs(grid.view()),
            GridKind::Tensor { grid: g, modes } => {
                let mut out = modes.t().dot(grid);
                out *= g.cell_weight;
                out
            }
        }
    }

    /// Pointwise f on a synthesized grid (G×N in, G×N out).
    fn force_grid(&self, u_grid: &Array2<f64>) -> Array2<f64> {
        let (points, n) = u_grid.dim();
        let mut out = Array2::zeros((points, n));
        let mut buf = vec![0.0; n];
        for p in 0..points {
            buf.iter_mut().for_each(|x| *x = 0.0);
            let row = u_grid.row(p);
            self.spec
                .force_at(row.as_slice().expect("row-major grid"), &mut buf);
            for i in 0..n {
                out[[p, i]] = buf[i];
            }
        }
        out
    }

    /// Pointwise Jacobian field f'(u) on the grid, shape (G, N, N).
    pub(crate) fn jacobian_field(&self, u_grid: &Array2<f64>) -> Array3<f64> {
        let (points, n) = u_grid.dim();
        let mut out = Array3::zeros((points, n, n));
        let mut buf = vec![0.0; n * n];
        for p in 0..points {
            buf.iter_mut().for_each(|x| *x = 0.0);
            let row = u_grid.row(p);
            self.spec
                .jacobian_at(row.as_slice().expect("row-major grid"), &mut buf);
            for i in 0..n {
                for j in 0..n {
                    out[[p, i, j]] = buf[i * n + j];
                }
            }
        }
        out
    }

    /// Pointwise Frobenius norm |f'(u)| on the grid.
    fn jacobian_frobenius(&self, u_grid: &Array2<f64>) -> Vec<f64> {
        let jac = self.jacobian_field(u_grid);
        let (points, n, _) = jac.dim();
        (0..points)
            .map(|p| {
                let mut s = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        s += jac[[p, i, j]] * jac[[p, i, j]];
                    }
                }
                s.sqrt()
            })
            .collect()
    }

    /// f(u) in eigenbasis coefficients, via grid transform round trip.
    pub fn eval_nonlinearity(&self, u_coeffs: &Array2<f64>) -> Result<Array2<f64>> {
        let expected = (self.modes(), self.n_components);
        if u_coeffs.dim() != expected {
            return Err(Error::GridMismatch {
                expected: expected.0 * expected.1,
                got: u_coeffs.len(),
            });
        }
        if !self.spec.has_nonlinearity() {
            return Ok(Array2::zeros(expected));
        }
        let u_grid = self.synth_grid(u_coeffs);
        let f_grid = self.force_grid(&u_grid);
        Ok(self.analyze_grid(&f_grid))
    }

    /// Squared energy norm Σ λ|u_j|² + Σ|v_j|².
    pub fn energy_sq(&self, state: &GalerkinState) -> f64 {
        let mut acc = 0.0;
        for (j, &lambda) in self.spectrum.lambdas.iter().enumerate() {
            for c in 0..self.n_components {
                let u = state.u[[j, c]];
                let v = state.v[[j, c]];
                acc += lambda * u * u + v * v;
            }
        }
        acc
    }

    /// Absorbing functional
    /// Ψ(ξ) = ½‖ξ‖²_E + ε(u, ∂tu) + (F₀(u), 1) + ½γε‖u‖²_{L₂} − (g, u)
    /// with the shift ε = γ/2. Decays along the flow outside a ball whose
    /// radius depends only on ‖g‖.
    pub fn energy_psi(&self, state: &GalerkinState) -> f64 {
        let eps = 0.5 * self.spec.gamma;
        let mut acc = 0.5 * self.energy_sq(state);
        let mut cross = 0.0;
        let mut u_l2 = 0.0;
        for j in 0..self.modes() {
            for c in 0..self.n_components {
                cross += state.u[[j, c]] * state.v[[j, c]];
                u_l2 += state.u[[j, c]] * state.u[[j, c]];
            }
        }
        acc += eps * cross + 0.5 * self.spec.gamma * eps * u_l2;
        if !self.spec.forcing.is_empty() {
            for j in 0..self.modes() {
                for c in 0..self.n_components {
                    acc -= self.spec.forcing[[j, c]] * state.u[[j, c]];
                }
            }
        }
        if !self.spec.potential.is_empty() {
            acc += self.integrate_potential(state);
        }
        acc
    }

    /// (F₀(u), 1) by collocation quadrature; exact for the alias-free grid.
    fn integrate_potential(&self, state: &GalerkinState) -> f64 {
        let u_grid = self.synth_grid(&state.u);
        let w = self.quadrature_weight();
        let mut acc = 0.0;
        for p in 0..u_grid.nrows() {
            let row = u_grid.row(p);
            acc += self.spec.potential_at(row.as_slice().expect("row-major grid"));
        }
        acc * w
    }

    /// Gradient-case Lyapunov functional
    /// 𝓛(ξ) = ½‖∂tu‖² + ½‖∇u‖² + (F₀(u), 1) − (g, u),
    /// non-increasing along gradient flows: d𝓛/dt = −γ‖∂tu‖².
    pub fn lyapunov_functional(&self, state: &GalerkinState) -> Result<f64> {
        if self.spec.rotational {
            return Err(Error::InvalidInput(
                "the Lyapunov functional exists only without the rotational part".into(),
            ));
        }
        let mut acc = 0.0;
        for (j, &lambda) in self.spectrum.lambdas.iter().enumerate() {
            for c in 0..self.n_components {
                let u = state.u[[j, c]];
                let v = state.v[[j, c]];
                acc += 0.5 * (v * v + lambda * u * u);
                if !self.spec.forcing.is_empty() {
                    acc -= self.spec.forcing[[j, c]] * u;
                }
            }
        }
        if !self.spec.potential.is_empty() {
            acc += self.integrate_potential(state);
        }
        Ok(acc)
    }

    /// Advances the state by one step of the exponential integrator, with
    /// an optional batch of tangent vectors carried along the same stages.
    pub(crate) fn advance(
        &self,
        state: &mut GalerkinState,
        mut tangents: Option<&mut TangentBatch>,
        dt: f64,
    ) -> Result<()> {
        let lambda_max = *self
            .spectrum
            .lambdas
            .last()
            .expect("spectra are never empty");
        if !(dt > 0.0) {
            return Err(Error::InvalidInput(format!("time step must be positive, got {dt}")));
        }
        if dt * lambda_max.sqrt() > 0.5 * (1.0 + 1e-9) {
            return Err(Error::InvalidInput(format!(
                "time step {dt} too large for the top mode: dt·√λ_M = {:.3} > 0.5",
                dt * lambda_max.sqrt()
            )));
        }
        let gamma = self.spec.gamma;
        let m = self.modes();
        let n = self.n_components;
        let before = self.energy_sq(state);

        let half: Vec<ModeProp> = self
            .spectrum
            .lambdas
            .iter()
            .map(|&l| mode_propagator(l, gamma, 0.5 * dt))
            .collect();
        let full: Vec<ModeProp> = self
            .spectrum
            .lambdas
            .iter()
            .map(|&l| mode_propagator(l, gamma, dt))
            .collect();

        // Interaction-picture RK4. Stage forces live in the v-component
        // only, so propagated stage vectors need just the uv/vv entries.
        let k = tangents.as_ref().map_or(0, |t| t.count);
        let cols = n * (1 + k);
        let mut arg = Array2::zeros((m, cols));
        let mut base_u = Array2::zeros((m, cols));
        let mut base_v = Array2::zeros((m, cols));
        pack(&mut base_u, &state.u, tangents.as_ref().map(|t| &t.u));
        pack(&mut base_v, &state.v, tangents.as_ref().map(|t| &t.v));

        // Propagated anchors: E(h/2)y₀ and E(h)y₀.
        let mut au = Array2::zeros((m, cols));
        let mut av = Array2::zeros((m, cols));
        let mut bu = Array2::zeros((m, cols));
        let mut bv = Array2::zeros((m, cols));
        apply_prop(&half, &base_u, &base_v, &mut au, &mut av);
        apply_prop(&full, &base_u, &base_v, &mut bu, &mut bv);

        // Stage 1 at y₀.
        let w1 = self.stage_force(&base_u, k)?;
        // Stage 2 at E½y₀ + (h/2)E½k₁.
        stage_arg(&mut arg, &au, &half, &w1, 0.5 * dt);
        let w2 = self.stage_force(&arg, k)?;
        // Stage 3 at E½y₀ + (h/2)k₂: the interaction-picture propagators
        // cancel on k₂, and stage vectors have no u-component, so the
        // force argument is the half-step anchor itself.
        let w3 = self.stage_force(&au, k)?;
        // Stage 4 at E(h)y₀ + hE½k₃.
        stage_arg(&mut arg, &bu, &half, &w3, dt);
        let w4 = self.stage_force(&arg, k)?;

        // y₁ = E(h)y₀ + (h/6)(E(h)k₁ + 2E½(k₂+k₃) + k₄).
        let sixth = dt / 6.0;
        for j in 0..m {
            let ph = &half[j];
            let pf = &full[j];
            for c in 0..cols {
                let mid = w2[[j, c]] + w3[[j, c]];
                bu[[j, c]] += sixth * (pf.uv * w1[[j, c]] + 2.0 * ph.uv * mid);
                bv[[j, c]] += sixth * (pf.vv * w1[[j, c]] + 2.0 * ph.vv * mid + w4[[j, c]]);
            }
        }

        unpack(&bu, &mut state.u, tangents.as_mut().map(|t| &mut t.u));
        unpack(&bv, &mut state.v, tangents.as_mut().map(|t| &mut t.v));
        state.time += dt;

        let after = self.energy_sq(state);
        if !after.is_finite() || (before > 0.0 && after > 1e6 * before) {
            return Err(Error::Instability {
                time: state.time,
                factor: (after / before.max(f64::MIN_POSITIVE)).sqrt(),
            });
        }
        Ok(())
    }

    /// Stage force in coefficient space: g − f(u) for the base columns,
    /// −f'(u)·δu for each tangent block.
    fn stage_force(&self, arg_u: &Array2<f64>, k: usize) -> Result<Array2<f64>> {
        let m = self.modes();
        let n = self.n_components;
        let cols = n * (1 + k);
        let mut w = Array2::zeros((m, cols));
        if !self.spec.has_nonlinearity() {
            if !self.spec.forcing.is_empty() {
                let mut base = w.slice_mut(ndarray::s![.., 0..n]);
                base += &self.spec.forcing;
            }
            return Ok(w);
        }
        let grid = self.synth_grid(arg_u);
        let points = grid.nrows();
        let base_grid = grid.slice(ndarray::s![.., 0..n]).to_owned();
        let mut rhs_grid = Array2::zeros((points, cols));
        {
            let f = self.force_grid(&base_grid);
            let mut dst = rhs_grid.slice_mut(ndarray::s![.., 0..n]);
            dst.assign(&f);
            dst *= -1.0;
        }
        if k > 0 {
            let jac = self.jacobian_field(&base_grid);
            for p in 0..points {
                for t in 0..k {
                    let off = n * (1 + t);
                    for i in 0..n {
                        let mut acc = 0.0;
                        for j in 0..n {
                            acc += jac[[p, i, j]] * grid[[p, off + j]];
                        }
                        rhs_grid[[p, off + i]] = -acc;
                    }
                }
            }
        }
        w.assign(&self.analyze_grid(&rhs_grid));
        if !self.spec.forcing.is_empty() {
            let mut base = w.slice_mut(ndarray::s![.., 0..n]);
            base += &self.spec.forcing;
        }
        Ok(w)
    }

    /// One integrator step; fails on oversized dt or energy blow-up.
    pub fn step(&self, state: &GalerkinState, dt: f64) -> Result<GalerkinState> {
        let mut next = state.clone();
        self.advance(&mut next, None, dt)?;
        Ok(next)
    }

    /// Integrates to `t_final`, sampling every `stride` steps (plus the
    /// initial and final states).
    pub fn simulate(
        &self,
        state0: GalerkinState,
        t_final: f64,
        dt: f64,
        stride: usize,
    ) -> Result<Trajectory> {
        if stride == 0 {
            return Err(Error::InvalidInput("sampling stride must be positive".into()));
        }
        if !(t_final > 0.0) {
            return Err(Error::InvalidInput("final time must be positive".into()));
        }
        let steps = (t_final / dt).round().max(1.0) as usize;
        let gradient_case = !self.spec.rotational;
        let mut traj = Trajectory {
            times: Vec::new(),
            energy: Vec::new(),
            psi: Vec::new(),
            lyapunov: gradient_case.then(Vec::new),
            u_linf: Vec::new(),
            states: Vec::new(),
        };
        let mut state = state0;
        self.record(&mut traj, &state)?;
        for step_idx in 1..=steps {
            self.advance(&mut state, None, dt)?;
            if step_idx % stride == 0 || step_idx == steps {
                self.record(&mut traj, &state)?;
            }
        }
        Ok(traj)
    }

    fn record(&self, traj: &mut Trajectory, state: &GalerkinState) -> Result<()> {
        traj.times.push(state.time);
        traj.energy.push(self.energy_sq(state).sqrt());
        traj.psi.push(self.energy_psi(state));
        if let Some(lyap) = traj.lyapunov.as_mut() {
            lyap.push(self.lyapunov_functional(state)?);
        }
        let grid = self.synth_grid(&state.u);
        traj.u_linf
            .push(grid.iter().fold(0.0f64, |m, &x| m.max(x.abs())));
        traj.states.push(state.clone());
        Ok(())
    }

    /// Supremum/average statistics of |f'(u(t))| feeding the dimension
    /// bounds: running max of the L_d norm for d ≠ 2 (L_∞ for d = 1), time
    /// average of the sup norm for d = 2.
    pub fn estimate_bd(&self, trajectory: &Trajectory, d: usize, burn_in: f64) -> Result<f64> {
        if d == 0 {
            return Err(Error::UnsupportedDimension { got: 0, need: "at least 1" });
        }
        let weight = self.quadrature_weight();
        let mut used = 0usize;
        let mut running_max = 0.0f64;
        let mut acc = 0.0f64;
        for (state, &t) in trajectory.states.iter().zip(&trajectory.times) {
            if t < burn_in {
                continue;
            }
            used += 1;
            let grid = self.synth_grid(&state.u);
            let fro = self.jacobian_frobenius(&grid);
            match d {
                1 => {
                    let sup = fro.iter().fold(0.0f64, |m, &x| m.max(x));
                    running_max = running_max.max(sup);
                }
                2 => {
                    let sup = fro.iter().fold(0.0f64, |m, &x| m.max(x));
                    acc += sup;
                }
                _ => {
                    let p = d as f64;
                    let norm =
                        (fro.iter().map(|x| x.powf(p)).sum::<f64>() * weight).powf(1.0 / p);
                    running_max = running_max.max(norm);
                }
            }
        }
        if used < 10 {
            return Err(Error::InsufficientSamples { got: used, need: 10 });
        }
        Ok(if d == 2 { acc / used as f64 } else { running_max })
    }
}

/// Batch of tangent vectors advanced along a base trajectory; column
/// block t·N..(t+1)·N of each matrix is one tangent.
#[derive(Debug, Clone)]
pub(crate) struct TangentBatch {
    pub count: usize,
    pub u: Array2<f64>,
    pub v: Array2<f64>,
}

impl TangentBatch {
    pub(crate) fn new(modes: usize, n_components: usize, count: usize) -> Self {
        TangentBatch {
            count,
            u: Array2::zeros((modes, n_components * count)),
            v: Array2::zeros((modes, n_components * count)),
        }
    }
}

/// Exact propagator of one damped mode, (u, v) ↦ e^{hL}(u, v) for
/// L = [[0, 1], [−λ, −γ]].
#[derive(Debug, Clone, Copy)]
pub(crate) struct ModeProp {
    pub uu: f64,
    pub uv: f64,
    pub vu: f64,
    pub vv: f64,
}

pub(crate) fn mode_propagator(lambda: f64, gamma: f64, h: f64) -> ModeProp {
    let decay = (-0.5 * gamma * h).exp();
    let x = lambda - 0.25 * gamma * gamma;
    let w = x * h * h;
    // cos(√x h) and sin(√x h)/√x continue analytically through x ≤ 0;
    // the series below covers the seam where both branches lose digits.
    let (c, s) = if w > 1e-8 {
        let nu = x.sqrt();
        ((nu * h).cos(), (nu * h).sin() / nu)
    } else if w < -1e-8 {
        let nu = (-x).sqrt();
        ((nu * h).cosh(), (nu * h).sinh() / nu)
    } else {
        (1.0 - 0.5 * w + w * w / 24.0, h * (1.0 - w / 6.0))
    };
    ModeProp {
        uu: decay * (c + 0.5 * gamma * s),
        uv: decay * s,
        vu: -decay * lambda * s,
        vv: decay * (c - 0.5 * gamma * s),
    }
}

fn apply_prop(
    props: &[ModeProp],
    u: &Array2<f64>,
    v: &Array2<f64>,
    out_u: &mut Array2<f64>,
    out_v: &mut Array2<f64>,
) {
    for (j, p) in props.iter().enumerate() {
        for c in 0..u.ncols() {
            let uu = u[[j, c]];
            let vv = v[[j, c]];
            out_u[[j, c]] = p.uu * uu + p.uv * vv;
            out_v[[j, c]] = p.vu * uu + p.vv * vv;
        }
    }
}

/// arg = anchor_u + scale·(uv-component of E½w), for stage vectors whose
/// u-component vanishes.
fn stage_arg(
    arg: &mut Array2<f64>,
    anchor_u: &Array2<f64>,
    half: &[ModeProp],
    w: &Array2<f64>,
    scale: f64,
) {
    for j in 0..arg.nrows() {
        let p = &half[j];
        for c in 0..arg.ncols() {
            arg[[j, c]] = anchor_u[[j, c]] + scale * p.uv * w[[j, c]];
        }
    }
}

fn pack(dst: &mut Array2<f64>, base: &Array2<f64>, tangents: Option<&Array2<f64>>) {
    let n = base.ncols();
    dst.slice_mut(ndarray::s![.., 0..n]).assign(base);
    if let Some(t) = tangents {
        dst.slice_mut(ndarray::s![.., n..]).assign(t);
    }
}

fn unpack(src: &Array2<f64>, base: &mut Array2<f64>, tangents: Option<&mut Array2<f64>>) {
    let n = base.ncols();
    base.assign(&src.slice(ndarray::s![.., 0..n]));
    if let Some(t) = tangents {
        t.assign(&src.slice(ndarray::s![.., n..]));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn quartic(coeff: f64) -> Vec<PotentialTerm> {
        vec![PotentialTerm {
            coeff,
            powers: vec![4],
        }]
    }

    fn interval_system(
        len: f64,
        modes: usize,
        n: usize,
        spec: NonlinearitySpec,
    ) -> WaveSystem {
        WaveSystem::new(Domain::Interval { len }, modes, n, spec).unwrap()
    }

    #[test]
    fn zero_nonlinearity_evaluates_to_zero() {
        let sys = interval_system(PI, 8, 1, NonlinearitySpec::linear(0.1));
        let mut u = Array2::zeros((8, 1));
        u[[0, 0]] = 1.3;
        u[[4, 0]] = -0.7;
        let f = sys.eval_nonlinearity(&u).unwrap();
        assert!(f.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn cubic_force_matches_trig_identity() {
        // u = sin x = √(π/2)e₁ and u³ = (3 sin x − sin 3x)/4, so the force
        // coefficients are (3/4)√(π/2) on mode 1 and −(1/4)√(π/2) on mode 3.
        let sys = interval_system(PI, 8, 1, NonlinearitySpec::gradient(0.1, quartic(0.25)));
        let mut u = Array2::zeros((8, 1));
        u[[0, 0]] = (PI / 2.0).sqrt();
        let f = sys.eval_nonlinearity(&u).unwrap();
        let amp = (PI / 2.0).sqrt();
        assert_relative_eq!(f[[0, 0]], 0.75 * amp, max_relative = 1e-12);
        assert_relative_eq!(f[[2, 0]], -0.25 * amp, max_relative = 1e-12);
        for j in [1usize, 3, 4, 5, 6, 7] {
            assert_abs_diff_eq!(f[[j, 0]], 0.0, epsilon = 1e-12);
        }

        // Same coefficients from a dense-grid quadrature oracle.
        let dense = SineTable::new(PI, 8, 4096);
        let grid = dense.to_grid(u.view());
        let cubed = grid.mapv(|x| x * x * x);
        let oracle = dense.to_coeffs(cubed.view());
        for j in 0..8 {
            assert_abs_diff_eq!(f[[j, 0]], oracle[[j, 0]], epsilon = 1e-10);
        }
    }

    #[test]
    fn rotational_force_vanishes_at_origin() {
        let sys = interval_system(PI, 8, 2, NonlinearitySpec::rotational(0.1));
        let u = Array2::zeros((8, 2));
        let f = sys.eval_nonlinearity(&u).unwrap();
        assert!(f.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn rotational_force_converges_under_grid_refinement() {
        // The sine coupling is evaluated without exact dealiasing; its
        // coefficients must already be grid-converged at the 3/2 rule.
        let gamma = 0.25;
        let mut u = Array2::zeros((32, 2));
        u[[0, 0]] = 0.5;
        u[[1, 1]] = 0.3;
        let coarse = interval_system(PI, 32, 2, NonlinearitySpec::rotational(gamma));
        let f_coarse = coarse.eval_nonlinearity(&u).unwrap();

        let fine = interval_system(PI, 64, 2, NonlinearitySpec::rotational(gamma));
        let mut u_padded = Array2::zeros((64, 2));
        u_padded.slice_mut(ndarray::s![0..32, ..]).assign(&u);
        let f_fine = fine.eval_nonlinearity(&u_padded).unwrap();
        for j in 0..32 {
            for c in 0..2 {
                assert_abs_diff_eq!(f_coarse[[j, c]], f_fine[[j, c]], epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn harmonic_half_period() {
        // γ = 0, λ = 1: u(t) = cos t, so t = π flips the sign exactly.
        let sys = interval_system(PI, 1, 1, NonlinearitySpec::linear(0.0));
        let mut state = GalerkinState::zero(1, 1);
        state.u[[0, 0]] = 1.0;
        for _ in 0..8 {
            state = sys.step(&state, PI / 8.0).unwrap();
        }
        assert_abs_diff_eq!(state.u[[0, 0]], -1.0, epsilon = 1e-13);
        assert_abs_diff_eq!(state.v[[0, 0]], 0.0, epsilon = 1e-13);
    }

    #[test]
    fn linear_damping_dissipates_energy() {
        let sys = interval_system(PI, 1, 1, NonlinearitySpec::linear(0.2));
        let mut state = GalerkinState::zero(1, 1);
        state.u[[0, 0]] = 0.8;
        state.v[[0, 0]] = -0.4;
        let e0 = sys.energy_sq(&state);
        let mut prev = e0;
        for _ in 0..100 {
            state = sys.step(&state, 0.1).unwrap();
            let e = sys.energy_sq(&state);
            assert!(e <= prev * (1.0 + 1e-12), "energy grew: {prev} -> {e}");
            prev = e;
        }
        assert!(sys.energy_sq(&state) < e0);
    }

    #[test]
    fn stiff_mode_matches_closed_form() {
        // λ = 25, γ = 0.1, ξ₀ = (1, 0):
        // u(t) = e^{−γt/2}(cos νt + γ/(2ν) sin νt), v = −e^{−γt/2}(λ/ν)sin νt.
        let sys = interval_system(PI / 5.0, 1, 1, NonlinearitySpec::linear(0.1));
        let lambda = sys.spectrum.lambdas[0];
        assert_relative_eq!(lambda, 25.0, max_relative = 1e-14);
        let mut state = GalerkinState::zero(1, 1);
        state.u[[0, 0]] = 1.0;
        for _ in 0..20 {
            state = sys.step(&state, 0.05).unwrap();
        }
        let gamma = 0.1f64;
        let nu = (lambda - gamma * gamma / 4.0).sqrt();
        let decay = (-gamma * 0.5).exp();
        let u_exact = decay * (nu.cos() + gamma / (2.0 * nu) * nu.sin());
        let v_exact = -decay * lambda / nu * nu.sin();
        assert_relative_eq!(state.u[[0, 0]], u_exact, max_relative = 1e-8);
        assert_relative_eq!(state.v[[0, 0]], v_exact, max_relative = 1e-8);
    }

    #[test]
    fn integrator_is_fourth_order() {
        // Halving dt on a cubic problem must shrink the final-state error
        // by roughly 2⁴; a broken stage sequence degrades this to 2².
        let sys = interval_system(PI, 8, 1, NonlinearitySpec::gradient(0.3, quartic(0.25)));
        let mut start = GalerkinState::zero(8, 1);
        start.u[[0, 0]] = 1.5;
        start.v[[1, 0]] = -0.5;
        let run = |dt: f64| {
            let steps = (1.0 / dt).round() as usize;
            let mut state = start.clone();
            for _ in 0..steps {
                state = sys.step(&state, dt).unwrap();
            }
            state
        };
        let reference = run(1.0 / 1024.0);
        let err = |state: &GalerkinState| {
            let du = &state.u - &reference.u;
            let dv = &state.v - &reference.v;
            du.iter()
                .chain(dv.iter())
                .fold(0.0f64, |m, &x| m.max(x.abs()))
        };
        let coarse = err(&run(0.05));
        let fine = err(&run(0.025));
        assert!(coarse > 1e-9, "errors too small to resolve the order: {coarse}");
        let ratio = coarse / fine;
        assert!(
            (11.0..22.0).contains(&ratio),
            "convergence ratio {ratio} is not fourth order \
             (coarse {coarse}, fine {fine})"
        );
    }

    #[test]
    fn step_preconditions() {
        let sys = interval_system(PI, 16, 1, NonlinearitySpec::linear(0.1));
        let state = GalerkinState::zero(16, 1);
        // λ_M = 256, so dt·√λ_M = 16·dt must stay at or below 1/2.
        assert!(sys.step(&state, 0.04).is_err());
        assert!(sys.step(&state, -0.01).is_err());
        assert!(sys.step(&state, 0.03125).is_ok());
    }

    #[test]
    fn psi_oracles() {
        let sys = interval_system(PI, 1, 1, NonlinearitySpec::linear(0.2));
        assert_eq!(sys.energy_psi(&GalerkinState::zero(1, 1)), 0.0);
        // Single mode, λ = 1, ξ = (1, 0): ½ + ½γε = 0.51 with ε = γ/2.
        let mut state = GalerkinState::zero(1, 1);
        state.u[[0, 0]] = 1.0;
        assert_relative_eq!(sys.energy_psi(&state), 0.51, max_relative = 1e-14);

        // u = sin x, F₀ = u⁴/4: π/4 + 3π/32 from energy and potential,
        // plus the ½γε‖u‖² cross term π/200.
        let sys =
            interval_system(PI, 8, 1, NonlinearitySpec::gradient(0.2, quartic(0.25)));
        let mut state = GalerkinState::zero(8, 1);
        state.u[[0, 0]] = (PI / 2.0).sqrt();
        let expect = PI / 4.0 + 3.0 * PI / 32.0 + PI / 200.0;
        assert_relative_eq!(sys.energy_psi(&state), expect, max_relative = 1e-12);
    }

    #[test]
    fn lyapunov_functional_basics() {
        let sys = interval_system(PI, 4, 1, NonlinearitySpec::gradient(0.3, quartic(0.25)));
        assert_eq!(sys.lyapunov_functional(&GalerkinState::zero(4, 1)).unwrap(), 0.0);
        let rot = interval_system(PI, 4, 2, NonlinearitySpec::rotational(0.3));
        assert!(rot.lyapunov_functional(&GalerkinState::zero(4, 2)).is_err());
    }

    #[test]
    fn lyapunov_decay_rate_matches_finite_difference() {
        // d𝓛/dt = −γ‖∂tu‖²; with ∂tu = sin x that is −γπ/2.
        let gamma = 0.5;
        let sys = interval_system(PI, 8, 1, NonlinearitySpec::gradient(gamma, quartic(0.25)));
        let mut state = GalerkinState::zero(8, 1);
        state.u[[1, 0]] = 0.3;
        state.v[[0, 0]] = (PI / 2.0).sqrt();
        let dt = 1e-4;
        let l0 = sys.lyapunov_functional(&state).unwrap();
        let next = sys.step(&state, dt).unwrap();
        let l1 = sys.lyapunov_functional(&next).unwrap();
        let rate = (l1 - l0) / dt;
        let expect = -gamma * PI / 2.0;
        assert_relative_eq!(rate, expect, max_relative = 1e-2);
    }

    #[test]
    fn gradient_flow_is_monotone() {
        let sys = interval_system(PI, 8, 1, NonlinearitySpec::gradient(0.3, quartic(0.25)));
        let mut state = GalerkinState::zero(8, 1);
        state.u[[0, 0]] = 1.0;
        state.u[[2, 0]] = -0.5;
        state.v[[1, 0]] = 0.7;
        let traj = sys.simulate(state, 5.0, 1e-3, 50).unwrap();
        let lyap = traj.lyapunov.as_ref().unwrap();
        for w in lyap.windows(2).zip(traj.times.windows(2)) {
            let (pair, ts) = w;
            let budget = 1e-6 * (ts[1] - ts[0]) + 1e-12;
            assert!(
                pair[1] <= pair[0] + budget,
                "Lyapunov functional rose: {} -> {}",
                pair[0],
                pair[1]
            );
        }
    }

    #[test]
    fn forced_gradient_flow_is_monotone() {
        let mut forcing = Array2::zeros((8, 1));
        forcing[[0, 0]] = 0.4;
        forcing[[2, 0]] = -0.15;
        let spec = NonlinearitySpec::gradient(0.3, quartic(0.25)).with_forcing(forcing);
        let sys = interval_system(PI, 8, 1, spec);
        let mut state = GalerkinState::zero(8, 1);
        state.u[[0, 0]] = 1.0;
        state.v[[1, 0]] = 0.7;
        let traj = sys.simulate(state, 5.0, 1e-3, 50).unwrap();
        let lyap = traj.lyapunov.as_ref().unwrap();
        for w in lyap.windows(2).zip(traj.times.windows(2)) {
            let (pair, ts) = w;
            let budget = 1e-6 * (ts[1] - ts[0]) + 1e-12;
            assert!(
                pair[1] <= pair[0] + budget,
                "Lyapunov functional rose: {} -> {}",
                pair[0],
                pair[1]
            );
        }
    }

    #[test]
    fn gradient_flow_settles_at_equilibrium() {
        let sys = interval_system(PI, 16, 1, NonlinearitySpec::gradient(0.5, quartic(0.25)));
        let mut state = GalerkinState::zero(16, 1);
        state.u[[0, 0]] = 1.0;
        let traj = sys.simulate(state, 60.0, 0.025, 200).unwrap();
        let v_norm = {
            let last = traj.states.last().unwrap();
            last.v.iter().map(|x| x * x).sum::<f64>().sqrt()
        };
        assert!(v_norm < 1e-3, "still moving: ‖v‖ = {v_norm}");
        let lyap = traj.lyapunov.as_ref().unwrap();
        assert!(lyap.last().unwrap() < &1e-6);
    }

    #[test]
    fn entering_time_scales_like_inverse_damping() {
        // Linear unforced flow from energy norm 10 into the ball of radius
        // 1/2: the entering time is about (2/γ)ln 20, so t·γ stays bounded.
        let mut previous = 0.0;
        for gamma in [0.2, 0.1, 0.05] {
            let sys = interval_system(PI, 16, 1, NonlinearitySpec::linear(gamma));
            let mut state = GalerkinState::zero(16, 1);
            for j in 0..16 {
                state.v[[j, 0]] = 2.5;
            }
            assert_relative_eq!(sys.energy_sq(&state).sqrt(), 10.0, max_relative = 1e-12);
            let traj = sys.simulate(state, 250.0, 0.025, 1).unwrap();
            let entering = traj
                .times
                .iter()
                .zip(&traj.energy)
                .find(|(_, &e)| e <= 0.5)
                .map(|(&t, _)| t)
                .expect("never entered the ball");
            assert!(
                entering * gamma <= 10.0,
                "entering time {entering} too slow for gamma = {gamma}"
            );
            assert!(entering > previous, "entering times should lengthen");
            previous = entering;
        }
    }

    #[test]
    fn unbounded_potential_blows_up() {
        let spec = NonlinearitySpec::gradient(0.1, quartic(-0.25));
        assert!(!spec.potential_looks_bounded_below(1));
        let sys = interval_system(PI, 8, 1, spec);
        let mut state = GalerkinState::zero(8, 1);
        state.u[[0, 0]] = 3.0;
        let res = sys.simulate(state, 10.0, 0.01, 10);
        assert!(matches!(res, Err(Error::Instability { .. })));
    }

    #[test]
    fn bounded_potential_heuristic_accepts_quartic() {
        assert!(NonlinearitySpec::gradient(0.1, quartic(0.25)).potential_looks_bounded_below(1));
        let double_well = vec![
            PotentialTerm {
                coeff: 0.25,
                powers: vec![4],
            },
            PotentialTerm {
                coeff: -0.5,
                powers: vec![2],
            },
        ];
        assert!(NonlinearitySpec::gradient(0.1, double_well).potential_looks_bounded_below(1));
    }

    #[test]
    fn simulation_is_deterministic() {
        let make = || {
            let sys =
                interval_system(PI, 8, 1, NonlinearitySpec::gradient(0.2, quartic(0.25)));
            let mut state = GalerkinState::zero(8, 1);
            state.u[[0, 0]] = 0.9;
            state.v[[3, 0]] = -0.2;
            sys.simulate(state, 3.0, 0.01, 10).unwrap()
        };
        let a = make();
        let b = make();
        assert_eq!(a.psi, b.psi);
        assert_eq!(a.states.last().unwrap().u, b.states.last().unwrap().u);
    }

    #[test]
    fn bd_estimates_constant_jacobian() {
        // F₀ = a₀u²/2 gives f' ≡ a₀.
        let a0 = 0.7;
        let spec = NonlinearitySpec::gradient(
            0.2,
            vec![PotentialTerm {
                coeff: a0 / 2.0,
                powers: vec![2],
            }],
        );
        let sys = interval_system(PI, 32, 1, spec);
        let mut state = GalerkinState::zero(32, 1);
        state.u[[0, 0]] = 0.5;
        let traj = sys.simulate(state, 5.0, 0.01, 5).unwrap();
        let b1 = sys.estimate_bd(&traj, 1, 0.0).unwrap();
        assert_relative_eq!(b1, a0, max_relative = 1e-12);
        let b2 = sys.estimate_bd(&traj, 2, 0.0).unwrap();
        assert_relative_eq!(b2, a0, max_relative = 1e-12);
        // L₃ norm of a constant: |a₀|·ℓ^{1/3}, up to the boundary cells the
        // interior quadrature cannot see (relative weight 1/(P+1)).
        let b3 = sys.estimate_bd(&traj, 3, 0.0).unwrap();
        assert_relative_eq!(b3, a0 * PI.powf(1.0 / 3.0), max_relative = 0.02);
    }

    #[test]
    fn bd_cubic_tracks_sup_of_u_squared() {
        let sys = interval_system(PI, 16, 1, NonlinearitySpec::gradient(0.3, quartic(0.25)));
        let mut state = GalerkinState::zero(16, 1);
        state.u[[0, 0]] = 1.1;
        state.v[[1, 0]] = 0.4;
        let traj = sys.simulate(state, 4.0, 0.02, 4).unwrap();
        let b1 = sys.estimate_bd(&traj, 1, 0.0).unwrap();
        // Oracle: max over samples of 3·sup|u|² on a dense grid.
        let dense = SineTable::new(PI, 16, 8192);
        let oracle = traj
            .states
            .iter()
            .map(|s| {
                let g = dense.to_grid(s.u.view());
                g.iter().fold(0.0f64, |m, &x| m.max(3.0 * x * x))
            })
            .fold(0.0f64, f64::max);
        assert_relative_eq!(b1, oracle, max_relative = 1e-2);
        // The coarse grid never overshoots the sup by more than the dense
        // oracle's own sampling error.
        assert!(b1 <= oracle * (1.0 + 1e-6));
    }

    #[test]
    fn bd_needs_enough_samples() {
        let sys = interval_system(PI, 8, 1, NonlinearitySpec::gradient(0.2, quartic(0.25)));
        let mut state = GalerkinState::zero(8, 1);
        state.u[[0, 0]] = 0.5;
        let traj = sys.simulate(state, 1.0, 0.02, 10).unwrap();
        assert!(matches!(
            sys.estimate_bd(&traj, 1, 0.9),
            Err(Error::InsufficientSamples { .. })
        ));
    }

    #[test]
    fn mode_propagator_critical_damping_seam() {
        let h = 0.3;
        let gamma = 2.0;
        let crit = 1.0; // λ = γ²/4

        // At the double root the flow is e^{−γt/2}(1 + γt/2, t; −λt, 1 − γt/2).
        let p = mode_propagator(crit, gamma, h);
        let e = (-0.5 * gamma * h).exp();
        assert_relative_eq!(p.uu, e * (1.0 + 0.5 * gamma * h), max_relative = 1e-14);
        assert_relative_eq!(p.uv, e * h, max_relative = 1e-14);
        assert_relative_eq!(p.vu, -e * crit * h, max_relative = 1e-14);
        assert_relative_eq!(p.vv, e * (1.0 - 0.5 * gamma * h), max_relative = 1e-14);

        // Just outside the series window both analytic branches must agree
        // with the series expansion at the same λ.
        for w in [2e-8, -2e-8] {
            let lambda = crit + w / (h * h);
            let p = mode_propagator(lambda, gamma, h);
            let c = 1.0 - 0.5 * w + w * w / 24.0;
            let s = h * (1.0 - w / 6.0);
            assert_abs_diff_eq!(p.uu, e * (c + 0.5 * gamma * s), epsilon = 1e-12);
            assert_abs_diff_eq!(p.uv, e * s, epsilon = 1e-12);
            assert_abs_diff_eq!(p.vu, -e * lambda * s, epsilon = 1e-12);
            assert_abs_diff_eq!(p.vv, e * (c - 0.5 * gamma * s), epsilon = 1e-12);
        }
    }

    proptest! {
        #[test]
        fn rotational_force_stays_small(
            u1 in -50.0f64..50.0,
            u2 in -50.0f64..50.0,
            gamma in 0.01f64..2.0,
        ) {
            let spec = NonlinearitySpec::rotational(gamma);
            let mut f = [0.0f64; 2];
            spec.force_at(&[u1, u2], &mut f);
            let norm = (f[0] * f[0] + f[1] * f[1]).sqrt();
            prop_assert!(norm <= gamma * 2.0f64.sqrt() + 1e-12);

            let mut jac = [0.0f64; 4];
            spec.jacobian_at(&[u1, u2], &mut jac);
            let fro = jac.iter().map(|x| x * x).sum::<f64>().sqrt();
            prop_assert!(fro <= 2.0f64.sqrt() + 1e-12);
        }

        #[test]
        fn linear_modes_evolve_independently_and_exactly(
            lambda_idx in 0usize..8,
            amp_u in -2.0f64..2.0,
            amp_v in -2.0f64..2.0,
            gamma in 0.0f64..1.0,
        ) {
            let sys = interval_system(PI, 8, 1, NonlinearitySpec::linear(gamma));
            let mut state = GalerkinState::zero(8, 1);
            state.u[[lambda_idx, 0]] = amp_u;
            state.v[[lambda_idx, 0]] = amp_v;
            let lambda = sys.spectrum.lambdas[lambda_idx];
            let dt = 0.4 / sys.spectrum.lambdas.last().unwrap().sqrt();
            let stepped = sys.step(&state, dt).unwrap();
            // Closed underdamped solution (γ < 1 ≤ λ keeps γ² < 4λ):
            // u = e^{−γt/2}(u₀ cos νt + (v₀ + γu₀/2)/ν sin νt).
            let nu = (lambda - 0.25 * gamma * gamma).sqrt();
            let e = (-0.5 * gamma * dt).exp();
            let (cn, sn) = ((nu * dt).cos(), (nu * dt).sin());
            let u_exact = e * (amp_u * cn + (amp_v + 0.5 * gamma * amp_u) / nu * sn);
            let v_exact = e * (amp_v * cn - (lambda * amp_u + 0.5 * gamma * amp_v) / nu * sn);
            prop_assert!((stepped.u[[lambda_idx, 0]] - u_exact).abs() < 1e-10);
            prop_assert!((stepped.v[[lambda_idx, 0]] - v_exact).abs() < 1e-10);
            // Other modes stay identically zero.
            for j in 0..8 {
                if j != lambda_idx {
                    prop_assert_eq!(stepped.u[[j, 0]], 0.0);
                    prop_assert_eq!(stepped.v[[j, 0]], 0.0);
                }
            }
        }
    }
}

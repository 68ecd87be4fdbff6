//! Families with suborthonormal gradients and their trace and density
//! inequalities.
//!
//! A family {φ₁, …, φₙ} ⊂ H¹₀(Ω)ᴺ has suborthonormal gradients when
//!
//! ```text
//!     Σᵢⱼ ξᵢ ξⱼ (∇φᵢ, ∇φⱼ) ≤ Σⱼ ξⱼ²    for every ξ ∈ ℝⁿ,
//! ```
//!
//! that is, the Gram matrix of the gradients has operator norm at most one.
//! The density ρ(x) = Σⱼ |φⱼ(x)|² of such a family obeys dimension-dependent
//! bounds: ‖ρ‖_∞ ≤ Nℓ/4 on an interval (sharp, attained by the peak
//! function), ‖ρ‖_{L₁} ≤ N(|Ω|/2π)·ln(en) on a planar domain, and
//! ‖ρ‖_{L₃} ≤ (N·L₀)^{2/3}·3·n^{1/3} in space, where L₀ is the constant of
//! the Cwikel-Lieb-Rozenblum eigenvalue-counting bound. Alongside these the
//! module verifies the trace inequality Σᵢ(Kφᵢ, φᵢ) ≤ Σᵢ μᵢ for positive
//! diagonal operators, eigenvalue sums Σ λⱼ^{−1/2} against their closed-form
//! majorants, and the sharp interval embedding ‖u‖²_∞ ≤ (ℓ/4)‖u′‖².
//!
//! Families are realized by their coefficients over the Dirichlet sine
//! eigenbasis, which makes gradient inner products and L₂ masses exact sums
//! and confines quadrature error to the pointwise density evaluations.

use ndarray::linalg::general_mat_mul;
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::basis::{BoxGrid, SineTable};
use crate::bounds::CLRConstants;
use crate::error::{Error, Result};
use crate::spectral::{build_spectrum, Spectrum};

/// Relative slack granted to the interval sup-bound for the density of a
/// family evaluated on the default 1024-point grid.
pub const D1_GRID_TOL: f64 = 0.02;

/// Relative slack for the critical-exponent density norm on the default
/// 48³ grid.
pub const D3_QUAD_TOL: f64 = 0.05;

/// Absolute slack for the trace inequality.
pub const LEMMA_TOL: f64 = 1e-10;

/// How random families are post-processed after gradient orthonormalization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GenMode {
    /// Keep the orthonormalized members; the Gram matrix is the identity.
    Orthonormal,
    /// Scale the whole family by one random factor in (0, 1].
    Contracted,
    /// Zero a random subset of coefficients, then restore unit gradient
    /// norms member by member when that keeps the family suborthonormal.
    Projected,
}

/// Campaign mix over seeds: 70% orthonormal (the near-saturating stress
/// case), 20% contracted, 10% projected.
pub fn campaign_mode(seed: u64) -> GenMode {
    match seed % 10 {
        0..=6 => GenMode::Orthonormal,
        7 | 8 => GenMode::Contracted,
        _ => GenMode::Projected,
    }
}

/// A finite family of H¹₀ vector functions held as sine-basis coefficients.
///
/// Member `i` is φᵢ = Σₘ coeffs[i][m, c]·eₘ per component c, with eₘ the
/// L₂-normalized Dirichlet eigenfunctions of `spectrum`. Suborthonormality
/// of the gradients is a property to be checked, not a construction
/// invariant: generators produce it, projections preserve it, but arbitrary
/// coefficients may violate it.
#[derive(Debug, Clone, PartialEq)]
pub struct SuborthFamily {
    pub spectrum: Spectrum,
    /// One modes×components matrix per member.
    pub coeffs: Vec<Array2<f64>>,
}

impl SuborthFamily {
    pub fn new(spectrum: Spectrum, coeffs: Vec<Array2<f64>>) -> Result<Self> {
        let shape = (spectrum.len(), spectrum.n_components);
        for (i, member) in coeffs.iter().enumerate() {
            if member.dim() != shape {
                return Err(Error::InvalidInput(format!(
                    "member {i} has shape {:?}, spectrum implies {shape:?}",
                    member.dim()
                )));
            }
            if member.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "member {i} has non-finite coefficients"
                )));
            }
        }
        Ok(SuborthFamily { spectrum, coeffs })
    }

    pub fn family_size(&self) -> usize {
        self.coeffs.len()
    }

    pub fn mode_count(&self) -> usize {
        self.spectrum.len()
    }

    pub fn n_components(&self) -> usize {
        self.spectrum.n_components
    }

    pub fn dimension(&self) -> usize {
        self.spectrum.domain.dim()
    }

    /// Gram matrix of gradients, (∇φᵢ, ∇φⱼ) = Σₘ λₘ Σ_c cᵢ\[m,c\]·cⱼ\[m,c\].
    pub fn gram_gradients(&self) -> Array2<f64> {
        let n = self.family_size();
        let mut gram = Array2::zeros((n, n));
        for i in 0..n {
            for j in 0..=i {
                let g = gradient_dot(&self.coeffs[i], &self.coeffs[j], &self.spectrum.lambdas);
                gram[[i, j]] = g;
                gram[[j, i]] = g;
            }
        }
        gram
    }

    /// Largest eigenvalue of the gradient Gram matrix; 0 for empty families.
    pub fn max_gram_eigenvalue(&self) -> f64 {
        let n = self.family_size();
        if n == 0 {
            return 0.0;
        }
        let gram = self.gram_gradients();
        let sym = nalgebra::DMatrix::from_fn(n, n, |i, j| gram[[i, j]]);
        sym.symmetric_eigen()
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_suborthonormal(&self, tol: f64) -> bool {
        self.max_gram_eigenvalue() <= 1.0 + tol
    }

    /// Scalar family of the c-th components over the same modes.
    ///
    /// Components of a suborthonormal family are themselves suborthonormal:
    /// the Gram form splits into a sum of non-negative per-component forms.
    pub fn component(&self, c: usize) -> SuborthFamily {
        assert!(c < self.n_components(), "component {c} out of range");
        let scalar_spectrum = Spectrum {
            domain: self.spectrum.domain,
            lambdas: self.spectrum.lambdas.clone(),
            indices: self.spectrum.indices.clone(),
            n_components: 1,
            bold_lambdas: self.spectrum.lambdas.clone(),
        };
        let coeffs = self
            .coeffs
            .iter()
            .map(|m| {
                m.column(c)
                    .to_owned()
                    .into_shape_with_order((m.nrows(), 1))
                    .expect("column reshape")
            })
            .collect();
        SuborthFamily {
            spectrum: scalar_spectrum,
            coeffs,
        }
    }

    /// Every member multiplied by `factor`; the Gram matrix scales by its
    /// square and the density by the square as well.
    pub fn scaled(&self, factor: f64) -> SuborthFamily {
        SuborthFamily {
            spectrum: self.spectrum.clone(),
            coeffs: self.coeffs.iter().map(|m| m * factor).collect(),
        }
    }

    /// Σⱼ ‖φⱼ‖²_{L₂}, exact in coefficients.
    pub fn l2_mass(&self) -> f64 {
        self.coeffs
            .iter()
            .map(|m| m.iter().map(|x| x * x).sum::<f64>())
            .sum()
    }

    /// Coefficients of (−Δ)^{1/2}φᵢ, flattened to the vector-mode ordering
    /// of `spectrum.bold_lambdas` (mode-major, components within a mode).
    ///
    /// When the family has suborthonormal gradients, these vectors are
    /// suborthonormal in the plain Euclidean product, which is the setting
    /// of [`verify_sub_lemma`].
    pub fn ambient_vectors(&self) -> Vec<Array1<f64>> {
        let m = self.mode_count();
        let nc = self.n_components();
        let roots: Vec<f64> = self.spectrum.lambdas.iter().map(|l| l.sqrt()).collect();
        self.coeffs
            .iter()
            .map(|member| {
                Array1::from_shape_fn(m * nc, |flat| {
                    member[[flat / nc, flat % nc]] * roots[flat / nc]
                })
            })
            .collect()
    }

    /// Pointwise density ρ = Σⱼ |φⱼ|² sampled on a uniform interior grid
    /// with `points_per_axis` points along each axis.
    pub fn rho_field(&self, points_per_axis: usize) -> Result<RhoField> {
        let max_index = self
            .spectrum
            .indices
            .iter()
            .flat_map(|idx| idx.iter())
            .cloned()
            .max()
            .unwrap_or(1) as usize;
        if points_per_axis < max_index {
            return Err(Error::InvalidInput(format!(
                "{points_per_axis} points per axis cannot resolve mode index {max_index}"
            )));
        }
        let (values, cell_weight) = match self.dimension() {
            1 => {
                let len = self.spectrum.domain.sides()[0];
                let table = SineTable::new(len, self.mode_count(), points_per_axis);
                let fields = table.to_grid(self.stacked_coeffs().view());
                let values: Vec<f64> = fields
                    .rows()
                    .into_iter()
                    .map(|row| row.iter().map(|f| f * f).sum())
                    .collect();
                (values, table.weight)
            }
            _ => {
                let grid = BoxGrid::for_spectrum(&self.spectrum, points_per_axis);
                let sums = rho_on_box(self, &grid, &[]);
                (sums.values, grid.cell_weight)
            }
        };
        let linf = values.iter().cloned().fold(0.0f64, f64::max);
        let l1 = values.iter().sum::<f64>() * cell_weight;
        let lp = (self.dimension() == 3).then(|| {
            let p3 = values.iter().map(|v| v * v * v).sum::<f64>() * cell_weight;
            (3.0, p3.cbrt())
        });
        Ok(RhoField {
            values,
            cell_weight,
            linf,
            l1,
            lp,
        })
    }

    /// Member coefficients stacked as modes×(n·N) columns, member-major.
    fn stacked_coeffs(&self) -> Array2<f64> {
        let m = self.mode_count();
        let nc = self.n_components();
        let mut stacked = Array2::zeros((m, self.family_size() * nc));
        for (i, member) in self.coeffs.iter().enumerate() {
            for c in 0..nc {
                stacked.column_mut(i * nc + c).assign(&member.column(c));
            }
        }
        stacked
    }
}

/// The density ρ(x) = Σⱼ |φⱼ(x)|² of a family on a uniform grid, together
/// with the norms the dimension-dependent bounds constrain.
#[derive(Debug, Clone)]
pub struct RhoField {
    pub values: Vec<f64>,
    pub cell_weight: f64,
    pub linf: f64,
    pub l1: f64,
    /// (p, ‖ρ‖_{L_p}) at the critical exponent p = d/(d−2); spatial
    /// domains only.
    pub lp: Option<(f64, f64)>,
}

/// Draws a random family of `family_size` members over the first `modes`
/// eigenmodes of `domain` with `n_components` components, orthonormalizes
/// the gradients, and applies `mode`. Fixed seeds reproduce bit-identical
/// families.
pub fn gen_suborth(
    domain: crate::spectral::Domain,
    n_components: usize,
    family_size: usize,
    modes: usize,
    seed: u64,
    mode: GenMode,
) -> Result<SuborthFamily> {
    let spectrum = build_spectrum(domain, modes, n_components)?;
    if family_size > modes * n_components {
        return Err(Error::InvalidInput(format!(
            "family of {family_size} cannot be independent over {modes} modes × {n_components} components"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coeffs: Vec<Array2<f64>> = (0..family_size)
        .map(|_| Array2::from_shape_fn((modes, n_components), |_| rng.gen_range(-1.0..1.0)))
        .collect();
    orthonormalize_gradients(&mut coeffs, &spectrum.lambdas)?;
    match mode {
        GenMode::Orthonormal => {}
        GenMode::Contracted => {
            let factor = 1.0 - rng.gen::<f64>();
            for member in &mut coeffs {
                *member *= factor;
            }
        }
        GenMode::Projected => {
            // One mask for the whole family: zeroing a fixed coordinate
            // subset is an orthogonal projection in the gradient metric
            // and preserves suborthonormality; per-member masks would not.
            let mask = Array2::from_shape_fn((modes, n_components), |_| {
                if rng.gen::<f64>() < 0.3 {
                    0.0
                } else {
                    1.0
                }
            });
            for member in &mut coeffs {
                *member *= &mask;
            }
            // The member-wise renormalization may break the constraint, so
            // it is kept only when the Gram check survives.
            let mut renormed = coeffs.clone();
            for member in &mut renormed {
                let norm = gradient_dot(member, member, &spectrum.lambdas).sqrt();
                if norm > 1e-12 {
                    *member /= norm;
                }
            }
            let candidate = SuborthFamily {
                spectrum: spectrum.clone(),
                coeffs: renormed,
            };
            if candidate.is_suborthonormal(1e-10) {
                coeffs = candidate.coeffs;
            }
        }
    }
    Ok(SuborthFamily { spectrum, coeffs })
}

/// (∇a, ∇b) over the eigenbasis: Σₘ λₘ Σ_c a[m,c]·b[m,c].
fn gradient_dot(a: &Array2<f64>, b: &Array2<f64>, lambdas: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (m, &lam) in lambdas.iter().enumerate() {
        let mut row = 0.0;
        for c in 0..a.ncols() {
            row += a[[m, c]] * b[[m, c]];
        }
        acc += lam * row;
    }
    acc
}

/// Modified Gram-Schmidt in the gradient inner product, two passes per
/// member for orthogonality at roundoff level.
fn orthonormalize_gradients(coeffs: &mut [Array2<f64>], lambdas: &[f64]) -> Result<()> {
    for i in 0..coeffs.len() {
        let (done, rest) = coeffs.split_at_mut(i);
        let current = &mut rest[0];
        for _ in 0..2 {
            for prev in done.iter() {
                let proj = gradient_dot(prev, current, lambdas);
                current.zip_mut_with(prev, |c, &p| *c -= proj * p);
            }
        }
        let norm = gradient_dot(current, current, lambdas).sqrt();
        if norm < 1e-12 {
            return Err(Error::RankDeficient {
                pivot: norm,
                column: i,
            });
        }
        *current /= norm;
    }
    Ok(())
}

/// Outcome of one inequality evaluation: the computed quantity, the bound
/// it must respect, and the verdict at the documented tolerance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InequalityCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

impl InequalityCheck {
    /// Signed slack rhs − lhs; negative values quantify a violation.
    pub fn margin(&self) -> f64 {
        self.rhs - self.lhs
    }
}

/// Checks Σᵢ (Kφᵢ, φᵢ) ≤ Σᵢ μᵢ for a positive diagonal operator
/// K = diag(μ), μ₁ ≥ μ₂ ≥ … > 0, and a family given by coordinates in K's
/// eigenbasis. The family must be suborthonormal in the plain Euclidean
/// product for the inequality to be guaranteed; the check itself just
/// evaluates both sides.
pub fn verify_sub_lemma(mu: &[f64], family: &[Array1<f64>]) -> InequalityCheck {
    assert!(
        mu.windows(2).all(|w| w[0] >= w[1]),
        "operator eigenvalues must be non-increasing"
    );
    assert!(
        mu.iter().all(|&m| m > 0.0),
        "operator eigenvalues must be positive"
    );
    assert!(
        family.len() <= mu.len(),
        "family larger than the listed spectrum"
    );
    let lhs = family
        .iter()
        .map(|v| {
            assert_eq!(v.len(), mu.len(), "member dimension must match spectrum");
            v.iter().zip(mu).map(|(x, &m)| m * x * x).sum::<f64>()
        })
        .sum();
    let rhs = mu[..family.len()].iter().sum();
    InequalityCheck {
        lhs,
        rhs,
        pass: lhs <= rhs + LEMMA_TOL,
    }
}

/// Interval sup-bound ‖ρ‖_∞ ≤ N·ℓ/4, evaluated on `grid_points` interior
/// points with relative slack [`D1_GRID_TOL`].
pub fn rho_bound_d1(family: &SuborthFamily, grid_points: usize) -> Result<InequalityCheck> {
    if family.dimension() != 1 {
        return Err(Error::UnsupportedDimension {
            got: family.dimension(),
            need: "1",
        });
    }
    let field = family.rho_field(grid_points)?;
    let len = family.spectrum.domain.sides()[0];
    let bound = family.n_components() as f64 * len / 4.0;
    Ok(InequalityCheck {
        lhs: field.linf,
        rhs: bound,
        pass: field.linf <= bound * (1.0 + D1_GRID_TOL),
    })
}

/// Planar mass bound ‖ρ‖_{L₁} ≤ N(|Ω|/2π)·ln(en). Both sides are exact:
/// the L₁ norm of ρ is the coefficient mass Σⱼ‖φⱼ‖², so no grid enters.
pub fn rho_bound_d2(family: &SuborthFamily) -> Result<InequalityCheck> {
    if family.dimension() != 2 {
        return Err(Error::UnsupportedDimension {
            got: family.dimension(),
            need: "2",
        });
    }
    let mass = family.l2_mass();
    let n = family.family_size();
    let bound = if n == 0 {
        0.0
    } else {
        family.n_components() as f64 * family.spectrum.domain.measure()
            / (2.0 * std::f64::consts::PI)
            * (1.0 + (n as f64).ln())
    };
    Ok(InequalityCheck {
        lhs: mass,
        rhs: bound,
        pass: mass <= bound * (1.0 + 1e-8),
    })
}

/// Critical-norm bound in space, with the growth rate of the norm in the
/// family size attached.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticalDensityCheck {
    pub check: InequalityCheck,
    /// Log-log slope of ‖ρ_k‖_{L₃} over nested prefixes k = n/8…n; `None`
    /// when fewer than three prefix sizes are available. The limit rate is
    /// n^{1/3}; short windows at small n sit visibly above it.
    pub scaling_exponent: Option<f64>,
    /// Set when the grid is coarser than 32 points per axis and the
    /// quadrature tolerance is no longer trustworthy.
    pub underresolved: bool,
}

/// Spatial bound ‖ρ‖_{L₃} ≤ (N·L₀)^{2/3}·3·n^{1/3} on a `grid_points`³
/// quadrature grid with relative slack [`D3_QUAD_TOL`], plus the prefix
/// scaling fit of the norm.
pub fn rho_bound_d3(
    family: &SuborthFamily,
    clr: &CLRConstants,
    grid_points: usize,
) -> Result<CriticalDensityCheck> {
    if family.dimension() != 3 {
        return Err(Error::UnsupportedDimension {
            got: family.dimension(),
            need: "3",
        });
    }
    if clr.dim != 3 {
        return Err(Error::InvalidInput(format!(
            "eigenvalue-counting constant is for dimension {}, need 3",
            clr.dim
        )));
    }
    let max_index = family
        .spectrum
        .indices
        .iter()
        .flat_map(|idx| idx.iter())
        .cloned()
        .max()
        .unwrap_or(1) as usize;
    if grid_points < max_index {
        return Err(Error::InvalidInput(format!(
            "{grid_points} points per axis cannot resolve mode index {max_index}"
        )));
    }
    let n = family.family_size();
    let ladder = prefix_ladder(n);
    let grid = BoxGrid::for_spectrum(&family.spectrum, grid_points);
    let sums = rho_on_box(family, &grid, &ladder);
    let norm_at = |cubed_sum: f64| (cubed_sum * grid.cell_weight).cbrt();
    let norm = if ladder.is_empty() {
        0.0
    } else {
        norm_at(*sums.ladder_cubes.last().expect("ladder norms"))
    };
    let bound = (family.n_components() as f64 * clr.l0d).powf(2.0 / 3.0)
        * 3.0
        * (n as f64).powf(1.0 / 3.0);
    let scaling_exponent = (ladder.len() >= 3).then(|| {
        let logs: Vec<f64> = sums.ladder_cubes.iter().map(|&s| norm_at(s).ln()).collect();
        let sizes: Vec<f64> = ladder.iter().map(|&k| (k as f64).ln()).collect();
        loglog_slope(&sizes, &logs)
    });
    Ok(CriticalDensityCheck {
        check: InequalityCheck {
            lhs: norm,
            rhs: bound,
            pass: norm <= bound * (1.0 + D3_QUAD_TOL),
        },
        scaling_exponent,
        underresolved: grid_points < 32,
    })
}

/// Nested prefix sizes n/8, n/4, n/2, n (integer, deduplicated, ≥ 2).
fn prefix_ladder(n: usize) -> Vec<usize> {
    if n == 0 {
        return Vec::new();
    }
    let mut ladder: Vec<usize> = (0..4).map(|halvings| n >> halvings).collect();
    ladder.retain(|&k| k >= 2);
    ladder.push(n);
    ladder.sort_unstable();
    ladder.dedup();
    ladder
}

/// Least-squares slope of ys against xs.
fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let xbar = xs.iter().sum::<f64>() / n;
    let ybar = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - xbar) * (x - xbar)).sum();
    let sxy: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (x - xbar) * (y - ybar))
        .sum();
    sxy / sxx
}

/// Grid sums of the density and of its cubed nested prefixes.
struct RhoSums {
    /// ρ of the full family at every grid point, row-major over the axes.
    values: Vec<f64>,
    /// Σ_points ρ_k(x)³ for each prefix size k in the requested ladder,
    /// unweighted.
    ladder_cubes: Vec<f64>,
}

/// Evaluates ρ on a box grid one first-axis slab at a time, so the mode
/// value matrix never materializes beyond one slab.
fn rho_on_box(family: &SuborthFamily, grid: &BoxGrid, ladder: &[usize]) -> RhoSums {
    let stacked = family.stacked_coeffs();
    let n_cols = stacked.ncols();
    let nc = family.n_components();
    let d = grid.dim();
    let slab_rows: usize = grid.points_per_axis[1..].iter().product();
    let indices = &family.spectrum.indices;
    let mut slab = Array2::zeros((slab_rows, family.mode_count()));
    let mut fields = Array2::zeros((slab_rows, n_cols));
    let mut values = Vec::with_capacity(grid.total_points());
    let mut ladder_cubes = vec![0.0f64; ladder.len()];
    for a in 0..grid.points_per_axis[0] {
        for (m, idx) in indices.iter().enumerate() {
            let ax0 = grid.axis_table(0)[[a, idx[0] as usize - 1]];
            match d {
                2 => {
                    let col_y = grid.axis_table(1).column(idx[1] as usize - 1);
                    for (r, &vy) in col_y.iter().enumerate() {
                        slab[[r, m]] = ax0 * vy;
                    }
                }
                _ => {
                    let col_y = grid.axis_table(1).column(idx[1] as usize - 1);
                    let col_z = grid.axis_table(2).column(idx[2] as usize - 1);
                    for (ry, &vy) in col_y.iter().enumerate() {
                        let scale = ax0 * vy;
                        let base = ry * col_z.len();
                        for (rz, &vz) in col_z.iter().enumerate() {
                            slab[[base + rz, m]] = scale * vz;
                        }
                    }
                }
            }
        }
        if n_cols > 0 {
            general_mat_mul(1.0, &slab, &stacked, 0.0, &mut fields);
        }
        for row in fields.rows() {
            let mut acc = 0.0;
            let mut rung = 0;
            for (col, &f) in row.iter().enumerate() {
                acc += f * f;
                while rung < ladder.len() && col + 1 == ladder[rung] * nc {
                    ladder_cubes[rung] += acc * acc * acc;
                    rung += 1;
                }
            }
            values.push(acc);
        }
    }
    RhoSums {
        values,
        ladder_cubes,
    }
}

/// Partial sums Σ_{j≤n} λⱼ^{−1/2} over the vector spectrum against their
/// closed-form majorants: (Nℓ/π)·ln(en) on an interval and
/// √(N|Ω|/2π)·2√n on a planar domain.
pub fn sum_inv_sqrt(spectrum: &Spectrum, n: usize) -> Result<InequalityCheck> {
    let d = spectrum.domain.dim();
    if d > 2 {
        return Err(Error::UnsupportedDimension {
            got: d,
            need: "1 or 2",
        });
    }
    if n == 0 {
        return Ok(InequalityCheck {
            lhs: 0.0,
            rhs: 0.0,
            pass: true,
        });
    }
    if spectrum.bold_lambdas.len() < n {
        return Err(Error::InsufficientModes {
            have: spectrum.bold_lambdas.len(),
            need: n,
        });
    }
    let sum: f64 = spectrum.bold_lambdas[..n]
        .iter()
        .map(|l| 1.0 / l.sqrt())
        .sum();
    let ncomp = spectrum.n_components as f64;
    let bound = match d {
        1 => {
            let len = spectrum.domain.sides()[0];
            ncomp * len / std::f64::consts::PI * (1.0 + (n as f64).ln())
        }
        _ => {
            let area = spectrum.domain.measure();
            (ncomp * area / (2.0 * std::f64::consts::PI)).sqrt() * 2.0 * (n as f64).sqrt()
        }
    };
    Ok(InequalityCheck {
        lhs: sum,
        rhs: bound,
        pass: sum <= bound * (1.0 + 1e-12),
    })
}

/// Discrete Rayleigh ratio ‖u‖²_∞ / ‖u′‖² for nodal values on a uniform
/// grid over (0, len), with zero boundary values implied and the derivative
/// energy of the piecewise-linear interpolant. The interpolant minimizes
/// energy among functions with these nodal values, so the ratio never
/// exceeds the continuum constant ℓ/4.
pub fn embedding_ratio(interior: &[f64], len: f64) -> f64 {
    assert!(len > 0.0 && len.is_finite());
    let gaps = interior.len() + 1;
    let h = len / gaps as f64;
    let mut energy = 0.0;
    let mut prev = 0.0;
    for &u in interior.iter().chain(std::iter::once(&0.0)) {
        let diff = u - prev;
        energy += diff * diff / h;
        prev = u;
    }
    if energy == 0.0 {
        return 0.0;
    }
    let peak = interior.iter().fold(0.0f64, |m, &u| m.max(u * u));
    peak / energy
}

/// The sharp interval embedding, probed two ways.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmbeddingCheck {
    /// Ratio attained by the peak function; approaches the bound as the
    /// grid refines and equals it when the midpoint is a node.
    pub hat_ratio: f64,
    /// Largest ratio over the random trigonometric samples.
    pub max_random_ratio: f64,
    /// The sharp constant ℓ/4.
    pub bound: f64,
    pub pass: bool,
}

/// Verifies ‖u‖²_∞ ≤ (ℓ/4)‖u′‖² on `grid_nodes` uniform nodes (boundary
/// included): the piecewise-linear peak function must attain at least 98%
/// of ℓ/4 and `samples` random sine polynomials must stay below it.
pub fn sharp_embedding_check(
    len: f64,
    grid_nodes: usize,
    samples: usize,
    seed: u64,
) -> Result<EmbeddingCheck> {
    if !(len > 0.0 && len.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "interval length must be positive and finite, got {len}"
        )));
    }
    if grid_nodes < 3 {
        return Err(Error::InvalidInput(
            "need at least one interior node".into(),
        ));
    }
    let interior = grid_nodes - 2;
    let h = len / (grid_nodes - 1) as f64;
    let hat: Vec<f64> = (1..=interior)
        .map(|i| {
            let x = i as f64 * h;
            x.min(len - x)
        })
        .collect();
    let hat_ratio = embedding_ratio(&hat, len);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let trig_modes = 32.min(interior);
    let mut max_random_ratio = 0.0f64;
    let mut sample = vec![0.0; interior];
    for _ in 0..samples {
        let amps: Vec<f64> = (0..trig_modes).map(|_| rng.gen_range(-1.0..1.0)).collect();
        for (i, u) in sample.iter_mut().enumerate() {
            let x = (i + 1) as f64 * h;
            *u = amps
                .iter()
                .enumerate()
                .map(|(k, &a)| a * ((k + 1) as f64 * std::f64::consts::PI * x / len).sin())
                .sum();
        }
        max_random_ratio = max_random_ratio.max(embedding_ratio(&sample, len));
    }
    let bound = len / 4.0;
    Ok(EmbeddingCheck {
        hat_ratio,
        max_random_ratio,
        bound,
        pass: hat_ratio >= 0.98 * bound && max_random_ratio <= bound * (1.0 + 1e-10),
    })
}

/// Single-member family holding the normalized peak function of (0, len),
/// realized by its first `modes` sine coefficients. The truncation loses a
/// little gradient mass, so the member ends exactly gradient-normalized
/// but its density peak sits slightly below ℓ/4.
pub fn hat_family(len: f64, modes: usize) -> Result<SuborthFamily> {
    let spectrum = build_spectrum(crate::spectral::Domain::Interval { len }, modes, 1)?;
    let mut member = Array2::zeros((modes, 1));
    for k in 1..=modes {
        let parity = match k % 4 {
            1 => 1.0,
            3 => -1.0,
            _ => 0.0,
        };
        member[[k - 1, 0]] = (2.0 / len).sqrt() * 2.0 * len * len
            / (std::f64::consts::PI * std::f64::consts::PI * (k * k) as f64)
            * parity;
    }
    let norm = gradient_dot(&member, &member, &spectrum.lambdas).sqrt();
    member /= norm;
    SuborthFamily::new(spectrum, vec![member])
}

/// Gradient-orthonormal family of the first `family_size` vector
/// eigenfunctions, φⱼ = eⱼ/√λⱼ in the vector-mode ordering. This is the
/// family that saturates the planar mass bound's proof chain Σⱼ 1/λⱼ.
pub fn eigen_family(spectrum: &Spectrum, family_size: usize) -> Result<SuborthFamily> {
    if spectrum.bold_lambdas.len() < family_size {
        return Err(Error::InsufficientModes {
            have: spectrum.bold_lambdas.len(),
            need: family_size,
        });
    }
    let nc = spectrum.n_components;
    let coeffs = (0..family_size)
        .map(|j| {
            let mut member = Array2::zeros((spectrum.len(), nc));
            member[[j / nc, j % nc]] = 1.0 / spectrum.bold_lambdas[j].sqrt();
            member
        })
        .collect();
    SuborthFamily::new(spectrum.clone(), coeffs)
}

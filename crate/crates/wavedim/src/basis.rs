//! Sine collocation tables and box quadrature.
//!
//! Basis normalization, fixed across the crate: on an interval (0, ℓ) the
//! n-th mode is e_n(x) = √(2/ℓ) sin(nπx/ℓ), orthonormal in L₂; box modes
//! are products of per-axis factors. Collocation uses P uniform interior
//! points x_p = pℓ/(P+1); the discrete sine orthogonality
//! Σ_p e_i(x_p) e_j(x_p) · ℓ/(P+1) = δ_ij holds exactly for i, j ≤ P, so
//! grid round-trips are exact whenever P ≥ M.

use ndarray::linalg::general_mat_mul;
use ndarray::{Array2, ArrayView2};

use crate::spectral::Spectrum;

/// One-dimensional synthesis/analysis table for the first M sine modes.
#[derive(Debug, Clone)]
pub struct SineTable {
    pub len: f64,
    pub modes: usize,
    pub points: usize,
    pub x: Vec<f64>,
    /// Quadrature weight ℓ/(P+1) of every interior point.
    pub weight: f64,
    /// P×M values e_k(x_p).
    pub(crate) synth: Array2<f64>,
}

impl SineTable {
    pub fn new(len: f64, modes: usize, points: usize) -> Self {
        assert!(len > 0.0 && modes >= 1 && points >= modes);
        let h = len / (points + 1) as f64;
        let x: Vec<f64> = (1..=points).map(|p| p as f64 * h).collect();
        let norm = (2.0 / len).sqrt();
        let mut synth = Array2::zeros((points, modes));
        for (p, &xp) in x.iter().enumerate() {
            for k in 0..modes {
                synth[[p, k]] = norm * ((k + 1) as f64 * std::f64::consts::PI * xp / len).sin();
            }
        }
        SineTable {
            len,
            modes,
            points,
            x,
            weight: h,
            synth,
        }
    }

    /// Synthesizes coefficient columns (M×C) to grid values (P×C).
    pub fn to_grid(&self, coeffs: ArrayView2<f64>) -> Array2<f64> {
        assert_eq!(coeffs.nrows(), self.modes);
        self.synth.dot(&coeffs)
    }

    /// In-place synthesis into a preallocated (P×C) buffer.
    pub fn to_grid_into(&self, coeffs: ArrayView2<f64>, out: &mut Array2<f64>) {
        general_mat_mul(1.0, &self.synth, &coeffs, 0.0, out);
    }

    /// Analyzes grid values (P×C) to coefficients (M×C) by discrete quadrature.
    pub fn to_coeffs(&self, grid: ArrayView2<f64>) -> Array2<f64> {
        assert_eq!(grid.nrows(), self.points);
        let mut out = Array2::zeros((self.modes, grid.ncols()));
        self.to_coeffs_into(grid, &mut out);
        out
    }

    /// In-place analysis into a preallocated (M×C) buffer.
    pub fn to_coeffs_into(&self, grid: ArrayView2<f64>, out: &mut Array2<f64>) {
        general_mat_mul(self.weight, &self.synth.t(), &grid, 0.0, out);
    }

    /// ∫₀^ℓ f dx by the interior trapezoid rule (boundary values are zero
    /// for everything synthesized here). Exact for integrands that extend
    /// evenly across both endpoints, such as products of two modes below
    /// the alias frequency; second-order accurate otherwise.
    pub fn quadrature(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.points);
        values.iter().sum::<f64>() * self.weight
    }
}

/// Collocation grid on a 1-, 2- or 3-dimensional box, tied to a spectrum.
///
/// Holds per-axis sine tables sized to the largest mode index present in the
/// spectrum, and evaluates eigenfunctions as products of axis factors.
#[derive(Debug, Clone)]
pub struct BoxGrid {
    pub points_per_axis: Vec<usize>,
    axis_sin: Vec<Array2<f64>>,
    /// Product of per-axis weights; one quadrature cell.
    pub cell_weight: f64,
}

impl BoxGrid {
    /// Builds a grid with `points` interior points per axis, resolving every
    /// index that occurs in `spectrum`.
    pub fn for_spectrum(spectrum: &Spectrum, points: usize) -> Self {
        let sides = spectrum.domain.sides();
        let d = sides.len();
        let mut max_idx = vec![0u32; d];
        for idx in &spectrum.indices {
            for a in 0..d {
                max_idx[a] = max_idx[a].max(idx[a]);
            }
        }
        let mut axis_sin = Vec::with_capacity(d);
        let mut cell_weight = 1.0;
        for a in 0..d {
            let table = SineTable::new(sides[a], max_idx[a] as usize, points);
            cell_weight *= table.weight;
            axis_sin.push(table.synth);
        }
        BoxGrid {
            points_per_axis: vec![points; d],
            axis_sin,
            cell_weight,
        }
    }

    pub fn dim(&self) -> usize {
        self.axis_sin.len()
    }

    /// Synthesis table of one axis: points × (largest mode index present).
    pub(crate) fn axis_table(&self, axis: usize) -> &Array2<f64> {
        &self.axis_sin[axis]
    }

    pub fn total_points(&self) -> usize {
        self.points_per_axis.iter().product()
    }

    /// Values of the (L₂-normalized) eigenfunction with per-axis indices
    /// `idx` on the full grid, flattened in row-major axis order.
    pub fn mode_field(&self, idx: [u32; 3]) -> Vec<f64> {
        let mut field = vec![1.0f64];
        for (sin_a, &ix) in self.axis_sin.iter().zip(&idx) {
            let col = sin_a.column(ix as usize - 1);
            let mut next = Vec::with_capacity(field.len() * col.len());
            for &f in &field {
                for &c in col.iter() {
                    next.push(f * c);
                }
            }
            field = next;
        }
        field
    }

    /// G×M matrix of all spectrum mode fields (G grid points).
    pub fn mode_matrix(&self, indices: &[[u32; 3]]) -> Array2<f64> {
        let g = self.total_points();
        let mut out = Array2::zeros((g, indices.len()));
        for (m, &idx) in indices.iter().enumerate() {
            let field = self.mode_field(idx);
            out.column_mut(m).assign(&ndarray::ArrayView1::from(&field));
        }
        out
    }

    pub fn quadrature(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.total_points());
        values.iter().sum::<f64>() * self.cell_weight
    }

    /// ‖f‖_{L_p} by discrete quadrature.
    pub fn lp_norm(&self, values: &[f64], p: f64) -> f64 {
        let s: f64 = values.iter().map(|v| v.abs().powf(p)).sum();
        (s * self.cell_weight).powf(1.0 / p)
    }
}

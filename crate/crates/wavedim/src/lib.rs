//! Numerical laboratory for damped wave systems of the form
//!
//! ```text
//!     d²u/dt² + γ du/dt − Δu + f(u) = g,    u: Ω ⊂ ℝᵈ → ℝᴺ,   u|∂Ω = 0,
//! ```
//!
//! studied in the energy space E = H¹₀ × L₂ with ‖(u, v)‖²_E = ‖∇u‖² + ‖v‖².
//!
//! The crate provides
//! * closed-form Dirichlet Laplacian spectra on boxes ([`spectral`]),
//! * a spectral Galerkin integrator with exact linear propagation ([`dynamics`]),
//! * QR-based Lyapunov exponents, Kaplan-Yorke dimension, and trace
//!   functionals for the linearized flow ([`lyapunov`]),
//! * closed-form upper and lower attractor-dimension bounds ([`bounds`]),
//! * generators and verifiers for trace and density inequalities over
//!   families with suborthonormal gradients ([`ineq`]).

// Validation guards negate comparisons so that NaN also fails them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod basis;
pub mod bounds;
pub mod dynamics;
mod error;
pub mod ineq;
pub mod lyapunov;
pub mod spectral;

pub use error::{Error, Result};

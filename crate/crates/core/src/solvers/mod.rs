//! Resolvent solvers: conjugate gradient for the eps-problem and a Fourier
//! multiplier for the effective fractional problem, plus the principal-value
//! quadrature cross-check of the effective operator.

mod cg;
mod spectral;
mod symbol;

pub use cg::{solve_epsilon, CgParams, ResolventSolveResult};
pub use spectral::{apply_effective_quadrature, apply_effective_symbol, solve_effective};
pub use symbol::{c_alpha_quadrature, init_symbol, reference_symbol, EffectiveSymbol};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("the zero-order coefficient m must be positive, got {0}")]
    NonPositiveMass(f64),
    #[error("stability index {0} outside (0, 2)")]
    AlphaOutOfRange(f64),
    #[error("symbol cross-check failed at xi = {xi:?}: tabulated {got:.9e} vs quadrature {want:.9e} (rel {rel:.3e} > tol {tol:.3e})")]
    SymbolCrossCheck {
        xi: Vec<f64>,
        got: f64,
        want: f64,
        rel: f64,
        tol: f64,
    },
    #[error("spectral solve produced a non-real field: |imag| / |f| = {imag_ratio:.3e}")]
    NonRealOutput { imag_ratio: f64 },
    #[error(transparent)]
    Discretization(#[from] crate::discretization::DiscretizationError),
}

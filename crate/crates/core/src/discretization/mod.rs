//! Discrete realization of the rescaled operator on a periodic torus grid.

mod grid;
mod stencil;

pub use grid::{DiscreteField, TorusGrid};
pub use stencil::{
    assemble_stencil, fractional_energy_tail, AssemblyParams, EpsilonStencil,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DiscretizationError {
    #[error("grid points per axis must be a power of two >= 4, got {0}")]
    BadGridSize(usize),
    #[error("side length must be positive, got {0}")]
    BadSide(f64),
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("T/eps = {0} is not an integer; the coefficient would lose periodicity on the torus")]
    IncommensurableEps(f64),
    #[error("eps/h = {0} is not an integer; one coefficient period must fill whole cells")]
    IncommensurableSpacing(f64),
    #[error("image-tail estimate {est:.3e} exceeds cap {cap:.3e} (mass relative to eps^-alpha); raise image_radius or the cap")]
    ImageTailTooLarge { est: f64, cap: f64 },
    #[error("cutoff {cutoff} does not fit: it must lie in (0, T/2]")]
    BadCutoff { cutoff: f64 },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("corrupt field file: {0}")]
    Corrupt(String),
}

//! Green's functions of `Δ²`: spectral on flat tori, logarithmic on `R^4`.

mod euclid;
mod torus;

pub use euclid::*;
pub use torus::*;

use thiserror::Error;

use crate::field::FieldError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PotentialError {
    #[error("need an even mode count of at least {min}, got {n}")]
    ModesTooFew { n: usize, min: usize },
    #[error("fit window starts at {r_min}, below two grid spacings ({spacing})")]
    WindowUnresolved { r_min: f64, spacing: f64 },
    #[error("invalid fit window [{0}, {1}]")]
    BadWindow(f64, f64),
    #[error("mode {mode:?} lies outside the truncation |m_j| < {half}")]
    ModeOutOfRange { mode: [i32; 4], half: i32 },
    #[error("coefficients are not conjugate-symmetric (defect {0:e})")]
    NotReal(f64),
    #[error("sampling grid of {grid} points per axis aliases modes up to {max_mode}")]
    GridTooCoarse { grid: usize, max_mode: i32 },
    #[error("quadrature did not settle: estimate {estimate}, change {change:e}")]
    QuadratureTolerance { estimate: f64, change: f64 },
    #[error("least-squares fit failed")]
    FitFailed,
    #[error(transparent)]
    Field(#[from] FieldError),
}

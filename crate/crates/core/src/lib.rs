//! Evolutionary equations in exponentially weighted L² spaces.
//!
//! Signals live on a uniform time grid and are stored in flat coordinates
//! `φ = e^{−νt} f`. Solutions of `(∂_{t,ν}M(∂_{t,ν}) + A)u = f` and of the
//! matching ν-adjoint system are computed per frequency after a unitary
//! Fourier–Laplace transform. The [`control`] module builds the
//! null-controllability maps on top of the solvers.

pub mod control;
pub mod error;
pub mod io;
pub mod linalg;
pub mod material;
pub mod signal;
pub mod solver;
pub mod spatial;
pub mod transform;

pub use error::{EvoqError, Result};
pub use linalg::{CMatrix, CVector};
pub use material::{CoercivityCertificate, MaterialLaw};
pub use signal::{
    nu_product, restrict, support_leakage, time_reverse, weight_flip, SupportWindow, TimeGrid,
    WeightedSignal, C64,
};
pub use solver::{Direction, EvoProblem, EvoSystem, SolutionOperator, SolveReport};
pub use spatial::{BlockSystem, SpatialOperator};

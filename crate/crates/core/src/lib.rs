//! Numerical periodic homogenization for parabolic operators
//! `∂_t − div(A(x/ε, t/ε²)∇)`.
//!
//! The pipeline runs bottom-up: [`grid`] supplies the discrete calculus on the
//! space-time torus, [`cell`] solves for the correctors and the homogenized
//! tensor, [`dual`] builds the flux correctors, [`kernels`] computes
//! fundamental solutions, [`expansion`] assembles the two-scale expansion and
//! [`harness`] turns everything into measured convergence rates. [`oracle`]
//! holds brute-force references that share no solver code with the rest.

pub mod cell;
pub mod coefficients;
pub mod dual;
pub mod error;
pub mod expansion;
pub mod fft;
pub mod grid;
pub mod harness;
pub mod interp;
pub mod io;
pub mod kernels;
pub mod linalg;
pub mod oracle;

pub use cell::{solve_corrector, CellSolveOptions, CorrectorSet, FluxMatrix, HomogenizedTensor};
pub use coefficients::{CoefTensor, CoefficientFamily, CoefficientField, RegularityReport};
pub use dual::{flux_identity_residual, solve_dual_correctors, DualCorrectorSet};
pub use error::{HomogError, Result};
pub use grid::{AxisSet, GridFunction, GridOps, Scheme, SpaceTimeTorusGrid};

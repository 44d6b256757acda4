//! Training of radial-basis-function networks by spectral optimization.
//!
//! A network `y(x)` is scored through a Schrödinger-like operator whose
//! potential is the mutual information between inputs and targets under
//! Gaussian marginals. Expanding the state function over a Gaussian basis
//! turns the score into a generalized symmetric eigenproblem `H c = E S c`
//! with closed-form matrix elements; the ground-state eigenvalue is the
//! quantity a niched, Gray-coded genetic algorithm minimizes.
//!
//! Module layout mirrors the pipeline:
//!
//! * [`data`] — CSV ingestion, min/max normalization, moments, splits
//! * [`network`] — RBF evaluation, residual scale, potential constants
//! * [`matrix`] — closed-form overlap/Hamiltonian elements, force field
//! * [`eigen`] — generalized symmetric eigensolver (Cholesky + Jacobi)
//! * [`oracle`] — quadrature cross-checks for every closed form
//! * [`ga`] — steady-state GA with fitness sharing and island exchange
//! * [`metrics`] — post-solution observables and information diagnostics

// Index loops mirror the matrix subscripts of the formulas; iterator
// rewrites obscure them.
#![allow(clippy::needless_range_loop)]

pub mod data;
pub mod eigen;
pub mod ga;
pub mod linalg;
pub mod matrix;
pub mod metrics;
pub mod network;
pub mod oracle;

pub use data::{DatasetStats, NormParams, RawDataset};
pub use eigen::Spectrum;
pub use ga::{Genotype, IslandConfig, ParamRanges, Solution};
pub use linalg::Matrix;
pub use matrix::{Assembly, EnergyBreakdown, MatrixPair, StateBasis};
pub use metrics::InfoReport;
pub use network::{NetworkParams, PotentialConstants};

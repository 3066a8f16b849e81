//! Numerical laboratory for weighted resolvent bounds of `-h^2 Δ + V` with
//! repulsive radial potentials, and weighted energy decay for the associated
//! wave equation.

pub mod cli;
pub mod energymethod;
pub mod model;
mod quad;
pub mod sector;
pub mod specfun;
pub mod tridiag;
pub mod verifier;
pub mod wave;

pub use model::{make_grid, PotentialSpec, RadialGrid, WeightForm, WeightSpec};
pub use sector::{build_sector, eigendecompose, SectorOperator, SpectralData};
pub use tridiag::{SolveError, SymTridiag};

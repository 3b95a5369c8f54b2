pub mod diff;
pub mod field;
pub mod grid;
pub mod interp;
pub mod linear;
pub mod quad;
pub mod snapshot;

pub use diff::{apply_diff, DiffOp};
pub use field::ScalarField2D;
pub use grid::{DomainTag, Grid1D, Grid2D, Spacing};
pub use linear::{solve_linear, LinearSolution, LinearSystem};
pub use quad::{trapz, trapz_cumulative, weighted_norm, From, WeightedNorm};

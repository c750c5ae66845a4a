//! Complex geometrical optics solutions `e^{∓τx₁}(a + r̃)`.

mod ansatz;
mod potential;
mod solve;

pub use ansatz::{circle_grid, plateau, AngularProfile, CgoAnsatz, CgoDomain};
pub use potential::{split_potential, Potential};
pub use solve::{
    build_cgo, build_free_cgo, contraction_estimate, masked_h1_norm, masked_lp_norm, neumann_solve, residual,
    CgoDiagnostics, CgoSolution, NeumannOptions, NeumannResult, SymmetrizedOperator,
};

//! Dirichlet problems for `−Δ + q` on boxes, weak DN maps and the integral identity.

mod dirichlet;
mod dn;
mod grid;

pub use dirichlet::{DirichletSolution, DirichletSystem};
pub use dn::{dn_map, integral_identity_residual, BoundaryBasis, DNMapMatrix, IdentityCheck};
pub use grid::{BoxGrid, DstPoisson};

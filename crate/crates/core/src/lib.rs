//! Numerical laboratory for Carleman inverses, complex geometrical optics
//! solutions, Dirichlet-to-Neumann maps and attenuated geodesic ray transforms
//! on product cylinders `I × M₀`.

pub mod carleman;
pub mod cgo;
pub mod error;
pub mod forward;
pub mod geometry;
pub mod io;
pub mod pipeline;
pub mod quad;
pub mod xray;

pub use error::{Error, Result};

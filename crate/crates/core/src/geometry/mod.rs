//! Base manifolds, product cylinders, geodesic fans and warped-product coordinates.

mod cylinder;
mod fan;
mod manifold;
mod torus;
mod warp;

pub use cylinder::ProductCylinder;
pub use fan::{polar_normal_coords, FanCoordinates, FanRay, Region};
pub use manifold::{ConformalMetric, GeoState, GeodesicPath, SimpleManifold2D};
pub use torus::{build_flat_torus_basis, EigenBasis};
pub use warp::{warp_to_product, WarpMap};

use crate::error::Result;

/// Geodesic from `(x, ξ)` sampled with step `h` until it leaves the manifold.
pub fn integrate_geodesic(
    man: &SimpleManifold2D,
    x: [f64; 2],
    xi: [f64; 2],
    h: f64,
) -> Result<(GeodesicPath, f64)> {
    let p = man.integrate_geodesic(x, xi, h)?;
    let t = p.exit_time;
    Ok((p, t))
}

//! Attenuated geodesic ray transform on simple disks, its adjoint, and the
//! normal operator.

mod boundary;
mod normal;
mod pixel;
mod transform;

pub use boundary::{tangential_taper, BoundaryDirectionGrid, BoundarySample, TANGENTIAL_MARGIN};
pub use normal::{
    check_lambda, condition_sweep, invert_normal, kernel_k_lambda, kernel_matrix, normal_operator, smoothing_order_fit,
    Inversion, NormalOperatorMatrix, RayOperator, LAMBDA_THRESHOLD,
};
pub use pixel::{DiscreteRayTransform, PixelGrid};
pub use transform::{
    adjoint_fn, normal_apply_fn, phase_space_integral, ray_quadrature, ray_transform_fn, santalo_integral, trace_back,
    RayTransformData,
};

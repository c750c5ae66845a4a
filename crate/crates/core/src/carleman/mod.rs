//! Conjugated Laplacian, the multiplier `m_τ`, the Carleman inverse `G_τ`
//! and numerical checks of its bounds.

mod clusters;
mod convolve;
mod field;
mod multiplier;
mod operator;
mod verify;

pub use clusters::{spectral_clusters, SpectralCluster};
pub use convolve::ExpKernel;
pub use field::SpectralField;
pub use multiplier::{m_tau, m_tau_quadrature, m_tau_real, multiplier_bound};
pub use operator::{apply_g_tau, conjugated_laplacian, convolve_mode, CarlemanParams, Cutoff};
pub use verify::{
    series_bound_constant, verify_carleman_sweep, verify_cluster_estimates, EstimateReport, EstimateRow,
    SweepOptions,
};

use num_complex::Complex64;

use crate::geometry::EigenBasis;

/// Modes with `k ≤ √λ_j < k+1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpectralCluster {
    pub k: usize,
    pub indices: Vec<usize>,
}

impl SpectralCluster {
    /// Zero every coefficient outside the cluster.
    pub fn project(&self, coeffs: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::default(); coeffs.len()];
        for &j in &self.indices {
            out[j] = coeffs[j];
        }
        out
    }
}

/// Partition of the retained modes into clusters `k = 0..=max_cluster`.
pub fn spectral_clusters(basis: &EigenBasis) -> Vec<SpectralCluster> {
    let top = basis
        .eigenvalues()
        .iter()
        .map(|l| l.sqrt().floor() as usize)
        .max()
        .unwrap_or(0);
    let mut out: Vec<SpectralCluster> = (0..=top)
        .map(|k| SpectralCluster {
            k,
            indices: Vec::new(),
        })
        .collect();
    for (j, l) in basis.eigenvalues().iter().enumerate() {
        out[l.sqrt().floor() as usize].indices.push(j);
    }
    out
}

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::geometry::SimpleManifold2D;
use crate::quad::gauss_legendre;

/// Directions with `|⟨ξ, ν⟩| < TANGENTIAL_MARGIN` are left out.
pub const TANGENTIAL_MARGIN: f64 = 0.05;

/// One inward boundary direction `(x, ξ) ∈ ∂₊SM₀`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundarySample {
    pub alpha: f64,
    pub beta: f64,
    pub x: [f64; 2],
    pub v: [f64; 2],
    /// Quadrature weight of `d(∂SM₀)` (arc length × angle), without `μ`.
    pub weight: f64,
    /// `μ = −⟨ξ, ν_out⟩ = cos β`.
    pub mu: f64,
    pub exit_time: f64,
}

/// Samples of `∂₊SM₀`: uniform in the boundary angle α, Gauss–Legendre in
/// the angle β from the inward normal.
#[derive(Debug, Clone)]
pub struct BoundaryDirectionGrid {
    pub n_alpha: usize,
    pub n_beta: usize,
    pub beta_max: f64,
    pub samples: Vec<BoundarySample>,
}

impl BoundaryDirectionGrid {
    pub fn new(man: &SimpleManifold2D, n_alpha: usize, n_beta: usize) -> Result<Self> {
        if n_alpha < 4 || n_beta < 2 {
            return Err(invalid("boundary grid too coarse"));
        }
        let beta_max = TANGENTIAL_MARGIN.acos();
        let (nodes, wts) = gauss_legendre(n_beta);
        let da = 2.0 * PI / n_alpha as f64;
        let samples = (0..n_alpha * n_beta)
            .into_par_iter()
            .map(|idx| {
                let (ia, ib) = (idx / n_beta, idx % n_beta);
                let alpha = ia as f64 * da;
                let beta = beta_max * nodes[ib];
                let (_, _, arc) = man.boundary_point(alpha);
                let (x, v) = man.inward_velocity(alpha, beta);
                let s = man.start(x, [v[0], v[1]]);
                let (exit_time, _) = man.exit(&s)?;
                Ok(BoundarySample {
                    alpha,
                    beta,
                    x,
                    v: s.v,
                    weight: arc * da * beta_max * wts[ib],
                    mu: beta.cos(),
                    exit_time,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            n_alpha,
            n_beta,
            beta_max,
            samples,
        })
    }

    /// Straight rays from an exterior centre `ω` in the directions `θ_j`
    /// (flat metric only). Returns the grid with unit weights and the
    /// distance from `ω` to each entry point; rays missing the disk get a
    /// zero exit time.
    pub fn fan(man: &SimpleManifold2D, omega: [f64; 2], thetas: &[f64]) -> Result<(Self, Vec<f64>)> {
        if !man.is_flat() {
            return Err(invalid("fan rays from an exterior centre need a flat metric"));
        }
        let r = man.radius();
        if omega[0].hypot(omega[1]) <= r {
            return Err(invalid("fan centre must lie outside the disk"));
        }
        let mut samples = Vec::with_capacity(thetas.len());
        let mut offsets = Vec::with_capacity(thetas.len());
        for &th in thetas {
            let v = [th.cos(), th.sin()];
            // |ω + s v|² = r²
            let b = omega[0] * v[0] + omega[1] * v[1];
            let c = omega[0] * omega[0] + omega[1] * omega[1] - r * r;
            let disc = b * b - c;
            let (s_in, chord) = if disc > 0.0 && -b > 0.0 {
                (-b - disc.sqrt(), 2.0 * disc.sqrt())
            } else {
                (0.0, 0.0)
            };
            let x = [omega[0] + s_in * v[0], omega[1] + s_in * v[1]];
            let (alpha, beta) = man.boundary_angles(x, v);
            samples.push(BoundarySample {
                alpha,
                beta,
                x,
                v,
                weight: 1.0,
                mu: 1.0,
                exit_time: chord,
            });
            offsets.push(s_in);
        }
        Ok((
            Self {
                n_alpha: 1,
                n_beta: thetas.len(),
                beta_max: PI / 2.0,
                samples,
            },
            offsets,
        ))
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }
    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// `⟨a, b⟩_{L²_μ(∂₊SM₀)}`.
    pub fn inner_mu(&self, a: &[f64], b: &[f64]) -> f64 {
        self.samples.iter().zip(a.iter().zip(b)).map(|(s, (x, y))| s.weight * s.mu * x * y).sum()
    }
}

/// Smooth taper on `β`, `1` at the normal and vanishing at the tangential margin.
pub fn tangential_taper(beta: f64) -> f64 {
    let s = beta / TANGENTIAL_MARGIN.acos();
    if s.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - s * s)).exp()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mu_is_nonnegative_and_exit_times_are_chords() {
        let man = SimpleManifold2D::euclidean_disk(1.0);
        let g = BoundaryDirectionGrid::new(&man, 16, 12).unwrap();
        for s in &g.samples {
            assert!(s.mu >= TANGENTIAL_MARGIN - 1e-12);
            assert!((s.exit_time - 2.0 * s.beta.cos()).abs() < 1e-12);
        }
    }

    #[test]
    fn fan_rays_enter_the_disk() {
        let man = SimpleManifold2D::euclidean_disk(0.5);
        let (g, off) = BoundaryDirectionGrid::fan(&man, [-1.0, 0.0], &[0.0, 0.3, PI]).unwrap();
        assert!((off[0] - 0.5).abs() < 1e-14 && (g.samples[0].exit_time - 1.0).abs() < 1e-14);
        assert!(g.samples[1].exit_time > 0.0 && g.samples[1].exit_time < 1.0);
        assert_eq!(g.samples[2].exit_time, 0.0);
        assert!(BoundaryDirectionGrid::fan(&man, [0.1, 0.0], &[0.0]).is_err());
    }
}

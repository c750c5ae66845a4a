use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::geometry::ProductCylinder;

/// Complex potential sampled on the tensor grid `x₁-grid × base grid`,
/// `values[i * G + k]`. Zero outside its support.
#[derive(Debug, Clone)]
pub struct Potential {
    cyl: Arc<ProductCylinder>,
    values: Vec<Complex64>,
}

impl Potential {
    pub fn zero(cyl: Arc<ProductCylinder>) -> Self {
        let n = cyl.n1() * cyl.base().grid_len();
        Self {
            cyl,
            values: vec![Complex64::default(); n],
        }
    }

    pub fn from_fn<F>(cyl: Arc<ProductCylinder>, f: F) -> Self
    where
        F: Fn(f64, &[f64]) -> Complex64 + Sync,
    {
        let g = cyl.base().grid_len();
        let pts: Vec<Vec<f64>> = (0..g).map(|k| cyl.base().grid_point(k)).collect();
        let values = (0..cyl.n1())
            .into_par_iter()
            .flat_map_iter(|i| {
                let x1 = cyl.x1(i);
                pts.iter().map(move |p| (x1, p)).collect::<Vec<_>>()
            })
            .map(|(x1, p)| f(x1, p))
            .collect();
        Self { cyl, values }
    }

    pub fn from_values(cyl: Arc<ProductCylinder>, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != cyl.n1() * cyl.base().grid_len() {
            return Err(Error::Shape("potential sample count does not match the grid".into()));
        }
        Ok(Self { cyl, values })
    }

    pub fn cylinder(&self) -> &ProductCylinder {
        &self.cyl
    }
    pub fn cylinder_arc(&self) -> Arc<ProductCylinder> {
        self.cyl.clone()
    }
    pub fn values(&self) -> &[Complex64] {
        &self.values
    }
    pub fn at(&self, i: usize, k: usize) -> Complex64 {
        self.values[i * self.cyl.base().grid_len() + k]
    }
    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| *v == Complex64::default())
    }
    pub fn is_real(&self) -> bool {
        self.values.iter().all(|v| v.im == 0.0)
    }

    pub fn scaled(&self, a: Complex64) -> Self {
        Self {
            cyl: self.cyl.clone(),
            values: self.values.iter().map(|v| v * a).collect(),
        }
    }

    pub fn conj(&self) -> Self {
        Self {
            cyl: self.cyl.clone(),
            values: self.values.iter().map(|v| v.conj()).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        if self.values.len() != other.values.len() {
            return Err(Error::Shape("potentials on different grids".into()));
        }
        Ok(Self {
            cyl: self.cyl.clone(),
            values: self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect(),
        })
    }

    fn weights(&self) -> (Vec<f64>, f64) {
        (self.cyl.x1_weights(), self.cyl.base().cell_weight())
    }

    /// Grid L^p norm.
    pub fn lp_norm(&self, p: f64) -> f64 {
        let (w1, cw) = self.weights();
        let g = self.cyl.base().grid_len();
        if p.is_infinite() {
            return self.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
        }
        self.values
            .iter()
            .enumerate()
            .map(|(idx, v)| w1[idx / g] * cw * v.norm().powf(p))
            .sum::<f64>()
            .powf(1.0 / p)
    }

    /// `‖q‖_{L^{n/2}}` with `n` the cylinder dimension.
    pub fn critical_norm(&self) -> f64 {
        self.lp_norm(self.cyl.dim() as f64 / 2.0)
    }

    /// `|q|^{1/2}`.
    pub fn sqrt_abs(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm().sqrt()).collect()
    }

    /// `m = |q|^{1/2} e^{iα}` so that `q = |q|^{1/2} m`.
    pub fn phase_factor(&self) -> Vec<Complex64> {
        self.values
            .iter()
            .map(|v| {
                let a = v.norm();
                if a == 0.0 {
                    Complex64::default()
                } else {
                    v / a.sqrt()
                }
            })
            .collect()
    }

    /// `∫ q u v` with `u`, `v` given on the tensor grid.
    pub fn integrate_product(&self, u: &[Complex64], v: &[Complex64]) -> Complex64 {
        let (w1, cw) = self.weights();
        let g = self.cyl.base().grid_len();
        self.values
            .iter()
            .zip(u.iter().zip(v))
            .enumerate()
            .map(|(idx, (q, (a, b)))| q * a * b * (w1[idx / g] * cw))
            .sum()
    }
}

/// Split `q = q♯ + q♭` with `q♯ = q·1_{|q| ≤ μ}` and `μ` the smallest sample
/// magnitude for which `‖q♭‖_{L^{n/2}} ≤ ε`. Returns `(q♯, q♭, μ)`.
pub fn split_potential(q: &Potential, eps: f64) -> Result<(Potential, Potential, f64)> {
    if !(eps > 0.0) {
        return Err(invalid("split threshold must be positive"));
    }
    let p = q.cyl.dim() as f64 / 2.0;
    let (w1, cw) = q.weights();
    let g = q.cyl.base().grid_len();
    let mut mags: Vec<(f64, f64)> = q
        .values
        .iter()
        .enumerate()
        .map(|(idx, v)| (v.norm(), w1[idx / g] * cw))
        .collect();
    mags.sort_by(|a, b| a.0.total_cmp(&b.0));
    // tail[k] = Σ_{i ≥ k} w |q|^p over sorted samples
    let mut tail = vec![0.0; mags.len() + 1];
    for k in (0..mags.len()).rev() {
        tail[k] = tail[k + 1] + mags[k].1 * mags[k].0.powf(p);
    }
    let target = eps.powf(p);
    let max = mags.last().map(|m| m.0).unwrap_or(0.0);
    if tail[0] <= target {
        return Ok((q.clone(), Potential::zero(q.cyl.clone()), max));
    }
    // smallest μ = mags[k] with Σ_{|q| > μ} ≤ target, found by bisection on the sorted values
    let (mut lo, mut hi) = (0usize, mags.len() - 1);
    let tail_above = |k: usize| {
        let mu = mags[k].0;
        let first = mags.partition_point(|m| m.0 <= mu);
        tail[first]
    };
    while lo < hi {
        let mid = (lo + hi) / 2;
        if tail_above(mid) <= target {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    let mu = mags[lo].0;
    let sharp = q.values.iter().map(|v| if v.norm() <= mu { *v } else { Complex64::default() }).collect();
    let flat = q.values.iter().map(|v| if v.norm() > mu { *v } else { Complex64::default() }).collect();
    Ok((
        Potential {
            cyl: q.cyl.clone(),
            values: sharp,
        },
        Potential {
            cyl: q.cyl.clone(),
            values: flat,
        },
        mu,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_flat_torus_basis;

    fn cyl() -> Arc<ProductCylinder> {
        let b = Arc::new(build_flat_torus_basis(&[1.0, 1.0], 20).unwrap());
        Arc::new(ProductCylinder::new((0.0, 1.0), b, 11).unwrap())
    }

    #[test]
    fn factorisation() {
        let q = Potential::from_fn(cyl(), |x1, x| Complex64::new(x1 - 0.5, x[0] * x[1] - 0.1));
        let s = q.sqrt_abs();
        let m = q.phase_factor();
        for (k, v) in q.values().iter().enumerate() {
            assert!((s[k] * m[k] - v).norm() < 1e-14);
            assert!((m[k].norm() - s[k]).abs() < 1e-14);
        }
    }

    #[test]
    fn split_bounded_and_spike() {
        let c = cyl();
        let q = Potential::from_fn(c.clone(), |_, _| Complex64::new(1.0, 0.0));
        let (s, f, _) = split_potential(&q, 10.0).unwrap();
        assert!(f.is_zero());
        assert_eq!(s.values(), q.values());

        let g = c.base().grid_len();
        let mut vals = vec![Complex64::new(0.5, 0.0); c.n1() * g];
        vals[5 * g + 17] = Complex64::new(1e4, 0.0);
        let q = Potential::from_values(c.clone(), vals).unwrap();
        let mut spike = Potential::zero(c.clone()).values().to_vec();
        spike[5 * g + 17] = Complex64::new(1e4, 0.0);
        let spike = Potential::from_values(c.clone(), spike).unwrap().critical_norm();
        // ε between ‖spike‖ and ‖q‖: trimming the spike alone is the smallest admissible cut
        let eps = spike * 1.0001;
        assert!(eps < q.critical_norm());
        let (s, f, mu) = split_potential(&q, eps).unwrap();
        assert!(f.critical_norm() <= eps);
        assert_eq!(mu, 0.5);
        assert_eq!(f.values().iter().filter(|v| v.norm() > 0.0).count(), 1);
        assert_eq!(f.at(5, 17).re, 1e4);
        assert!(s.critical_norm() <= q.critical_norm());
        assert!(split_potential(&q, 0.0).is_err());
        // tiny ε forces the cut above the spike
        let (_, f, _) = split_potential(&q, 1e-3).unwrap();
        assert!(f.is_zero());
    }
}

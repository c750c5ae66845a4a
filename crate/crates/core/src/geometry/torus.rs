//! Explicit Laplace eigenbasis of a flat torus `R^d / (L_1 Z × … × L_d Z)`.
//!
//! Modes are the complex exponentials `ψ_k(x) = exp(2πi k·x / L) / sqrt(vol)`
//! indexed by integer frequency vectors `k`, with eigenvalue
//! `Σ (2π k_i / L_i)^2`. Synthesis and analysis on the uniform base grid go
//! through the FFT, so both are exact for the retained modes.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{invalid, Result};

/// Ordered eigenpairs of `-Δ` on a flat torus, sampled on a uniform grid.
#[derive(Clone)]
pub struct EigenBasis {
    sides: Vec<f64>,
    origin: Vec<f64>,
    grid: Vec<usize>,
    modes: Vec<Vec<i64>>,
    eigenvalues: Vec<f64>,
    max_cluster: usize,
    bins: Vec<usize>,
    fwd: Vec<Arc<dyn Fft<f64>>>,
    inv: Vec<Arc<dyn Fft<f64>>>,
}

impl std::fmt::Debug for EigenBasis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EigenBasis")
            .field("sides", &self.sides)
            .field("grid", &self.grid)
            .field("modes", &self.modes.len())
            .field("max_cluster", &self.max_cluster)
            .finish()
    }
}

/// All modes of the flat torus with `sqrt(λ) < max_cluster + 1`, on a default grid.
pub fn build_flat_torus_basis(side_lengths: &[f64], max_cluster: usize) -> Result<EigenBasis> {
    EigenBasis::flat_torus(side_lengths, max_cluster, None)
}

impl EigenBasis {
    /// Flat-torus basis. `grid` overrides the number of base grid points per
    /// axis; it must exceed twice the largest retained frequency on that axis.
    pub fn flat_torus(
        side_lengths: &[f64],
        max_cluster: usize,
        grid: Option<&[usize]>,
    ) -> Result<Self> {
        if side_lengths.is_empty() {
            return Err(invalid("torus needs at least one side"));
        }
        if side_lengths.iter().any(|&l| !(l > 0.0) || !l.is_finite()) {
            return Err(invalid("torus side lengths must be positive"));
        }
        if max_cluster < 1 {
            return Err(invalid("max_cluster must be >= 1"));
        }
        let d = side_lengths.len();
        let radius = (max_cluster + 1) as f64;
        let kmax: Vec<i64> = side_lengths
            .iter()
            .map(|&l| (radius * l / (2.0 * PI)).floor() as i64)
            .collect();

        let mut found: Vec<(f64, Vec<i64>)> = Vec::new();
        let mut k = kmax.iter().map(|&m| -m).collect::<Vec<_>>();
        loop {
            let lam: f64 = k
                .iter()
                .zip(side_lengths)
                .map(|(&ki, &l)| (2.0 * PI * ki as f64 / l).powi(2))
                .sum();
            if lam.sqrt() < radius {
                found.push((lam, k.clone()));
            }
            // odometer
            let mut axis = d;
            loop {
                if axis == 0 {
                    break;
                }
                axis -= 1;
                if k[axis] < kmax[axis] {
                    k[axis] += 1;
                    for a in axis + 1..d {
                        k[a] = -kmax[a];
                    }
                    break;
                } else if axis == 0 {
                    axis = usize::MAX;
                    break;
                }
            }
            if axis == usize::MAX {
                break;
            }
        }
        found.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));

        let grid: Vec<usize> = match grid {
            Some(g) => {
                if g.len() != d {
                    return Err(invalid("grid dimension mismatch"));
                }
                for (a, (&n, &m)) in g.iter().zip(&kmax).enumerate() {
                    if (n as i64) < 2 * m + 1 {
                        return Err(invalid(format!(
                            "grid axis {a} has {n} points, needs at least {}",
                            2 * m + 1
                        )));
                    }
                }
                g.to_vec()
            }
            None => kmax
                .iter()
                .map(|&m| ((4 * m.max(2)) as usize).next_power_of_two())
                .collect(),
        };

        let mut planner = FftPlanner::new();
        let fwd = grid.iter().map(|&n| planner.plan_fft_forward(n)).collect();
        let inv = grid.iter().map(|&n| planner.plan_fft_inverse(n)).collect();

        let modes: Vec<Vec<i64>> = found.iter().map(|f| f.1.clone()).collect();
        let eigenvalues = found.iter().map(|f| f.0).collect();
        let mut basis = EigenBasis {
            sides: side_lengths.to_vec(),
            origin: vec![0.0; d],
            grid,
            modes,
            eigenvalues,
            max_cluster,
            bins: Vec::new(),
            fwd,
            inv,
        };
        basis.bins = basis.modes.iter().map(|k| basis.bin_of(k)).collect();
        Ok(basis)
    }

    /// Shift the fundamental domain to `[origin, origin + L)`.
    pub fn with_origin(mut self, origin: &[f64]) -> Result<Self> {
        if origin.len() != self.dim() {
            return Err(invalid("origin dimension mismatch"));
        }
        self.origin = origin.to_vec();
        Ok(self)
    }

    fn bin_of(&self, k: &[i64]) -> usize {
        let mut idx = 0usize;
        for (a, &ki) in k.iter().enumerate() {
            let n = self.grid[a] as i64;
            idx = idx * self.grid[a] + ki.rem_euclid(n) as usize;
        }
        idx
    }

    pub fn dim(&self) -> usize {
        self.sides.len()
    }
    pub fn len(&self) -> usize {
        self.modes.len()
    }
    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }
    pub fn sides(&self) -> &[f64] {
        &self.sides
    }
    pub fn origin(&self) -> &[f64] {
        &self.origin
    }
    pub fn grid_dims(&self) -> &[usize] {
        &self.grid
    }
    pub fn max_cluster(&self) -> usize {
        self.max_cluster
    }
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }
    pub fn eigenvalue(&self, j: usize) -> f64 {
        self.eigenvalues[j]
    }
    pub fn mode(&self, j: usize) -> &[i64] {
        &self.modes[j]
    }
    pub fn volume(&self) -> f64 {
        self.sides.iter().product()
    }
    pub fn grid_len(&self) -> usize {
        self.grid.iter().product()
    }
    /// Quadrature weight of a single base grid node.
    pub fn cell_weight(&self) -> f64 {
        self.volume() / self.grid_len() as f64
    }

    /// Coordinates of base grid node `idx` (row-major, last axis fastest).
    pub fn grid_point(&self, mut idx: usize) -> Vec<f64> {
        let d = self.dim();
        let mut x = vec![0.0; d];
        for a in (0..d).rev() {
            let n = self.grid[a];
            let i = idx % n;
            idx /= n;
            x[a] = self.origin[a] + i as f64 * self.sides[a] / n as f64;
        }
        x
    }

    /// Index of mode with frequency vector `k`, if retained.
    pub fn index_of(&self, k: &[i64]) -> Option<usize> {
        self.modes.iter().position(|m| m.as_slice() == k)
    }

    /// Point evaluation of `ψ_j`.
    pub fn eval(&self, j: usize, x: &[f64]) -> Complex64 {
        let phase: f64 = self.modes[j]
            .iter()
            .zip(&self.sides)
            .zip(x)
            .map(|((&k, &l), &xi)| 2.0 * PI * k as f64 * xi / l)
            .sum();
        Complex64::from_polar(1.0 / self.volume().sqrt(), phase)
    }

    /// `ψ_j` sampled on the base grid.
    pub fn sample(&self, j: usize) -> Vec<Complex64> {
        (0..self.grid_len())
            .map(|i| self.eval(j, &self.grid_point(i)))
            .collect()
    }

    fn origin_phase(&self, j: usize) -> Complex64 {
        let phase: f64 = self.modes[j]
            .iter()
            .zip(&self.sides)
            .zip(&self.origin)
            .map(|((&k, &l), &o)| 2.0 * PI * k as f64 * o / l)
            .sum();
        Complex64::from_polar(1.0, phase)
    }

    fn fft_nd(&self, data: &mut [Complex64], inverse: bool) {
        let plans = if inverse { &self.inv } else { &self.fwd };
        let d = self.dim();
        let total = data.len();
        let mut scratch = Vec::new();
        for a in 0..d {
            let n = self.grid[a];
            let stride: usize = self.grid[a + 1..].iter().product();
            if stride == 1 {
                plans[a].process(data);
                continue;
            }
            scratch.resize(n, Complex64::default());
            let block = n * stride;
            for base in (0..total).step_by(block) {
                for s in 0..stride {
                    for i in 0..n {
                        scratch[i] = data[base + s + i * stride];
                    }
                    plans[a].process(&mut scratch);
                    for i in 0..n {
                        data[base + s + i * stride] = scratch[i];
                    }
                }
            }
        }
    }

    /// Values on the base grid of `Σ_j coeffs[j] ψ_j`.
    pub fn synthesize(&self, coeffs: &[Complex64]) -> Vec<Complex64> {
        let mut buf = vec![Complex64::default(); self.grid_len()];
        self.synthesize_into(coeffs, &mut buf);
        buf
    }

    pub fn synthesize_into(&self, coeffs: &[Complex64], out: &mut [Complex64]) {
        assert_eq!(coeffs.len(), self.len());
        assert_eq!(out.len(), self.grid_len());
        out.iter_mut().for_each(|v| *v = Complex64::default());
        let norm = 1.0 / self.volume().sqrt();
        for (j, &c) in coeffs.iter().enumerate() {
            out[self.bins[j]] = c * self.origin_phase(j) * norm;
        }
        self.fft_nd(out, true);
    }

    /// Fourier coefficients `∫ u conj(ψ_j)` from base grid samples.
    pub fn analyze(&self, values: &[Complex64]) -> Vec<Complex64> {
        let mut buf = values.to_vec();
        let mut out = vec![Complex64::default(); self.len()];
        self.analyze_in_place(&mut buf, &mut out);
        out
    }

    /// Like [`analyze`](Self::analyze) but clobbers `values`.
    pub fn analyze_in_place(&self, values: &mut [Complex64], out: &mut [Complex64]) {
        assert_eq!(values.len(), self.grid_len());
        self.fft_nd(values, false);
        let scale = self.cell_weight() / self.volume().sqrt();
        for j in 0..self.len() {
            out[j] = values[self.bins[j]] * self.origin_phase(j).conj() * scale;
        }
    }

    /// Grid quadrature inner product `Σ u conj(v) w`.
    pub fn inner(&self, u: &[Complex64], v: &[Complex64]) -> Complex64 {
        let w = self.cell_weight();
        u.iter().zip(v).map(|(a, b)| a * b.conj()).sum::<Complex64>() * w
    }

    /// Max deviation of the Gram matrix of all retained modes from the identity.
    pub fn orthonormality_defect(&self) -> f64 {
        let samples: Vec<Vec<Complex64>> = (0..self.len()).map(|j| self.sample(j)).collect();
        let mut worst: f64 = 0.0;
        for i in 0..self.len() {
            for j in i..self.len() {
                let g = self.inner(&samples[i], &samples[j]);
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g - target).norm());
            }
        }
        worst
    }

    /// Apply `-Δ` to grid samples by spectral differentiation of the grid data.
    pub fn neg_laplacian_grid(&self, values: &[Complex64]) -> Vec<Complex64> {
        let mut buf = values.to_vec();
        self.fft_nd(&mut buf, false);
        let d = self.dim();
        let total = self.grid_len();
        for (idx, v) in buf.iter_mut().enumerate() {
            let mut rem = idx;
            let mut sym = 0.0;
            for a in (0..d).rev() {
                let n = self.grid[a];
                let i = rem % n;
                rem /= n;
                let f = if 2 * i < n { i as f64 } else if 2 * i == n { 0.0 } else { i as f64 - n as f64 };
                sym += (2.0 * PI * f / self.sides[a]).powi(2);
            }
            *v *= sym;
        }
        self.fft_nd(&mut buf, true);
        let inv_n = 1.0 / total as f64;
        buf.iter_mut().for_each(|v| *v *= inv_n);
        buf
    }

    /// Max over modes of `‖(-Δ)ψ_j - λ_j ψ_j‖_{L²}`.
    pub fn eigenrelation_residual(&self) -> f64 {
        (0..self.len())
            .map(|j| {
                let s = self.sample(j);
                let l = self.neg_laplacian_grid(&s);
                let r: Vec<Complex64> = l
                    .iter()
                    .zip(&s)
                    .map(|(a, b)| a - b * self.eigenvalues[j])
                    .collect();
                self.inner(&r, &r).re.sqrt()
            })
            .fold(0.0, f64::max)
    }

    /// Distance from `t` to the retained spectrum.
    pub fn spectral_distance(&self, t: f64) -> f64 {
        self.eigenvalues
            .iter()
            .map(|&l| (l - t).abs())
            .fold(f64::INFINITY, f64::min)
    }
}

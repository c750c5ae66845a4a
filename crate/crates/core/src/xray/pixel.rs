use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::geometry::SimpleManifold2D;

use super::boundary::BoundaryDirectionGrid;
use super::transform::{ray_quadrature, RayTransformData};

/// Square pixel grid over `[−R, R]²`; unknowns live on the pixels whose
/// centres lie in the disk.
#[derive(Debug, Clone)]
pub struct PixelGrid {
    pub n: usize,
    pub radius: f64,
    /// Unknown index of each pixel, `None` outside the disk.
    slot: Vec<Option<u32>>,
    /// Pixel index of each unknown.
    pixels: Vec<usize>,
    /// `c(x_i) h²`.
    mass: Vec<f64>,
}

impl PixelGrid {
    pub fn new(man: &SimpleManifold2D, n: usize) -> Result<Self> {
        if n < 4 {
            return Err(invalid("pixel grid needs n >= 4"));
        }
        let radius = man.radius();
        let h = 2.0 * radius / n as f64;
        let mut slot = vec![None; n * n];
        let mut pixels = Vec::new();
        let mut mass = Vec::new();
        for p in 0..n * n {
            let x = Self::centre_of(radius, n, p);
            if x[0] * x[0] + x[1] * x[1] < radius * radius {
                slot[p] = Some(pixels.len() as u32);
                pixels.push(p);
                mass.push(man.area_density(x) * h * h);
            }
        }
        Ok(Self {
            n,
            radius,
            slot,
            pixels,
            mass,
        })
    }

    fn centre_of(radius: f64, n: usize, p: usize) -> [f64; 2] {
        let h = 2.0 * radius / n as f64;
        [-radius + ((p % n) as f64 + 0.5) * h, -radius + ((p / n) as f64 + 0.5) * h]
    }

    pub fn h(&self) -> f64 {
        2.0 * self.radius / self.n as f64
    }
    /// Number of unknowns.
    pub fn len(&self) -> usize {
        self.pixels.len()
    }
    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }
    pub fn centre(&self, k: usize) -> [f64; 2] {
        Self::centre_of(self.radius, self.n, self.pixels[k])
    }
    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn sample<F: Fn([f64; 2]) -> f64 + Sync>(&self, f: F) -> Vec<f64> {
        (0..self.len()).into_par_iter().map(|k| f(self.centre(k))).collect()
    }

    /// Unknowns scattered onto the full `n × n` image, zero outside the disk.
    pub fn to_image(&self, u: &[f64]) -> Vec<f64> {
        let mut img = vec![0.0; self.n * self.n];
        for (k, &p) in self.pixels.iter().enumerate() {
            img[p] = u[k];
        }
        img
    }

    /// `‖u‖_{L²(M₀)}` with the pixel masses.
    pub fn l2(&self, u: &[f64]) -> f64 {
        u.iter().zip(&self.mass).map(|(a, m)| m * a * a).sum::<f64>().sqrt()
    }

    /// Bilinear interpolation stencil at `x` over unknown indices.
    pub fn stencil(&self, x: [f64; 2]) -> [(Option<u32>, f64); 4] {
        let h = self.h();
        let u = (x[0] + self.radius) / h - 0.5;
        let v = (x[1] + self.radius) / h - 0.5;
        let (i0, j0) = (u.floor() as isize, v.floor() as isize);
        let (fx, fy) = (u - i0 as f64, v - j0 as f64);
        let n = self.n as isize;
        let at = |i: isize, j: isize| {
            if i < 0 || j < 0 || i >= n || j >= n {
                None
            } else {
                self.slot[(j * n + i) as usize]
            }
        };
        [
            (at(i0, j0), (1.0 - fx) * (1.0 - fy)),
            (at(i0 + 1, j0), fx * (1.0 - fy)),
            (at(i0, j0 + 1), (1.0 - fx) * fy),
            (at(i0 + 1, j0 + 1), fx * fy),
        ]
    }
}

/// Discrete `T_λ` as a sparse ray-by-pixel matrix (CSR), built by Simpson
/// quadrature along each geodesic and bilinear interpolation of the pixels.
#[derive(Debug, Clone)]
pub struct DiscreteRayTransform {
    pub lambda: f64,
    pub pixels: PixelGrid,
    pub rays: BoundaryDirectionGrid,
    offsets: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
}

impl DiscreteRayTransform {
    pub fn new(man: &SimpleManifold2D, pixels: PixelGrid, rays: BoundaryDirectionGrid, lambda: f64) -> Self {
        let step = 0.5 * pixels.h();
        let rows: Vec<Vec<(u32, f64)>> = rays
            .samples
            .par_iter()
            .map(|s| {
                let mut row: Vec<(u32, f64)> = Vec::new();
                ray_quadrature(man, man.start(s.x, s.v), s.exit_time, step, |st, t, w| {
                    let a = w * (-lambda * t).exp();
                    for (k, b) in pixels.stencil(st.x) {
                        if let Some(k) = k {
                            if b != 0.0 {
                                row.push((k, a * b));
                            }
                        }
                    }
                });
                row.sort_by_key(|e| e.0);
                let mut merged: Vec<(u32, f64)> = Vec::with_capacity(row.len() / 2);
                for (k, v) in row {
                    match merged.last_mut() {
                        Some(last) if last.0 == k => last.1 += v,
                        _ => merged.push((k, v)),
                    }
                }
                merged
            })
            .collect();
        let mut offsets = Vec::with_capacity(rows.len() + 1);
        offsets.push(0);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        for r in rows {
            for (k, v) in r {
                cols.push(k);
                vals.push(v);
            }
            offsets.push(cols.len());
        }
        Self {
            lambda,
            pixels,
            rays,
            offsets,
            cols,
            vals,
        }
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, r: usize) -> (&[u32], &[f64]) {
        let (a, b) = (self.offsets[r], self.offsets[r + 1]);
        (&self.cols[a..b], &self.vals[a..b])
    }

    pub fn apply(&self, f: &[f64]) -> RayTransformData {
        let values = (0..self.rays.len())
            .into_par_iter()
            .map(|r| {
                let (c, v) = self.row(r);
                c.iter().zip(v).map(|(&k, w)| w * f[k as usize]).sum()
            })
            .collect();
        RayTransformData {
            lambda: self.lambda,
            values,
        }
    }

    /// `Tᵀ W d` with `W = diag(weight · μ)`; unknown-space vector (no mass
    /// division). Accumulated sequentially so the result is deterministic.
    pub fn weighted_transpose(&self, d: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.pixels.len()];
        for (r, s) in self.rays.samples.iter().enumerate() {
            let a = s.weight * s.mu * d[r];
            if a == 0.0 {
                continue;
            }
            let (c, v) = self.row(r);
            for (&k, w) in c.iter().zip(v) {
                out[k as usize] += a * w;
            }
        }
        out
    }

    /// Discrete adjoint `D⁻¹TᵀW d` with `D` the pixel masses.
    pub fn adjoint(&self, d: &[f64]) -> Vec<f64> {
        let mut out = self.weighted_transpose(d);
        for (o, m) in out.iter_mut().zip(self.pixels.mass()) {
            *o /= m;
        }
        out
    }
}

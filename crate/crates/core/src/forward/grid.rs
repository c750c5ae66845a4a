use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{invalid, Result};

/// Uniform node grid on the box `[lo, hi] ⊂ ℝ³`, boundary nodes included.
/// Node `(i, j, k)` has flat index `(i * n[1] + j) * n[2] + k`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxGrid {
    pub lo: [f64; 3],
    pub hi: [f64; 3],
    pub n: [usize; 3],
}

impl BoxGrid {
    pub fn new(lo: [f64; 3], hi: [f64; 3], n: [usize; 3]) -> Result<Self> {
        if n.iter().any(|&m| m < 3) || (0..3).any(|d| !(hi[d] > lo[d])) {
            return Err(invalid("box grid needs at least 3 nodes per axis and hi > lo"));
        }
        Ok(Self { lo, hi, n })
    }

    pub fn len(&self) -> usize {
        self.n.iter().product()
    }
    pub fn is_empty(&self) -> bool {
        false
    }
    pub fn h(&self, d: usize) -> f64 {
        (self.hi[d] - self.lo[d]) / (self.n[d] - 1) as f64
    }
    pub fn cell_volume(&self) -> f64 {
        self.h(0) * self.h(1) * self.h(2)
    }
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.n[1] + j) * self.n[2] + k
    }
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let k = idx % self.n[2];
        let j = (idx / self.n[2]) % self.n[1];
        [idx / (self.n[1] * self.n[2]), j, k]
    }
    pub fn point(&self, idx: usize) -> [f64; 3] {
        let c = self.coords(idx);
        std::array::from_fn(|d| self.lo[d] + c[d] as f64 * self.h(d))
    }
    pub fn is_boundary(&self, idx: usize) -> bool {
        let c = self.coords(idx);
        (0..3).any(|d| c[d] == 0 || c[d] == self.n[d] - 1)
    }
    pub fn boundary_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.is_boundary(i)).collect()
    }

    fn axis_weight(&self, d: usize, c: usize) -> f64 {
        if c == 0 || c == self.n[d] - 1 {
            0.5 * self.h(d)
        } else {
            self.h(d)
        }
    }

    /// Trapezoid volume weight of a node.
    pub fn node_weight(&self, idx: usize) -> f64 {
        let c = self.coords(idx);
        (0..3).map(|d| self.axis_weight(d, c[d])).product()
    }

    /// Surface weight of a boundary node: sum over the faces containing it of
    /// the trapezoid weight within that face.
    pub fn surface_weight(&self, idx: usize) -> f64 {
        let c = self.coords(idx);
        let mut w = 0.0;
        for d in 0..3 {
            if c[d] == 0 || c[d] == self.n[d] - 1 {
                let (a, b) = ((d + 1) % 3, (d + 2) % 3);
                w += self.axis_weight(a, c[a]) * self.axis_weight(b, c[b]);
            }
        }
        w
    }

    /// Outward unit normal at a boundary node lying on exactly one face.
    pub fn face_normal(&self, idx: usize) -> Option<[f64; 3]> {
        let c = self.coords(idx);
        let mut nrm = [0.0; 3];
        let mut count = 0;
        for d in 0..3 {
            if c[d] == 0 {
                nrm[d] = -1.0;
                count += 1;
            } else if c[d] == self.n[d] - 1 {
                nrm[d] = 1.0;
                count += 1;
            }
        }
        (count == 1).then_some(nrm)
    }

    pub fn sample<F: Fn([f64; 3]) -> Complex64>(&self, f: F) -> Vec<Complex64> {
        (0..self.len()).map(|i| f(self.point(i))).collect()
    }

    /// Keep boundary values of a full-grid vector, zero in the interior.
    pub fn trace(&self, u: &[Complex64]) -> Vec<Complex64> {
        (0..self.len())
            .map(|i| if self.is_boundary(i) { u[i] } else { Complex64::default() })
            .collect()
    }

    /// Smallest eigenvalue of the discrete Dirichlet Laplacian.
    pub fn lowest_dirichlet_eigenvalue(&self) -> f64 {
        (0..3)
            .map(|d| {
                let s = (PI / (2.0 * (self.n[d] - 1) as f64)).sin();
                4.0 * s * s / (self.h(d) * self.h(d))
            })
            .sum()
    }
}

/// Fast solver for `(−Δ_h + c) z = r` on interior nodes with zero Dirichlet
/// data, by a DST-I in each direction.
pub struct DstPoisson {
    m: [usize; 3],
    eig: [Vec<f64>; 3],
    shift: f64,
    ffts: [Arc<dyn Fft<f64>>; 3],
}

impl std::fmt::Debug for DstPoisson {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DstPoisson").field("m", &self.m).field("shift", &self.shift).finish()
    }
}

impl DstPoisson {
    pub fn new(grid: &BoxGrid, shift: f64) -> Self {
        let m = [grid.n[0] - 2, grid.n[1] - 2, grid.n[2] - 2];
        let mut planner = FftPlanner::new();
        let eig = std::array::from_fn(|d| {
            let h = grid.h(d);
            (1..=m[d])
                .map(|k| {
                    let s = (PI * k as f64 / (2.0 * (m[d] + 1) as f64)).sin();
                    4.0 * s * s / (h * h)
                })
                .collect()
        });
        let ffts = std::array::from_fn(|d| planner.plan_fft_forward(2 * (m[d] + 1)));
        Self { m, eig, shift, ffts }
    }

    pub fn interior_len(&self) -> usize {
        self.m.iter().product()
    }

    // y_k = Σ_j x_j sin(π j k / (m+1)), j, k = 1..m, along axis d of an m[0]×m[1]×m[2] array
    fn dst_axis(&self, x: &mut [Complex64], d: usize) {
        let m = self.m;
        let len = m[d];
        let stride: usize = m[d + 1..].iter().product();
        let outer: usize = m[..d].iter().product();
        let fft = &self.ffts[d];
        let mut buf = vec![Complex64::default(); 2 * (len + 1)];
        let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
        for o in 0..outer {
            for s in 0..stride {
                let base = o * len * stride + s;
                buf.iter_mut().for_each(|b| *b = Complex64::default());
                for j in 0..len {
                    let v = x[base + j * stride];
                    buf[j + 1] = v;
                    buf[2 * (len + 1) - 1 - j] = -v;
                }
                fft.process_with_scratch(&mut buf, &mut scratch);
                for k in 0..len {
                    x[base + k * stride] = buf[k + 1] * Complex64::new(0.0, 0.5);
                }
            }
        }
    }

    /// Solve in place; `r` indexed over interior nodes in row-major order.
    pub fn solve(&self, r: &mut [Complex64]) {
        for d in 0..3 {
            self.dst_axis(r, d);
        }
        let (m1, m2) = (self.m[1], self.m[2]);
        let norm: f64 = self.m.iter().map(|&m| 2.0 / (m + 1) as f64).product();
        for (idx, v) in r.iter_mut().enumerate() {
            let (i, j, k) = (idx / (m1 * m2), (idx / m2) % m1, idx % m2);
            *v *= norm / (self.eig[0][i] + self.eig[1][j] + self.eig[2][k] + self.shift);
        }
        for d in 0..3 {
            self.dst_axis(r, d);
        }
    }
}

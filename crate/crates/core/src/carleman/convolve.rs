//! Product integration of one-sided exponential kernels on a uniform grid.
//!
//! `R0_ρ f(xᵢ) = ∫_{y>xᵢ} e^{−ρ(y−xᵢ)} f(y) dy` and
//! `R1_ρ f(xᵢ) = ∫_{y>xᵢ} (y−xᵢ) e^{−ρ(y−xᵢ)} f(y) dy`, with `f` the piecewise
//! cubic interpolant of the samples (zero outside the grid). Both satisfy
//! two-term recursions, so each application is O(N).

use num_complex::Complex64;

/// `∫₀¹ e^{−qσ} σᵖ dσ` for `p = 0..=4`.
fn exp_moments(q: f64) -> [f64; 5] {
    let mut m = [0.0; 5];
    if q.abs() < 2.0 {
        for (p, mp) in m.iter_mut().enumerate() {
            let mut term = 1.0;
            let mut s = 0.0;
            for k in 0..60 {
                let add = term / (p + k + 1) as f64;
                s += add;
                if add.abs() < 1e-18 * s.abs() {
                    break;
                }
                term *= -q / (k + 1) as f64;
            }
            *mp = s;
        }
    } else {
        let e = (-q).exp();
        m[0] = (1.0 - e) / q;
        for p in 1..5 {
            m[p] = (p as f64 * m[p - 1] - e) / q;
        }
    }
    m
}

/// Power-basis coefficients of the Lagrange cardinal polynomials on `nodes`.
fn lagrange_power(nodes: [f64; 4]) -> [[f64; 4]; 4] {
    let mut out = [[0.0; 4]; 4];
    for k in 0..4 {
        // build Π_{m≠k} (σ − s_m) / (s_k − s_m)
        let mut poly = [1.0, 0.0, 0.0, 0.0];
        let mut deg = 0;
        let mut denom = 1.0;
        for m in 0..4 {
            if m == k {
                continue;
            }
            let mut next = [0.0; 4];
            for d in 0..=deg {
                next[d + 1] += poly[d];
                next[d] -= nodes[m] * poly[d];
            }
            poly = next;
            deg += 1;
            denom *= nodes[k] - nodes[m];
        }
        for d in 0..4 {
            out[k][d] = poly[d] / denom;
        }
    }
    out
}

/// Local weights for one interval `[xᵢ, xᵢ₊₁]`, applied to the four stencil samples.
#[derive(Clone, Copy)]
struct Local {
    offset: isize,
    w0: [f64; 4],
    w1: [f64; 4],
}

fn local(offset: isize, q: f64, h: f64) -> Local {
    let nodes = [
        offset as f64,
        offset as f64 + 1.0,
        offset as f64 + 2.0,
        offset as f64 + 3.0,
    ];
    let c = lagrange_power(nodes);
    let m = exp_moments(q);
    let mut w0 = [0.0; 4];
    let mut w1 = [0.0; 4];
    for k in 0..4 {
        for p in 0..4 {
            w0[k] += c[k][p] * m[p];
            w1[k] += c[k][p] * m[p + 1];
        }
        w0[k] *= h;
        w1[k] *= h * h;
    }
    Local { offset, w0, w1 }
}

/// Precomputed operator for a fixed rate `ρ > 0` and spacing `h`.
#[derive(Clone)]
pub struct ExpKernel {
    decay: f64,
    h: f64,
    first: Local,
    inner: Local,
    last: Local,
}

impl ExpKernel {
    pub fn new(rho: f64, h: f64) -> Self {
        let q = rho * h;
        Self {
            decay: (-q).exp(),
            h,
            first: local(0, q, h),
            inner: local(-1, q, h),
            last: local(-2, q, h),
        }
    }

    fn stencil(&self, i: usize, n: usize) -> &Local {
        if i == 0 {
            &self.first
        } else if i + 2 >= n {
            &self.last
        } else {
            &self.inner
        }
    }

    fn local_sums(&self, f: &[Complex64], i: usize) -> (Complex64, Complex64) {
        let n = f.len();
        let l = self.stencil(i, n);
        let mut a = Complex64::default();
        let mut b = Complex64::default();
        for k in 0..4 {
            let idx = (i as isize + l.offset + k as isize) as usize;
            a += f[idx] * l.w0[k];
            b += f[idx] * l.w1[k];
        }
        (a, b)
    }

    /// `R0_ρ f` at every node.
    pub fn right0(&self, f: &[Complex64]) -> Vec<Complex64> {
        let n = f.len();
        let mut out = vec![Complex64::default(); n];
        for i in (0..n.saturating_sub(1)).rev() {
            let (a, _) = self.local_sums(f, i);
            out[i] = out[i + 1] * self.decay + a;
        }
        out
    }

    /// `R1_ρ f` at every node.
    pub fn right1(&self, f: &[Complex64]) -> Vec<Complex64> {
        let n = f.len();
        let mut r0 = Complex64::default();
        let mut out = vec![Complex64::default(); n];
        for i in (0..n.saturating_sub(1)).rev() {
            let (a, b) = self.local_sums(f, i);
            out[i] = (out[i + 1] + r0 * self.h) * self.decay + b;
            r0 = r0 * self.decay + a;
        }
        out
    }

    /// `L0_ρ f(xᵢ) = ∫_{y<xᵢ} e^{−ρ(xᵢ−y)} f(y) dy`.
    pub fn left0(&self, f: &[Complex64]) -> Vec<Complex64> {
        let rev: Vec<Complex64> = f.iter().rev().cloned().collect();
        let mut out = self.right0(&rev);
        out.reverse();
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad;

    #[test]
    fn moments_agree_across_branches() {
        for &q in &[1.999, 2.001] {
            let m = exp_moments(q);
            for p in 0..5 {
                let r = quad::integrate(|s| (-q * s).exp() * s.powi(p as i32), 0.0, 1.0, 1e-15).unwrap();
                assert!((m[p] - r).abs() < 1e-13, "q={q} p={p}");
            }
        }
    }

    #[test]
    fn exact_on_cubics() {
        let n = 12;
        let h = 0.1;
        let rho = 3.0;
        let f: Vec<Complex64> = (0..n)
            .map(|i| {
                let x = i as f64 * h;
                Complex64::new(1.0 - x + 2.0 * x * x * x, x * x)
            })
            .collect();
        let k = ExpKernel::new(rho, h);
        let r0 = k.right0(&f);
        let r1 = k.right1(&f);
        let xe = (n - 1) as f64 * h;
        for i in [0usize, 3, 9] {
            let x = i as f64 * h;
            let re = quad::integrate(|y| (-rho * (y - x)).exp() * (1.0 - y + 2.0 * y * y * y), x, xe, 1e-14).unwrap();
            let im1 = quad::integrate(|y| (y - x) * (-rho * (y - x)).exp() * y * y, x, xe, 1e-14).unwrap();
            assert!((r0[i].re - re).abs() < 1e-12);
            assert!((r1[i].im - im1).abs() < 1e-12);
        }
    }
}

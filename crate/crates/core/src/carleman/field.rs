use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::geometry::ProductCylinder;

/// Function on `I × M₀` stored as Fourier coefficients per x₁ node,
/// `coeffs[i * J + j] = û(x₁ᵢ, j)`.
#[derive(Debug, Clone)]
pub struct SpectralField {
    cyl: Arc<ProductCylinder>,
    coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn zeros(cyl: Arc<ProductCylinder>) -> Self {
        let n = cyl.n1() * cyl.base().len();
        Self {
            cyl,
            coeffs: vec![Complex64::default(); n],
        }
    }

    pub fn from_coeffs(cyl: Arc<ProductCylinder>, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != cyl.n1() * cyl.base().len() {
            return Err(Error::Shape(format!(
                "expected {} coefficients, got {}",
                cyl.n1() * cyl.base().len(),
                coeffs.len()
            )));
        }
        Ok(Self { cyl, coeffs })
    }

    /// Project a pointwise function `u(x₁, x')` slice by slice.
    pub fn from_fn<F>(cyl: Arc<ProductCylinder>, f: F) -> Self
    where
        F: Fn(f64, &[f64]) -> Complex64 + Sync,
    {
        let base = cyl.base();
        let pts: Vec<Vec<f64>> = (0..base.grid_len()).map(|k| base.grid_point(k)).collect();
        let jn = base.len();
        let slices: Vec<Vec<Complex64>> = (0..cyl.n1())
            .into_par_iter()
            .map(|i| {
                let x1 = cyl.x1(i);
                let mut vals: Vec<Complex64> = pts.iter().map(|p| f(x1, p)).collect();
                let mut out = vec![Complex64::default(); jn];
                base.analyze_in_place(&mut vals, &mut out);
                out
            })
            .collect();
        Self {
            coeffs: slices.concat(),
            cyl,
        }
    }

    /// Separated field `g(x₁) ψ_j`.
    pub fn separated<G: Fn(f64) -> Complex64>(cyl: Arc<ProductCylinder>, j: usize, g: G) -> Self {
        let mut u = Self::zeros(cyl);
        let jn = u.n_modes();
        for i in 0..u.n1() {
            u.coeffs[i * jn + j] = g(u.cyl.x1(i));
        }
        u
    }

    pub fn cylinder(&self) -> &ProductCylinder {
        &self.cyl
    }
    pub fn cylinder_arc(&self) -> Arc<ProductCylinder> {
        self.cyl.clone()
    }
    pub fn n1(&self) -> usize {
        self.cyl.n1()
    }
    pub fn n_modes(&self) -> usize {
        self.cyl.base().len()
    }
    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }
    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }
    pub fn slice(&self, i: usize) -> &[Complex64] {
        let j = self.n_modes();
        &self.coeffs[i * j..(i + 1) * j]
    }
    pub fn slice_mut(&mut self, i: usize) -> &mut [Complex64] {
        let j = self.n_modes();
        &mut self.coeffs[i * j..(i + 1) * j]
    }
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.coeffs[i * self.n_modes() + j]
    }

    /// x₁ profile of mode `j`.
    pub fn mode_column(&self, j: usize) -> Vec<Complex64> {
        let jn = self.n_modes();
        (0..self.n1()).map(|i| self.coeffs[i * jn + j]).collect()
    }

    pub fn set_mode_column(&mut self, j: usize, col: &[Complex64]) {
        let jn = self.n_modes();
        for (i, v) in col.iter().enumerate() {
            self.coeffs[i * jn + j] = *v;
        }
    }

    /// Values of slice `i` on the base grid.
    pub fn synthesize_slice(&self, i: usize) -> Vec<Complex64> {
        self.cyl.base().synthesize(self.slice(i))
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if self.coeffs.len() != other.coeffs.len() {
            return Err(Error::Shape("fields live on different cylinders".into()));
        }
        Ok(())
    }

    pub fn axpy(&mut self, a: Complex64, x: &Self) -> Result<()> {
        self.check_same(x)?;
        self.coeffs
            .iter_mut()
            .zip(&x.coeffs)
            .for_each(|(y, x)| *y += a * x);
        Ok(())
    }

    pub fn scaled(&self, a: Complex64) -> Self {
        Self {
            cyl: self.cyl.clone(),
            coeffs: self.coeffs.iter().map(|c| c * a).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        let mut out = self.clone();
        out.axpy(Complex64::new(-1.0, 0.0), other)?;
        Ok(out)
    }

    /// `∫ u v̄` via Parseval.
    pub fn inner(&self, other: &Self) -> Result<Complex64> {
        self.check_same(other)?;
        let w = self.cyl.x1_weights();
        let jn = self.n_modes();
        Ok((0..self.n1())
            .map(|i| {
                let s: Complex64 = (0..jn)
                    .map(|j| self.coeffs[i * jn + j] * other.coeffs[i * jn + j].conj())
                    .sum();
                s * w[i]
            })
            .sum())
    }

    /// L² norm from coefficients (Parseval per slice, trapezoid in x₁).
    pub fn l2_norm(&self) -> f64 {
        let w = self.cyl.x1_weights();
        let jn = self.n_modes();
        (0..self.n1())
            .map(|i| w[i] * self.coeffs[i * jn..(i + 1) * jn].iter().map(|c| c.norm_sqr()).sum::<f64>())
            .sum::<f64>()
            .sqrt()
    }

    /// L^p norm by pointwise synthesis on the tensor grid; `p = ∞` allowed.
    pub fn lp_norm(&self, p: f64) -> Result<f64> {
        if !(p >= 1.0) {
            return Err(invalid("lp_norm needs p >= 1"));
        }
        let base = self.cyl.base();
        let w1 = self.cyl.x1_weights();
        let cw = base.cell_weight();
        let parts: Vec<f64> = (0..self.n1())
            .into_par_iter()
            .map(|i| {
                if w1[i] == 0.0 && p.is_finite() {
                    return 0.0;
                }
                let vals = self.synthesize_slice(i);
                if p.is_infinite() {
                    vals.iter().map(|v| v.norm()).fold(0.0, f64::max)
                } else {
                    w1[i] * cw * vals.iter().map(|v| v.norm().powf(p)).sum::<f64>()
                }
            })
            .collect();
        Ok(if p.is_infinite() {
            parts.into_iter().fold(0.0, f64::max)
        } else {
            parts.iter().sum::<f64>().powf(1.0 / p)
        })
    }

    /// Fourth-order x₁ derivative (centred inside, one-sided at the two end nodes on each side).
    pub fn dx1(&self) -> Self {
        let jn = self.n_modes();
        let n = self.n1();
        let h = self.cyl.h1();
        let mut out = Self::zeros(self.cyl.clone());
        for j in 0..jn {
            let col = self.mode_column(j);
            let d = d1_fourth_order(&col, h, n);
            out.set_mode_column(j, &d);
        }
        out
    }

    /// `‖u‖_{H¹}² = ‖u‖² + ‖∂₁u‖² + Σ λ_j |û_j|²`.
    pub fn h1_norm(&self) -> f64 {
        let base = self.cyl.base();
        let w = self.cyl.x1_weights();
        let jn = self.n_modes();
        let d = self.dx1();
        let mut acc = 0.0;
        for i in 0..self.n1() {
            for j in 0..jn {
                let c = self.coeffs[i * jn + j].norm_sqr();
                acc += w[i] * ((1.0 + base.eigenvalue(j)) * c + d.coeffs[i * jn + j].norm_sqr());
            }
        }
        acc.sqrt()
    }

    /// Pointwise product with a function given on the tensor grid, evaluated per slice.
    pub fn multiply_pointwise<F>(&self, f: F) -> Self
    where
        F: Fn(usize, usize) -> Complex64 + Sync,
    {
        let base = self.cyl.base();
        let jn = self.n_modes();
        let slices: Vec<Vec<Complex64>> = (0..self.n1())
            .into_par_iter()
            .map(|i| {
                let mut vals = self.synthesize_slice(i);
                vals.iter_mut().enumerate().for_each(|(k, v)| *v *= f(i, k));
                let mut out = vec![Complex64::default(); jn];
                base.analyze_in_place(&mut vals, &mut out);
                out
            })
            .collect();
        Self {
            cyl: self.cyl.clone(),
            coeffs: slices.concat(),
        }
    }

    /// Largest coefficient magnitude in the first and last `k` x₁ slices.
    pub fn edge_magnitude(&self, k: usize) -> f64 {
        let n = self.n1();
        (0..k.min(n))
            .chain(n.saturating_sub(k)..n)
            .flat_map(|i| self.slice(i).iter().map(|c| c.norm()))
            .fold(0.0, f64::max)
    }
}

pub(crate) fn d1_fourth_order(f: &[Complex64], h: f64, n: usize) -> Vec<Complex64> {
    let mut d = vec![Complex64::default(); n];
    if n < 5 {
        return d;
    }
    let inv = 1.0 / (12.0 * h);
    for i in 2..n - 2 {
        d[i] = (f[i - 2] - f[i - 1] * 8.0 + f[i + 1] * 8.0 - f[i + 2]) * inv;
    }
    let fwd = |k: usize, s: f64| {
        // one-sided fourth-order stencil at offset 0 or 1
        if k == 0 {
            (f[0] * -25.0 + f[1] * 48.0 - f[2] * 36.0 + f[3] * 16.0 - f[4] * 3.0) * (s * inv)
        } else {
            (f[0] * -3.0 - f[1] * 10.0 + f[2] * 18.0 - f[3] * 6.0 + f[4]) * (s * inv)
        }
    };
    d[0] = fwd(0, 1.0);
    d[1] = fwd(1, 1.0);
    let r: Vec<Complex64> = f.iter().rev().cloned().collect();
    let back = |k: usize| {
        if k == 0 {
            (r[0] * -25.0 + r[1] * 48.0 - r[2] * 36.0 + r[3] * 16.0 - r[4] * 3.0) * (-inv)
        } else {
            (r[0] * -3.0 - r[1] * 10.0 + r[2] * 18.0 - r[3] * 6.0 + r[4]) * (-inv)
        }
    };
    d[n - 1] = back(0);
    d[n - 2] = back(1);
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_flat_torus_basis;
    use std::f64::consts::PI;

    fn cyl(sides: f64, mc: usize, n1: usize) -> Arc<ProductCylinder> {
        let b = Arc::new(build_flat_torus_basis(&[sides, sides], mc).unwrap());
        Arc::new(ProductCylinder::new((0.0, 1.0), b, n1).unwrap())
    }

    #[test]
    fn constant_norm() {
        let c = cyl(2.0 * PI, 2, 11);
        let u = SpectralField::from_fn(c, |_, _| Complex64::new(1.0, 0.0));
        assert!((u.lp_norm(2.0).unwrap() - 2.0 * PI).abs() < 1e-10);
        assert!((u.l2_norm() - 2.0 * PI).abs() < 1e-10);
    }

    #[test]
    fn mode_norm_is_sqrt_length() {
        let c = cyl(1.0, 8, 21);
        let u = SpectralField::separated(c, 5, |_| Complex64::new(1.0, 0.0));
        assert!((u.lp_norm(2.0).unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn parseval_matches_quadrature() {
        let c = cyl(1.0, 12, 17);
        let u = SpectralField::from_fn(c, |x1, x| {
            Complex64::new((3.0 * x1).sin() * (2.0 * PI * x[0]).cos(), x[1] * x1)
        });
        let a = u.l2_norm();
        let b = u.lp_norm(2.0).unwrap();
        assert!((a - b).abs() < 1e-8 * a);
        assert!(u.lp_norm(0.5).is_err());
    }

    #[test]
    fn derivative_fourth_order() {
        let n = 41;
        let h = 1.0 / (n - 1) as f64;
        let f: Vec<Complex64> = (0..n).map(|i| Complex64::new((i as f64 * h * 2.0).sin(), 0.0)).collect();
        let d = d1_fourth_order(&f, h, n);
        for (i, v) in d.iter().enumerate() {
            assert!((v.re - 2.0 * (2.0 * i as f64 * h).cos()).abs() < 1e-5, "{i}");
        }
    }
}

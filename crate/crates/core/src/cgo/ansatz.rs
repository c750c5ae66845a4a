use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{invalid, Result};
use crate::geometry::{ProductCylinder, Region};

/// Finite Fourier series `b(θ) = Σ_{|m| ≤ K} c_m e^{imθ}` on the circle.
#[derive(Debug, Clone, PartialEq)]
pub struct AngularProfile {
    /// `coeffs[m + K]`.
    coeffs: Vec<Complex64>,
}

impl AngularProfile {
    pub fn new(coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() % 2 == 0 {
            return Err(invalid("angular profile needs 2K+1 coefficients"));
        }
        Ok(Self { coeffs })
    }
    pub fn constant(c: f64) -> Self {
        Self {
            coeffs: vec![Complex64::new(c, 0.0)],
        }
    }
    /// Single harmonic `e^{imθ}`.
    pub fn harmonic(m: i64) -> Self {
        let k = m.unsigned_abs() as usize;
        let mut coeffs = vec![Complex64::default(); 2 * k + 1];
        coeffs[(m + k as i64) as usize] = Complex64::new(1.0, 0.0);
        Self { coeffs }
    }
    pub fn order(&self) -> i64 {
        (self.coeffs.len() / 2) as i64
    }
    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }
    fn terms(&self) -> impl Iterator<Item = (f64, Complex64)> + '_ {
        let k = self.order();
        self.coeffs.iter().enumerate().map(move |(i, c)| ((i as i64 - k) as f64, *c))
    }
    pub fn eval(&self, theta: f64) -> Complex64 {
        self.terms().map(|(m, c)| c * Complex64::from_polar(1.0, m * theta)).sum()
    }
    pub fn d2(&self, theta: f64) -> Complex64 {
        self.terms().map(|(m, c)| -m * m * c * Complex64::from_polar(1.0, m * theta)).sum()
    }
}

/// Data fixing one CGO family: fan centre ω, frequency λ and angular profile.
///
/// The base is flat, so polar normal coordinates about ω are Euclidean
/// polar coordinates and `|g|^{1/2} = r`.
#[derive(Debug, Clone, PartialEq)]
pub struct CgoAnsatz {
    pub omega: [f64; 2],
    pub lambda: f64,
    pub profile: AngularProfile,
}

impl CgoAnsatz {
    pub fn new(omega: [f64; 2], lambda: f64, profile: AngularProfile) -> Self {
        Self { omega, lambda, profile }
    }

    pub fn polar(&self, x: &[f64]) -> (f64, f64) {
        let (dx, dy) = (x[0] - self.omega[0], x[1] - self.omega[1]);
        (dx.hypot(dy), dy.atan2(dx))
    }

    /// x'-part of the amplitude, `e^{−iτr} r^{−1/2} e^{−λr} b(θ)`.
    pub fn amplitude(&self, tau: f64, x: &[f64]) -> Complex64 {
        let (r, th) = self.polar(x);
        Complex64::from_polar(r.powf(-0.5) * (-self.lambda * r).exp(), -tau * r) * self.profile.eval(th)
    }

    /// x'-part of `e^{τx₁} Δ e^{−τx₁} a`, namely
    /// `e^{−iτr} e^{−λr} r^{−5/2} (b/4 + b'')`; the x₁ factor is `e^{iλx₁}`.
    pub fn source(&self, tau: f64, x: &[f64]) -> Complex64 {
        let (r, th) = self.polar(x);
        let b = self.profile.eval(th) * 0.25 + self.profile.d2(th);
        Complex64::from_polar(r.powf(-2.5) * (-self.lambda * r).exp(), -tau * r) * b
    }
}

// C^∞ step: e^{−1/s} / (e^{−1/s} + e^{−1/(1−s)}); keeps the spectrum of localised fields short
fn smoothstep(s: f64) -> f64 {
    if s <= 0.0 {
        0.0
    } else if s >= 1.0 {
        1.0
    } else {
        let a = (-1.0 / s).exp();
        let b = (-1.0 / (1.0 - s)).exp();
        a / (a + b)
    }
}

/// Bump that is `1` on `[a, b]` and vanishes outside `[a − m, b + m]`.
pub fn plateau(x: f64, a: f64, b: f64, m: f64) -> f64 {
    smoothstep((x - (a - m)) / m) * smoothstep(((b + m) - x) / m)
}

/// Working domain `M = I_M × box` inside the cylinder, with the Carleman
/// core and the cutoff margins used to localise amplitudes and sources.
#[derive(Debug, Clone)]
pub struct CgoDomain {
    pub cyl: Arc<ProductCylinder>,
    pub x1_range: (f64, f64),
    pub lo: [f64; 2],
    pub hi: [f64; 2],
    pub x1_margin: f64,
    pub margin: f64,
    pub core: (f64, f64),
}

impl CgoDomain {
    pub fn new(
        cyl: Arc<ProductCylinder>,
        x1_range: (f64, f64),
        lo: [f64; 2],
        hi: [f64; 2],
        core: (f64, f64),
    ) -> Result<Self> {
        let x1_margin = 0.5 * (x1_range.0 - core.0).min(core.1 - x1_range.1);
        let margin = 0.25 * (hi[0] - lo[0]).min(hi[1] - lo[1]);
        let (c0, c1) = cyl.interval();
        if !(x1_margin > 0.0) || core.0 - 0.1 * (core.1 - core.0) < c0 || core.1 + 0.1 * (core.1 - core.0) > c1 {
            return Err(invalid("x1 range must sit inside the core, and the core's cutoff inside the grid"));
        }
        let base = cyl.base();
        for d in 0..2 {
            let (o, s) = (base.origin()[d], base.sides()[d]);
            if lo[d] - margin <= o || hi[d] + margin >= o + s {
                return Err(invalid("box plus margin must fit inside one torus cell"));
            }
        }
        Ok(Self {
            cyl,
            x1_range,
            lo,
            hi,
            x1_margin,
            margin,
            core,
        })
    }

    pub fn region(&self) -> Region {
        Region::Box { lo: self.lo, hi: self.hi }
    }

    pub fn chi_x1(&self, x1: f64) -> f64 {
        plateau(x1, self.x1_range.0, self.x1_range.1, self.x1_margin)
    }

    pub fn chi_base(&self, x: &[f64]) -> f64 {
        plateau(x[0], self.lo[0], self.hi[0], self.margin) * plateau(x[1], self.lo[1], self.hi[1], self.margin)
    }

    pub fn in_x1(&self, x1: f64) -> bool {
        x1 >= self.x1_range.0 - 1e-12 && x1 <= self.x1_range.1 + 1e-12
    }

    pub fn in_base(&self, x: &[f64]) -> bool {
        (0..2).all(|d| x[d] >= self.lo[d] - 1e-12 && x[d] <= self.hi[d] + 1e-12)
    }

    /// Rejects fan centres whose distance to the cutoff support is too small.
    pub fn check_centre(&self, omega: [f64; 2]) -> Result<()> {
        let d = (0..2)
            .map(|k| (self.lo[k] - self.margin - omega[k]).max(omega[k] - self.hi[k] - self.margin))
            .fold(f64::NEG_INFINITY, f64::max);
        if d <= 0.0 {
            return Err(invalid("fan centre must lie outside the cutoff support of M"));
        }
        Ok(())
    }

    /// Reference domain: torus `[−1,1)²`, box `[−½,½]²`.
    pub fn reference(max_cluster: usize, grid: usize, n1: usize) -> Result<Self> {
        let base = crate::geometry::EigenBasis::flat_torus(&[2.0, 2.0], max_cluster, Some(&[grid, grid]))?
            .with_origin(&[-1.0, -1.0])?;
        let cyl = ProductCylinder::new((-0.6, 0.6), Arc::new(base), n1)?;
        Self::new(Arc::new(cyl), (-0.3, 0.3), [-0.5, -0.5], [0.5, 0.5], (-0.5, 0.5))
    }

    /// Fan centre to the left of the box at the given height.
    pub fn default_omega(&self) -> [f64; 2] {
        [self.lo[0] - self.margin - 0.15, 0.5 * (self.lo[1] + self.hi[1])]
    }
}

/// `θ` sampled uniformly in `[−π, π)`.
pub fn circle_grid(n: usize) -> Vec<f64> {
    (0..n).map(|i| -PI + 2.0 * PI * i as f64 / n as f64).collect()
}

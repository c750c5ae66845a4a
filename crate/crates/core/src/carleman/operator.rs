use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::geometry::EigenBasis;

use super::convolve::ExpKernel;
use super::field::SpectralField;

/// Quintic smoothstep cutoff, `≡ 1` on `core` and vanishing outside `core` inflated by 20%.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cutoff {
    pub core: (f64, f64),
    pub margin: f64,
}

impl Cutoff {
    pub fn new(core: (f64, f64)) -> Self {
        Self {
            core,
            margin: 0.1 * (core.1 - core.0),
        }
    }
    pub fn support(&self) -> (f64, f64) {
        (self.core.0 - self.margin, self.core.1 + self.margin)
    }
    pub fn eval(&self, x: f64) -> f64 {
        let d = if x < self.core.0 {
            self.core.0 - x
        } else if x > self.core.1 {
            x - self.core.1
        } else {
            return 1.0;
        };
        if d >= self.margin {
            return 0.0;
        }
        let s = 1.0 - d / self.margin;
        s * s * s * (10.0 - 15.0 * s + 6.0 * s * s)
    }
}

/// Parameters of the Carleman inverse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CarlemanParams {
    pub tau: f64,
    pub cutoff: Cutoff,
    /// Required distance of `τ²` from the retained spectrum.
    pub delta_spec: f64,
}

impl CarlemanParams {
    /// Checks `|τ| ≥ 4` and `min_j |τ² − λ_j| ≥ δ_spec` with the default guard `10⁻³(1+|τ|)`.
    pub fn new(tau: f64, core: (f64, f64), basis: &EigenBasis) -> Result<Self> {
        Self::with_guard(tau, core, basis, 1e-3 * (1.0 + tau.abs()))
    }

    pub fn with_guard(tau: f64, core: (f64, f64), basis: &EigenBasis, guard: f64) -> Result<Self> {
        if !(tau.abs() >= 4.0) || !tau.is_finite() {
            return Err(invalid(format!("|tau| must be at least 4, got {tau}")));
        }
        if !(core.1 > core.0) {
            return Err(invalid("cutoff core interval must have positive length"));
        }
        let distance = basis.spectral_distance(tau * tau);
        if distance < guard {
            return Err(Error::NotAdmissible {
                tau,
                distance,
                guard,
            });
        }
        Ok(Self {
            tau,
            cutoff: Cutoff::new(core),
            delta_spec: guard,
        })
    }
}

/// `e^{τx₁} Δ e^{−τx₁} u = ∂²u − 2τ∂u + (τ² − λ_j)u` per mode, fourth-order centred
/// differences with zero extension beyond the grid.
pub fn conjugated_laplacian(u: &SpectralField, tau: f64) -> SpectralField {
    if u.edge_magnitude(2) > 1e-8 * u.coeffs().iter().map(|c| c.norm()).fold(0.0, f64::max) {
        log::warn!("conjugated_laplacian: field not small near the x1 ends; stencil uses zero extension");
    }
    let cyl = u.cylinder_arc();
    let base = cyl.base();
    let h = cyl.h1();
    let n = cyl.n1();
    let jn = base.len();
    let (c2, c1) = (1.0 / (12.0 * h * h), 1.0 / (12.0 * h));
    let at = |i: isize, j: usize| -> Complex64 {
        if i < 0 || i >= n as isize {
            Complex64::default()
        } else {
            u.get(i as usize, j)
        }
    };
    let mut out = SpectralField::zeros(cyl.clone());
    for i in 0..n {
        let ii = i as isize;
        let row = out.slice_mut(i);
        for (j, r) in row.iter_mut().enumerate().take(jn) {
            let (m2, m1, z, p1, p2) = (at(ii - 2, j), at(ii - 1, j), at(ii, j), at(ii + 1, j), at(ii + 2, j));
            let d2 = (-m2 + m1 * 16.0 - z * 30.0 + p1 * 16.0 - p2) * c2;
            let d1 = (m2 - m1 * 8.0 + p1 * 8.0 - p2) * c1;
            *r = d2 - d1 * (2.0 * tau) + z * (tau * tau - base.eigenvalue(j));
        }
    }
    out
}

/// One-dimensional inverse for a single mode: convolution with `m_τ(·, μ)`.
pub fn convolve_mode(f: &[Complex64], mu: f64, tau: f64, h: f64) -> Result<Vec<Complex64>> {
    if tau.abs() == mu {
        return Err(Error::Resonance(mu));
    }
    if tau < 0.0 {
        let rev: Vec<Complex64> = f.iter().rev().cloned().collect();
        let mut out = convolve_mode(&rev, mu, -tau, h)?;
        out.reverse();
        return Ok(out);
    }
    Ok(if mu == 0.0 {
        ExpKernel::new(tau, h)
            .right1(f)
            .into_iter()
            .map(|v| -v)
            .collect()
    } else if tau > mu {
        let a = ExpKernel::new(tau + mu, h).right0(f);
        let b = ExpKernel::new(tau - mu, h).right0(f);
        a.iter().zip(&b).map(|(a, b)| (a - b) / (2.0 * mu)).collect()
    } else {
        let a = ExpKernel::new(mu - tau, h).left0(f);
        let b = ExpKernel::new(tau + mu, h).right0(f);
        a.iter().zip(&b).map(|(a, b)| (a + b) / (2.0 * mu)).collect()
    })
}

/// `G_τ f = χ · (m_τ ∗ f)` mode by mode, `f` extended by zero outside the grid.
pub fn apply_g_tau(f: &SpectralField, params: &CarlemanParams) -> Result<SpectralField> {
    let cyl = f.cylinder_arc();
    let base = cyl.base();
    let h = cyl.h1();
    let chi: Vec<f64> = cyl.x1_grid().iter().map(|&x| params.cutoff.eval(x)).collect();
    let cols: Vec<Vec<Complex64>> = (0..base.len())
        .into_par_iter()
        .map(|j| {
            let col = f.mode_column(j);
            if col.iter().all(|c| *c == Complex64::default()) {
                return Ok(col);
            }
            let mut g = convolve_mode(&col, base.eigenvalue(j).sqrt(), params.tau, h)?;
            g.iter_mut().zip(&chi).for_each(|(v, c)| *v *= *c);
            Ok(g)
        })
        .collect::<Result<_>>()?;
    let mut out = SpectralField::zeros(cyl);
    for (j, c) in cols.iter().enumerate() {
        out.set_mode_column(j, c);
    }
    Ok(out)
}

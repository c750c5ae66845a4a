//! Kernel `m_τ(t, μ) = (2π)⁻¹ ∫ e^{itη} / ((η + iτ)² + μ²) dη` of the per-mode inverse.

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::quad;

/// Closed form of the kernel. It is real valued; the complex return type
/// matches the Fourier-side definition.
pub fn m_tau(t: f64, mu: f64, tau: f64) -> Result<Complex64> {
    Ok(Complex64::new(m_tau_real(t, mu, tau)?, 0.0))
}

pub fn m_tau_real(t: f64, mu: f64, tau: f64) -> Result<f64> {
    if !(mu >= 0.0) || !t.is_finite() || !tau.is_finite() {
        return Err(invalid("m_tau needs finite t, tau and mu >= 0"));
    }
    if tau.abs() == mu {
        return Err(Error::Resonance(mu));
    }
    if tau < 0.0 {
        return m_tau_real(-t, mu, -tau);
    }
    Ok(if mu == 0.0 {
        if t < 0.0 {
            t * (tau * t).exp()
        } else {
            0.0
        }
    } else if tau > mu {
        if t < 0.0 {
            (((tau + mu) * t).exp() - ((tau - mu) * t).exp()) / (2.0 * mu)
        } else {
            0.0
        }
    } else if t > 0.0 {
        (-(mu - tau) * t).exp() / (2.0 * mu)
    } else {
        ((tau + mu) * t).exp() / (2.0 * mu)
    })
}

/// Pointwise bound `|m_τ(t, μ)| ≤ μ⁻¹ e^{−|τ−μ||t|}` for `τ > 0, μ > 0`.
pub fn multiplier_bound(t: f64, mu: f64, tau: f64) -> f64 {
    (-(tau - mu).abs() * t.abs()).exp() / mu
}

/// Direct numerical evaluation of the defining η-integral.
///
/// The slowly decaying part `1/(η²+a²) − 2iτη/(η²+a²)²`, whose transform is
/// `e^{−a|t|}(1 + τt)/(2a)`, is subtracted analytically; the `O(η⁻⁴)`
/// remainder is integrated adaptively on dyadic panels.
pub fn m_tau_quadrature(t: f64, mu: f64, tau: f64, abs_tol: f64) -> Result<Complex64> {
    if tau.abs() == mu {
        return Err(Error::Resonance(mu));
    }
    let a = 1.0 + tau.abs() + mu;
    let sym = |eta: f64| {
        let z = Complex64::new(eta, tau);
        1.0 / (z * z + mu * mu)
    };
    let model = |eta: f64| {
        let d = eta * eta + a * a;
        Complex64::new(1.0 / d, -2.0 * tau * eta / (d * d))
    };
    let integrand = |eta: f64| (sym(eta) - model(eta)) * Complex64::from_polar(1.0, t * eta);

    // the remainder is O(η⁻⁴), so ∫_{|η|>L} ≤ (|r(L)| + |r(−L)|)L/3; half the
    // tolerance goes to the truncated tail
    let budget = abs_tol * 2.0 * std::f64::consts::PI;
    let tail = |l: f64| ((sym(l) - model(l)).norm() + (sym(-l) - model(-l)).norm()) * l / 3.0;
    let mut panels = vec![(-a, a)];
    let mut lo = a;
    while lo < 1e6 * a && tail(lo) > 0.5 * budget {
        panels.push((lo, 2.0 * lo));
        panels.push((-2.0 * lo, -lo));
        lo *= 2.0;
    }
    let tol = budget / (4.0 * panels.len() as f64);
    let mut acc = Complex64::default();
    for &(p, q) in &panels {
        let (p, q) = if p < q { (p, q) } else { (q, p) };
        // resolve oscillation: at least a few nodes per period
        let pieces = ((q - p) * t.abs() / 8.0).ceil().clamp(1.0, 4096.0) as usize;
        let h = (q - p) / pieces as f64;
        for k in 0..pieces {
            let (u, v) = (p + k as f64 * h, p + (k + 1) as f64 * h);
            let re = quad::integrate(|e| integrand(e).re, u, v, tol / pieces as f64)?;
            let im = quad::integrate(|e| integrand(e).im, u, v, tol / pieces as f64)?;
            acc += Complex64::new(re, im);
        }
    }
    let analytic = (-a * t.abs()).exp() * (1.0 + tau * t) / (2.0 * a);
    Ok(acc / (2.0 * std::f64::consts::PI) + analytic)
}

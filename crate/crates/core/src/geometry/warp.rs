//! Change of variables for warped products `dt² + e^{2f(t)} g₀`.
//!
//! With `y₁ = η(t) = ∫₀^t e^{−f}` the metric becomes `e^{2f(η⁻¹(y₁))}(dy₁² + g₀)`.

use crate::error::{invalid, Result};
use crate::quad::gauss_legendre;

const PANELS: usize = 64;
const NODES: usize = 12;

/// Tabulated `η` with exact per-panel Gauss–Legendre evaluation.
pub struct WarpMap {
    f: Box<dyn Fn(f64) -> f64 + Send + Sync>,
    t0: f64,
    t1: f64,
    knots: Vec<f64>,
    cum: Vec<f64>,
    gl: (Vec<f64>, Vec<f64>),
}

impl std::fmt::Debug for WarpMap {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("WarpMap")
            .field("interval", &(self.t0, self.t1))
            .finish()
    }
}

/// Build `η`, its inverse, and the conformal factor for the profile `f` on `[t0, t1]` (with `0 ∈ [t0, t1]`).
pub fn warp_to_product<F>(f: F, t0: f64, t1: f64) -> Result<WarpMap>
where
    F: Fn(f64) -> f64 + Send + Sync + 'static,
{
    if !(t1 > t0) || !(t0 <= 0.0 && 0.0 <= t1) {
        return Err(invalid("warp interval must contain 0 and have positive length"));
    }
    let gl = gauss_legendre(NODES);
    let knots: Vec<f64> = (0..=PANELS)
        .map(|k| t0 + (t1 - t0) * k as f64 / PANELS as f64)
        .collect();
    let mut map = WarpMap {
        f: Box::new(f),
        t0,
        t1,
        knots,
        cum: vec![0.0; PANELS + 1],
        gl,
    };
    for k in 0..PANELS {
        let v = map.panel(map.knots[k], map.knots[k + 1]);
        if !v.is_finite() {
            return Err(invalid("warp profile produced a non-finite integrand"));
        }
        map.cum[k + 1] = map.cum[k] + v;
    }
    // shift so that η(0) = 0
    let zero = map.from_table(0.0);
    map.cum.iter_mut().for_each(|c| *c -= zero);
    Ok(map)
}

impl WarpMap {
    fn panel(&self, a: f64, b: f64) -> f64 {
        let (x, w) = &self.gl;
        let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
        x.iter()
            .zip(w)
            .map(|(xi, wi)| wi * (-(self.f)(c + h * xi)).exp())
            .sum::<f64>()
            * h
    }

    fn from_table(&self, t: f64) -> f64 {
        let pos = ((t - self.t0) / (self.t1 - self.t0) * PANELS as f64).floor();
        let k = (pos.max(0.0) as usize).min(PANELS - 1);
        self.cum[k] + self.panel(self.knots[k], t)
    }

    pub fn profile(&self, t: f64) -> f64 {
        (self.f)(t)
    }

    pub fn eta(&self, t: f64) -> f64 {
        self.from_table(t)
    }

    pub fn eta_range(&self) -> (f64, f64) {
        (self.cum[0], self.cum[PANELS])
    }

    /// `η⁻¹` by safeguarded Newton on the monotone map.
    pub fn eta_inv(&self, y: f64) -> Result<f64> {
        let (ya, yb) = self.eta_range();
        if !(y >= ya - 1e-14 && y <= yb + 1e-14) {
            return Err(invalid(format!("{y} outside the range of eta")));
        }
        let k = self.cum.partition_point(|&c| c <= y).clamp(1, PANELS) - 1;
        let (mut lo, mut hi) = (self.knots[k], self.knots[k + 1]);
        let mut t = 0.5 * (lo + hi);
        for _ in 0..100 {
            let r = self.eta(t) - y;
            if r.abs() < 1e-15 * (1.0 + y.abs()) {
                break;
            }
            if r > 0.0 {
                hi = t;
            } else {
                lo = t;
            }
            let step = r * (self.f)(t).exp();
            let cand = t - step;
            t = if cand > lo && cand < hi { cand } else { 0.5 * (lo + hi) };
            if hi - lo < 1e-15 {
                break;
            }
        }
        Ok(t)
    }

    /// Conformal factor `e^{2f(η⁻¹(y))}`.
    pub fn conformal_factor(&self, y: f64) -> Result<f64> {
        Ok((2.0 * (self.f)(self.eta_inv(y)?)).exp())
    }

    /// Max over `n` sample points of the difference between the `dy₁²` coefficient of
    /// the pulled-back metric, `(dt/dy)²` by central differences of `η⁻¹`, and the conformal factor.
    pub fn metric_residual(&self, n: usize) -> Result<f64> {
        let (ya, yb) = self.eta_range();
        let h = 1e-3 * (yb - ya);
        let mut worst: f64 = 0.0;
        for i in 0..n {
            let y = ya + 2.0 * h + (yb - ya - 4.0 * h) * i as f64 / (n - 1).max(1) as f64;
            // fourth-order central difference
            let d = (-self.eta_inv(y + 2.0 * h)? + 8.0 * self.eta_inv(y + h)?
                - 8.0 * self.eta_inv(y - h)?
                + self.eta_inv(y - 2.0 * h)?)
                / (12.0 * h);
            worst = worst.max((d * d - self.conformal_factor(y)?).abs());
        }
        Ok(worst)
    }
}

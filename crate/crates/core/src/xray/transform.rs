use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::Result;
use crate::geometry::{GeoState, SimpleManifold2D};
use crate::quad::gauss_legendre;

use super::boundary::BoundaryDirectionGrid;

/// Attenuated ray transform `T_λ f` sampled on a boundary grid.
#[derive(Debug, Clone)]
pub struct RayTransformData {
    pub lambda: f64,
    pub values: Vec<f64>,
}

impl RayTransformData {
    pub fn zeros(lambda: f64, n: usize) -> Self {
        Self {
            lambda,
            values: vec![0.0; n],
        }
    }

    /// Rows `alpha,beta,value` with a header.
    pub fn to_csv(&self, grid: &BoundaryDirectionGrid) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["alpha", "beta", "value"])?;
        for (s, v) in grid.samples.iter().zip(&self.values) {
            w.write_record([s.alpha.to_string(), s.beta.to_string(), v.to_string()])?;
        }
        Ok(String::from_utf8(w.into_inner().map_err(|e| e.into_error())?).expect("csv is utf-8"))
    }
}

/// Visit quadrature nodes `(state, t, weight)` for `∫₀^τ · dt` along the
/// geodesic from `s0`: composite Simpson with step `h`, and a Simpson panel
/// with a midpoint sub-step on the final partial interval.
pub fn ray_quadrature<V: FnMut(&GeoState, f64, f64)>(
    man: &SimpleManifold2D,
    s0: GeoState,
    tau: f64,
    h: f64,
    mut visit: V,
) {
    let mut n = (tau / h).floor() as usize;
    if n % 2 == 1 {
        n -= 1;
    }
    let mut cur = s0;
    for k in 0..=n {
        if k > 0 {
            cur = man.rk4(&cur, h);
        }
        if n > 0 {
            let w = if k == 0 || k == n {
                h / 3.0
            } else if k % 2 == 1 {
                4.0 * h / 3.0
            } else {
                2.0 * h / 3.0
            };
            visit(&cur, k as f64 * h, w);
        }
    }
    let t0 = n as f64 * h;
    let rest = tau - t0;
    if rest > 0.0 {
        let mid = man.rk4(&cur, 0.5 * rest);
        let end = man.rk4(&mid, 0.5 * rest);
        visit(&cur, t0, rest / 6.0);
        visit(&mid, t0 + 0.5 * rest, 4.0 * rest / 6.0);
        visit(&end, tau, rest / 6.0);
    }
}

/// `T_λ f` for a closure `f` (zero outside the manifold), integrated along
/// each ray with step `h`.
pub fn ray_transform_fn<F>(
    man: &SimpleManifold2D,
    grid: &BoundaryDirectionGrid,
    f: F,
    lambda: f64,
    h: f64,
) -> RayTransformData
where
    F: Fn([f64; 2]) -> f64 + Sync,
{
    let values = grid
        .samples
        .par_iter()
        .map(|s| {
            let mut acc = 0.0;
            let s0 = man.start(s.x, s.v);
            ray_quadrature(man, s0, s.exit_time, h, |st, t, w| {
                acc += w * f(st.x) * (-lambda * t).exp();
            });
            acc
        })
        .collect();
    RayTransformData { lambda, values }
}

/// The ray through `x` with direction `ξ` traced back to the boundary:
/// returns `τ(x, −ξ)`, the entry state, and the boundary angles `(α, β)`.
pub fn trace_back(man: &SimpleManifold2D, x: [f64; 2], xi: [f64; 2]) -> Result<(f64, GeoState, f64, f64)> {
    let back = man.start(x, [-xi[0], -xi[1]]);
    let (t, st) = man.exit(&back)?;
    let entry = GeoState {
        x: st.x,
        v: [-st.v[0], -st.v[1]],
        j: 0.0,
        dj: 1.0,
    };
    let (alpha, beta) = man.boundary_angles(entry.x, entry.v);
    Ok((t, entry, alpha, beta))
}

/// `T_λ* h(x) = ∫_{S_x} e^{−λτ(x,−ξ)} h(α, β) dξ` with `(α, β)` the entry
/// coordinates of the ray through `(x, ξ)`, on `n_xi` uniform directions.
pub fn adjoint_fn<H>(man: &SimpleManifold2D, x: [f64; 2], h: H, lambda: f64, n_xi: usize) -> Result<f64>
where
    H: Fn(f64, f64) -> f64,
{
    let dxi = 2.0 * PI / n_xi as f64;
    let mut acc = 0.0;
    for k in 0..n_xi {
        let th = k as f64 * dxi;
        let (t, _, alpha, beta) = trace_back(man, x, [th.cos(), th.sin()])?;
        acc += (-lambda * t).exp() * h(alpha, beta);
    }
    Ok(acc * dxi)
}

/// `T_λ*T_λ f(x)` by composition: every ray through `x` is integrated in full.
pub fn normal_apply_fn<F>(man: &SimpleManifold2D, x: [f64; 2], f: F, lambda: f64, n_xi: usize, h: f64) -> Result<f64>
where
    F: Fn([f64; 2]) -> f64,
{
    let dxi = 2.0 * PI / n_xi as f64;
    let mut acc = 0.0;
    for k in 0..n_xi {
        let th = (k as f64 + 0.5) * dxi;
        let (t, entry, _, _) = trace_back(man, x, [th.cos(), th.sin()])?;
        let (tau, _) = man.exit(&entry)?;
        let mut ray = 0.0;
        ray_quadrature(man, entry, tau, h, |st, s, w| ray += w * f(st.x) * (-lambda * s).exp());
        acc += (-lambda * t).exp() * ray;
    }
    Ok(acc * dxi)
}

/// Fan side of Santaló's formula, `∫_{∂₊SM₀} ∫₀^τ F(φ_t(x, ξ)) μ dt d(∂SM₀)`.
pub fn santalo_integral<F>(man: &SimpleManifold2D, grid: &BoundaryDirectionGrid, f: F, h: f64) -> f64
where
    F: Fn([f64; 2], [f64; 2]) -> f64 + Sync,
{
    let parts: Vec<f64> = grid
        .samples
        .par_iter()
        .map(|s| {
            let mut acc = 0.0;
            ray_quadrature(man, man.start(s.x, s.v), s.exit_time, h, |st, _, w| acc += w * f(st.x, st.v));
            acc * s.weight * s.mu
        })
        .collect();
    parts.iter().sum()
}

/// Direct side `∫_{SM₀} F dV dξ` on a polar grid: Gauss–Legendre in the
/// radius, uniform in the polar angle and in the direction angle.
pub fn phase_space_integral<F>(man: &SimpleManifold2D, f: F, n_r: usize, n_phi: usize, n_xi: usize) -> f64
where
    F: Fn([f64; 2], [f64; 2]) -> f64 + Sync,
{
    let r_max = man.radius();
    let (nodes, wts) = gauss_legendre(n_r);
    let (dphi, dxi) = (2.0 * PI / n_phi as f64, 2.0 * PI / n_xi as f64);
    let parts: Vec<f64> = (0..n_r)
        .into_par_iter()
        .map(|i| {
            let r = 0.5 * r_max * (nodes[i] + 1.0);
            let wr = 0.5 * r_max * wts[i] * r;
            let mut acc = 0.0;
            for p in 0..n_phi {
                let ph = p as f64 * dphi;
                let x = [r * ph.cos(), r * ph.sin()];
                let c = man.area_density(x);
                let mut fib = 0.0;
                for k in 0..n_xi {
                    let th = k as f64 * dxi;
                    fib += f(x, man.unit_velocity(x, [th.cos(), th.sin()]));
                }
                acc += c * fib * dxi;
            }
            acc * wr * dphi
        })
        .collect();
    parts.iter().sum()
}

//! Disk-type simple surfaces with conformal metrics `g = c(x) (dx² + dy²)`.
//!
//! Geodesics are integrated with classical RK4 at fixed step. With
//! `c = e^{2φ}` the geodesic equation is `ẍ = −2(∇φ·ẋ)ẋ + |ẋ|²∇φ`,
//! and the Gaussian curvature is `K = −e^{−2φ}Δφ`.

use std::f64::consts::PI;

use crate::error::{invalid, Error, Result};

/// Conformal factor `c(x)` of the metric.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConformalMetric {
    Euclidean,
    /// `c(x) = 1 + amplitude · exp(−|x − center|² / width²)`.
    GaussianBump {
        amplitude: f64,
        width: f64,
        center: [f64; 2],
    },
}

impl ConformalMetric {
    pub fn is_flat(&self) -> bool {
        matches!(self, ConformalMetric::Euclidean)
    }

    pub fn c(&self, x: [f64; 2]) -> f64 {
        match *self {
            ConformalMetric::Euclidean => 1.0,
            ConformalMetric::GaussianBump {
                amplitude,
                width,
                center,
            } => {
                let s = (x[0] - center[0]).powi(2) + (x[1] - center[1]).powi(2);
                1.0 + amplitude * (-s / (width * width)).exp()
            }
        }
    }

    /// `(φ, ∇φ, Δφ)` with `c = e^{2φ}`.
    pub fn phi_derivs(&self, x: [f64; 2]) -> (f64, [f64; 2], f64) {
        match *self {
            ConformalMetric::Euclidean => (0.0, [0.0, 0.0], 0.0),
            ConformalMetric::GaussianBump {
                amplitude,
                width,
                center,
            } => {
                let dx = x[0] - center[0];
                let dy = x[1] - center[1];
                let s = dx * dx + dy * dy;
                let w2 = width * width;
                let g = amplitude * (-s / w2).exp();
                let c = 1.0 + g;
                let gc = [-2.0 * dx / w2 * g, -2.0 * dy / w2 * g];
                let lc = g * (4.0 * s / (w2 * w2) - 4.0 / w2);
                let phi = 0.5 * c.ln();
                let grad = [gc[0] / (2.0 * c), gc[1] / (2.0 * c)];
                let lap = lc / (2.0 * c) - (gc[0] * gc[0] + gc[1] * gc[1]) / (2.0 * c * c);
                (phi, grad, lap)
            }
        }
    }

    /// Gaussian curvature.
    pub fn curvature(&self, x: [f64; 2]) -> f64 {
        let (phi, _, lap) = self.phi_derivs(x);
        -(-2.0 * phi).exp() * lap
    }

    /// Christoffel symbols `Γ^k_{ij}` indexed `[k][i][j]`.
    pub fn christoffel(&self, x: [f64; 2]) -> [[[f64; 2]; 2]; 2] {
        let (_, g, _) = self.phi_derivs(x);
        let mut out = [[[0.0; 2]; 2]; 2];
        for (k, ok) in out.iter_mut().enumerate() {
            for (i, oi) in ok.iter_mut().enumerate() {
                for (j, v) in oi.iter_mut().enumerate() {
                    let dik = (i == k) as u8 as f64;
                    let djk = (j == k) as u8 as f64;
                    let dij = (i == j) as u8 as f64;
                    *v = dik * g[j] + djk * g[i] - dij * g[k];
                }
            }
        }
        out
    }
}

/// Geodesic phase-space state: position, coordinate velocity, Jacobi field and its derivative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeoState {
    pub x: [f64; 2],
    pub v: [f64; 2],
    pub j: f64,
    pub dj: f64,
}

/// Sampled geodesic up to the first boundary crossing.
#[derive(Debug, Clone)]
pub struct GeodesicPath {
    pub times: Vec<f64>,
    pub states: Vec<GeoState>,
    pub exit_time: f64,
}

/// Disk of radius `radius` centred at the origin carrying a conformal metric.
#[derive(Debug, Clone)]
pub struct SimpleManifold2D {
    metric: ConformalMetric,
    radius: f64,
    step: f64,
    max_length: f64,
}

impl SimpleManifold2D {
    pub fn new(metric: ConformalMetric, radius: f64, step: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(invalid("radius must be positive"));
        }
        if !(step > 0.0) {
            return Err(invalid("geodesic step must be positive"));
        }
        if let ConformalMetric::GaussianBump {
            amplitude, width, ..
        } = metric
        {
            if !(amplitude > -1.0) || !(width > 0.0) {
                return Err(invalid("bump metric needs amplitude > -1 and width > 0"));
            }
        }
        Ok(Self {
            metric,
            radius,
            step,
            max_length: 20.0 * radius * metric_scale(&metric),
        })
    }

    pub fn euclidean_disk(radius: f64) -> Self {
        Self::new(ConformalMetric::Euclidean, radius, radius / 200.0).unwrap()
    }

    pub fn with_max_length(mut self, l: f64) -> Self {
        self.max_length = l;
        self
    }

    /// Copy of the same metric on a disk of radius `factor · radius`.
    pub fn enlarged(&self, factor: f64) -> Self {
        Self {
            radius: self.radius * factor,
            max_length: self.max_length * factor,
            ..self.clone()
        }
    }

    pub fn metric(&self) -> &ConformalMetric {
        &self.metric
    }
    pub fn radius(&self) -> f64 {
        self.radius
    }
    pub fn step(&self) -> f64 {
        self.step
    }
    pub fn is_flat(&self) -> bool {
        self.metric.is_flat()
    }
    pub fn contains(&self, x: [f64; 2]) -> bool {
        x[0] * x[0] + x[1] * x[1] <= self.radius * self.radius
    }
    fn bdf(&self, x: [f64; 2]) -> f64 {
        x[0] * x[0] + x[1] * x[1] - self.radius * self.radius
    }
    /// Riemannian area element `√det g = c`.
    pub fn area_density(&self, x: [f64; 2]) -> f64 {
        self.metric.c(x)
    }
    /// Scale coordinate direction `d` to unit length in `g` at `x`.
    pub fn unit_velocity(&self, x: [f64; 2], d: [f64; 2]) -> [f64; 2] {
        let n = (d[0] * d[0] + d[1] * d[1]).sqrt() * self.metric.c(x).sqrt();
        [d[0] / n, d[1] / n]
    }
    pub fn speed(&self, s: &GeoState) -> f64 {
        (self.metric.c(s.x) * (s.v[0] * s.v[0] + s.v[1] * s.v[1])).sqrt()
    }

    /// Boundary point at polar angle `alpha`, inward unit normal, and boundary arc-length density.
    pub fn boundary_point(&self, alpha: f64) -> ([f64; 2], [f64; 2], f64) {
        let (s, c) = alpha.sin_cos();
        let x = [self.radius * c, self.radius * s];
        (x, [-c, -s], self.radius * self.metric.c(x).sqrt())
    }

    /// Unit velocity at boundary angle `alpha` making angle `beta` with the inward normal.
    pub fn inward_velocity(&self, alpha: f64, beta: f64) -> ([f64; 2], [f64; 2]) {
        let (x, n, _) = self.boundary_point(alpha);
        let (sb, cb) = beta.sin_cos();
        let d = [cb * n[0] - sb * n[1], sb * n[0] + cb * n[1]];
        (x, self.unit_velocity(x, d))
    }

    /// Inverse of [`inward_velocity`](Self::inward_velocity) for a boundary point with
    /// arbitrary unit velocity; returns `(alpha, beta)` where `|beta| > π/2` means outgoing.
    pub fn boundary_angles(&self, x: [f64; 2], v: [f64; 2]) -> (f64, f64) {
        let alpha = x[1].atan2(x[0]);
        let n = [-alpha.cos(), -alpha.sin()];
        let cross = n[0] * v[1] - n[1] * v[0];
        let dot = n[0] * v[0] + n[1] * v[1];
        (alpha, cross.atan2(dot))
    }

    fn rhs(&self, s: &GeoState) -> GeoState {
        let (_, g, _) = self.metric.phi_derivs(s.x);
        let gv = g[0] * s.v[0] + g[1] * s.v[1];
        let vv = s.v[0] * s.v[0] + s.v[1] * s.v[1];
        let k = if self.is_flat() { 0.0 } else { self.metric.curvature(s.x) };
        GeoState {
            x: s.v,
            v: [-2.0 * gv * s.v[0] + vv * g[0], -2.0 * gv * s.v[1] + vv * g[1]],
            j: s.dj,
            dj: -k * s.j,
        }
    }

    /// One RK4 step of size `h` (may be negative).
    pub fn rk4(&self, s: &GeoState, h: f64) -> GeoState {
        if self.is_flat() {
            return GeoState {
                x: [s.x[0] + h * s.v[0], s.x[1] + h * s.v[1]],
                v: s.v,
                j: s.j + h * s.dj,
                dj: s.dj,
            };
        }
        let add = |a: &GeoState, b: &GeoState, t: f64| GeoState {
            x: [a.x[0] + t * b.x[0], a.x[1] + t * b.x[1]],
            v: [a.v[0] + t * b.v[0], a.v[1] + t * b.v[1]],
            j: a.j + t * b.j,
            dj: a.dj + t * b.dj,
        };
        let k1 = self.rhs(s);
        let k2 = self.rhs(&add(s, &k1, 0.5 * h));
        let k3 = self.rhs(&add(s, &k2, 0.5 * h));
        let k4 = self.rhs(&add(s, &k3, h));
        let mut out = *s;
        out = add(&out, &k1, h / 6.0);
        out = add(&out, &k2, h / 3.0);
        out = add(&out, &k3, h / 3.0);
        add(&out, &k4, h / 6.0)
    }

    /// Flow for time `t` (any sign) from `s` with the manifold step.
    pub fn flow(&self, s: &GeoState, t: f64) -> GeoState {
        if self.is_flat() {
            return self.rk4(s, t);
        }
        let n = (t.abs() / self.step).ceil().max(1.0) as usize;
        let h = t / n as f64;
        let mut cur = *s;
        for _ in 0..n {
            cur = self.rk4(&cur, h);
        }
        cur
    }

    pub fn start(&self, x: [f64; 2], dir: [f64; 2]) -> GeoState {
        GeoState {
            x,
            v: self.unit_velocity(x, dir),
            j: 0.0,
            dj: 1.0,
        }
    }

    /// Exit time and exit state of the geodesic from `s` (forward in time).
    pub fn exit(&self, s: &GeoState) -> Result<(f64, GeoState)> {
        self.exit_with_step(s, self.step)
    }

    fn exit_with_step(&self, s: &GeoState, h: f64) -> Result<(f64, GeoState)> {
        if self.is_flat() {
            // |x + t v|² = R²
            let a = s.v[0] * s.v[0] + s.v[1] * s.v[1];
            let b = s.x[0] * s.v[0] + s.x[1] * s.v[1];
            let c = self.bdf(s.x);
            let disc = (b * b - a * c).max(0.0);
            let t = ((-b + disc.sqrt()) / a).max(0.0);
            return Ok((t, self.rk4(s, t)));
        }
        let mut t = 0.0;
        let mut cur = *s;
        loop {
            let next = self.rk4(&cur, h);
            if self.bdf(next.x) > 0.0 {
                // root of bdf(rk4(cur, σ)) on σ ∈ [0, h]
                let mut lo = 0.0;
                let mut hi = h;
                let mut flo = self.bdf(cur.x);
                let mut fhi = self.bdf(next.x);
                if flo > 0.0 {
                    return Ok((t, cur));
                }
                let mut sig = hi;
                for _ in 0..200 {
                    sig = if fhi != flo { lo - flo * (hi - lo) / (fhi - flo) } else { 0.5 * (lo + hi) };
                    if !(sig > lo && sig < hi) {
                        sig = 0.5 * (lo + hi);
                    }
                    let f = self.bdf(self.rk4(&cur, sig).x);
                    if f.abs() < 1e-14 || hi - lo < 1e-12 {
                        break;
                    }
                    if f > 0.0 {
                        hi = sig;
                        fhi = f;
                    } else {
                        lo = sig;
                        flo = f;
                        // Illinois modification
                        fhi *= 0.5;
                    }
                }
                return Ok((t + sig, self.rk4(&cur, sig)));
            }
            cur = next;
            t += h;
            if t > self.max_length {
                return Err(Error::GeodesicTooLong {
                    max_length: self.max_length,
                });
            }
        }
    }

    /// Exit time `τ(x, ξ)`.
    pub fn exit_time(&self, x: [f64; 2], dir: [f64; 2]) -> Result<f64> {
        Ok(self.exit(&self.start(x, dir))?.0)
    }

    /// Sampled geodesic from `(x, ξ)` with step `h` until it leaves the disk.
    pub fn integrate_geodesic(&self, x: [f64; 2], dir: [f64; 2], h: f64) -> Result<GeodesicPath> {
        if !(h > 0.0) {
            return Err(invalid("geodesic step must be positive"));
        }
        if self.bdf(x) > 1e-12 * self.radius * self.radius {
            return Err(invalid("geodesic start point outside the manifold"));
        }
        let s0 = self.start(x, dir);
        let (exit_time, exit_state) = if self.is_flat() {
            self.exit(&s0)?
        } else {
            self.exit_with_step(&s0, h)?
        };
        let mut times = vec![0.0];
        let mut states = vec![s0];
        let mut cur = s0;
        let mut t = 0.0;
        while t + h < exit_time {
            cur = self.rk4(&cur, h);
            t += h;
            times.push(t);
            states.push(cur);
        }
        if exit_time > t {
            times.push(exit_time);
            states.push(exit_state);
        }
        Ok(GeodesicPath {
            times,
            states,
            exit_time,
        })
    }

    /// Geodesic from `x` to `y`: returns the unit initial velocity at `x`, the
    /// distance, and the Jacobi factor `j(d)` (with `j(0)=0`, `j'(0)=1`).
    pub fn connect(&self, x: [f64; 2], y: [f64; 2]) -> Result<([f64; 2], f64, f64)> {
        let dx = [y[0] - x[0], y[1] - x[1]];
        let e = (dx[0] * dx[0] + dx[1] * dx[1]).sqrt();
        if e == 0.0 {
            return Err(invalid("connect requires distinct points"));
        }
        if self.is_flat() {
            return Ok(([dx[0] / e, dx[1] / e], e, e));
        }
        // Newton on (θ, t) for γ(t; θ) = y. ∂γ/∂t = v and ∂γ/∂θ = j(t)·N(t), N the
        // g-unit normal (v rotated by 90°, which stays g-unit for a conformal metric).
        let mut theta = dx[1].atan2(dx[0]);
        let cavg = (self.metric.c(x) * self.metric.c(y)).sqrt();
        let mut t = e * cavg.sqrt();
        for _ in 0..50 {
            let s = self.flow(&self.start(x, [theta.cos(), theta.sin()]), t);
            let r = [s.x[0] - y[0], s.x[1] - y[1]];
            let nrm = [-s.v[1], s.v[0]];
            let dth = [s.j * nrm[0], s.j * nrm[1]];
            let det = s.v[0] * dth[1] - s.v[1] * dth[0];
            if det.abs() < 1e-300 {
                break;
            }
            let d_t = (r[0] * dth[1] - r[1] * dth[0]) / det;
            let d_th = (s.v[0] * r[1] - s.v[1] * r[0]) / det;
            t -= d_t;
            theta -= d_th;
            if (r[0] * r[0] + r[1] * r[1]).sqrt() < 1e-13 * (1.0 + e) {
                let s = self.flow(&self.start(x, [theta.cos(), theta.sin()]), t);
                return Ok((self.unit_velocity(x, [theta.cos(), theta.sin()]), t, s.j));
            }
        }
        let s = self.flow(&self.start(x, [theta.cos(), theta.sin()]), t);
        let miss = ((s.x[0] - y[0]).powi(2) + (s.x[1] - y[1]).powi(2)).sqrt();
        if miss < 1e-8 {
            Ok((self.unit_velocity(x, [theta.cos(), theta.sin()]), t, s.j))
        } else {
            Err(Error::NoConvergence {
                method: "geodesic shooting",
                iterations: 50,
                residual: miss,
            })
        }
    }

    /// Strict convexity of the boundary and absence of conjugate points along
    /// geodesics issued from `n_alpha × n_beta` boundary directions.
    pub fn check_simple(&self, n_alpha: usize, n_beta: usize) -> Result<()> {
        for i in 0..n_alpha {
            let alpha = 2.0 * PI * i as f64 / n_alpha as f64;
            let (x, _, _) = self.boundary_point(alpha);
            let (phi, g, _) = self.metric.phi_derivs(x);
            let nu = [alpha.cos(), alpha.sin()];
            let kappa = (-phi).exp() * (1.0 / self.radius + g[0] * nu[0] + g[1] * nu[1]);
            if !(kappa > 0.0) {
                return Err(Error::NotSimple(format!(
                    "boundary geodesic curvature {kappa:.3e} at alpha = {alpha:.4}"
                )));
            }
        }
        if self.is_flat() {
            return Ok(());
        }
        for i in 0..n_alpha {
            let alpha = 2.0 * PI * i as f64 / n_alpha as f64;
            for k in 0..n_beta {
                let beta = -0.5 * PI + PI * (k as f64 + 0.5) / n_beta as f64;
                let (x, v) = self.inward_velocity(alpha, beta);
                let mut s = GeoState { x, v, j: 0.0, dj: 1.0 };
                let (tau, _) = self.exit(&s)?;
                let mut t = 0.0;
                while t + self.step < tau {
                    s = self.rk4(&s, self.step);
                    t += self.step;
                    if s.j <= 0.0 {
                        return Err(Error::NotSimple(format!(
                            "conjugate point at t = {t:.4} from alpha = {alpha:.4}, beta = {beta:.4}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

fn metric_scale(m: &ConformalMetric) -> f64 {
    match *m {
        ConformalMetric::Euclidean => 1.0,
        ConformalMetric::GaussianBump { amplitude, .. } => (1.0 + amplitude.max(0.0)).sqrt(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bump() -> SimpleManifold2D {
        SimpleManifold2D::new(
            ConformalMetric::GaussianBump {
                amplitude: 0.3,
                width: 0.5,
                center: [0.1, -0.05],
            },
            1.0,
            0.01,
        )
        .unwrap()
    }

    #[test]
    fn euclidean_exit_times() {
        let m = SimpleManifold2D::euclidean_disk(1.0);
        assert!((m.exit_time([0.0, 0.0], [1.0, 0.0]).unwrap() - 1.0).abs() < 1e-14);
        assert!((m.exit_time([-1.0, 0.0], [1.0, 0.0]).unwrap() - 2.0).abs() < 1e-14);
        let p = m.integrate_geodesic([-1.0, 0.0], [1.0, 0.0], 0.1).unwrap();
        assert!((p.exit_time - 2.0).abs() < 1e-14);
        assert!((p.states.last().unwrap().x[0] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn bump_exit_time_converges_under_refinement() {
        let m = bump();
        let x = [-0.3, 0.2];
        let d = [0.8, -0.3];
        let t = |h: f64| m.integrate_geodesic(x, d, h).unwrap().exit_time;
        let (t1, t2, t4) = (t(0.02), t(0.01), t(0.005));
        // RK4: error ratio ~16
        let rich = t4 + (t4 - t2) / 15.0;
        assert!((t2 - rich).abs() < 1e-6, "{t1} {t2} {t4}");
        assert!(((t1 - t2) / (t2 - t4)).abs() > 8.0);
    }

    #[test]
    fn bump_preserves_unit_speed() {
        let m = bump();
        let p = m.integrate_geodesic([0.0, -0.99], [0.2, 1.0], 0.01).unwrap();
        let worst = p
            .states
            .iter()
            .map(|s| (m.speed(s) - 1.0).abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-8, "{worst}");
    }

    #[test]
    fn flat_curvature_and_christoffel_vanish() {
        let m = ConformalMetric::Euclidean;
        assert_eq!(m.curvature([0.3, 0.1]), 0.0);
        assert_eq!(m.christoffel([0.3, 0.1]), [[[0.0; 2]; 2]; 2]);
    }

    #[test]
    fn bump_curvature_matches_finite_differences() {
        let m = bump().metric;
        let x = [0.2, 0.1];
        let h = 1e-4;
        let phi = |p: [f64; 2]| 0.5 * m.c(p).ln();
        let lap = (phi([x[0] + h, x[1]]) + phi([x[0] - h, x[1]]) + phi([x[0], x[1] + h])
            + phi([x[0], x[1] - h])
            - 4.0 * phi(x))
            / (h * h);
        let k = -(-2.0 * phi(x)).exp() * lap;
        assert!((k - m.curvature(x)).abs() < 1e-6);
    }

    #[test]
    fn simple_checks() {
        assert!(bump().check_simple(16, 8).is_ok());
        let deep = SimpleManifold2D::new(
            ConformalMetric::GaussianBump {
                amplitude: -0.95,
                width: 0.25,
                center: [0.0, 0.0],
            },
            1.0,
            0.005,
        )
        .unwrap();
        assert!(deep.check_simple(16, 16).is_err());
    }

    #[test]
    fn connect_hits_target() {
        let m = bump();
        let x = [-0.4, 0.3];
        let y = [0.5, -0.2];
        let (v, d, j) = m.connect(x, y).unwrap();
        let s = m.flow(&GeoState { x, v, j: 0.0, dj: 1.0 }, d);
        assert!((s.x[0] - y[0]).abs() < 1e-9 && (s.x[1] - y[1]).abs() < 1e-9);
        assert!(j > 0.0);
        let (_, d2, _) = m.connect(y, x).unwrap();
        assert!((d - d2).abs() < 1e-8);
    }

    #[test]
    fn boundary_angles_roundtrip() {
        let m = bump();
        let (x, v) = m.inward_velocity(1.1, 0.4);
        let (a, b) = m.boundary_angles(x, v);
        assert!((a - 1.1).abs() < 1e-12 && (b - 0.4).abs() < 1e-12);
    }
}

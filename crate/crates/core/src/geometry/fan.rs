//! Polar normal coordinates `(r, θ)` about a centre `ω` lying outside the
//! working region. In these coordinates the metric is `dr² + j(r,θ)² dθ²`,
//! so `|g|^{1/2} = j` where `j` is the Jacobi field with `j(0)=0, j'(0)=1`.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};

use super::manifold::{GeoState, SimpleManifold2D};

/// Working region covered by the fan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Region {
    Disk { center: [f64; 2], radius: f64 },
    Box { lo: [f64; 2], hi: [f64; 2] },
}

impl Region {
    /// Negative inside, positive outside.
    pub fn level(&self, x: [f64; 2]) -> f64 {
        match *self {
            Region::Disk { center, radius } => {
                (x[0] - center[0]).powi(2) + (x[1] - center[1]).powi(2) - radius * radius
            }
            Region::Box { lo, hi } => (lo[0] - x[0])
                .max(x[0] - hi[0])
                .max(lo[1] - x[1])
                .max(x[1] - hi[1]),
        }
    }
    pub fn contains(&self, x: [f64; 2]) -> bool {
        self.level(x) <= 0.0
    }
    fn boundary_samples(&self, n: usize) -> Vec<[f64; 2]> {
        match *self {
            Region::Disk { center, radius } => (0..n)
                .map(|i| {
                    let a = 2.0 * PI * i as f64 / n as f64;
                    [center[0] + radius * a.cos(), center[1] + radius * a.sin()]
                })
                .collect(),
            Region::Box { lo, hi } => {
                let m = n / 4 + 1;
                let mut v = Vec::new();
                for i in 0..=m {
                    let s = i as f64 / m as f64;
                    let x = lo[0] + s * (hi[0] - lo[0]);
                    let y = lo[1] + s * (hi[1] - lo[1]);
                    v.extend([[x, lo[1]], [x, hi[1]], [lo[0], y], [hi[0], y]]);
                }
                v
            }
        }
    }
    fn far_distance(&self, p: [f64; 2]) -> f64 {
        self.boundary_samples(64)
            .iter()
            .map(|q| ((q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2)).sqrt())
            .fold(0.0, f64::max)
    }
}

/// One ray of the fan with its passage through the region.
#[derive(Debug, Clone)]
pub struct FanRay {
    pub theta: f64,
    /// Arc-length interval inside the region, if the ray meets it.
    pub span: Option<(f64, f64)>,
}

/// Polar normal coordinates over a region of a (possibly enlarged) simple surface.
#[derive(Debug, Clone)]
pub struct FanCoordinates {
    manifold: SimpleManifold2D,
    omega: [f64; 2],
    region: Region,
    rays: Vec<FanRay>,
    dtheta: f64,
}

/// Fan of geodesics from `omega` over a uniform θ grid covering `region`.
pub fn polar_normal_coords(
    manifold: &SimpleManifold2D,
    omega: [f64; 2],
    region: Region,
    n_theta: usize,
) -> Result<FanCoordinates> {
    FanCoordinates::build(manifold, omega, region, n_theta)
}

impl FanCoordinates {
    pub fn build(
        manifold: &SimpleManifold2D,
        omega: [f64; 2],
        region: Region,
        n_theta: usize,
    ) -> Result<Self> {
        if region.contains(omega) {
            return Err(invalid("fan centre must lie outside the working region"));
        }
        if n_theta < 2 {
            return Err(invalid("fan needs at least two rays"));
        }
        let centre_angle = {
            let s = region.boundary_samples(8);
            let m = s.iter().fold([0.0, 0.0], |a, q| [a[0] + q[0], a[1] + q[1]]);
            let m = [m[0] / s.len() as f64, m[1] / s.len() as f64];
            (m[1] - omega[1]).atan2(m[0] - omega[0])
        };
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for q in region.boundary_samples(512) {
            let a = (q[1] - omega[1]).atan2(q[0] - omega[0]) - centre_angle;
            let a = (a + PI).rem_euclid(2.0 * PI) - PI;
            lo = lo.min(a);
            hi = hi.max(a);
        }
        let pad = if manifold.is_flat() { 0.0 } else { 0.25 * (hi - lo) };
        let (lo, hi) = (centre_angle + lo - pad, centre_angle + hi + pad);
        let dtheta = (hi - lo) / (n_theta - 1) as f64;
        let r_max = 2.0 * region.far_distance(omega);
        let rays: Vec<FanRay> = (0..n_theta)
            .into_par_iter()
            .map(|i| {
                let theta = lo + i as f64 * dtheta;
                let span = ray_span(manifold, omega, theta, region, r_max)?;
                Ok(FanRay { theta, span })
            })
            .collect::<Result<_>>()?;
        let fan = Self {
            manifold: manifold.clone(),
            omega,
            region,
            rays,
            dtheta,
        };
        fan.check_injective()?;
        Ok(fan)
    }

    pub fn omega(&self) -> [f64; 2] {
        self.omega
    }
    pub fn region(&self) -> Region {
        self.region
    }
    pub fn rays(&self) -> &[FanRay] {
        &self.rays
    }
    pub fn dtheta(&self) -> f64 {
        self.dtheta
    }
    pub fn manifold(&self) -> &SimpleManifold2D {
        &self.manifold
    }

    fn start(&self, theta: f64) -> GeoState {
        self.manifold.start(self.omega, [theta.cos(), theta.sin()])
    }

    /// Point with polar normal coordinates `(r, θ)` and its Jacobi factor `j = |g|^{1/2}`.
    pub fn point(&self, r: f64, theta: f64) -> ([f64; 2], f64) {
        let s = self.manifold.flow(&self.start(theta), r);
        (s.x, s.j)
    }

    /// `(r, θ, j)` of a point.
    pub fn locate(&self, p: [f64; 2]) -> Result<(f64, f64, f64)> {
        let (v, d, j) = self.manifold.connect(self.omega, p)?;
        Ok((d, v[1].atan2(v[0]), j))
    }

    /// `|g|^{-1/4}` at `(r, θ)`.
    pub fn amplitude_factor(&self, r: f64, theta: f64) -> f64 {
        1.0 / self.point(r, theta).1.sqrt()
    }

    /// Unit speed of the ray map `r ↦ (r, θ)` measured by finite differences of positions.
    pub fn ray_speed_defect(&self, theta: f64, r: f64) -> f64 {
        let h = 1e-4;
        let (a, _) = self.point(r - h, theta);
        let (b, _) = self.point(r + h, theta);
        let (m, _) = self.point(r, theta);
        let c = self.manifold.area_density(m).sqrt();
        let e = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt() / (2.0 * h);
        (c * e - 1.0).abs()
    }

    /// Area of the region computed in fan coordinates with `n_r` Simpson nodes per ray.
    pub fn region_area(&self, n_r: usize) -> f64 {
        let n_r = n_r.max(3) | 1;
        let wt = crate::quad::trapezoid_weights(self.rays.len(), self.dtheta);
        self.rays
            .par_iter()
            .zip(wt.par_iter())
            .map(|(ray, &w)| {
                let Some((a, b)) = ray.span else { return 0.0 };
                let h = (b - a) / (n_r - 1) as f64;
                let ws = crate::quad::simpson_weights(n_r, h);
                let mut s = self.manifold.flow(&self.start(ray.theta), a);
                let mut acc = 0.0;
                for (k, wk) in ws.iter().enumerate() {
                    if k > 0 {
                        s = self.manifold.flow(&s, h);
                    }
                    acc += wk * s.j;
                }
                w * acc
            })
            .sum()
    }

    fn check_injective(&self) -> Result<()> {
        for ray in &self.rays {
            if let Some((a, b)) = ray.span {
                for k in 0..=16 {
                    let r = a + (b - a) * k as f64 / 16.0;
                    let (_, j) = self.point(r, ray.theta);
                    if !(j > 0.0) {
                        return Err(Error::NotSimple(format!(
                            "fan rays from {:?} focus inside the region at theta = {:.4}",
                            self.omega, ray.theta
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

fn ray_span(
    m: &SimpleManifold2D,
    omega: [f64; 2],
    theta: f64,
    region: Region,
    r_max: f64,
) -> Result<Option<(f64, f64)>> {
    let s0 = m.start(omega, [theta.cos(), theta.sin()]);
    if m.is_flat() {
        return Ok(flat_span(omega, [theta.cos(), theta.sin()], region));
    }
    let h = m.step();
    let refine = |s: &GeoState, inside_after: bool| -> f64 {
        let (mut lo, mut hi) = (0.0, h);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            let inside = region.contains(m.rk4(s, mid).x);
            if inside == inside_after {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    };
    let mut s = s0;
    let mut r = 0.0;
    let mut entry = None;
    while r < r_max {
        let next = m.rk4(&s, h);
        let was = region.contains(s.x);
        let is = region.contains(next.x);
        if !was && is && entry.is_none() {
            entry = Some(r + refine(&s, true));
        } else if was && !is {
            if let Some(e) = entry {
                return Ok(Some((e, r + refine(&s, false))));
            }
        }
        s = next;
        r += h;
    }
    Ok(None)
}

fn flat_span(o: [f64; 2], d: [f64; 2], region: Region) -> Option<(f64, f64)> {
    match region {
        Region::Disk { center, radius } => {
            let p = [o[0] - center[0], o[1] - center[1]];
            let b = p[0] * d[0] + p[1] * d[1];
            let c = p[0] * p[0] + p[1] * p[1] - radius * radius;
            let disc = b * b - c;
            if disc <= 0.0 {
                return None;
            }
            let (t0, t1) = (-b - disc.sqrt(), -b + disc.sqrt());
            (t1 > 0.0).then_some((t0.max(0.0), t1))
        }
        Region::Box { lo, hi } => {
            let (mut t0, mut t1) = (0.0f64, f64::INFINITY);
            for a in 0..2 {
                if d[a].abs() < 1e-300 {
                    if o[a] < lo[a] || o[a] > hi[a] {
                        return None;
                    }
                } else {
                    let (u, v) = ((lo[a] - o[a]) / d[a], (hi[a] - o[a]) / d[a]);
                    t0 = t0.max(u.min(v));
                    t1 = t1.min(u.max(v));
                }
            }
            (t1 > t0).then_some((t0, t1))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ConformalMetric;

    fn disk() -> Region {
        Region::Disk {
            center: [0.0, 0.0],
            radius: 1.0,
        }
    }

    #[test]
    fn euclidean_rays_are_lines() {
        let m = SimpleManifold2D::euclidean_disk(2.0);
        let fan = polar_normal_coords(&m, [-1.2, 0.0], disk(), 101).unwrap();
        let (p, j) = fan.point(1.5, 0.3);
        assert!((p[0] - (-1.2 + 1.5 * 0.3f64.cos())).abs() < 1e-14);
        assert!((j - 1.5).abs() < 1e-14);
        let (r, th, _) = fan.locate([0.1, 0.2]).unwrap();
        assert!((r - (1.3f64.powi(2) + 0.04).sqrt()).abs() < 1e-14);
        assert!((th - 0.2f64.atan2(1.3)).abs() < 1e-14);
    }

    #[test]
    fn euclidean_fan_area_is_pi() {
        let m = SimpleManifold2D::euclidean_disk(2.0);
        let fan = polar_normal_coords(&m, [-1.2, 0.0], disk(), 4001).unwrap();
        let a = fan.region_area(9);
        assert!((a - PI).abs() < 1e-4, "{a}");
    }

    #[test]
    fn curved_fan_roundtrip_and_speed() {
        let m = SimpleManifold2D::new(
            ConformalMetric::GaussianBump {
                amplitude: 0.2,
                width: 0.6,
                center: [0.0, 0.0],
            },
            2.0,
            0.005,
        )
        .unwrap();
        let fan = polar_normal_coords(&m, [-1.3, 0.1], disk(), 41).unwrap();
        for p in [[0.2, 0.1], [-0.5, -0.4], [0.7, 0.3]] {
            let (r, th, _) = fan.locate(p).unwrap();
            let (q, _) = fan.point(r, th);
            assert!((q[0] - p[0]).abs() < 1e-8 && (q[1] - p[1]).abs() < 1e-8);
            assert!(fan.ray_speed_defect(th, r) < 1e-6);
        }
    }

    #[test]
    fn centre_inside_region_is_rejected() {
        let m = SimpleManifold2D::euclidean_disk(2.0);
        assert!(polar_normal_coords(&m, [0.0, 0.0], disk(), 11).is_err());
    }

    #[test]
    fn box_span() {
        let r = Region::Box {
            lo: [0.0, 0.0],
            hi: [1.0, 1.0],
        };
        let s = flat_span([-1.0, 0.5], [1.0, 0.0], r).unwrap();
        assert!((s.0 - 1.0).abs() < 1e-15 && (s.1 - 2.0).abs() < 1e-15);
        assert!(flat_span([-1.0, 2.0], [1.0, 0.0], r).is_none());
    }
}

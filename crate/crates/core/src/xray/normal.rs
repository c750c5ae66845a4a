use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::geometry::SimpleManifold2D;

use super::boundary::BoundaryDirectionGrid;
use super::pixel::{DiscreteRayTransform, PixelGrid};
use super::transform::{ray_transform_fn, RayTransformData};

/// Attenuation constants with `|λ|` above this are refused for inversion.
pub const LAMBDA_THRESHOLD: f64 = 0.5;

pub fn check_lambda(lambda: f64) -> Result<()> {
    if lambda.abs() > LAMBDA_THRESHOLD || !lambda.is_finite() {
        return Err(invalid(format!("|λ| = {} exceeds the smallness threshold {LAMBDA_THRESHOLD}", lambda.abs())));
    }
    Ok(())
}

/// Kernel of `T_λ*T_λ` against `dV_g(y)`:
/// `K = (e^{−λφ₊} + e^{−λφ₋}) / j(d)` with `φ₊ = 2τ(x, −v) + d`,
/// `φ₋ = 2τ(x, v) − d`, `v` the unit direction at `x` towards `y`.
pub fn kernel_k_lambda(man: &SimpleManifold2D, x: [f64; 2], y: [f64; 2], lambda: f64) -> Result<f64> {
    if x == y {
        return Err(invalid("kernel is singular on the diagonal"));
    }
    let (v, d, j) = man.connect(x, y)?;
    let tp = man.exit_time(x, [-v[0], -v[1]])?;
    let tm = man.exit_time(x, v)?;
    Ok(((-lambda * (2.0 * tp + d)).exp() + (-lambda * (2.0 * tm - d)).exp()) / j)
}

/// Dense `S = D^{−1/2} TᵀWT D^{−1/2}`, the symmetric form of the discrete
/// normal operator `A = D⁻¹TᵀWT`.
#[derive(Debug, Clone)]
pub struct NormalOperatorMatrix {
    pub lambda: f64,
    pub matrix: DMatrix<f64>,
    pub symmetry_defect: f64,
    /// Ascending, filled by [`spectrum`](Self::spectrum).
    pub eigenvalues: Option<Vec<f64>>,
}

impl NormalOperatorMatrix {
    pub fn spectrum(&mut self) -> &[f64] {
        if self.eigenvalues.is_none() {
            let mut ev: Vec<f64> = SymmetricEigen::new(self.matrix.clone()).eigenvalues.iter().copied().collect();
            ev.sort_by(f64::total_cmp);
            self.eigenvalues = Some(ev);
        }
        self.eigenvalues.as_deref().unwrap()
    }

    pub fn condition_number(&mut self) -> f64 {
        let ev = self.spectrum();
        ev[ev.len() - 1] / ev[0]
    }
}

fn relative_asymmetry(m: &DMatrix<f64>) -> f64 {
    let scale = m.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1e-300);
    (&(m - m.transpose())).iter().fold(0.0f64, |a, v| a.max(v.abs())) / scale
}

/// Assemble the dense normal matrix from the sparse rows, in fixed ray chunks.
pub fn normal_operator(t: &DiscreteRayTransform) -> NormalOperatorMatrix {
    let n = t.pixels.len();
    let scale: Vec<f64> = t.pixels.mass().iter().map(|m| 1.0 / m.sqrt()).collect();
    let n_chunks = 16;
    let per = t.rays.len().div_ceil(n_chunks);
    let parts: Vec<DMatrix<f64>> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut m = DMatrix::<f64>::zeros(n, n);
            for r in c * per..((c + 1) * per).min(t.rays.len()) {
                let s = &t.rays.samples[r];
                let a = s.weight * s.mu;
                let (cols, vals) = t.row(r);
                for (&i, wi) in cols.iter().zip(vals) {
                    let ai = a * wi * scale[i as usize];
                    for (&j, wj) in cols.iter().zip(vals) {
                        m[(i as usize, j as usize)] += ai * wj * scale[j as usize];
                    }
                }
            }
            m
        })
        .collect();
    let mut matrix = DMatrix::<f64>::zeros(n, n);
    for p in parts {
        matrix += p;
    }
    let symmetry_defect = relative_asymmetry(&matrix);
    NormalOperatorMatrix {
        lambda: t.lambda,
        matrix,
        symmetry_defect,
        eigenvalues: None,
    }
}

/// Kernel quadrature of `A f(x_i) = ∫ K(x_i, y) f(y) dV(y)` on the pixels:
/// midpoint rule off the diagonal, and on the diagonal the integral of the
/// `√c(x)/|x − y|` singularity over the pixel times the averaged numerator.
pub fn kernel_matrix(man: &SimpleManifold2D, pixels: &PixelGrid, lambda: f64) -> Result<DMatrix<f64>> {
    let n = pixels.len();
    let h = pixels.h();
    let mass = pixels.mass();
    let rows = (0..n)
        .into_par_iter()
        .map(|i| {
            let x = pixels.centre(i);
            let mut row = vec![0.0; n];
            for (j, r) in row.iter_mut().enumerate() {
                if j != i {
                    *r = kernel_k_lambda(man, x, pixels.centre(j), lambda)? * mass[j];
                }
            }
            let m = 16;
            let mut num = 0.0;
            for k in 0..m {
                let th = 2.0 * PI * k as f64 / m as f64;
                num += (-2.0 * lambda * man.exit_time(x, [th.cos(), th.sin()])?).exp();
            }
            // both φ± reduce to 2τ in the limit, averaged over directions
            let num = 2.0 * num / m as f64;
            row[i] = num * man.area_density(x).sqrt() * 4.0 * (1.0 + 2f64.sqrt()).ln() * h;
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

/// A linear map from pixel unknowns to ray data, with the data weights
/// folded into its transpose. [`invert_normal`] only needs this much.
pub trait RayOperator {
    fn n_data(&self) -> usize;
    /// Pixel masses `D`.
    fn mass(&self) -> &[f64];
    fn forward(&self, f: &[f64]) -> Vec<f64>;
    /// `TᵀW d`.
    fn weighted_transpose(&self, d: &[f64]) -> Vec<f64>;
}

impl RayOperator for DiscreteRayTransform {
    fn n_data(&self) -> usize {
        self.rays.len()
    }
    fn mass(&self) -> &[f64] {
        self.pixels.mass()
    }
    fn forward(&self, f: &[f64]) -> Vec<f64> {
        self.apply(f).values
    }
    fn weighted_transpose(&self, d: &[f64]) -> Vec<f64> {
        DiscreteRayTransform::weighted_transpose(self, d)
    }
}

/// Result of [`invert_normal`].
#[derive(Debug, Clone)]
pub struct Inversion {
    pub f: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

/// Solve `(A + ridge) f = T* data`, i.e. `(TᵀWT + ridge·D) f = TᵀW data`,
/// by conjugate gradients preconditioned with `D`, to relative residual
/// `tol`, at most `10·n` iterations.
pub fn invert_normal<T: RayOperator>(t: &T, data: &RayTransformData, ridge: f64, tol: f64) -> Result<Inversion> {
    if !(ridge >= 0.0) {
        return Err(invalid("ridge must be nonnegative"));
    }
    if data.values.len() != t.n_data() {
        return Err(Error::Shape("ray data does not match the operator".into()));
    }
    let mass = t.mass();
    let n = mass.len();
    let b = t.weighted_transpose(&data.values);
    let apply = |f: &[f64]| -> Vec<f64> {
        let mut y = t.weighted_transpose(&t.forward(f));
        for ((y, m), f) in y.iter_mut().zip(mass).zip(f) {
            *y += ridge * m * f;
        }
        y
    };
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let bnorm = dot(&b, &b).sqrt();
    let mut f = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok(Inversion {
            f,
            iterations: 0,
            residual: 0.0,
        });
    }
    let mut r = b.clone();
    let mut z: Vec<f64> = r.iter().zip(mass).map(|(r, m)| r / m).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let max_iter = 10 * n;
    for it in 1..=max_iter {
        let ap = apply(&p);
        let alpha = rz / dot(&p, &ap);
        for k in 0..n {
            f[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        let res = dot(&r, &r).sqrt() / bnorm;
        if res <= tol {
            return Ok(Inversion {
                f,
                iterations: it,
                residual: res,
            });
        }
        for k in 0..n {
            z[k] = r[k] / mass[k];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for k in 0..n {
            p[k] = z[k] + beta * p[k];
        }
    }
    Err(Error::NoConvergence {
        method: "normal-equation CG",
        iterations: max_iter,
        residual: dot(&r, &r).sqrt() / bnorm,
    })
}

/// Rayleigh quotients `‖T_λ f_κ‖²_μ / ‖f_κ‖²` for plane waves
/// `f_κ = e^{−|x|²/(2σ²)} cos(κ x₁)` and the least-squares log–log slope.
pub fn smoothing_order_fit(
    man: &SimpleManifold2D,
    rays: &BoundaryDirectionGrid,
    kappas: &[f64],
    lambda: f64,
    sigma: f64,
) -> (Vec<f64>, f64) {
    let m = 512;
    let r = man.radius();
    let hx = 2.0 * r / m as f64;
    let quotients: Vec<f64> = kappas
        .iter()
        .map(|&k| {
            let f = move |x: [f64; 2]| {
                if x[0] * x[0] + x[1] * x[1] >= r * r {
                    return 0.0;
                }
                (-(x[0] * x[0] + x[1] * x[1]) / (2.0 * sigma * sigma)).exp() * (k * x[0]).cos()
            };
            let tf = ray_transform_fn(man, rays, f, lambda, 0.005);
            let num = rays.inner_mu(&tf.values, &tf.values);
            let den: f64 = (0..m * m)
                .into_par_iter()
                .map(|p| {
                    let x = [-r + ((p % m) as f64 + 0.5) * hx, -r + ((p / m) as f64 + 0.5) * hx];
                    f(x).powi(2) * man.area_density(x)
                })
                .sum::<f64>()
                * hx
                * hx;
            num / den
        })
        .collect();
    let lx: Vec<f64> = kappas.iter().map(|k| k.ln()).collect();
    let ly: Vec<f64> = quotients.iter().map(|q| q.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    (quotients, sxy / sxx)
}

/// Condition number of the dense normal matrix for each `λ`.
pub fn condition_sweep(
    man: &SimpleManifold2D,
    n_pixels: usize,
    n_alpha: usize,
    n_beta: usize,
    lambdas: &[f64],
) -> Result<Vec<(f64, f64)>> {
    let pixels = PixelGrid::new(man, n_pixels)?;
    let rays = BoundaryDirectionGrid::new(man, n_alpha, n_beta)?;
    lambdas
        .iter()
        .map(|&l| {
            check_lambda(l)?;
            let t = DiscreteRayTransform::new(man, pixels.clone(), rays.clone(), l);
            Ok((l, normal_operator(&t).condition_number()))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ConformalMetric;
    use crate::xray::transform::normal_apply_fn;

    #[test]
    fn euclidean_kernel_closed_form() {
        let man = SimpleManifold2D::euclidean_disk(1.0);
        for (x, y) in [([0.1, 0.2], [-0.4, 0.3]), ([0.0, 0.0], [0.5, 0.5]), ([0.7, -0.1], [0.6, 0.0])] {
            let d = ((x[0] - y[0]) as f64).hypot(x[1] - y[1]);
            let k = kernel_k_lambda(&man, x, y, 0.0).unwrap();
            assert!((k - 2.0 / d).abs() < 1e-12 * k);
            let k1 = kernel_k_lambda(&man, x, y, 0.3).unwrap();
            let k2 = kernel_k_lambda(&man, y, x, 0.3).unwrap();
            assert!((k1 - k2).abs() < 1e-12 * k1);
        }
        assert!(kernel_k_lambda(&man, [0.1, 0.1], [0.1, 0.1], 0.0).is_err());
    }

    #[test]
    fn bump_kernel_is_symmetric() {
        let metric = ConformalMetric::GaussianBump {
            amplitude: 0.3,
            width: 0.5,
            center: [0.1, 0.0],
        };
        let man = SimpleManifold2D::new(metric, 1.0, 0.002).unwrap();
        for (x, y) in [([0.1, 0.2], [-0.4, 0.3]), ([0.3, -0.2], [-0.1, 0.5])] {
            let k1 = kernel_k_lambda(&man, x, y, 0.3).unwrap();
            let k2 = kernel_k_lambda(&man, y, x, 0.3).unwrap();
            assert!((k1 - k2).abs() < 1e-8 * k1, "{k1} {k2}");
        }
    }

    #[test]
    fn constant_at_centre_is_four_pi() {
        let man = SimpleManifold2D::euclidean_disk(1.0);
        let v = normal_apply_fn(&man, [0.0, 0.0], |_| 1.0, 0.0, 64, 0.01).unwrap();
        assert!((v - 4.0 * PI).abs() < 1e-10);
    }

    #[test]
    fn kernel_matrix_matches_composition() {
        let man = SimpleManifold2D::euclidean_disk(1.0);
        let pixels = PixelGrid::new(&man, 48).unwrap();
        let f = |x: [f64; 2]| (-((x[0] - 0.1).powi(2) + x[1] * x[1]) / (2.0 * 0.15 * 0.15)).exp();
        for lambda in [0.0, 0.3] {
            let k = kernel_matrix(&man, &pixels, lambda).unwrap();
            let fv = nalgebra::DVector::from_vec(pixels.sample(f));
            let kf = &k * fv;
            let (mut num, mut den) = (0.0, 0.0);
            for i in (0..pixels.len()).step_by(37) {
                let c = normal_apply_fn(&man, pixels.centre(i), f, lambda, 256, 0.005).unwrap();
                num += (kf[i] - c).powi(2);
                den += c * c;
            }
            let rel = (num / den).sqrt();
            assert!(rel < 0.02, "λ = {lambda}: {rel}");
        }
    }

    #[test]
    fn dense_normal_matrix_is_symmetric_psd() {
        let man = SimpleManifold2D::euclidean_disk(1.0);
        let t = DiscreteRayTransform::new(
            &man,
            PixelGrid::new(&man, 12).unwrap(),
            BoundaryDirectionGrid::new(&man, 48, 24).unwrap(),
            0.3,
        );
        let mut a = normal_operator(&t);
        assert!(a.symmetry_defect <= 1e-8);
        let ev = a.spectrum().to_vec();
        assert!(ev[0] > -1e-10 * ev[ev.len() - 1]);
    }

    #[test]
    fn zero_data_gives_zero() {
        let man = SimpleManifold2D::euclidean_disk(1.0);
        let t = DiscreteRayTransform::new(
            &man,
            PixelGrid::new(&man, 8).unwrap(),
            BoundaryDirectionGrid::new(&man, 16, 8).unwrap(),
            0.0,
        );
        let inv = invert_normal(&t, &RayTransformData::zeros(0.0, t.rays.len()), 1e-6, 1e-8).unwrap();
        assert!(inv.f.iter().all(|v| *v == 0.0));
        assert!(check_lambda(0.6).is_err());
    }

    #[test]
    fn condition_sweep_is_recorded() {
        let man = SimpleManifold2D::euclidean_disk(1.0);
        let sw = condition_sweep(&man, 12, 48, 24, &[0.0, 0.25, 0.5]).unwrap();
        assert_eq!(sw.len(), 3);
        assert!(sw.iter().all(|(_, c)| c.is_finite() && *c >= 1.0));
        assert!(condition_sweep(&man, 12, 48, 24, &[0.7]).is_err());
    }
}

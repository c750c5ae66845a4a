use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::geometry::SimpleManifold2D;
use crate::xray::{invert_normal, BoundaryDirectionGrid, DiscreteRayTransform, PixelGrid, RayOperator, RayTransformData};

use super::assemble::{dirichlet_kernel, fan_thetas, FLambdaField};

/// Maps `f_λ` on the pixels to the smoothed fan samples `g_K(θ_j)` of every
/// centre: row `(ω, j)` is `∫ D_K(θ' − θ_j) e^{−λ s_in(θ')} (T_λ f)(θ') dθ'`.
#[derive(Debug, Clone)]
pub struct FanOperator {
    pub lambda: f64,
    pub pixels: PixelGrid,
    rows: Vec<Vec<f64>>,
    /// `Δθ_j` per row.
    weights: Vec<f64>,
}

impl FanOperator {
    pub fn new(
        man: &SimpleManifold2D,
        pixels: &PixelGrid,
        omegas: &[[f64; 2]],
        harmonics: usize,
        fan_rays: usize,
        lambda: f64,
    ) -> Result<Self> {
        let r = man.radius();
        let per: Vec<Vec<Vec<f64>>> = omegas
            .par_iter()
            .map(|&w| {
                let d = w[0].hypot(w[1]);
                if d <= r {
                    return Err(invalid("fan centre inside the reconstruction disk"));
                }
                // midpoint rule over the cone that sees the disk
                let half = (r / d).asin();
                let c = (-w[1]).atan2(-w[0]);
                let dt = 2.0 * half / fan_rays as f64;
                let fine: Vec<f64> = (0..fan_rays).map(|i| c - half + (i as f64 + 0.5) * dt).collect();
                let (fan, s_in) = BoundaryDirectionGrid::fan(man, w, &fine)?;
                let t = DiscreteRayTransform::new(man, pixels.clone(), fan, lambda);
                let rows = fan_thetas(w, harmonics)
                    .iter()
                    .map(|&th| {
                        let mut row = vec![0.0; pixels.len()];
                        for (i, &tf) in fine.iter().enumerate() {
                            let a = dt * dirichlet_kernel(harmonics, tf - th) * (-lambda * s_in[i]).exp();
                            let (cols, vals) = t.row(i);
                            for (&k, v) in cols.iter().zip(vals) {
                                row[k as usize] += a * v;
                            }
                        }
                        row
                    })
                    .collect();
                Ok(rows)
            })
            .collect::<Result<Vec<_>>>()?;
        let rows: Vec<Vec<f64>> = per.into_iter().flatten().collect();
        let weights = vec![2.0 * PI / (2 * harmonics + 1) as f64; rows.len()];
        Ok(Self {
            lambda,
            pixels: pixels.clone(),
            rows,
            weights,
        })
    }
}

impl RayOperator for FanOperator {
    fn n_data(&self) -> usize {
        self.rows.len()
    }
    fn mass(&self) -> &[f64] {
        self.pixels.mass()
    }
    fn forward(&self, f: &[f64]) -> Vec<f64> {
        self.rows.iter().map(|r| r.iter().zip(f).map(|(a, b)| a * b).sum()).collect()
    }
    fn weighted_transpose(&self, d: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.pixels.len()];
        for ((r, w), d) in self.rows.iter().zip(&self.weights).zip(d) {
            for (o, a) in out.iter_mut().zip(r) {
                *o += w * d * a;
            }
        }
        out
    }
}

/// `f_λ` on the pixels for one λ, or the reason it is missing.
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaSlice {
    pub lambda: f64,
    pub f: Option<Vec<Complex64>>,
    pub iterations: usize,
    pub residual: f64,
    pub failure: Option<String>,
}

/// Inverts the fan data of every λ. `fields` holds one entry per (ω, λ),
/// grouped by λ in the order of `lambdas`; `ops` one operator per λ.
pub fn invert_fields(
    ops: &[FanOperator],
    fields: &[FLambdaField],
    lambdas: &[f64],
    ridge: f64,
    tol: f64,
) -> Result<Vec<LambdaSlice>> {
    if ops.len() != lambdas.len() {
        return Err(invalid("one fan operator per lambda"));
    }
    lambdas
        .par_iter()
        .zip(ops)
        .map(|(&lambda, op)| {
            let data: Vec<Complex64> = fields
                .iter()
                .filter(|f| f.lambda == lambda)
                .flat_map(|f| f.values.iter().copied())
                .collect();
            if data.len() != op.n_data() {
                return Err(invalid(format!("lambda {lambda}: {} fan samples for {} rows", data.len(), op.n_data())));
            }
            let part = |pick: fn(&Complex64) -> f64| {
                let d = RayTransformData {
                    lambda,
                    values: data.iter().map(pick).collect(),
                };
                invert_normal(op, &d, ridge, tol)
            };
            Ok(match (part(|c| c.re), part(|c| c.im)) {
                (Ok(re), Ok(im)) => LambdaSlice {
                    lambda,
                    f: Some(re.f.iter().zip(&im.f).map(|(a, b)| Complex64::new(*a, *b)).collect()),
                    iterations: re.iterations + im.iterations,
                    residual: re.residual.max(im.residual),
                    failure: None,
                },
                (Err(e), _) | (_, Err(e)) => {
                    log::warn!("lambda {lambda}: inversion failed: {e}");
                    LambdaSlice {
                        lambda,
                        f: None,
                        iterations: 0,
                        residual: f64::NAN,
                        failure: Some(e.to_string()),
                    }
                }
            })
        })
        .collect()
}

/// `q̂(x₁, ·) = (1/π) Re ∫₀^Λ f_λ e^{−iλx₁} dλ` by the trapezoid rule over
/// the surviving λ (conjugate symmetry supplies `λ < 0`). Row-major
/// `[x₁][pixel]`.
pub fn inverse_fourier_x1(slices: &[LambdaSlice], x1: &[f64], n_pix: usize) -> Vec<f64> {
    let mut ok: Vec<(f64, &Vec<Complex64>)> = slices.iter().filter_map(|s| s.f.as_ref().map(|f| (s.lambda, f))).collect();
    ok.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut w = vec![0.0; ok.len()];
    for i in 1..ok.len() {
        let h = 0.5 * (ok[i].0 - ok[i - 1].0);
        w[i - 1] += h;
        w[i] += h;
    }
    let mut out = vec![0.0; x1.len() * n_pix];
    for (a, &x) in x1.iter().enumerate() {
        for ((lambda, f), wk) in ok.iter().zip(&w) {
            let e = Complex64::from_polar(wk / PI, -lambda * x);
            for (o, v) in out[a * n_pix..(a + 1) * n_pix].iter_mut().zip(f.iter()) {
                *o += (v * e).re;
            }
        }
    }
    out
}

/// Relative `L²` and `L^{3/2}` errors with quadrature weights.
pub fn relative_errors(est: &[f64], truth: &[f64], weights: &[f64]) -> (f64, f64) {
    let norm = |p: f64, f: &dyn Fn(usize) -> f64| -> f64 {
        (0..weights.len()).map(|i| weights[i] * f(i).abs().powf(p)).sum::<f64>().powf(1.0 / p)
    };
    let rel = |p: f64| {
        let t = norm(p, &|i| truth[i]);
        let d = norm(p, &|i| est[i] - truth[i]);
        if t == 0.0 {
            d
        } else {
            d / t
        }
    };
    (rel(2.0), rel(1.5))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fourier_inversion_of_a_known_transform() {
        // f_λ = 2 sin(λa)/λ is the transform of 1_{|x₁| < a}; with only
        // λ ∈ [0, Λ] the synthesis is the sine-integral profile.
        let a = 0.2;
        let lambdas: Vec<f64> = (0..=4000).map(|k| k as f64 * 0.5).collect();
        let slices: Vec<LambdaSlice> = lambdas
            .iter()
            .map(|&l| LambdaSlice {
                lambda: l,
                f: Some(vec![Complex64::new(if l == 0.0 { 2.0 * a } else { 2.0 * (l * a).sin() / l }, 0.0)]),
                iterations: 0,
                residual: 0.0,
                failure: None,
            })
            .collect();
        let q = inverse_fourier_x1(&slices, &[0.0, 0.1, 0.35], 1);
        assert!((q[0] - 1.0).abs() < 0.02 && (q[1] - 1.0).abs() < 0.02 && q[2].abs() < 0.02, "{q:?}");
    }

    #[test]
    fn failed_slices_are_skipped() {
        let mk = |l: f64, f: Option<f64>| LambdaSlice {
            lambda: l,
            f: f.map(|v| vec![Complex64::new(v, 0.0)]),
            iterations: 0,
            residual: 0.0,
            failure: None,
        };
        let q = inverse_fourier_x1(&[mk(0.0, Some(1.0)), mk(0.5, None), mk(1.0, Some(1.0))], &[0.0], 1);
        assert!((q[0] - 1.0 / PI).abs() < 1e-15);
    }

    #[test]
    fn errors_are_relative() {
        let (l2, l32) = relative_errors(&[1.1, 2.0], &[1.0, 2.0], &[1.0, 1.0]);
        assert!((l2 - 0.1 / 5f64.sqrt()).abs() < 1e-12);
        assert!(l32 > 0.0 && l32 < 0.1);
        assert_eq!(relative_errors(&[0.0], &[0.0], &[1.0]).0, 0.0);
    }
}

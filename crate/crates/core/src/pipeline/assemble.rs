use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{invalid, Error, Result};

/// Gram systems beyond this condition number are rejected.
pub const GRAM_CONDITION_LIMIT: f64 = 1e6;

/// Band-limited attenuated fan data of `f_λ` seen from one centre `ω`:
/// `g_K(θ_j)` where `g(θ) = ∫ f_λ(ω + r e_θ) e^{−λr} dr` and `g_K` keeps its
/// Fourier modes `|m| ≤ K`.
#[derive(Debug, Clone, PartialEq)]
pub struct FLambdaField {
    pub lambda: f64,
    pub omega_index: usize,
    pub omega: [f64; 2],
    pub harmonics: usize,
    /// `2K + 1` equispaced directions, the first pointing at the origin.
    pub thetas: Vec<f64>,
    pub values: Vec<Complex64>,
    /// τ behind each probe moment, `m = −K..K`.
    pub taus: Vec<f64>,
    pub gram_condition: f64,
}

/// Fan sample directions for `K` harmonics, starting at the direction from
/// `ω` to the origin.
pub fn fan_thetas(omega: [f64; 2], harmonics: usize) -> Vec<f64> {
    let n = 2 * harmonics + 1;
    let c = (-omega[1]).atan2(-omega[0]);
    (0..n).map(|j| c + 2.0 * PI * j as f64 / n as f64).collect()
}

/// `(1/2π)(1 + 2 Σ_{m ≤ K} cos mφ)`, the smoothing kernel behind `g_K`.
pub fn dirichlet_kernel(harmonics: usize, phi: f64) -> f64 {
    (1.0 + 2.0 * (1..=harmonics).map(|m| (m as f64 * phi).cos()).sum::<f64>()) / (2.0 * PI)
}

/// Probe Gram matrix `G_{mk} = ∫ e^{imθ} e^{−ikθ} dθ` by quadrature.
fn gram(harmonics: usize) -> DMatrix<Complex64> {
    let k = harmonics as i64;
    let nq = 4 * harmonics + 4;
    let dt = 2.0 * PI / nq as f64;
    let n = 2 * harmonics + 1;
    DMatrix::from_fn(n, n, |a, b| {
        let (m, l) = (a as i64 - k, b as i64 - k);
        (0..nq).map(|q| Complex64::from_polar(dt, (m - l) as f64 * q as f64 * dt)).sum()
    })
}

/// Deconvolves the probe moments `M_m = ∫ g(θ) e^{imθ} dθ`, `m = −K..K`,
/// into samples of `g_K`.
pub fn assemble_f_lambda(
    moments: &[Complex64],
    taus: &[f64],
    omega_index: usize,
    omega: [f64; 2],
    lambda: f64,
) -> Result<FLambdaField> {
    if moments.len() % 2 == 0 || moments.len() != taus.len() {
        return Err(invalid("need 2K+1 moments and one tau per moment"));
    }
    let harmonics = moments.len() / 2;
    let g = gram(harmonics);
    let sv = g.clone().svd(false, false).singular_values;
    let cond = sv.max() / sv.min();
    if !(cond <= GRAM_CONDITION_LIMIT) {
        return Err(Error::IllConditionedProbes(cond));
    }
    let c = g
        .lu()
        .solve(&DVector::from_column_slice(moments))
        .ok_or(Error::IllConditionedProbes(f64::INFINITY))?;
    let thetas = fan_thetas(omega, harmonics);
    let k = harmonics as i64;
    let values = thetas
        .iter()
        .map(|&t| {
            c.iter()
                .enumerate()
                .map(|(i, ci)| ci * Complex64::from_polar(1.0, -((i as i64 - k) as f64) * t))
                .sum()
        })
        .collect();
    Ok(FLambdaField {
        lambda,
        omega_index,
        omega,
        harmonics,
        thetas,
        values,
        taus: taus.to_vec(),
        gram_condition: cond,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn moments_of<F: Fn(f64) -> Complex64>(g: F, k: i64) -> Vec<Complex64> {
        let n = 4096;
        let dt = 2.0 * PI / n as f64;
        (-k..=k)
            .map(|m| (0..n).map(|i| g(i as f64 * dt) * Complex64::from_polar(dt, m as f64 * i as f64 * dt)).sum())
            .collect()
    }

    #[test]
    fn trig_polynomial_is_recovered() {
        let g = |t: f64| Complex64::new(1.0 + 0.5 * t.cos() - 0.25 * (2.0 * t).sin(), 0.3 * t.sin());
        let f = assemble_f_lambda(&moments_of(g, 2), &[8.0; 5], 0, [-0.9, 0.1], 0.25).unwrap();
        assert!((f.gram_condition - 1.0).abs() < 1e-12);
        for (t, v) in f.thetas.iter().zip(&f.values) {
            assert!((v - g(*t)).norm() < 1e-12);
        }
    }

    #[test]
    fn constant_probe_gives_the_angular_average() {
        let g = |t: f64| Complex64::new((3.0 * t).cos().exp(), 0.0);
        let m = moments_of(g, 0);
        let f = assemble_f_lambda(&m, &[8.0], 0, [1.0, 0.0], 0.0).unwrap();
        assert_eq!(f.values.len(), 1);
        let avg = m[0].re / (2.0 * PI);
        assert!((f.values[0].re - avg).abs() < 1e-12);
    }

    #[test]
    fn band_limit_matches_the_kernel() {
        // g_K(θ) = ∫ g(θ') D_K(θ' − θ) dθ'
        let g = |t: f64| Complex64::new((-4.0 * (t - 0.3).powi(2)).exp(), 0.0);
        let f = assemble_f_lambda(&moments_of(g, 3), &[8.0; 7], 0, [0.0, -1.0], 0.0).unwrap();
        let n = 4096;
        let dt = 2.0 * PI / n as f64;
        for (t, v) in f.thetas.iter().zip(&f.values) {
            let s: f64 = (0..n).map(|i| dt * g(i as f64 * dt).re * dirichlet_kernel(3, i as f64 * dt - t)).sum();
            assert!((v.re - s).abs() < 1e-6, "{} {s}", v.re);
        }
    }

    #[test]
    fn mismatched_input_is_rejected() {
        assert!(assemble_f_lambda(&[Complex64::default(); 4], &[8.0; 4], 0, [1.0, 0.0], 0.0).is_err());
    }
}

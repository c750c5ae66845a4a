//! Empirical checks of the cluster, L², H¹ and L^p bounds for the Carleman inverse.

use std::io::Write;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{EigenBasis, ProductCylinder};

use super::clusters::spectral_clusters;
use super::field::{d1_fourth_order, SpectralField};
use super::multiplier::m_tau_real;
use super::operator::{apply_g_tau, conjugated_laplacian, convolve_mode, CarlemanParams};

/// One measured ratio. For cluster reports the `tau` column carries the cluster index `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateRow {
    pub tau: f64,
    pub norm_pair: String,
    pub ratio: f64,
    pub input_id: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EstimateReport {
    pub rows: Vec<EstimateRow>,
    /// τ values skipped as non-admissible, with the reason.
    pub skipped: Vec<(f64, String)>,
}

impl EstimateReport {
    pub fn push(&mut self, tau: f64, pair: &str, ratio: f64, input: impl Into<String>) {
        self.rows.push(EstimateRow {
            tau,
            norm_pair: pair.to_string(),
            ratio,
            input_id: input.into(),
        });
    }

    pub fn pairs(&self) -> Vec<String> {
        let mut v: Vec<String> = self.rows.iter().map(|r| r.norm_pair.clone()).collect();
        v.sort();
        v.dedup();
        v
    }

    pub fn taus(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.rows.iter().map(|r| r.tau).collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    }

    /// Maximum over stored inputs for one `(τ, pair)`.
    pub fn max_ratio(&self, tau: f64, pair: &str) -> Option<f64> {
        self.rows
            .iter()
            .filter(|r| r.tau == tau && r.norm_pair == pair)
            .map(|r| r.ratio)
            .reduce(f64::max)
    }

    /// `(max, min)` over τ of the per-τ maxima for a pair.
    pub fn spread(&self, pair: &str) -> Option<(f64, f64)> {
        let m: Vec<f64> = self
            .taus()
            .iter()
            .filter_map(|&t| self.max_ratio(t, pair))
            .collect();
        if m.is_empty() {
            return None;
        }
        Some((
            m.iter().cloned().fold(f64::MIN, f64::max),
            m.iter().cloned().fold(f64::MAX, f64::min),
        ))
    }

    /// Fitted constant: maximum over all stored inputs and τ.
    pub fn constant(&self, pair: &str) -> Option<f64> {
        self.spread(pair).map(|s| s.0)
    }

    /// Least-squares slope of `log max_ratio` against `log τ`.
    pub fn loglog_slope(&self, pair: &str) -> Option<f64> {
        let pts: Vec<(f64, f64)> = self
            .taus()
            .iter()
            .filter_map(|&t| self.max_ratio(t, pair).map(|r| (t.abs().ln(), r.ln())))
            .collect();
        if pts.len() < 2 {
            return None;
        }
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        Some(sxy / sxx)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        for r in &self.rows {
            wr.serialize(r)?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: std::io::Read>(r: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let rows = rd.deserialize().collect::<std::result::Result<Vec<EstimateRow>, _>>()?;
        Ok(Self {
            rows,
            skipped: Vec::new(),
        })
    }
}

fn base_lp(basis: &EigenBasis, vals: &[Complex64], p: f64) -> f64 {
    let w = basis.cell_weight();
    (vals.iter().map(|v| v.norm().powf(p)).sum::<f64>() * w).powf(1.0 / p)
}

/// Ratios `‖χ_k u‖_{L^{2n/(n−2)}} / ((1+k)^{1/2−1/n}‖u‖_{L²})` and the dual
/// `‖χ_k u‖_{L²} / ((1+k)^{1/2−1/n}‖u‖_{L^{2n/(n+2)}})` on the base, `n = dim M₀ + 1`.
///
/// Inputs per cluster: every single mode, `trials` random combinations inside
/// the cluster, and the point-concentrated cluster kernel `Σ_{j∈k} ψ_j conj(ψ_j(x₀))`.
pub fn verify_cluster_estimates(
    basis: &EigenBasis,
    trials: usize,
    max_k: usize,
    seed: u64,
) -> Result<EstimateReport> {
    if trials < 1 {
        return Err(invalid("trials must be >= 1"));
    }
    let n = (basis.dim() + 1) as f64;
    let p_hi = 2.0 * n / (n - 2.0);
    let p_lo = 2.0 * n / (n + 2.0);
    let expo = 0.5 - 1.0 / n;
    let clusters = spectral_clusters(basis);
    let mut rep = EstimateReport::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x0 = basis.grid_point(0);
    for cl in clusters.iter().take(max_k + 1) {
        if cl.indices.is_empty() {
            continue;
        }
        let k = cl.k as f64;
        let scale = (1.0 + k).powf(expo);
        let mut inputs: Vec<(String, Vec<Complex64>)> = Vec::new();
        for &j in &cl.indices {
            let mut c = vec![Complex64::default(); basis.len()];
            c[j] = Complex64::new(1.0, 0.0);
            inputs.push((format!("mode-{j}"), c));
        }
        for t in 0..trials {
            let mut c = vec![Complex64::default(); basis.len()];
            for &j in &cl.indices {
                c[j] = Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5);
            }
            inputs.push((format!("random-{t}"), c));
        }
        let mut c = vec![Complex64::default(); basis.len()];
        for &j in &cl.indices {
            c[j] = basis.eval(j, &x0).conj();
        }
        inputs.push(("zonal".to_string(), c));

        for (id, c) in inputs {
            let vals = basis.synthesize(&c);
            let l2 = c.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
            let hi = base_lp(basis, &vals, p_hi);
            let lo = base_lp(basis, &vals, p_lo);
            rep.push(k, "cluster_L2_to_L6", hi / (scale * l2), id.clone());
            rep.push(k, "cluster_L6/5_to_L2", l2 / (scale * lo), id);
        }
    }
    Ok(rep)
}

/// Inputs for the operator-norm sweep.
#[derive(Debug, Clone)]
pub struct SweepOptions {
    /// Core interval where the cutoff equals one; inputs are supported inside it.
    pub core: (f64, f64),
    /// Widths, in units of `1/τ`, of the concentrated Gaussian inputs.
    pub gaussian_widths: Vec<f64>,
    /// Number of random smooth inputs per τ.
    pub random_inputs: usize,
    pub seed: u64,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            core: (-0.5, 0.5),
            gaussian_widths: vec![1.5, 3.0],
            random_inputs: 2,
            seed: 7,
        }
    }
}

fn smooth_bump(x: f64, c: f64, r: f64) -> f64 {
    let s = (x - c) / r;
    if s.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - s * s)).exp()
    }
}

/// Per-mode dense matrix of `G_τ` acting on x₁ samples (the kernel is real).
fn mode_matrix(mu: f64, tau: f64, h: f64, chi: &[f64]) -> Result<DMatrix<f64>> {
    let n = chi.len();
    let mut m = DMatrix::zeros(n, n);
    let mut e = vec![Complex64::default(); n];
    for c in 0..n {
        e[c] = Complex64::new(1.0, 0.0);
        let g = convolve_mode(&e, mu, tau, h)?;
        for r in 0..n {
            m[(r, c)] = g[r].re * chi[r];
        }
        e[c] = Complex64::default();
    }
    Ok(m)
}

fn top_singular(a: &DMatrix<f64>, seed: u64) -> (f64, Vec<f64>) {
    let n = a.ncols();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v = nalgebra::DVector::from_fn(n, |_, _| 1.0 + 0.1 * rng.gen::<f64>());
    v /= v.norm();
    let ata = a.transpose() * a;
    let mut s = 0.0;
    for _ in 0..200 {
        let w = &ata * &v;
        let nw = w.norm();
        if nw == 0.0 {
            return (0.0, v.iter().cloned().collect());
        }
        let next = w / nw;
        let done = (nw - s).abs() <= 1e-10 * nw;
        s = nw;
        v = next;
        if done {
            break;
        }
    }
    (s.sqrt(), v.iter().cloned().collect())
}

/// Measured ratios over a τ sweep:
/// `|τ|‖G_τf‖_{L²}/‖f‖_{L²}`, `‖G_τf‖_{H¹}/‖f‖_{L²}`, `‖G_τf‖_{L^{2n/(n−2)}}/‖f‖_{L^{2n/(n+2)}}`,
/// plus `|τ|‖v‖/‖e^{τx₁}Δe^{−τx₁}v‖` for interior-supported `v`.
///
/// The L² and H¹ rows include the exact per-mode operator norms (top singular
/// vectors of the discretised mode operators); the L^p rows use concentrated
/// Gaussians, near-resonant modes and random smooth inputs.
pub fn verify_carleman_sweep(
    cyl: &Arc<ProductCylinder>,
    taus: &[f64],
    opts: &SweepOptions,
) -> Result<EstimateReport> {
    let base = cyl.base();
    let n = cyl.dim() as f64;
    let p_hi = 2.0 * n / (n - 2.0);
    let p_lo = 2.0 * n / (n + 2.0);
    let h = cyl.h1();
    let w = cyl.x1_weights();
    let mut rep = EstimateReport::default();
    let (a, b) = opts.core;
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);

    for &tau in taus {
        let params = match CarlemanParams::new(tau, opts.core, base) {
            Ok(p) => p,
            Err(e) => {
                rep.skipped.push((tau, e.to_string()));
                continue;
            }
        };
        let chi: Vec<f64> = cyl.x1_grid().iter().map(|&x| params.cutoff.eval(x)).collect();

        // exact per-mode operator norms, one representative per eigenvalue
        let mut groups: Vec<usize> = Vec::new();
        for j in 0..base.len() {
            if groups.last().map(|&g| base.eigenvalue(g) != base.eigenvalue(j)).unwrap_or(true) {
                groups.push(j);
            }
        }
        let sw: Vec<f64> = w.iter().map(|x| x.sqrt()).collect();
        let norms: Vec<(usize, f64, f64)> = groups
            .par_iter()
            .map(|&j| {
                let lam = base.eigenvalue(j);
                let g = mode_matrix(lam.sqrt(), tau, h, &chi)?;
                let nn = g.nrows();
                // L²: W^{1/2} G W^{-1/2}, restricted to nodes with positive weight
                let mut l2 = g.clone();
                for r in 0..nn {
                    for c in 0..nn {
                        l2[(r, c)] *= sw[r] / sw[c].max(1e-300);
                    }
                }
                // H¹: stack √((1+λ)W) G and √W D G
                let mut dg = DMatrix::zeros(nn, nn);
                for c in 0..nn {
                    let col: Vec<Complex64> = (0..nn).map(|r| Complex64::new(g[(r, c)], 0.0)).collect();
                    let d = d1_fourth_order(&col, h, nn);
                    for r in 0..nn {
                        dg[(r, c)] = d[r].re;
                    }
                }
                let mut h1 = DMatrix::zeros(2 * nn, nn);
                for r in 0..nn {
                    for c in 0..nn {
                        let s = 1.0 / sw[c].max(1e-300);
                        h1[(r, c)] = (1.0 + lam).sqrt() * sw[r] * g[(r, c)] * s;
                        h1[(nn + r, c)] = sw[r] * dg[(r, c)] * s;
                    }
                }
                Ok((j, top_singular(&l2, j as u64).0, top_singular(&h1, j as u64).0))
            })
            .collect::<Result<_>>()?;
        let best_l2 = norms.iter().cloned().fold((0, 0.0), |acc, x| if x.1 > acc.1 { (x.0, x.1) } else { acc });
        let best_h1 = norms.iter().cloned().fold((0, 0.0), |acc, x| if x.2 > acc.1 { (x.0, x.2) } else { acc });
        rep.push(tau, "L2_to_L2_times_tau", best_l2.1 * tau.abs(), format!("mode-{}-top-singular", best_l2.0));
        rep.push(tau, "L2_to_H1", best_h1.1, format!("mode-{}-top-singular", best_h1.0));

        // field inputs
        let mut inputs: Vec<(String, SpectralField)> = Vec::new();
        let near = (0..base.len())
            .min_by(|&i, &j| {
                (base.eigenvalue(i).sqrt() - tau.abs())
                    .abs()
                    .total_cmp(&(base.eigenvalue(j).sqrt() - tau.abs()).abs())
            })
            .unwrap_or(0);
        inputs.push((
            format!("near-resonant-mode-{near}"),
            SpectralField::separated(cyl.clone(), near, |x| Complex64::new(smooth_bump(x, mid, 0.95 * half), 0.0)),
        ));
        let sides = base.sides().to_vec();
        let origin = base.origin().to_vec();
        let centre: Vec<f64> = sides.iter().zip(&origin).map(|(l, o)| o + 0.5 * l).collect();
        for &wd in &opts.gaussian_widths {
            let s = wd / tau.abs();
            let c2 = centre.clone();
            let sd = sides.clone();
            let f = SpectralField::from_fn(cyl.clone(), move |x1, x| {
                let mut r2 = (x1 - mid).powi(2);
                for a in 0..x.len() {
                    let mut d = (x[a] - c2[a]).rem_euclid(sd[a]);
                    if d > 0.5 * sd[a] {
                        d -= sd[a];
                    }
                    r2 += d * d;
                }
                Complex64::new((-r2 / (2.0 * s * s)).exp() * smooth_bump(x1, mid, 0.95 * half), 0.0)
            });
            inputs.push((format!("gaussian-{wd}/tau"), f));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ tau.to_bits());
        for t in 0..opts.random_inputs {
            let mut f = SpectralField::zeros(cyl.clone());
            let kmax = base.len().min(60);
            let amps: Vec<Complex64> = (0..kmax)
                .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
                .collect();
            let c = mid + 0.3 * half * (rng.gen::<f64>() - 0.5);
            for i in 0..cyl.n1() {
                let env = smooth_bump(cyl.x1(i), c, 0.6 * half);
                for (j, a) in amps.iter().enumerate() {
                    f.slice_mut(i)[j] = a * env;
                }
            }
            inputs.push((format!("random-{t}"), f));
        }

        for (id, f) in &inputs {
            let g = apply_g_tau(f, &params)?;
            let fl2 = f.l2_norm();
            rep.push(tau, "L2_to_L2_times_tau", g.l2_norm() * tau.abs() / fl2, id.clone());
            rep.push(tau, "L2_to_H1", g.h1_norm() / fl2, id.clone());
            rep.push(tau, "Lp_to_Lq", g.lp_norm(p_hi)? / f.lp_norm(p_lo)?, id.clone());
            // direct Carleman inequality for v = f (interior supported)
            let pv = conjugated_laplacian(f, tau);
            rep.push(tau, "carleman_L2_times_tau", tau.abs() * fl2 / pv.l2_norm(), id.clone());
        }
    }
    if rep.rows.is_empty() {
        return Err(Error::InvalidParameter("no admissible tau in sweep".into()));
    }
    Ok(rep)
}

/// Constant `C` in `Σ_k (1+k)^{1−2/n} sup_{j∈k} |m_τ(t, √λ_j)| ≤ C(1 + |t|^{−1+2/n})`
/// over the given `(t, τ)` grid, with `n = dim M₀ + 1`.
pub fn series_bound_constant(basis: &EigenBasis, taus: &[f64], ts: &[f64]) -> Result<f64> {
    let n = (basis.dim() + 1) as f64;
    let clusters = spectral_clusters(basis);
    let mut worst: f64 = 0.0;
    for &tau in taus {
        for &t in ts {
            if t == 0.0 {
                return Err(invalid("series bound is singular at t = 0"));
            }
            let mut s = 0.0;
            for cl in &clusters {
                let mut sup: f64 = 0.0;
                for &j in &cl.indices {
                    sup = sup.max(m_tau_real(t, basis.eigenvalue(j).sqrt(), tau)?.abs());
                }
                s += (1.0 + cl.k as f64).powf(1.0 - 2.0 / n) * sup;
            }
            worst = worst.max(s / (1.0 + t.abs().powf(-1.0 + 2.0 / n)));
        }
    }
    Ok(worst)
}

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::carleman::{apply_g_tau, conjugated_laplacian, CarlemanParams, SpectralField};
use crate::error::{Error, Result};

use super::ansatz::{CgoAnsatz, CgoDomain};
use super::potential::Potential;

/// Norms restricted to `M = I_M × box`.
pub fn masked_lp_norm(u: &SpectralField, dom: &CgoDomain, p: f64) -> f64 {
    let cyl = u.cylinder();
    let base = cyl.base();
    let w1 = cyl.x1_weights();
    let cw = base.cell_weight();
    let inside: Vec<bool> = (0..base.grid_len()).map(|k| dom.in_base(&base.grid_point(k))).collect();
    let acc: f64 = (0..cyl.n1())
        .into_par_iter()
        .filter(|&i| dom.in_x1(cyl.x1(i)))
        .map(|i| {
            let vals = u.synthesize_slice(i);
            let s: f64 = vals
                .iter()
                .zip(&inside)
                .filter(|(_, m)| **m)
                .map(|(v, _)| if p.is_infinite() { v.norm() } else { v.norm().powf(p) })
                .fold(0.0, |a, b| if p.is_infinite() { f64::max(a, b) } else { a + b });
            if p.is_infinite() {
                s
            } else {
                w1[i] * cw * s
            }
        })
        .collect::<Vec<f64>>()
        .into_iter()
        // summed in slice order so the result does not depend on the thread count
        .fold(0.0, |a, b| if p.is_infinite() { a.max(b) } else { a + b });
    if p.is_infinite() {
        acc
    } else {
        acc.powf(1.0 / p)
    }
}

/// `‖u‖_{H¹(M)}` with the x₁ derivative by finite differences and the x'
/// gradient from the spectrum.
pub fn masked_h1_norm(u: &SpectralField, dom: &CgoDomain) -> f64 {
    let cyl = u.cylinder();
    let base = cyl.base();
    let d1 = u.dx1();
    let mut acc = masked_lp_norm(u, dom, 2.0).powi(2) + masked_lp_norm(&d1, dom, 2.0).powi(2);
    // ∂_k in x' multiplies coefficient j by 2πi k_j / side
    for d in 0..base.dim() {
        let scale = 2.0 * std::f64::consts::PI / base.sides()[d];
        let mut g = u.clone();
        let jn = base.len();
        for (idx, c) in g.coeffs_mut().iter_mut().enumerate() {
            *c *= Complex64::new(0.0, scale * base.mode(idx % jn)[d] as f64);
        }
        acc += masked_lp_norm(&g, dom, 2.0).powi(2);
    }
    acc.sqrt()
}

fn x1_factor(dom: &CgoDomain, lambda: f64) -> Vec<Complex64> {
    (0..dom.cyl.n1())
        .map(|i| {
            let x1 = dom.cyl.x1(i);
            Complex64::from_polar(dom.chi_x1(x1), lambda * x1)
        })
        .collect()
}

/// Field `χ₁(x₁) e^{iλx₁} g(x')` from samples of `g` on the base grid.
fn separable(dom: &CgoDomain, lambda: f64, g: &[Complex64]) -> SpectralField {
    let cyl = dom.cyl.clone();
    let base = cyl.base();
    let mut vals = g.to_vec();
    let mut gh = vec![Complex64::default(); base.len()];
    base.analyze_in_place(&mut vals, &mut gh);
    let jn = base.len();
    let mut coeffs = vec![Complex64::default(); cyl.n1() * jn];
    for (i, c) in x1_factor(dom, lambda).into_iter().enumerate() {
        if c == Complex64::default() {
            continue;
        }
        for j in 0..jn {
            coeffs[i * jn + j] = c * gh[j];
        }
    }
    SpectralField::from_coeffs(cyl, coeffs).expect("shape fixed by construction")
}

fn base_samples<F: Fn(&[f64]) -> Complex64 + Sync>(dom: &CgoDomain, f: F) -> Vec<Complex64> {
    let base = dom.cyl.base();
    (0..base.grid_len())
        .into_par_iter()
        .map(|k| {
            let x = base.grid_point(k);
            let c = dom.chi_base(&x);
            if c == 0.0 {
                Complex64::default()
            } else {
                f(&x) * c
            }
        })
        .collect()
}

/// Diagnostics of one constructed solution; norms are over `M`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CgoDiagnostics {
    pub tau: f64,
    pub f_l2: f64,
    pub r0_l2: f64,
    pub r0_h1: f64,
    pub r0_l6: f64,
    pub r1_l2: f64,
    pub rt_l2: f64,
    pub rt_l6: f64,
    pub contraction: f64,
    pub neumann_terms: usize,
    pub residual: f64,
}

/// `u = e^{−τx₁}(a + r̃)` with its pieces.
///
/// `a` is kept both as a projected field and as exact grid samples
/// `a_x1[i] · a_base[k]`; derivatives of the projection carry truncation
/// error from the cutoff, so residuals and products use the samples.
#[derive(Debug, Clone)]
pub struct CgoSolution {
    pub tau: f64,
    pub ansatz: CgoAnsatz,
    pub a: SpectralField,
    pub a_base: Vec<Complex64>,
    pub a_x1: Vec<Complex64>,
    pub f: SpectralField,
    pub r0: SpectralField,
    pub r1: SpectralField,
    pub r_tilde: SpectralField,
    pub diagnostics: CgoDiagnostics,
}

impl CgoSolution {
    /// `a + r̃`, the conjugated solution `e^{τx₁} u`, as a projected field.
    pub fn conjugated(&self) -> SpectralField {
        let mut w = self.a.clone();
        w.axpy(Complex64::new(1.0, 0.0), &self.r_tilde).expect("same grid");
        w
    }

    /// Grid samples of `a` on x₁ slice `i`.
    pub fn amplitude_slice(&self, i: usize) -> Vec<Complex64> {
        let c = self.a_x1[i];
        self.a_base.iter().map(|v| v * c).collect()
    }

    /// Grid samples of `a + r̃` on x₁ slice `i`.
    pub fn conjugated_slice(&self, i: usize) -> Vec<Complex64> {
        let c = self.a_x1[i];
        let r = self.r_tilde.synthesize_slice(i);
        self.a_base.iter().zip(r).map(|(a, r)| a * c + r).collect()
    }
}

/// Free solution: `f = e^{τx₁} Δ e^{−τx₁} a` localised to M, `r₀ = G_τ f`.
pub fn build_free_cgo(ansatz: &CgoAnsatz, tau: f64, dom: &CgoDomain) -> Result<CgoSolution> {
    dom.check_centre(ansatz.omega)?;
    let params = CarlemanParams::new(tau, dom.core, dom.cyl.base())?;
    let a_base = base_samples(dom, |x| ansatz.amplitude(tau, x));
    let a = separable(dom, ansatz.lambda, &a_base);
    let f = separable(dom, ansatz.lambda, &base_samples(dom, |x| ansatz.source(tau, x)));
    let r0 = apply_g_tau(&f, &params)?;
    let diagnostics = CgoDiagnostics {
        tau,
        f_l2: masked_lp_norm(&f, dom, 2.0),
        r0_l2: masked_lp_norm(&r0, dom, 2.0),
        r0_h1: masked_h1_norm(&r0, dom),
        r0_l6: masked_lp_norm(&r0, dom, 6.0),
        r1_l2: 0.0,
        rt_l2: 0.0,
        rt_l6: 0.0,
        contraction: 0.0,
        neumann_terms: 0,
        residual: 0.0,
    };
    let mut sol = CgoSolution {
        tau,
        ansatz: ansatz.clone(),
        a_base,
        a_x1: x1_factor(dom, ansatz.lambda),
        r1: SpectralField::zeros(dom.cyl.clone()),
        r_tilde: r0.clone(),
        a,
        f,
        r0,
        diagnostics,
    };
    sol.diagnostics.rt_l2 = sol.diagnostics.r0_l2;
    sol.diagnostics.rt_l6 = sol.diagnostics.r0_l6;
    sol.diagnostics.residual = residual(&sol, None, dom);
    Ok(sol)
}

/// `‖e^{τx₁}(−Δ + q)e^{−τx₁}(a + r̃)‖_{L²(M)}` in the truncated basis, using `P_τ a = f` on M.
pub fn residual(sol: &CgoSolution, q: Option<&Potential>, dom: &CgoDomain) -> f64 {
    let mut r = conjugated_laplacian(&sol.r_tilde, sol.tau);
    r.axpy(Complex64::new(1.0, 0.0), &sol.f).expect("same grid");
    let cyl = dom.cyl.clone();
    let base = cyl.base();
    let g = base.grid_len();
    let inside: Vec<bool> = (0..g).map(|k| dom.in_base(&base.grid_point(k))).collect();
    let w1 = cyl.x1_weights();
    let acc: f64 = (0..cyl.n1())
        .into_par_iter()
        .filter(|&i| dom.in_x1(cyl.x1(i)))
        .map(|i| {
            let mut vals = r.synthesize_slice(i);
            vals.iter_mut().for_each(|v| *v = -*v);
            if let Some(q) = q {
                // q(a + r̃) projected onto the basis like every other term
                let w = sol.conjugated_slice(i);
                let qv = &q.values()[i * g..(i + 1) * g];
                let mut qw: Vec<Complex64> = w.iter().zip(qv).map(|(w, q)| q * w).collect();
                let mut c = vec![Complex64::default(); base.len()];
                base.analyze_in_place(&mut qw, &mut c);
                vals.iter_mut().zip(base.synthesize(&c)).for_each(|(v, p)| *v += p);
            }
            w1[i] * base.cell_weight()
                * vals.iter().zip(&inside).filter(|(_, m)| **m).map(|(v, _)| v.norm_sqr()).sum::<f64>()
        })
        .sum();
    acc.sqrt()
}

/// Series options.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeumannOptions {
    pub rel_tol: f64,
    pub max_terms: usize,
    pub max_contraction: f64,
    pub probe_steps: usize,
    pub seed: u64,
}

impl Default for NeumannOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            max_terms: 200,
            max_contraction: 0.9,
            probe_steps: 4,
            seed: 11,
        }
    }
}

/// `v` of `(I + m G_τ |q|^{1/2}) v = rhs` together with `r₁ = G_τ(|q|^{1/2} v)`.
#[derive(Debug, Clone)]
pub struct NeumannResult {
    pub v: SpectralField,
    pub r1: SpectralField,
    pub terms: usize,
    pub contraction: f64,
}

/// The operator `A = m G_τ |q|^{1/2}` and its pieces.
pub struct SymmetrizedOperator<'a> {
    q_half: Vec<f64>,
    m: Vec<Complex64>,
    params: &'a CarlemanParams,
    grid: usize,
}

impl<'a> SymmetrizedOperator<'a> {
    pub fn new(q: &Potential, params: &'a CarlemanParams) -> Self {
        Self {
            q_half: q.sqrt_abs(),
            m: q.phase_factor(),
            params,
            grid: q.cylinder().base().grid_len(),
        }
    }
    pub fn half(&self, v: &SpectralField) -> SpectralField {
        let g = self.grid;
        v.multiply_pointwise(|i, k| Complex64::new(self.q_half[i * g + k], 0.0))
    }
    pub fn apply(&self, v: &SpectralField) -> Result<SpectralField> {
        let g = self.grid;
        let w = apply_g_tau(&self.half(v), self.params)?;
        Ok(w.multiply_pointwise(|i, k| self.m[i * g + k]))
    }
}

/// Empirical contraction factor: geometric growth of `‖Aᵏ p‖` on a random probe.
pub fn contraction_estimate(op: &SymmetrizedOperator, like: &SpectralField, steps: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = like.coeffs().len();
    let coeffs: Vec<Complex64> = (0..n)
        .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
        .collect();
    let mut p = SpectralField::from_coeffs(like.cylinder_arc(), coeffs)?;
    // the probe lives where q does
    p = op.half(&p);
    let n0 = p.l2_norm();
    if n0 == 0.0 {
        return Ok(0.0);
    }
    let mut ratios = Vec::with_capacity(steps);
    for _ in 0..steps.max(1) {
        let before = p.l2_norm();
        p = op.apply(&p)?;
        let after = p.l2_norm();
        if before == 0.0 || after == 0.0 {
            return Ok(0.0);
        }
        ratios.push(after / before);
    }
    Ok(ratios.iter().cloned().fold(0.0, f64::max))
}

pub fn neumann_solve(
    q: &Potential,
    params: &CarlemanParams,
    rhs: &SpectralField,
    opts: &NeumannOptions,
) -> Result<NeumannResult> {
    let zero = || SpectralField::zeros(rhs.cylinder_arc());
    if q.is_zero() {
        return Ok(NeumannResult {
            v: rhs.clone(),
            r1: zero(),
            terms: 1,
            contraction: 0.0,
        });
    }
    let op = SymmetrizedOperator::new(q, params);
    let rho = contraction_estimate(&op, rhs, opts.probe_steps, opts.seed)?;
    if rho > opts.max_contraction {
        return Err(Error::Contraction {
            factor: rho,
            limit: opts.max_contraction,
        });
    }
    let scale = rhs.l2_norm();
    let mut v = rhs.clone();
    let mut term = rhs.clone();
    let mut terms = 1;
    let mut observed = 0.0f64;
    while terms < opts.max_terms {
        let next = op.apply(&term)?.scaled(Complex64::new(-1.0, 0.0));
        let (a, b) = (term.l2_norm(), next.l2_norm());
        if a > 0.0 && terms > 1 {
            observed = observed.max(b / a);
        }
        v.axpy(Complex64::new(1.0, 0.0), &next)?;
        terms += 1;
        term = next;
        if b <= opts.rel_tol * scale {
            break;
        }
        if observed > opts.max_contraction && terms > 3 {
            return Err(Error::Contraction {
                factor: observed,
                limit: opts.max_contraction,
            });
        }
    }
    if term.l2_norm() > opts.rel_tol * scale {
        return Err(Error::NoConvergence {
            method: "Neumann series",
            iterations: terms,
            residual: term.l2_norm() / scale,
        });
    }
    let r1 = apply_g_tau(&op.half(&v), params)?;
    Ok(NeumannResult {
        v,
        r1,
        terms,
        contraction: rho.max(observed),
    })
}

/// Potential-corrected solution: `r̃ = r₀ + r₁`.
pub fn build_cgo(
    q: &Potential,
    ansatz: &CgoAnsatz,
    tau: f64,
    dom: &CgoDomain,
    opts: &NeumannOptions,
) -> Result<CgoSolution> {
    let mut sol = build_free_cgo(ansatz, tau, dom)?;
    let params = CarlemanParams::new(tau, dom.core, dom.cyl.base())?;
    // rhs = −m (a + r₀) from grid samples
    let base = dom.cyl.base();
    let g = base.grid_len();
    let jn = base.len();
    let m = q.phase_factor();
    let slices: Vec<Vec<Complex64>> = (0..dom.cyl.n1())
        .into_par_iter()
        .map(|i| {
            let r0 = sol.r0.synthesize_slice(i);
            let mut vals: Vec<Complex64> = (0..g)
                .map(|k| -m[i * g + k] * (sol.a_base[k] * sol.a_x1[i] + r0[k]))
                .collect();
            let mut out = vec![Complex64::default(); jn];
            base.analyze_in_place(&mut vals, &mut out);
            out
        })
        .collect();
    let rhs = SpectralField::from_coeffs(dom.cyl.clone(), slices.concat())?;
    let res = neumann_solve(q, &params, &rhs, opts)?;
    let mut rt = sol.r0.clone();
    rt.axpy(Complex64::new(1.0, 0.0), &res.r1)?;
    sol.r1 = res.r1;
    sol.r_tilde = rt;
    let d = &mut sol.diagnostics;
    d.contraction = res.contraction;
    d.neumann_terms = res.terms;
    d.r1_l2 = masked_lp_norm(&sol.r1, dom, 2.0);
    d.rt_l2 = masked_lp_norm(&sol.r_tilde, dom, 2.0);
    d.rt_l6 = masked_lp_norm(&sol.r_tilde, dom, 6.0);
    sol.diagnostics.residual = residual(&sol, Some(q), dom);
    Ok(sol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cgo::AngularProfile;
    use nalgebra::{DMatrix, DVector};

    fn smooth_q(dom: &CgoDomain, amp: f64) -> Potential {
        Potential::from_fn(dom.cyl.clone(), move |x1, x| {
            let e = (-(x1 * x1 + x[0] * x[0] + x[1] * x[1]) * 8.0).exp();
            Complex64::new(3.0 * amp * e, amp * e)
        })
    }

    #[test]
    fn zero_potential_gives_free_solution() {
        let dom = CgoDomain::reference(12, 32, 61).unwrap();
        let an = CgoAnsatz::new(dom.default_omega(), 0.5, AngularProfile::constant(1.0));
        let q = Potential::zero(dom.cyl.clone());
        let s = build_cgo(&q, &an, 6.0, &dom, &NeumannOptions::default()).unwrap();
        assert_eq!(s.r1.l2_norm(), 0.0);
        assert_eq!(s.r_tilde.coeffs(), s.r0.coeffs());
        assert_eq!(s.diagnostics.neumann_terms, 1);
    }

    #[test]
    fn residual_converges_at_fourth_order() {
        let mut res = Vec::new();
        for n1 in [61, 121] {
            let dom = CgoDomain::reference(30, 64, n1).unwrap();
            let an = CgoAnsatz::new(dom.default_omega(), 1.0, AngularProfile::harmonic(1));
            let q = Potential::from_fn(dom.cyl.clone(), |x1, _| Complex64::new(3.0 + x1.sin(), 0.5 * x1));
            let free = build_free_cgo(&an, 8.0, &dom).unwrap();
            let s = build_cgo(&q, &an, 8.0, &dom, &NeumannOptions::default()).unwrap();
            res.push((free.diagnostics.residual, s.diagnostics.residual));
        }
        assert!(res[0].0 / res[1].0 > 12.0, "{res:?}");
        assert!(res[0].1 / res[1].1 > 12.0, "{res:?}");
        assert!(res[1].1 < 1e-3);
    }

    #[test]
    fn neumann_matches_dense_solve() {
        let dom = CgoDomain::reference(6, 16, 25).unwrap();
        let params = CarlemanParams::new(5.0, dom.core, dom.cyl.base()).unwrap();
        let q = smooth_q(&dom, 0.5);
        let op = SymmetrizedOperator::new(&q, &params);
        let n = dom.cyl.n1() * dom.cyl.base().len();
        let mut a = DMatrix::<Complex64>::identity(n, n);
        for c in 0..n {
            let mut e = vec![Complex64::default(); n];
            e[c] = Complex64::new(1.0, 0.0);
            let col = op.apply(&SpectralField::from_coeffs(dom.cyl.clone(), e).unwrap()).unwrap();
            for (r, v) in col.coeffs().iter().enumerate() {
                a[(r, c)] += v;
            }
        }
        let rhs = SpectralField::from_fn(dom.cyl.clone(), |x1, x| Complex64::new(x1 + x[0], x[1] * x[1]));
        let dense = a.lu().solve(&DVector::from_column_slice(rhs.coeffs())).unwrap();
        let res = neumann_solve(&q, &params, &rhs, &NeumannOptions::default()).unwrap();
        let err = res.v.coeffs().iter().zip(dense.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        assert!(err < 1e-8, "{err}");
    }

    #[test]
    fn contraction_shrinks_with_tau() {
        let dom = CgoDomain::reference(20, 32, 121).unwrap();
        let q = smooth_q(&dom, 20.0);
        let rhs = SpectralField::from_fn(dom.cyl.clone(), |_, _| Complex64::new(1.0, 0.0));
        let rho: Vec<f64> = [5.0, 10.0, 20.0, 40.0]
            .iter()
            .map(|&t| {
                let p = CarlemanParams::new(t, dom.core, dom.cyl.base()).unwrap();
                contraction_estimate(&SymmetrizedOperator::new(&q, &p), &rhs, 4, 3).unwrap()
            })
            .collect();
        assert!(rho.windows(2).all(|w| w[1] < w[0]), "{rho:?}");
    }

    #[test]
    fn strong_potential_is_rejected() {
        let dom = CgoDomain::reference(12, 32, 61).unwrap();
        let an = CgoAnsatz::new(dom.default_omega(), 0.0, AngularProfile::constant(1.0));
        let q = smooth_q(&dom, 500.0);
        let err = build_cgo(&q, &an, 4.5, &dom, &NeumannOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Contraction { .. }), "{err}");
    }

    #[test]
    fn free_remainder_decays_like_inverse_tau() {
        let dom = CgoDomain::reference(50, 64, 121).unwrap();
        let an = CgoAnsatz::new(dom.default_omega(), 0.0, AngularProfile::constant(1.0));
        let d: Vec<CgoDiagnostics> =
            [8.0, 16.0, 32.0].iter().map(|&t| build_free_cgo(&an, t, &dom).unwrap().diagnostics).collect();
        for x in &d {
            assert!(x.tau * x.r0_l2 < 1.0 && x.r0_h1 < 1.0, "{x:?}");
        }
        let c = d[0].r0_h1;
        assert!(d.iter().all(|x| x.r0_h1 <= 1.5 * c), "{d:?}");
    }

    #[test]
    fn centre_inside_support_is_rejected() {
        let dom = CgoDomain::reference(12, 32, 61).unwrap();
        let an = CgoAnsatz::new([0.0, 0.0], 0.0, AngularProfile::constant(1.0));
        assert!(build_free_cgo(&an, 6.0, &dom).is_err());
    }
}

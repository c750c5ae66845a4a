use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

use super::grid::{BoxGrid, DstPoisson};

/// Discrete Dirichlet problem for `−Δ + q` on a box.
///
/// The discrete form
/// `B(u, v) = Σ_edges w_e (u_a − u_b)(v_a − v_b)/h² + Σ_nodes ω_n q_n u_n v_n`
/// uses trapezoid weights; its stationarity in interior values is the
/// 7-point scheme, so weak pairings do not depend on the extension.
#[derive(Debug)]
pub struct DirichletSystem {
    grid: BoxGrid,
    q: Vec<Complex64>,
    precond: DstPoisson,
    pub tol: f64,
    pub max_iter: usize,
}

/// Outcome of one solve.
#[derive(Debug, Clone)]
pub struct DirichletSolution {
    pub u: Vec<Complex64>,
    pub iterations: usize,
    /// `‖(−Δ_h + q)u‖_{L²}` over interior nodes.
    pub residual: f64,
}

impl DirichletSystem {
    pub fn new(grid: BoxGrid, q: Vec<Complex64>) -> Result<Self> {
        if q.len() != grid.len() {
            return Err(Error::Shape("potential length differs from grid size".into()));
        }
        let mean = q.iter().map(|v| v.re).sum::<f64>() / q.len() as f64;
        let shift = mean.max(0.0);
        let precond = DstPoisson::new(&grid, shift);
        Ok(Self {
            grid,
            q,
            precond,
            tol: 1e-13,
            max_iter: 2000,
        })
    }

    pub fn from_fn<F: Fn([f64; 3]) -> Complex64>(grid: BoxGrid, f: F) -> Result<Self> {
        let q = grid.sample(f);
        Self::new(grid, q)
    }

    pub fn grid(&self) -> &BoxGrid {
        &self.grid
    }
    pub fn potential(&self) -> &[Complex64] {
        &self.q
    }

    fn interior_dims(&self) -> [usize; 3] {
        [self.grid.n[0] - 2, self.grid.n[1] - 2, self.grid.n[2] - 2]
    }

    fn interior_to_full(&self, idx: usize) -> usize {
        let m = self.interior_dims();
        let (i, j, k) = (idx / (m[1] * m[2]), (idx / m[2]) % m[1], idx % m[2]);
        self.grid.index(i + 1, j + 1, k + 1)
    }

    /// `(−Δ_h + q)u` at every interior node of a full-grid vector.
    pub fn apply_full(&self, u: &[Complex64]) -> Vec<Complex64> {
        let n = self.grid.n;
        let s = [n[1] * n[2], n[2], 1];
        let ih2: [f64; 3] = std::array::from_fn(|d| 1.0 / (self.grid.h(d) * self.grid.h(d)));
        (0..self.precond.interior_len())
            .into_par_iter()
            .map(|t| {
                let p = self.interior_to_full(t);
                let c = u[p];
                let mut v = self.q[p] * c;
                for d in 0..3 {
                    v += (c * 2.0 - u[p - s[d]] - u[p + s[d]]) * ih2[d];
                }
                v
            })
            .collect()
    }

    fn scatter(&self, x: &[Complex64], full: &mut [Complex64]) {
        for (t, v) in x.iter().enumerate() {
            full[self.interior_to_full(t)] = *v;
        }
    }

    /// Interior L² norm with trapezoid weights (interior weight is the cell volume).
    fn l2(&self, r: &[Complex64]) -> f64 {
        (self.grid.cell_volume() * r.iter().map(|v| v.norm_sqr()).sum::<f64>()).sqrt()
    }

    /// Solve `(−Δ_h + q)u = 0` with `u = f` on boundary nodes; interior entries of `f` are ignored.
    pub fn solve(&self, f: &[Complex64]) -> Result<DirichletSolution> {
        let mut full = self.grid.trace(f);
        // rhs = −A(trace)
        let b: Vec<Complex64> = self.apply_full(&full).into_iter().map(|v| -v).collect();
        let (x, iterations) = self.cocg(&b)?;
        self.scatter(&x, &mut full);
        let residual = self.l2(&self.apply_full(&full));
        Ok(DirichletSolution {
            u: full,
            iterations,
            residual,
        })
    }

    /// Preconditioned conjugate-orthogonal CG for the complex symmetric interior system.
    fn cocg(&self, b: &[Complex64]) -> Result<(Vec<Complex64>, usize)> {
        let bn = b.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        let n = b.len();
        let mut x = vec![Complex64::default(); n];
        if bn == 0.0 {
            return Ok((x, 0));
        }
        let dot = |a: &[Complex64], c: &[Complex64]| -> Complex64 { a.iter().zip(c).map(|(x, y)| x * y).sum() };
        // interior operator on interior vectors: zero boundary copy
        let mut zero_full = vec![Complex64::default(); self.grid.len()];
        let mut apply = |v: &[Complex64]| {
            self.scatter(v, &mut zero_full);
            self.apply_full(&zero_full)
        };
        let mut r = b.to_vec();
        let mut z = r.clone();
        self.precond.solve(&mut z);
        let mut p = z.clone();
        let mut rho = dot(&r, &z);
        for it in 1..=self.max_iter {
            let ap = apply(&p);
            let pap = dot(&p, &ap);
            if pap.norm() == 0.0 {
                break;
            }
            let alpha = rho / pap;
            x.iter_mut().zip(&p).for_each(|(x, p)| *x += alpha * p);
            r.iter_mut().zip(&ap).for_each(|(r, a)| *r -= alpha * a);
            let rn = r.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
            if rn <= self.tol * bn {
                return Ok((x, it));
            }
            z.copy_from_slice(&r);
            self.precond.solve(&mut z);
            let rho_new = dot(&r, &z);
            let beta = rho_new / rho;
            rho = rho_new;
            p.iter_mut().zip(&z).for_each(|(p, z)| *p = z + beta * *p);
        }
        let rn = r.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        Err(Error::NoConvergence {
            method: "COCG",
            iterations: self.max_iter,
            residual: rn / bn,
        })
    }

    /// Discrete bilinear form `B_q(u, v)` over the whole grid.
    pub fn bilinear_form(&self, u: &[Complex64], v: &[Complex64]) -> Complex64 {
        let g = &self.grid;
        let n = g.n;
        let s = [n[1] * n[2], n[2], 1];
        (0..g.len())
            .into_par_iter()
            .map(|p| {
                let c = g.coords(p);
                let mut acc = g.node_weight(p) * self.q[p] * u[p] * v[p];
                for d in 0..3 {
                    if c[d] + 1 < n[d] {
                        let o = p + s[d];
                        // edge weight: cross-section trapezoid weight times edge length, over h²
                        let (a, b) = ((d + 1) % 3, (d + 2) % 3);
                        let wa = if c[a] == 0 || c[a] == n[a] - 1 { 0.5 } else { 1.0 } * g.h(a);
                        let wb = if c[b] == 0 || c[b] == n[b] - 1 { 0.5 } else { 1.0 } * g.h(b);
                        acc += (u[p] - u[o]) * (v[p] - v[o]) * (wa * wb / g.h(d));
                    }
                }
                acc
            })
            .collect::<Vec<Complex64>>()
            .into_iter()
            .sum()
    }

    /// Weak DN pairing `⟨Λ f, h⟩ = B(u_f, E h)` with the zero-interior extension `E h`.
    pub fn dn_pairing(&self, u_f: &[Complex64], h: &[Complex64]) -> Complex64 {
        self.bilinear_form(u_f, &self.grid.trace(h))
    }

    /// `∫ w u v` with trapezoid weights.
    pub fn volume_integral(&self, w: &[Complex64], u: &[Complex64], v: &[Complex64]) -> Complex64 {
        (0..self.grid.len()).map(|p| self.grid.node_weight(p) * w[p] * u[p] * v[p]).sum()
    }

    /// Lower bound `λ₁(−Δ_h) + min Re q + C` for the smallest eigenvalue of
    /// the Hermitian part of `B + C·mass`.
    pub fn coercivity_margin(&self, shift: f64) -> f64 {
        let min_re = self.q.iter().map(|v| v.re).fold(f64::INFINITY, f64::min);
        self.grid.lowest_dirichlet_eigenvalue() + min_re + shift
    }

    /// Estimate of the smallest eigenvalue magnitude of the interior system by
    /// inverse iteration; errors when it falls below `guard · scale`.
    pub fn check_guard(&self, guard: f64, seed: u64) -> Result<f64> {
        let scale = self.grid.lowest_dirichlet_eigenvalue();
        if self.coercivity_margin(0.0) > guard * scale {
            return Ok(self.coercivity_margin(0.0));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x: Vec<Complex64> = (0..self.precond.interior_len())
            .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, 0.0))
            .collect();
        let mut est = f64::INFINITY;
        for _ in 0..4 {
            let xn = x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
            x.iter_mut().for_each(|v| *v /= xn);
            let y = match self.cocg(&x) {
                Ok((y, _)) => y,
                Err(_) => return Err(Error::NearSingular { estimate: 0.0, guard: guard * scale }),
            };
            let yn = y.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
            est = 1.0 / yn;
            x = y;
        }
        if est < guard * scale {
            return Err(Error::NearSingular {
                estimate: est,
                guard: guard * scale,
            });
        }
        Ok(est)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> BoxGrid {
        BoxGrid::new([-0.5, -0.5, -0.5], [0.5, 0.5, 0.5], [n, n, n]).unwrap()
    }

    fn max_err(g: &BoxGrid, u: &[Complex64], exact: &dyn Fn([f64; 3]) -> Complex64) -> f64 {
        (0..g.len()).map(|p| (u[p] - exact(g.point(p))).norm()).fold(0.0, f64::max)
    }

    #[test]
    fn linear_data_is_reproduced() {
        let g = grid(9);
        let sys = DirichletSystem::new(g.clone(), vec![Complex64::default(); g.len()]).unwrap();
        let f = g.sample(|x| Complex64::new(x[0], 0.0));
        let s = sys.solve(&f).unwrap();
        assert!(max_err(&g, &s.u, &|x| Complex64::new(x[0], 0.0)) < 1e-12);
    }

    #[test]
    fn separated_solutions_converge_second_order() {
        for c in [0.0, 2.0] {
            let k = (1.0f64 + c).sqrt();
            let exact = move |x: [f64; 3]| Complex64::new((k * x[0]).exp() * x[1].cos(), 0.0);
            let errs: Vec<f64> = [11, 21]
                .iter()
                .map(|&n| {
                    let g = grid(n);
                    let sys = DirichletSystem::new(g.clone(), vec![Complex64::new(c, 0.0); g.len()]).unwrap();
                    let s = sys.solve(&g.sample(exact)).unwrap();
                    max_err(&g, &s.u, &exact)
                })
                .collect();
            let rate = (errs[0] / errs[1]).log2();
            assert!(rate > 1.8 && errs[1] < 2e-4, "{errs:?}");
        }
    }

    #[test]
    fn pairing_independent_of_extension() {
        let g = grid(9);
        let sys = DirichletSystem::from_fn(g.clone(), |x| Complex64::new(1.0 + x[0] * x[1], 0.3 * x[2])).unwrap();
        let f = g.sample(|x| Complex64::new(x[0] + x[1] * x[1], 0.0));
        let h = g.sample(|x| Complex64::new(x[2].cos(), x[0]));
        let u = sys.solve(&f).unwrap().u;
        let a = sys.dn_pairing(&u, &h);
        let mut ext = h.clone();
        for (p, v) in ext.iter_mut().enumerate() {
            if !g.is_boundary(p) {
                *v = Complex64::new((p as f64).sin(), 0.5);
            }
        }
        let b = sys.bilinear_form(&u, &ext);
        assert!((a - b).norm() < 1e-8 * a.norm().max(1.0), "{a} {b}");
    }

    #[test]
    fn flux_of_linear_function() {
        // Λ x₁ = ν₁: pairing against h gives ∫_{∂M} ν₁ h dS
        let g = grid(9);
        let sys = DirichletSystem::new(g.clone(), vec![Complex64::default(); g.len()]).unwrap();
        let u = sys.solve(&g.sample(|x| Complex64::new(x[0], 0.0))).unwrap().u;
        let h = g.sample(|x| Complex64::new(1.0 + x[0], 0.0));
        let got = sys.dn_pairing(&u, &h);
        // ∫ ν₁ (1 + x₁) dS = (1.5 − 0.5)·1 = 1
        assert!((got - Complex64::new(1.0, 0.0)).norm() < 1e-10, "{got}");
    }

    #[test]
    fn guard_flags_dirichlet_eigenvalue() {
        let g = grid(9);
        let lam = g.lowest_dirichlet_eigenvalue();
        let sys = DirichletSystem::new(g.clone(), vec![Complex64::new(-lam, 0.0); g.len()]).unwrap();
        assert!(matches!(sys.check_guard(1e-6, 1), Err(Error::NearSingular { .. })));
        let ok = DirichletSystem::new(g.clone(), vec![Complex64::new(1.0, 0.0); g.len()]).unwrap();
        assert!(ok.check_guard(1e-6, 1).unwrap() > 0.0);
        assert!(ok.coercivity_margin(0.0) > 0.0);
    }
}

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::cgo::{
    build_cgo, build_free_cgo, split_potential, AngularProfile, CgoAnsatz, CgoDomain, CgoSolution, NeumannOptions,
    Potential,
};
use crate::error::{invalid, Error, Result};
use crate::forward::{BoxGrid, DirichletSystem};

use super::config::{ExperimentConfig, PotentialSpec};

/// Forward grid on `M = [−0.3,0.3] × [−½,½]²` whose nodes coincide with
/// cylinder nodes, so CGO samples transfer without interpolation.
#[derive(Debug, Clone)]
pub struct TraceMap {
    pub grid: BoxGrid,
    i_off: usize,
    j_off: usize,
    base_n: usize,
}

impl TraceMap {
    pub fn new(dom: &CgoDomain) -> Result<Self> {
        let cyl = &dom.cyl;
        let n1 = cyl.n1();
        let base_n = cyl.base().grid_dims()[0];
        if (n1 - 1) % 4 != 0 || base_n % 4 != 0 {
            return Err(invalid("forward grid alignment needs n1 = 1 mod 4 and a base grid divisible by 4"));
        }
        let grid = BoxGrid::new(
            [dom.x1_range.0, dom.lo[0], dom.lo[1]],
            [dom.x1_range.1, dom.hi[0], dom.hi[1]],
            [(n1 - 1) / 2 + 1, base_n / 2 + 1, base_n / 2 + 1],
        )?;
        let map = Self {
            grid,
            i_off: (n1 - 1) / 4,
            j_off: base_n / 4,
            base_n,
        };
        let p = map.grid.point(map.grid.len() - 1);
        let c = cyl.base().grid_point((map.j_off + map.grid.n[1] - 1) * base_n + map.j_off + map.grid.n[2] - 1);
        let x1 = cyl.x1(map.i_off + map.grid.n[0] - 1);
        if (p[0] - x1).abs() + (p[1] - c[0]).abs() + (p[2] - c[1]).abs() > 1e-9 {
            return Err(invalid("forward grid does not line up with the cylinder grid"));
        }
        Ok(map)
    }

    /// `e^{−sτx₁}(a + r̃)` on the forward grid, `s = ±1` the sign of the CGO exponent.
    pub fn sample(&self, dom: &CgoDomain, sol: &CgoSolution) -> Vec<Complex64> {
        let g = &self.grid;
        let mut out = vec![Complex64::default(); g.len()];
        for i in 0..g.n[0] {
            let ic = i + self.i_off;
            let e = (-sol.tau * dom.cyl.x1(ic)).exp();
            let sl = sol.conjugated_slice(ic);
            for j in 0..g.n[1] {
                for k in 0..g.n[2] {
                    out[g.index(i, j, k)] = sl[(j + self.j_off) * self.base_n + k + self.j_off] * e;
                }
            }
        }
        out
    }
}

/// The two Dirichlet problems (`q` and `0`) on the forward grid.
#[derive(Debug)]
pub struct ForwardPair {
    pub map: TraceMap,
    pub q: DirichletSystem,
    pub zero: DirichletSystem,
}

impl ForwardPair {
    pub fn new(dom: &CgoDomain, spec: &PotentialSpec) -> Result<Self> {
        let map = TraceMap::new(dom)?;
        let q = DirichletSystem::from_fn(map.grid.clone(), |x| Complex64::new(spec.eval(x[0], [x[1], x[2]]), 0.0))?;
        let zero = DirichletSystem::new(map.grid.clone(), vec![Complex64::default(); map.grid.len()])?;
        Ok(Self { map, q, zero })
    }
}

/// Boundary and volume sides of one moment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentPair {
    /// `⟨(Λ_q − Λ_0) u₁|, u₂|⟩`.
    pub boundary: Complex64,
    /// `∫ q u₁ u₂` on the forward grid.
    pub volume: Complex64,
    pub solve_iterations: usize,
}

/// Pairs the traces of `u₁` (exponent `−τ`) and `u₂` (exponent `+τ`)
/// through the difference of the two DN maps. Each map is applied by one
/// Dirichlet solve rather than assembled.
pub fn extract_moments(dn: &ForwardPair, dom: &CgoDomain, u1: &CgoSolution, u2: &CgoSolution) -> Result<MomentPair> {
    if !(u1.tau > 0.0 && u2.tau < 0.0) {
        return Err(invalid("moment pairing needs u1 with exponent -tau and u2 with +tau"));
    }
    let f1 = dn.map.sample(dom, u1);
    let f2 = dn.map.sample(dom, u2);
    let g = &dn.map.grid;
    let w1 = dn.q.solve(&g.trace(&f1))?;
    let w0 = dn.zero.solve(&g.trace(&f1))?;
    let boundary = dn.q.dn_pairing(&w1.u, &f2) - dn.zero.dn_pairing(&w0.u, &f2);
    let ones = vec![Complex64::new(1.0, 0.0); g.len()];
    let qf1: Vec<Complex64> = f1.iter().zip(dn.q.potential()).map(|(a, q)| a * q).collect();
    let volume = dn.q.volume_integral(&ones, &qf1, &f2);
    Ok(MomentPair {
        boundary,
        volume,
        solve_iterations: w1.iterations + w0.iterations,
    })
}

/// Model value `∫_M q e^{iλx₁} e^{−λr} e^{imθ} r⁻¹ dx₁ dy` and its scale
/// `∫ |q| e^{−λr} r⁻¹`, on the forward grid.
pub fn model_moment(dn: &ForwardPair, omega: [f64; 2], lambda: f64, m: i64) -> (Complex64, f64) {
    let g = &dn.map.grid;
    let q = dn.q.potential();
    let mut val = Complex64::default();
    let mut scale = 0.0;
    for p in 0..g.len() {
        if q[p] == Complex64::default() {
            continue;
        }
        let x = g.point(p);
        let (dx, dy) = (x[1] - omega[0], x[2] - omega[1]);
        let r = dx.hypot(dy);
        let w = g.node_weight(p) * (-lambda * r).exp() / r;
        val += q[p] * Complex64::from_polar(w, lambda * x[0] + m as f64 * dy.atan2(dx));
        scale += w * q[p].norm();
    }
    (val, scale)
}

/// `‖a‖_{L^p(M)}` of a separable amplitude.
pub fn amplitude_norm(sol: &CgoSolution, dom: &CgoDomain, p: f64) -> f64 {
    let cyl = &dom.cyl;
    let base = cyl.base();
    let w1 = cyl.x1_weights();
    let s1: f64 = (0..cyl.n1())
        .filter(|&i| dom.in_x1(cyl.x1(i)))
        .map(|i| w1[i] * sol.a_x1[i].norm().powf(p))
        .sum();
    let s2: f64 = (0..base.grid_len())
        .filter(|&k| dom.in_base(&base.grid_point(k)))
        .map(|k| base.cell_weight() * sol.a_base[k].norm().powf(p))
        .sum();
    (s1 * s2).powf(1.0 / p)
}

/// Norms of the two parts of `q = q♯ + q♭`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitNorms {
    pub sharp_inf: f64,
    pub flat_32: f64,
}

impl SplitNorms {
    pub fn new(q: &Potential, fraction: f64) -> Result<Self> {
        let crit = q.critical_norm();
        if crit == 0.0 {
            return Ok(Self {
                sharp_inf: 0.0,
                flat_32: 0.0,
            });
        }
        let (sharp, flat, _) = split_potential(q, fraction * crit)?;
        Ok(Self {
            sharp_inf: sharp.lp_norm(f64::INFINITY),
            flat_32: flat.lp_norm(1.5),
        })
    }

    /// Hölder bound on `|∫ q (a₁r₂ + a₂r₁ + r₁r₂)|`.
    pub fn budget(&self, dom: &CgoDomain, u1: &CgoSolution, u2: &CgoSolution) -> f64 {
        let (d1, d2) = (&u1.diagnostics, &u2.diagnostics);
        let (a1, a2) = (amplitude_norm(u1, dom, 2.0), amplitude_norm(u2, dom, 2.0));
        let (b1, b2) = (amplitude_norm(u1, dom, 6.0), amplitude_norm(u2, dom, 6.0));
        self.sharp_inf * (a1 * d2.rt_l2 + a2 * d1.rt_l2 + d1.rt_l2 * d2.rt_l2)
            + self.flat_32 * (b1 * d2.rt_l6 + b2 * d1.rt_l6 + d1.rt_l6 * d2.rt_l6)
    }
}

/// One extracted moment with its provenance and error budget.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentRecord {
    pub omega_index: usize,
    pub lambda_index: usize,
    pub lambda: f64,
    pub m: i64,
    pub tau: f64,
    /// τ schedule exhausted before the budget met the tolerance.
    pub capped: bool,
    pub boundary: Complex64,
    pub volume: Complex64,
    pub model: Complex64,
    pub scale: f64,
    pub budget: f64,
    pub rt1_l2: f64,
    pub rt2_l2: f64,
    pub contraction: f64,
    pub solve_iterations: usize,
}

impl MomentRecord {
    /// Relative deviation of the boundary moment from the model value.
    pub fn model_error(&self) -> f64 {
        (self.boundary - self.model).norm() / self.scale.max(f64::MIN_POSITIVE)
    }
}

/// Everything needed to extract moments for one potential.
pub struct MomentEngine<'a> {
    pub cfg: &'a ExperimentConfig,
    pub dom: &'a CgoDomain,
    pub dn: ForwardPair,
    pub q: Potential,
    pub split: SplitNorms,
    opts: NeumannOptions,
    /// `u₂` per (ω, τ schedule entry).
    free: Vec<Vec<CgoSolution>>,
}

impl<'a> MomentEngine<'a> {
    pub fn new(cfg: &'a ExperimentConfig, dom: &'a CgoDomain, spec: &PotentialSpec) -> Result<Self> {
        let dn = ForwardPair::new(dom, spec).map_err(|e| e.in_stage("forward"))?;
        let q = Potential::from_fn(dom.cyl.clone(), |x1, y| Complex64::new(spec.eval(x1, [y[0], y[1]]), 0.0));
        let split = SplitNorms::new(&q, cfg.cgo.split_fraction)?;
        let free = cfg
            .probes
            .omegas
            .par_iter()
            .map(|&w| {
                cfg.cgo
                    .tau_schedule
                    .iter()
                    .map(|&tau| build_free_cgo(&CgoAnsatz::new(w, 0.0, AngularProfile::constant(1.0)), -tau, dom))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()
            .map_err(|e| e.in_stage("cgo"))?;
        Ok(Self {
            cfg,
            dom,
            dn,
            q,
            split,
            opts: cfg.neumann_options(),
            free,
        })
    }

    /// One moment, raising τ along the schedule until the budget is below
    /// `tolerance · scale`.
    pub fn moment(&self, omega_index: usize, lambda_index: usize, m: i64) -> Result<MomentRecord> {
        let omega = self.cfg.probes.omegas[omega_index];
        let lambda = self.cfg.lambdas()[lambda_index];
        let (model, scale) = model_moment(&self.dn, omega, lambda, m);
        let an = CgoAnsatz::new(omega, lambda, AngularProfile::harmonic(m));
        let sched = &self.cfg.cgo.tau_schedule;
        let mut last = None;
        for (t, &tau) in sched.iter().enumerate() {
            let u1 = build_cgo(&self.q, &an, tau, self.dom, &self.opts).map_err(|e| e.in_stage("cgo"))?;
            let u2 = &self.free[omega_index][t];
            let budget = self.split.budget(self.dom, &u1, u2);
            let done = budget <= self.cfg.cgo.tolerance * scale;
            last = Some((u1, t, budget));
            if done {
                break;
            }
        }
        let (u1, t, budget) = last.expect("schedule is nonempty");
        let u2 = &self.free[omega_index][t];
        let mut pair = extract_moments(&self.dn, self.dom, &u1, u2).map_err(|e| e.in_stage("moments"))?;
        let sigma = self.cfg.noise.dn_sigma;
        if sigma > 0.0 {
            let seed = self.cfg.seed ^ ((omega_index as u64) << 40 | (lambda_index as u64) << 20 | (m + 512) as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let nd = Normal::new(0.0, sigma).map_err(|e| invalid(e.to_string()))?;
            pair.boundary += Complex64::new(nd.sample(&mut rng), nd.sample(&mut rng));
        }
        let capped = budget > self.cfg.cgo.tolerance * scale;
        if capped {
            log::warn!(
                "moment (omega {omega_index}, lambda {lambda}, m {m}): budget {budget:.3e} above tolerance at tau cap {}",
                sched[t]
            );
        }
        Ok(MomentRecord {
            omega_index,
            lambda_index,
            lambda,
            m,
            tau: sched[t],
            capped,
            boundary: pair.boundary,
            volume: pair.volume,
            model,
            scale,
            budget,
            rt1_l2: u1.diagnostics.rt_l2,
            rt2_l2: u2.diagnostics.rt_l2,
            contraction: u1.diagnostics.contraction,
            solve_iterations: pair.solve_iterations,
        })
    }

    /// All moments in (ω, λ, m) order, `m = −K..K` fastest.
    pub fn all(&self) -> Result<Vec<MomentRecord>> {
        let k = self.cfg.probes.harmonics as i64;
        let tasks: Vec<(usize, usize, i64)> = (0..self.cfg.probes.omegas.len())
            .flat_map(|w| (0..self.cfg.lambda.count).flat_map(move |l| (-k..=k).map(move |m| (w, l, m))))
            .collect();
        tasks.par_iter().map(|&(w, l, m)| self.moment(w, l, m)).collect()
    }
}

/// Raises on a moment whose boundary value leaves its Hölder budget around
/// the model value.
pub fn check_budget(rec: &MomentRecord) -> Result<()> {
    let dev = (rec.boundary - rec.model).norm();
    if dev > rec.budget {
        return Err(Error::Budget(format!(
            "moment (omega {}, lambda {}, m {}) deviates by {dev:.3e} from its model, budget {:.3e}",
            rec.omega_index, rec.lambda, rec.m, rec.budget
        )));
    }
    Ok(())
}

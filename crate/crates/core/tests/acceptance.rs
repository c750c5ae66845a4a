//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (no libtest harness) so the lines are printed by a
//! bare `cargo test`. Exits nonzero only for failures not listed in
//! `EXPECTED_FAILURES`.

use std::f64::consts::PI;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use cgolab::carleman::{
    apply_g_tau, conjugated_laplacian, m_tau, m_tau_quadrature, multiplier_bound, verify_carleman_sweep,
    verify_cluster_estimates, CarlemanParams, SpectralField, SweepOptions,
};
use cgolab::cgo::{build_cgo, AngularProfile, CgoAnsatz, CgoDomain, NeumannOptions, Potential};
use cgolab::forward::{dn_map, integral_identity_residual, BoundaryBasis, BoxGrid, DirichletSystem};
use cgolab::geometry::{build_flat_torus_basis, ConformalMetric, ProductCylinder, SimpleManifold2D};
use cgolab::pipeline::{run_experiment, ExperimentConfig};
use cgolab::quad::gauss_legendre;
use cgolab::xray::{
    adjoint_fn, invert_normal, kernel_k_lambda, normal_apply_fn, ray_transform_fn, santalo_integral, smoothing_order_fit,
    tangential_taper, BoundaryDirectionGrid, DiscreteRayTransform, PixelGrid,
};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Criteria known to fail at desk scale, with the reason.
const EXPECTED_FAILURES: &[(u32, &str)] = &[(
    10,
    "|λ| ≤ 0.5 only sees the x1 mean of the bump; the band-limited truth is itself ~95% off",
)];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn bump(s: f64) -> f64 {
    if s.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - s * s)).exp()
    }
}

fn disk_bump(x: [f64; 2], c: [f64; 2], w: f64) -> f64 {
    bump((x[0] - c[0]).hypot(x[1] - c[1]) / w)
}

fn multiplier_exactness() -> Outcome {
    let lin = |a: f64, b: f64, n: usize| (0..n).map(move |i| a + (b - a) * i as f64 / (n - 1) as f64);
    let (mut worst, mut bound_ok, mut n) = (0.0f64, true, 0);
    for t in lin(-2.0, 2.0, 10) {
        for mu in lin(0.3, 19.7, 10) {
            for tau in lin(4.0, 40.0, 10) {
                if (tau - mu).abs() < 1e-9 {
                    continue;
                }
                let c = m_tau(t, mu, tau).unwrap();
                let q = m_tau_quadrature(t, mu, tau, 1e-9).unwrap();
                worst = worst.max((c - q).norm());
                bound_ok &= c.norm() < multiplier_bound(t, mu, tau);
                n += 1;
            }
        }
    }
    outcome(worst <= 1e-8 && bound_ok, format!("{n} points, max |closed − quadrature| {worst:.2e}, strict bound {bound_ok}"))
}

fn unit_cylinder(max_cluster: usize, n1: usize) -> Arc<ProductCylinder> {
    let b = Arc::new(build_flat_torus_basis(&[1.0, 1.0], max_cluster).unwrap());
    Arc::new(ProductCylinder::new((-0.6, 0.6), b, n1).unwrap())
}

fn inverse_identity() -> Outcome {
    let cyl = unit_cylinder(128, 481);
    let jn = cyl.base().len();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for tau in [8.0, 16.0, 32.0] {
        let params = CarlemanParams::new(tau, (-0.5, 0.5), cyl.base()).unwrap();
        for _ in 0..10 {
            // smooth in x1, supported inside the core, with decaying mode weights
            let c = rng.gen_range(-0.1..0.1);
            let w = rng.gen_range(0.2..0.35);
            let amps: Vec<Complex64> = (0..jn)
                .map(|j| {
                    let decay = (-cyl.base().eigenvalue(j) / 2000.0).exp();
                    Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * decay
                })
                .collect();
            let mut u = SpectralField::zeros(cyl.clone());
            for i in 0..cyl.n1() {
                let g = bump((cyl.x1(i) - c) / w);
                for (s, a) in u.slice_mut(i).iter_mut().zip(&amps) {
                    *s = a * g;
                }
            }
            let pu = conjugated_laplacian(&u, tau).scaled(Complex64::new(-1.0, 0.0));
            let back = apply_g_tau(&pu, &params).unwrap();
            worst = worst.max(back.sub(&u).unwrap().l2_norm() / u.l2_norm());
        }
    }
    outcome(worst <= 1e-3, format!("J = {jn}, 30 inputs, max relative defect {worst:.2e}"))
}

fn carleman_constants() -> Outcome {
    let cyl = unit_cylinder(128, 301);
    let rep = verify_carleman_sweep(&cyl, &[8.0, 16.0, 32.0, 64.0], &SweepOptions::default()).unwrap();
    let mut pass = rep.skipped.is_empty();
    let mut parts = Vec::new();
    for pair in ["L2_to_L2_times_tau", "L2_to_H1", "Lp_to_Lq"] {
        let (hi, lo) = rep.spread(pair).unwrap();
        pass &= hi / lo < 2.0;
        parts.push(format!("{pair} {:.2}", hi / lo));
    }
    outcome(pass, format!("spread over tau: {}", parts.join(", ")))
}

fn cluster_estimates() -> Outcome {
    let b = build_flat_torus_basis(&[2.0 * PI, 2.0 * PI], 8).unwrap();
    let rep = verify_cluster_estimates(&b, 5, 8, 11).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for pair in ["cluster_L2_to_L6", "cluster_L6/5_to_L2"] {
        let (hi, lo) = rep.spread(pair).unwrap();
        pass &= hi / lo <= 3.0;
        parts.push(format!("{pair} {:.2}", hi / lo));
    }
    outcome(pass, format!("max/min over k ≤ 8: {}", parts.join(", ")))
}

fn remainder_decay() -> Outcome {
    let dom = CgoDomain::reference(100, 128, 241).unwrap();
    let an = CgoAnsatz::new(dom.default_omega(), 0.0, AngularProfile::constant(1.0));
    let s = 0.05;
    let amp = 3.0 / (4.0 * PI * s * s);
    let q = Potential::from_fn(dom.cyl.clone(), |x1, x| {
        let d2 = x1 * x1 + (x[0] - 0.1).powi(2) + (x[1] + 0.05).powi(2);
        Complex64::new(amp * (-d2 / (2.0 * s * s)).exp(), 0.0)
    });
    let opts = NeumannOptions::default();
    let lo = build_cgo(&q, &an, 8.0, &dom, &opts).unwrap().diagnostics;
    let hi = build_cgo(&q, &an, 64.0, &dom, &opts).unwrap().diagnostics;
    let (r2, r6) = (hi.rt_l2 / lo.rt_l2, hi.rt_l6 / lo.rt_l6);
    outcome(
        r2 <= 0.5 && r6 <= 2.0,
        format!("‖q‖_3/2 {:.2}, L2 ratio 64/8 {r2:.3}, L6 ratio {r6:.3}", q.critical_norm()),
    )
}

fn dn_duality() -> Outcome {
    let g = BoxGrid::new([-0.4, -0.5, -0.5], [0.4, 0.5, 0.5], [7, 8, 8]).unwrap();
    let sys = DirichletSystem::from_fn(g.clone(), |x| Complex64::new(2.0 + x[0] - x[1] * x[2], 0.0)).unwrap();
    let sym = dn_map(&sys, &BoundaryBasis::nodal(&g)).unwrap().symmetry_defect();
    let zero = DirichletSystem::new(g.clone(), vec![Complex64::default(); g.len()]).unwrap();
    let mut worst = 0.0f64;
    for k in 0..5 {
        let a = 1.0 + k as f64;
        let q1 = DirichletSystem::from_fn(g.clone(), move |x| {
            Complex64::new(a, 0.3 * k as f64) * (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) * 10.0).exp()
        })
        .unwrap();
        let q2 = if k % 2 == 0 {
            DirichletSystem::new(g.clone(), zero.potential().to_vec()).unwrap()
        } else {
            DirichletSystem::from_fn(g.clone(), move |x| Complex64::new(0.5 * x[1], 0.0)).unwrap()
        };
        let f1 = g.sample(move |x| Complex64::new(1.0 + x[0], 0.1 * a));
        let f2 = g.sample(move |x| Complex64::new(1.0 - x[1], x[2] * a));
        let c = integral_identity_residual(&q1, &q2, &f1, &f2).unwrap();
        worst = worst.max(c.defect() / c.pde_residual.max(1e-14));
    }
    outcome(sym <= 1e-8 && worst <= 10.0, format!("symmetry defect {sym:.2e}, max defect/PDE residual {worst:.2}"))
}

fn xray_adjoint() -> Outcome {
    let man = SimpleManifold2D::euclidean_disk(1.0);
    let g = BoundaryDirectionGrid::new(&man, 192, 96).unwrap();
    let (nodes, wts) = gauss_legendre(48);
    let n_phi = 96;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    for lambda in [0.0, 0.3] {
        for _ in 0..20 {
            let c = [rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3)];
            let w = rng.gen_range(0.3..0.6);
            let (a0, a1) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let (k, ph, b) = (rng.gen_range(1..4) as f64, rng.gen_range(0.0..PI), rng.gen_range(-0.5..0.5));
            let f = move |x: [f64; 2]| disk_bump(x, c, w) * (1.0 + 0.5 * a0 * x[0] + 0.5 * a1 * x[1]);
            let h = move |al: f64, be: f64| tangential_taper(be) * (1.0 + 0.5 * (k * al + ph).cos() + b * be);
            let tf = ray_transform_fn(&man, &g, f, lambda, 0.005);
            let hv: Vec<f64> = g.samples.iter().map(|s| h(s.alpha, s.beta)).collect();
            let lhs = g.inner_mu(&tf.values, &hv);
            let (mut rhs, mut ff) = (0.0, 0.0);
            for i in 0..nodes.len() {
                let r = 0.5 * w * (nodes[i] + 1.0);
                for p in 0..n_phi {
                    let t = 2.0 * PI * p as f64 / n_phi as f64;
                    let x = [c[0] + r * t.cos(), c[1] + r * t.sin()];
                    let fx = f(x);
                    if fx == 0.0 {
                        continue;
                    }
                    let wq = 0.5 * w * wts[i] * r * 2.0 * PI / n_phi as f64;
                    rhs += wq * fx * adjoint_fn(&man, x, h, lambda, 256).unwrap();
                    ff += wq * fx * fx;
                }
            }
            let scale = ff.sqrt() * g.inner_mu(&hv, &hv).sqrt();
            worst = worst.max((lhs - rhs).abs() / scale);
        }
    }
    let g2 = BoundaryDirectionGrid::new(&man, 64, 48).unwrap();
    let vol = santalo_integral(&man, &g2, |_, _| 1.0, 0.01);
    let vol_err = (vol - 2.0 * PI * PI).abs() / (2.0 * PI * PI);
    outcome(
        worst <= 1e-4 && vol_err <= 1e-3,
        format!("40 pairs, max scaled adjoint defect {worst:.2e}, Santaló volume error {vol_err:.2e}"),
    )
}

fn normal_structure() -> Outcome {
    let bumpy = SimpleManifold2D::new(
        ConformalMetric::GaussianBump {
            amplitude: 0.3,
            width: 0.5,
            center: [0.1, 0.0],
        },
        1.0,
        0.002,
    )
    .unwrap();
    let flat = SimpleManifold2D::euclidean_disk(1.0);
    let pts = [[0.1, 0.2], [-0.4, 0.3], [0.3, -0.2], [-0.1, 0.5], [0.6, 0.1], [0.0, -0.55]];
    let (mut sym, mut closed) = (0.0f64, 0.0f64);
    for (i, &x) in pts.iter().enumerate() {
        for &y in &pts[i + 1..] {
            let k1 = kernel_k_lambda(&bumpy, x, y, 0.3).unwrap();
            let k2 = kernel_k_lambda(&bumpy, y, x, 0.3).unwrap();
            sym = sym.max((k1 - k2).abs() / k1);
            let d = (x[0] - y[0]).hypot(x[1] - y[1]);
            let k = kernel_k_lambda(&flat, x, y, 0.0).unwrap();
            closed = closed.max((k - 2.0 / d).abs() / (2.0 / d));
        }
    }
    let rays = BoundaryDirectionGrid::new(&flat, 256, 192).unwrap();
    let (_, slope) = smoothing_order_fit(&flat, &rays, &[16.0, 24.0, 32.0, 48.0, 64.0], 0.0, 0.2);
    let a = normal_apply_fn(&flat, [0.0, 0.0], |_| 1.0, 0.0, 64, 0.01).unwrap();
    let a_err = (a - 4.0 * PI).abs() / (4.0 * PI);
    outcome(
        sym <= 1e-8 && closed <= 1e-6 && (slope + 1.0).abs() <= 0.15 && a_err <= 0.01,
        format!("symmetry {sym:.1e}, 2/|x−y| defect {closed:.1e}, slope {slope:.3}, A(1)(0)/4π − 1 = {a_err:.1e}"),
    )
}

fn ray_round_trip() -> Outcome {
    let man = SimpleManifold2D::euclidean_disk(1.0);
    let phantom = |x: [f64; 2]| disk_bump(x, [0.2, 0.1], 0.45) + 0.6 * disk_bump(x, [-0.35, -0.3], 0.3);
    let rays = BoundaryDirectionGrid::new(&man, 256, 128).unwrap();
    let pixels = PixelGrid::new(&man, 64).unwrap();
    let mut errs = Vec::new();
    for lambda in [0.0, 0.3] {
        // data from exact line integrals, inversion with the pixel model
        let t = DiscreteRayTransform::new(&man, pixels.clone(), rays.clone(), lambda);
        let data = ray_transform_fn(&man, &rays, phantom, lambda, 0.005);
        let inv = invert_normal(&t, &data, 1e-6, 1e-8).unwrap();
        let truth = pixels.sample(phantom);
        let d: Vec<f64> = inv.f.iter().zip(&truth).map(|(a, b)| a - b).collect();
        errs.push(pixels.l2(&d) / pixels.l2(&truth));
    }
    outcome(
        errs.iter().all(|&e| e <= 0.05),
        format!("relative L2 error {:.3} (λ = 0), {:.3} (λ = 0.3)", errs[0], errs[1]),
    )
}

fn golden_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden/demo_report.sha256")
}

fn end_to_end() -> Outcome {
    let cfg = ExperimentConfig::demo();
    let r = run_experiment(&cfg, None).unwrap();
    let e = r.errors;
    let digest = r.digest(&cfg);
    let golden = match std::fs::read_to_string(golden_path()) {
        Ok(s) => {
            let ok = s.trim() == digest;
            if !ok {
                println!("  golden digest mismatch: expected {}, got {digest}", s.trim());
            }
            format!("golden {}", if ok { "match" } else { "MISMATCH" })
        }
        Err(_) => {
            std::fs::create_dir_all(golden_path().parent().unwrap()).unwrap();
            std::fs::write(golden_path(), format!("{digest}\n")).unwrap();
            "golden frozen".to_string()
        }
    };
    let golden_ok = !golden.contains("MISMATCH");
    println!("  demo errors: raw L2 {:.3}, band-limited L2 {:.3}, ideal-chain L2 {:.3}", e.raw_l2, e.band_l2, e.ideal_l2);
    let summary = r.summary(&cfg);
    println!(
        "  moments {}, at tau cap {}, max model error {:.3}",
        summary.moments, summary.tau_cap_hits, summary.max_model_error
    );
    // the regression half must hold even though the accuracy half fails
    assert!(golden_ok, "demo report digest changed");
    outcome(e.raw_l2 <= 0.15, format!("raw relative L2 {:.3} (limit 0.15), {golden}", e.raw_l2))
}

fn main() {
    let criteria: [(u32, &str, fn() -> Outcome); 10] = [
        (1, "multiplier exactness", multiplier_exactness),
        (2, "inverse-operator identity", inverse_identity),
        (3, "Carleman constants", carleman_constants),
        (4, "cluster estimates", cluster_estimates),
        (5, "CGO remainder decay", remainder_decay),
        (6, "DN duality and integral identity", dn_duality),
        (7, "X-ray adjoint identity", xray_adjoint),
        (8, "normal-operator structure", normal_structure),
        (9, "ray-transform round trip", ray_round_trip),
        (10, "end-to-end reconstruction", end_to_end),
    ];
    let only: Option<u32> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|s| s.parse().ok());
    let mut unexpected = Vec::new();
    for (id, name, run) in criteria {
        if only.is_some_and(|o| o != id) {
            continue;
        }
        let t = Instant::now();
        let o = run();
        let secs = t.elapsed().as_secs_f64();
        let expected = EXPECTED_FAILURES.iter().find(|e| e.0 == id);
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("{tag} {id:>2} {name}: {} [{secs:.1}s]", o.detail);
        match (o.pass, expected) {
            (false, Some((_, why))) => println!("   expected failure: {why}"),
            (false, None) => unexpected.push(id),
            (true, Some(_)) => println!("   listed as an expected failure but passed"),
            (true, None) => {}
        }
    }
    if !unexpected.is_empty() {
        eprintln!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}

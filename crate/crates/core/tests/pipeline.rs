use std::path::Path;

use cgolab::io::GridData;
use cgolab::pipeline::*;
use cgolab::xray::PixelGrid;
use cgolab::geometry::SimpleManifold2D;
use cgolab::Error;
use num_complex::Complex64;

// Coarse enough to run in a couple of seconds; at τ ≤ 6 the finite
// difference DN map still resolves the exponentials on this grid.
fn tiny() -> ExperimentConfig {
    let mut c = ExperimentConfig::demo();
    c.name = "tiny".into();
    c.geometry.max_cluster = 8;
    c.geometry.grid = 24;
    c.geometry.n1 = 29;
    c.cgo.tau_schedule = vec![4.0, 6.0];
    c.probes.harmonics = 1;
    c.probes.omegas = vec![[-0.9, 0.0], [0.0, -0.9], [0.9, 0.3]];
    c.lambda.count = 2;
    c.xray.pixels = 12;
    c.xray.fan_rays = 32;
    c
}

fn at_tau(cfg: &ExperimentConfig, tau: f64) -> ExperimentConfig {
    let mut c = cfg.clone();
    c.cgo.tau_schedule = vec![tau];
    c
}

fn stage_of(e: &Error) -> &str {
    match e {
        Error::Stage { stage, .. } => stage,
        _ => "none",
    }
}

#[test]
fn tiny_config_is_valid() {
    let c = tiny();
    c.validate_static().unwrap();
    c.validate(&c.domain().unwrap()).unwrap();
}

#[test]
fn equal_potentials_give_zero_moments() {
    let cfg = tiny();
    let dom = cfg.domain().unwrap();
    let spec = cfg.potential.scaled(0.0);
    let e = MomentEngine::new(&cfg, &dom, &spec).unwrap();
    for m in -1..=1 {
        let r = e.moment(0, 1, m).unwrap();
        assert_eq!(r.boundary, Complex64::default());
        assert_eq!(r.model, Complex64::default());
        assert_eq!(r.budget, 0.0);
    }
}

#[test]
fn boundary_side_matches_the_volume_side() {
    let cfg = at_tau(&tiny(), 4.0);
    let dom = cfg.domain().unwrap();
    let e = MomentEngine::new(&cfg, &dom, &cfg.potential).unwrap();
    for (w, l, m) in [(0, 0, 0), (1, 1, -1), (2, 1, 1)] {
        let r = e.moment(w, l, m).unwrap();
        let rel = (r.boundary - r.volume).norm() / r.volume.norm();
        assert!(rel < 0.02, "({w}, {l}, {m}): {rel}");
        check_budget(&r).unwrap();
    }
}

#[test]
fn budget_shrinks_as_tau_grows() {
    let cfg = tiny();
    let dom = cfg.domain().unwrap();
    for m in [-1, 0, 1] {
        let b: Vec<f64> = [4.0, 6.0, 8.0]
            .iter()
            .map(|&t| {
                let c = at_tau(&cfg, t);
                MomentEngine::new(&c, &dom, &c.potential).unwrap().moment(0, 1, m).unwrap().budget
            })
            .collect();
        assert!(b[0] > b[1] && b[1] > b[2], "m {m}: {b:?}");
    }
}

#[test]
fn moments_are_linear_up_to_the_budget() {
    let cfg = at_tau(&tiny(), 6.0);
    let dom = cfg.domain().unwrap();
    let one = MomentEngine::new(&cfg, &dom, &cfg.potential).unwrap();
    let two = MomentEngine::new(&cfg, &dom, &cfg.potential.scaled(2.0)).unwrap();
    for m in -1..=1 {
        let a = one.moment(1, 0, m).unwrap();
        let b = two.moment(1, 0, m).unwrap();
        assert!((b.model - 2.0 * a.model).norm() < 1e-12 * b.scale);
        assert!((b.boundary - 2.0 * a.boundary).norm() <= b.budget + 2.0 * a.budget);
    }
}

#[test]
fn budget_violation_is_reported() {
    let cfg = at_tau(&tiny(), 6.0);
    let dom = cfg.domain().unwrap();
    let mut r = MomentEngine::new(&cfg, &dom, &cfg.potential).unwrap().moment(0, 0, 0).unwrap();
    r.boundary += Complex64::new(2.0 * r.budget, 0.0);
    let err = check_budget(&r).unwrap_err();
    assert_eq!(err.kind(), "budget");
}

#[test]
fn zero_potential_reconstructs_zero() {
    let mut cfg = tiny();
    cfg.potential.amplitude = 0.0;
    let r = run_experiment(&cfg, None).unwrap();
    assert!(r.q_hat.iter().all(|&v| v == 0.0));
    assert_eq!(r.errors.raw_l2, 0.0);
}

#[test]
fn strong_potential_fails_in_the_cgo_stage() {
    let mut cfg = at_tau(&tiny(), 4.5);
    cfg.potential.amplitude = 400.0;
    let err = run_experiment(&cfg, None).unwrap_err();
    assert_eq!(stage_of(&err), "cgo");
    assert_eq!(err.kind(), "contraction");
    let dir = tempfile::tempdir().unwrap();
    write_error_record(&err, dir.path()).unwrap();
    let text = std::fs::read_to_string(dir.path().join("error.csv")).unwrap();
    assert!(text.contains("cgo") && text.contains("contraction"), "{text}");
}

#[test]
fn large_lambda_fails_in_the_config_stage() {
    let mut cfg = tiny();
    cfg.lambda.max = 0.6;
    let err = run_experiment(&cfg, None).unwrap_err();
    assert_eq!(stage_of(&err), "config");
}

#[test]
fn noise_is_seeded() {
    let mut cfg = at_tau(&tiny(), 6.0);
    cfg.noise.dn_sigma = 1e-3;
    let dom = cfg.domain().unwrap();
    let clean = MomentEngine::new(&at_tau(&tiny(), 6.0), &dom, &cfg.potential).unwrap().moment(0, 0, 1).unwrap();
    let a = MomentEngine::new(&cfg, &dom, &cfg.potential).unwrap().moment(0, 0, 1).unwrap();
    let b = MomentEngine::new(&cfg, &dom, &cfg.potential).unwrap().moment(0, 0, 1).unwrap();
    assert_eq!(a.boundary, b.boundary);
    assert_ne!(a.boundary, clean.boundary);
    let mut other = cfg.clone();
    other.seed += 1;
    let c = MomentEngine::new(&other, &dom, &cfg.potential).unwrap().moment(0, 0, 1).unwrap();
    assert_ne!(a.boundary, c.boundary);
}

fn read_real(path: &Path) -> (Vec<usize>, Vec<f64>) {
    match GridData::read(path).unwrap() {
        GridData::Real { dims, values } => (dims, values),
        other => panic!("expected a real grid, got dims {:?}", other.dims()),
    }
}

#[test]
fn runs_are_reproducible_and_recomputable() {
    let cfg = tiny();
    let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let r1 = run_experiment(&cfg, Some(d1.path())).unwrap();
    let r2 = run_experiment(&cfg, Some(d2.path())).unwrap();
    let h1 = std::fs::read_to_string(d1.path().join("hashes.txt")).unwrap();
    let h2 = std::fs::read_to_string(d2.path().join("hashes.txt")).unwrap();
    assert_eq!(h1, h2);
    assert_eq!(r1.digest(&cfg), r2.digest(&cfg));
    assert!(!d1.path().join("error.csv").exists());
    assert!(d1.path().join("stages.csv").exists());

    // errors from the written volumes alone
    let x1: Vec<f64> = std::fs::read_to_string(d1.path().join("x1_nodes.csv"))
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.trim().parse().unwrap())
        .collect();
    let (dims, q_hat) = read_real(&d1.path().join("q_hat.cgog"));
    let (_, q_true) = read_real(&d1.path().join("q_true.cgog"));
    let (_, q_band) = read_real(&d1.path().join("q_band.cgog"));
    assert_eq!(dims, vec![x1.len(), cfg.xray.pixels, cfg.xray.pixels]);
    let pixels = PixelGrid::new(&SimpleManifold2D::euclidean_disk(cfg.xray.disk_radius), cfg.xray.pixels).unwrap();
    let mass = pixels.to_image(pixels.mass());
    let h1 = x1[1] - x1[0];
    let weights: Vec<f64> = (0..x1.len())
        .flat_map(|i| {
            let w = if i == 0 || i + 1 == x1.len() { 0.5 * h1 } else { h1 };
            mass.iter().map(move |m| w * m)
        })
        .collect();
    let (raw, raw32) = relative_errors(&q_hat, &q_true, &weights);
    let (band, _) = relative_errors(&q_hat, &q_band, &weights);
    let close = |a: f64, b: f64| (a - b).abs() < 1e-6 * b.max(1e-12);
    assert!(close(raw, r1.errors.raw_l2), "{raw} {}", r1.errors.raw_l2);
    assert!(close(raw32, r1.errors.raw_l32));
    assert!(close(band, r1.errors.band_l2));
}

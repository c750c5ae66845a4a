use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;

use cgolab::carleman::{verify_carleman_sweep, verify_cluster_estimates, SweepOptions};
use cgolab::cgo::{build_cgo, AngularProfile, CgoAnsatz, Potential};
use cgolab::forward::{dn_map, BoundaryBasis, DirichletSystem};
use cgolab::geometry::{build_flat_torus_basis, ProductCylinder, SimpleManifold2D};
use cgolab::io::{csv_string, num, sha256_hex, GridData};
use cgolab::pipeline::{run_experiment, write_error_record, ExperimentConfig, TraceMap};
use cgolab::xray::{
    condition_sweep, invert_normal, ray_transform_fn, santalo_integral, smoothing_order_fit, BoundaryDirectionGrid,
    DiscreteRayTransform, PixelGrid,
};

#[derive(Parser)]
#[command(name = "cgolab", version, about = "CGO reconstruction experiments on product cylinders")]
struct Cli {
    /// Experiment config (TOML); the bundled demo when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; falls back to `output.dir` in the config, then `out`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for the parallel stages.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Carleman constant sweep and spectral cluster ratios on flat tori.
    VerifyCarleman(CarlemanArgs),
    /// Santaló volume, smoothing order, conditioning and a phantom round trip.
    VerifyXray(XrayArgs),
    /// One CGO solution for the config potential.
    BuildCgo(CgoArgs),
    /// DN maps of the config potential and of zero on a trigonometric basis.
    DnMap(DnArgs),
    /// The full pipeline; writes every artifact, or error.csv on failure.
    Reconstruct,
    /// Prints a written report and checks the artifact hashes.
    Report,
}

#[derive(Args)]
struct CarlemanArgs {
    #[arg(long, default_value_t = 40)]
    max_cluster: usize,
    #[arg(long, default_value_t = 241)]
    n1: usize,
    #[arg(long, value_delimiter = ',', default_value = "8,16,32,64")]
    taus: Vec<f64>,
    /// Largest cluster index for the cluster ratios.
    #[arg(long, default_value_t = 8)]
    clusters: usize,
    #[arg(long, default_value_t = 5)]
    trials: usize,
}

#[derive(Args)]
struct XrayArgs {
    #[arg(long, default_value_t = 32)]
    pixels: usize,
    #[arg(long, value_delimiter = ',', default_value = "0,0.3")]
    lambdas: Vec<f64>,
    #[arg(long, default_value_t = 128)]
    n_alpha: usize,
    #[arg(long, default_value_t = 64)]
    n_beta: usize,
    #[arg(long, default_value_t = 1e-6)]
    ridge: f64,
}

#[derive(Args)]
struct CgoArgs {
    #[arg(long, default_value_t = 0)]
    omega: usize,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    lambda: f64,
    #[arg(long, default_value_t = 0, allow_negative_numbers = true)]
    m: i64,
    /// Defaults to the first entry of the τ schedule.
    #[arg(long)]
    tau: Option<f64>,
}

#[derive(Args)]
struct DnArgs {
    #[arg(long, default_value_t = 2)]
    order: usize,
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p).with_context(|| format!("loading {}", p.display()))?,
        None => ExperimentConfig::demo(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn out_dir(cli: &Cli, cfg: Option<&ExperimentConfig>) -> PathBuf {
    cli.out
        .clone()
        .or_else(|| cfg.and_then(|c| c.output.dir.clone()).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn write(dir: &Path, name: &str, bytes: impl AsRef<[u8]>) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(name), bytes).with_context(|| format!("writing {name}"))
}

fn verify_carleman(a: &CarlemanArgs, dir: &Path, seed: u64) -> Result<()> {
    let base = Arc::new(build_flat_torus_basis(&[1.0, 1.0], a.max_cluster)?);
    let cyl = Arc::new(ProductCylinder::new((-0.6, 0.6), base, a.n1)?);
    let opts = SweepOptions {
        seed,
        ..SweepOptions::default()
    };
    let rep = verify_carleman_sweep(&cyl, &a.taus, &opts)?;
    let mut buf = Vec::new();
    rep.write_csv(&mut buf)?;
    write(dir, "carleman.csv", buf)?;
    for (tau, why) in &rep.skipped {
        println!("tau {tau} skipped: {why}");
    }
    for pair in rep.pairs() {
        if let Some((hi, lo)) = rep.spread(&pair) {
            println!("{pair}: max {hi:.4e}, spread {:.3}", hi / lo);
        }
    }

    let torus = build_flat_torus_basis(&[2.0 * std::f64::consts::PI; 2], a.clusters)?;
    let cl = verify_cluster_estimates(&torus, a.trials, a.clusters, seed)?;
    let mut buf = Vec::new();
    cl.write_csv(&mut buf)?;
    write(dir, "clusters.csv", buf)?;
    for pair in cl.pairs() {
        if let Some((hi, lo)) = cl.spread(&pair) {
            println!("{pair}: max {hi:.4e}, spread over k {:.3}", hi / lo);
        }
    }
    Ok(())
}

fn verify_xray(a: &XrayArgs, dir: &Path) -> Result<()> {
    let man = SimpleManifold2D::euclidean_disk(1.0);
    let rays = BoundaryDirectionGrid::new(&man, a.n_alpha, a.n_beta)?;
    let vol = santalo_integral(&man, &rays, |_, _| 1.0, 0.01);
    let two_pi2 = 2.0 * std::f64::consts::PI.powi(2);
    println!("Santaló volume {vol:.6} (relative error {:.2e})", (vol - two_pi2).abs() / two_pi2);
    let (_, slope) = smoothing_order_fit(&man, &rays, &[16.0, 24.0, 32.0, 48.0], 0.0, 0.2);
    println!("smoothing order slope {slope:.3}");

    let conds = condition_sweep(&man, a.pixels.min(32), a.n_alpha, a.n_beta, &a.lambdas)?;
    let phantom = |x: [f64; 2]| {
        let b = |c: [f64; 2], w: f64| {
            let s = (x[0] - c[0]).hypot(x[1] - c[1]) / w;
            if s >= 1.0 {
                0.0
            } else {
                (1.0 - 1.0 / (1.0 - s * s)).exp()
            }
        };
        b([0.2, 0.1], 0.45) + 0.6 * b([-0.35, -0.3], 0.3)
    };
    let pixels = PixelGrid::new(&man, a.pixels)?;
    let truth = pixels.sample(phantom);
    let mut rows = Vec::new();
    for (&lambda, &(_, cond)) in a.lambdas.iter().zip(&conds) {
        let t = DiscreteRayTransform::new(&man, pixels.clone(), rays.clone(), lambda);
        let data = ray_transform_fn(&man, &rays, phantom, lambda, 0.005);
        let inv = invert_normal(&t, &data, a.ridge, 1e-8)?;
        let d: Vec<f64> = inv.f.iter().zip(&truth).map(|(x, y)| x - y).collect();
        let err = pixels.l2(&d) / pixels.l2(&truth);
        println!("lambda {lambda}: condition {cond:.3e}, round-trip error {err:.4} ({} CG iterations)", inv.iterations);
        rows.push(vec![num(lambda), num(cond), num(err), inv.iterations.to_string()]);
    }
    write(dir, "xray.csv", csv_string(&["lambda", "condition", "roundtrip_error", "iterations"], &rows)?)?;
    Ok(())
}

fn build_one_cgo(cfg: &ExperimentConfig, a: &CgoArgs, dir: &Path) -> Result<()> {
    let dom = cfg.domain()?;
    cfg.validate(&dom)?;
    let omega = *cfg.probes.omegas.get(a.omega).context("omega index out of range")?;
    let tau = a.tau.unwrap_or(cfg.cgo.tau_schedule[0]);
    let spec = cfg.potential;
    let q = Potential::from_fn(dom.cyl.clone(), |x1, y| Complex64::new(spec.eval(x1, [y[0], y[1]]), 0.0));
    let an = CgoAnsatz::new(omega, a.lambda, AngularProfile::harmonic(a.m));
    let sol = build_cgo(&q, &an, tau, &dom, &cfg.neumann_options())?;
    let d = sol.diagnostics;
    let rows: Vec<Vec<String>> = [
        ("tau", d.tau),
        ("f_l2", d.f_l2),
        ("r0_l2", d.r0_l2),
        ("r0_h1", d.r0_h1),
        ("r0_l6", d.r0_l6),
        ("r1_l2", d.r1_l2),
        ("rt_l2", d.rt_l2),
        ("rt_l6", d.rt_l6),
        ("contraction", d.contraction),
        ("neumann_terms", d.neumann_terms as f64),
        ("residual", d.residual),
    ]
    .iter()
    .map(|(k, v)| vec![k.to_string(), num(*v)])
    .collect();
    write(dir, "cgo_diagnostics.csv", csv_string(&["quantity", "value"], &rows)?)?;
    // conjugated solution a + r̃ on the x₁ = 0 slice
    let i0 = dom.cyl.n1() / 2;
    let g = dom.cyl.base().grid_dims().to_vec();
    let slice = GridData::Complex {
        dims: g,
        values: sol.conjugated_slice(i0),
    };
    write(dir, "cgo_slice.cgog", slice.to_bytes()?)?;
    println!(
        "tau {tau}: |r~|_L2 {:.3e}, |r~|_L6 {:.3e}, contraction {:.3}, {} Neumann terms, residual {:.2e}",
        d.rt_l2, d.rt_l6, d.contraction, d.neumann_terms, d.residual
    );
    Ok(())
}

fn dn_maps(cfg: &ExperimentConfig, a: &DnArgs, dir: &Path) -> Result<()> {
    let dom = cfg.domain()?;
    let grid = TraceMap::new(&dom)?.grid;
    let spec = cfg.potential;
    let q = DirichletSystem::from_fn(grid.clone(), |x| Complex64::new(spec.eval(x[0], [x[1], x[2]]), 0.0))?;
    let zero = DirichletSystem::new(grid.clone(), vec![Complex64::default(); grid.len()])?;
    let basis = BoundaryBasis::trigonometric(&grid, a.order);
    let lq = dn_map(&q, &basis)?;
    let l0 = dn_map(&zero, &basis)?;
    let n = basis.len();
    let mat = |m: &cgolab::forward::DNMapMatrix| GridData::Complex {
        dims: vec![n, n],
        values: (0..n).flat_map(|i| (0..n).map(move |k| (i, k))).map(|(i, k)| m.entries[(i, k)]).collect(),
    };
    write(dir, "dn_q.cgog", mat(&lq).to_bytes()?)?;
    write(dir, "dn_zero.cgog", mat(&l0).to_bytes()?)?;
    let diff = lq.difference(&l0);
    let rows = vec![vec![
        n.to_string(),
        num(lq.symmetry_defect()),
        num(l0.symmetry_defect()),
        num(diff.norm()),
        num(lq.max_residual.max(l0.max_residual)),
    ]];
    write(
        dir,
        "dn_map.csv",
        csv_string(&["basis_size", "symmetry_defect_q", "symmetry_defect_zero", "difference_norm", "max_residual"], &rows)?,
    )?;
    println!(
        "{n} basis traces: symmetry defect {:.2e}, |Λ_q − Λ_0| {:.4e}",
        lq.symmetry_defect(),
        diff.norm()
    );
    Ok(())
}

fn reconstruct(cfg: &ExperimentConfig, dir: &Path) -> Result<bool> {
    match run_experiment(cfg, Some(dir)) {
        Ok(r) => {
            let e = r.errors;
            println!(
                "{}: band {} | raw L2 {:.3}, band-limited L2 {:.3}, ideal-chain L2 {:.3}",
                r.name, r.band, e.raw_l2, e.band_l2, e.ideal_l2
            );
            for s in &r.stages {
                println!("  {:<9} {:>8.2}s  {}", s.name, s.seconds, s.detail);
            }
            println!("digest {}", r.digest(cfg));
            Ok(true)
        }
        Err(e) => {
            write_error_record(&e, dir)?;
            eprintln!("error: {e}");
            eprintln!("record written to {}", dir.join("error.csv").display());
            Ok(false)
        }
    }
}

fn report(dir: &Path) -> Result<bool> {
    if let Ok(err) = std::fs::read_to_string(dir.join("error.csv")) {
        print!("{err}");
        return Ok(false);
    }
    let text = std::fs::read_to_string(dir.join("report.toml")).with_context(|| format!("no report in {}", dir.display()))?;
    print!("{text}");
    let hashes = std::fs::read_to_string(dir.join("hashes.txt"))?;
    let mut bad = 0;
    for line in hashes.lines() {
        let Some((want, name)) = line.split_once("  ") else {
            bail!("malformed hashes.txt line: {line}");
        };
        let got = std::fs::read(dir.join(name)).map(|b| sha256_hex(&b)).unwrap_or_default();
        if got != want {
            println!("hash mismatch: {name}");
            bad += 1;
        }
    }
    println!("{} artifacts checked, {bad} mismatched", hashes.lines().count());
    Ok(bad == 0)
}

fn run(cli: &Cli) -> Result<bool> {
    if let Some(k) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(k).build_global()?;
    }
    match &cli.cmd {
        Cmd::VerifyCarleman(a) => {
            let seed = cli.seed.unwrap_or(7);
            verify_carleman(a, &out_dir(cli, None), seed)?;
        }
        Cmd::VerifyXray(a) => verify_xray(a, &out_dir(cli, None))?,
        Cmd::BuildCgo(a) => {
            let cfg = load_config(cli)?;
            build_one_cgo(&cfg, a, &out_dir(cli, Some(&cfg)))?;
        }
        Cmd::DnMap(a) => {
            let cfg = load_config(cli)?;
            dn_maps(&cfg, a, &out_dir(cli, Some(&cfg)))?;
        }
        Cmd::Reconstruct => {
            let cfg = load_config(cli)?;
            return reconstruct(&cfg, &out_dir(cli, Some(&cfg)));
        }
        Cmd::Report => {
            let cfg = cli.config.as_ref().map(|_| load_config(cli)).transpose()?;
            return report(&out_dir(cli, cfg.as_ref()));
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn,cgolab::carleman::operator=error")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

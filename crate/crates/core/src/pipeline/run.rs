use std::path::Path;
use std::time::Instant;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::SimpleManifold2D;
use crate::io::{csv_string, num, sha256_hex, GridData};
use crate::xray::PixelGrid;

use super::assemble::{assemble_f_lambda, FLambdaField};
use super::config::ExperimentConfig;
use super::moments::{check_budget, MomentEngine, MomentRecord};
use super::recover::{invert_fields, inverse_fourier_x1, relative_errors, FanOperator, LambdaSlice};

/// Wall time and a one-line residual summary per stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageLog {
    pub name: String,
    pub seconds: f64,
    pub detail: String,
}

/// Relative errors of `q̂` against three references.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReconErrors {
    /// Against `q` itself.
    pub raw_l2: f64,
    pub raw_l32: f64,
    /// Against `q_Λ`, the synthesis of the exact `f_λ` over the same λ grid.
    pub band_l2: f64,
    pub band_l32: f64,
    /// Against the reconstruction from exact model moments through the same
    /// assembly and inversion.
    pub ideal_l2: f64,
    pub ideal_l32: f64,
}

#[derive(Debug, Clone)]
pub struct ReconReport {
    pub name: String,
    pub lambdas: Vec<f64>,
    /// Largest λ that survived inversion: `q̂` is band-limited to `|λ| ≤ band`.
    pub band: f64,
    pub lambda_gaps: Vec<f64>,
    pub x1: Vec<f64>,
    pub pixels: PixelGrid,
    /// `[x₁][unknown]` arrays over the disk pixels.
    pub q_hat: Vec<f64>,
    pub q_true: Vec<f64>,
    pub q_band: Vec<f64>,
    pub q_ideal: Vec<f64>,
    /// Quadrature weight of each `[x₁][unknown]` entry.
    pub weights: Vec<f64>,
    pub errors: ReconErrors,
    pub moments: Vec<MomentRecord>,
    pub fields: Vec<FLambdaField>,
    pub slices: Vec<LambdaSlice>,
    pub tau_cap: f64,
    pub stages: Vec<StageLog>,
}

/// Timing-free summary: what `report.toml` stores and the digest covers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSummary {
    pub name: String,
    pub band: f64,
    pub lambdas: Vec<f64>,
    pub lambda_gaps: Vec<f64>,
    pub omegas: usize,
    pub harmonics: usize,
    pub moments: usize,
    pub tau_cap: f64,
    pub tau_cap_hits: usize,
    pub max_model_error: f64,
    pub max_budget_ratio: f64,
    pub max_gram_condition: f64,
    pub errors: ReconErrors,
}

impl ReconReport {
    pub fn summary(&self, cfg: &ExperimentConfig) -> ReportSummary {
        let ratio = |r: &MomentRecord| r.budget / r.scale.max(f64::MIN_POSITIVE);
        ReportSummary {
            name: self.name.clone(),
            band: self.band,
            lambdas: self.lambdas.clone(),
            lambda_gaps: self.lambda_gaps.clone(),
            omegas: cfg.probes.omegas.len(),
            harmonics: cfg.probes.harmonics,
            moments: self.moments.len(),
            tau_cap: self.tau_cap,
            tau_cap_hits: self.moments.iter().filter(|r| r.capped).count(),
            max_model_error: self.moments.iter().map(|r| r.model_error()).fold(0.0, f64::max),
            max_budget_ratio: self.moments.iter().map(ratio).fold(0.0, f64::max),
            max_gram_condition: self.fields.iter().map(|f| f.gram_condition).fold(0.0, f64::max),
            errors: self.errors,
        }
    }

    /// Digest of the summary with every number rounded to eight significant
    /// digits, so last-bit libm differences do not move it.
    pub fn digest(&self, cfg: &ExperimentConfig) -> String {
        let s = self.summary(cfg);
        let e = s.errors;
        let mut text = format!("{}|{}|{}|{}|{}|", s.name, s.omegas, s.harmonics, s.moments, s.tau_cap_hits);
        let nums = [s.band, s.tau_cap, s.max_model_error, s.max_budget_ratio, s.max_gram_condition]
            .into_iter()
            .chain(s.lambdas.iter().copied())
            .chain(s.lambda_gaps.iter().copied())
            .chain([e.raw_l2, e.raw_l32, e.band_l2, e.band_l32, e.ideal_l2, e.ideal_l32]);
        for v in nums {
            text.push_str(&format!("{v:.7e}|"));
        }
        sha256_hex(text.as_bytes())
    }
}

struct Stages(Vec<StageLog>);

impl Stages {
    fn run<T>(&mut self, name: &'static str, f: impl FnOnce() -> Result<(T, String)>) -> Result<T> {
        let t = Instant::now();
        let (v, detail) = f().map_err(|e| match e {
            Error::Stage { .. } => e,
            e => e.in_stage(name),
        })?;
        log::info!("stage {name}: {detail} ({:.2?})", t.elapsed());
        self.0.push(StageLog {
            name: name.into(),
            seconds: t.elapsed().as_secs_f64(),
            detail,
        });
        Ok(v)
    }
}

fn fields_from(
    cfg: &ExperimentConfig,
    recs: &[MomentRecord],
    value: fn(&MomentRecord) -> Complex64,
) -> Result<Vec<FLambdaField>> {
    let n = 2 * cfg.probes.harmonics + 1;
    let mut out: Vec<FLambdaField> = recs
        .chunks(n)
        .map(|c| {
            let m: Vec<Complex64> = c.iter().map(value).collect();
            let t: Vec<f64> = c.iter().map(|r| r.tau).collect();
            assemble_f_lambda(&m, &t, c[0].omega_index, cfg.probes.omegas[c[0].omega_index], c[0].lambda)
        })
        .collect::<Result<_>>()?;
    // grouped by λ, then ω, to match the fan operator rows
    out.sort_by(|a, b| a.lambda.total_cmp(&b.lambda).then(a.omega_index.cmp(&b.omega_index)));
    Ok(out)
}

/// Runs every stage and, when `out` is given, writes the artifacts there.
pub fn run_experiment(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<ReconReport> {
    let mut st = Stages(Vec::new());
    st.run("config", || {
        cfg.validate_static()?;
        Ok(((), "static checks passed".to_string()))
    })?;
    let dom = st.run("geometry", || {
        let dom = cfg.domain()?;
        cfg.validate(&dom)?;
        Ok((dom, format!("base modes {}", cfg.geometry.max_cluster)))
    })?;
    let engine = st.run("forward", || {
        let e = MomentEngine::new(cfg, &dom, &cfg.potential)?;
        let detail = format!("grid {:?}", e.dn.map.grid.n);
        Ok((e, detail))
    })?;
    let moments = st.run("cgo", || {
        let recs = engine.all()?;
        let capped = recs.iter().filter(|r| r.capped).count();
        Ok((recs, format!("{capped} moments at the tau cap")))
    })?;
    st.run("moments", || {
        moments.iter().try_for_each(check_budget)?;
        let worst = moments.iter().map(|r| r.model_error()).fold(0.0, f64::max);
        Ok(((), format!("max relative model error {worst:.3e}")))
    })?;
    let mut report = recover_potential(cfg, moments)?;
    st.0.append(&mut report.stages);
    if let Some(dir) = out {
        st.run("write", || {
            let n = write_artifacts(cfg, &report, dir)?;
            Ok(((), format!("{n} files in {}", dir.display())))
        })?;
        report.stages = st.0;
        // timings are only known now; the summary file excludes them
        std::fs::write(dir.join("stages.csv"), stages_csv(&report.stages)?)?;
    } else {
        report.stages = st.0;
    }
    Ok(report)
}

/// Assembles fan data from the moments, inverts the attenuated fan
/// transform per λ and synthesises `q̂` in x₁. The same chain is run on the
/// exact model moments for the `ideal` reference.
pub fn recover_potential(cfg: &ExperimentConfig, moments: Vec<MomentRecord>) -> Result<ReconReport> {
    let mut st = Stages(Vec::new());
    let lambdas = cfg.lambdas();
    let (fields, ideal_fields) = st.run("assemble", || {
        let f = fields_from(cfg, &moments, |r| r.boundary)?;
        let g = fields_from(cfg, &moments, |r| r.model)?;
        let c = f.iter().map(|f| f.gram_condition).fold(0.0, f64::max);
        Ok(((f, g), format!("max gram condition {c:.3e}")))
    })?;
    let man = SimpleManifold2D::euclidean_disk(cfg.xray.disk_radius);
    let pixels = PixelGrid::new(&man, cfg.xray.pixels)?;
    let (slices, ideal_slices) = st.run("xray", || {
        let ops = lambdas
            .iter()
            .map(|&l| FanOperator::new(&man, &pixels, &cfg.probes.omegas, cfg.probes.harmonics, cfg.xray.fan_rays, l))
            .collect::<Result<Vec<_>>>()?;
        let s = invert_fields(&ops, &fields, &lambdas, cfg.xray.ridge, cfg.xray.tol)?;
        let i = invert_fields(&ops, &ideal_fields, &lambdas, cfg.xray.ridge, cfg.xray.tol)?;
        let it: usize = s.iter().map(|s| s.iterations).sum();
        Ok(((s, i), format!("{it} CG iterations")))
    })?;
    let report = st.run("recover", || {
        let nx = (cfg.geometry.n1 - 1) / 2 + 1;
        let x1: Vec<f64> = (0..nx).map(|i| -0.3 + 0.6 * i as f64 / (nx - 1) as f64).collect();
        let np = pixels.len();
        let q_hat = inverse_fourier_x1(&slices, &x1, np);
        let q_ideal = inverse_fourier_x1(&ideal_slices, &x1, np);
        let centres: Vec<[f64; 2]> = (0..np).map(|k| pixels.centre(k)).collect();
        let exact: Vec<LambdaSlice> = lambdas
            .iter()
            .map(|&l| LambdaSlice {
                lambda: l,
                f: Some(centres.iter().map(|&y| cfg.potential.f_lambda(l, y)).collect()),
                iterations: 0,
                residual: 0.0,
                failure: None,
            })
            .collect();
        let q_band = inverse_fourier_x1(&exact, &x1, np);
        let q_true: Vec<f64> = x1.iter().flat_map(|&a| centres.iter().map(move |&y| (a, y))).map(|(a, y)| cfg.potential.eval(a, y)).collect();
        let h1 = 0.6 / (nx - 1) as f64;
        let weights: Vec<f64> = (0..x1.len())
            .flat_map(|i| {
                let w = if i == 0 || i + 1 == x1.len() { 0.5 * h1 } else { h1 };
                pixels.mass().iter().map(move |m| w * m)
            })
            .collect();
        let (raw_l2, raw_l32) = relative_errors(&q_hat, &q_true, &weights);
        let (band_l2, band_l32) = relative_errors(&q_hat, &q_band, &weights);
        let (ideal_l2, ideal_l32) = relative_errors(&q_hat, &q_ideal, &weights);
        let gaps: Vec<f64> = slices.iter().filter(|s| s.f.is_none()).map(|s| s.lambda).collect();
        let band = slices.iter().filter(|s| s.f.is_some()).map(|s| s.lambda).fold(0.0, f64::max);
        let detail = format!("raw L2 {raw_l2:.3}, band-limited L2 {band_l2:.3}, ideal L2 {ideal_l2:.3}");
        let r = ReconReport {
            name: cfg.name.clone(),
            lambdas: lambdas.clone(),
            band,
            lambda_gaps: gaps,
            x1,
            pixels: pixels.clone(),
            q_hat,
            q_true,
            q_band,
            q_ideal,
            weights,
            errors: ReconErrors {
                raw_l2,
                raw_l32,
                band_l2,
                band_l32,
                ideal_l2,
                ideal_l32,
            },
            moments: moments.clone(),
            fields: fields.clone(),
            slices: slices.clone(),
            tau_cap: *cfg.cgo.tau_schedule.last().expect("validated"),
            stages: Vec::new(),
        };
        Ok((r, detail))
    })?;
    let mut report = report;
    report.stages = st.0;
    Ok(report)
}

fn stages_csv(stages: &[StageLog]) -> Result<String> {
    let rows: Vec<Vec<String>> = stages.iter().map(|s| vec![s.name.clone(), num(s.seconds), s.detail.clone()]).collect();
    csv_string(&["stage", "seconds", "detail"], &rows)
}

/// Writes the stage-failure record for `err` into `dir`.
pub fn write_error_record(err: &Error, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let stage = match err {
        Error::Stage { stage, .. } => stage,
        _ => "unknown",
    };
    let text = csv_string(&["stage", "kind", "message"], &[vec![stage.to_string(), err.kind().into(), err.to_string()]])?;
    std::fs::write(dir.join("error.csv"), text)?;
    Ok(())
}

fn c_cols(v: Complex64) -> [String; 2] {
    [num(v.re), num(v.im)]
}

pub fn moments_csv(recs: &[MomentRecord]) -> Result<String> {
    let header = [
        "omega_index", "lambda", "m", "tau", "capped", "boundary_re", "boundary_im", "volume_re", "volume_im",
        "model_re", "model_im", "scale", "budget", "rt1_l2", "rt2_l2", "contraction", "solve_iterations",
    ];
    let rows: Vec<Vec<String>> = recs
        .iter()
        .map(|r| {
            let mut row = vec![r.omega_index.to_string(), num(r.lambda), r.m.to_string(), num(r.tau), r.capped.to_string()];
            row.extend(c_cols(r.boundary));
            row.extend(c_cols(r.volume));
            row.extend(c_cols(r.model));
            row.extend([r.scale, r.budget, r.rt1_l2, r.rt2_l2, r.contraction].map(num));
            row.push(r.solve_iterations.to_string());
            row
        })
        .collect();
    csv_string(&header, &rows)
}

fn write_artifacts(cfg: &ExperimentConfig, r: &ReconReport, dir: &Path) -> Result<usize> {
    std::fs::create_dir_all(dir)?;
    let mut files: Vec<(String, Vec<u8>)> = Vec::new();
    files.push(("config.toml".into(), cfg.to_toml().into_bytes()));
    files.push(("moments.csv".into(), moments_csv(&r.moments)?.into_bytes()));

    let rows: Vec<Vec<String>> = r
        .fields
        .iter()
        .flat_map(|f| {
            f.thetas.iter().zip(&f.values).map(move |(t, v)| {
                let mut row = vec![f.omega_index.to_string(), num(f.lambda), num(*t)];
                row.extend(c_cols(*v));
                row.push(num(f.gram_condition));
                row
            })
        })
        .collect();
    files.push(("fan_data.csv".into(), csv_string(&["omega_index", "lambda", "theta", "re", "im", "gram_condition"], &rows)?.into_bytes()));

    let rows: Vec<Vec<String>> = r
        .slices
        .iter()
        .map(|s| vec![num(s.lambda), s.iterations.to_string(), num(s.residual), s.failure.clone().unwrap_or_default()])
        .collect();
    files.push(("inversions.csv".into(), csv_string(&["lambda", "iterations", "residual", "failure"], &rows)?.into_bytes()));

    let n = r.pixels.n;
    let np = r.pixels.len();
    let vol = |u: &[f64]| -> Result<Vec<u8>> {
        let values: Vec<f64> = (0..r.x1.len()).flat_map(|i| r.pixels.to_image(&u[i * np..(i + 1) * np])).collect();
        GridData::Real {
            dims: vec![r.x1.len(), n, n],
            values,
        }
        .to_bytes()
    };
    files.push(("q_hat.cgog".into(), vol(&r.q_hat)?));
    files.push(("q_true.cgog".into(), vol(&r.q_true)?));
    files.push(("q_band.cgog".into(), vol(&r.q_band)?));
    files.push(("q_ideal.cgog".into(), vol(&r.q_ideal)?));
    let mut fl = Vec::new();
    for s in &r.slices {
        let f = s.f.clone().unwrap_or_else(|| vec![Complex64::default(); np]);
        let re = r.pixels.to_image(&f.iter().map(|c| c.re).collect::<Vec<_>>());
        let im = r.pixels.to_image(&f.iter().map(|c| c.im).collect::<Vec<_>>());
        fl.extend(re.iter().zip(&im).map(|(a, b)| Complex64::new(*a, *b)));
    }
    files.push((
        "f_lambda.cgog".into(),
        GridData::Complex {
            dims: vec![r.slices.len(), n, n],
            values: fl,
        }
        .to_bytes()?,
    ));
    let x1: Vec<Vec<String>> = r.x1.iter().map(|&x| vec![num(x)]).collect();
    files.push(("x1_nodes.csv".into(), csv_string(&["x1"], &x1)?.into_bytes()));

    // plot bundle: x₁ profile through the bump centre and the x₁ = 0 slice
    let c = cfg.potential.centre;
    let k0 = (0..np)
        .min_by(|&a, &b| {
            let d = |k: usize| {
                let p = r.pixels.centre(k);
                (p[0] - c[0]).hypot(p[1] - c[1])
            };
            d(a).total_cmp(&d(b))
        })
        .unwrap_or(0);
    let pick = |u: &[f64], i: usize, k: usize| num(u[i * np + k]);
    let rows: Vec<Vec<String>> = (0..r.x1.len())
        .map(|i| vec![num(r.x1[i]), pick(&r.q_hat, i, k0), pick(&r.q_true, i, k0), pick(&r.q_band, i, k0), pick(&r.q_ideal, i, k0)])
        .collect();
    files.push(("plot_profile_x1.csv".into(), csv_string(&["x1", "q_hat", "q_true", "q_band", "q_ideal"], &rows)?.into_bytes()));
    let i0 = r.x1.len() / 2;
    let rows: Vec<Vec<String>> = (0..np)
        .map(|k| {
            let p = r.pixels.centre(k);
            vec![num(p[0]), num(p[1]), pick(&r.q_hat, i0, k), pick(&r.q_true, i0, k), pick(&r.q_band, i0, k), pick(&r.q_ideal, i0, k)]
        })
        .collect();
    files.push(("plot_slice.csv".into(), csv_string(&["y0", "y1", "q_hat", "q_true", "q_band", "q_ideal"], &rows)?.into_bytes()));

    let summary = r.summary(cfg);
    let mut text = toml::to_string(&summary).map_err(|e| Error::Format(e.to_string()))?;
    text.push_str(&format!("digest = \"{}\"\n", r.digest(cfg)));
    files.push(("report.toml".into(), text.into_bytes()));

    let mut hashes = String::new();
    for (name, bytes) in &files {
        std::fs::write(dir.join(name), bytes)?;
        hashes.push_str(&format!("{}  {name}\n", sha256_hex(bytes)));
    }
    std::fs::write(dir.join("hashes.txt"), hashes)?;
    Ok(files.len() + 1)
}

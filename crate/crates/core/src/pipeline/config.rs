use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::carleman::CarlemanParams;
use crate::cgo::{CgoDomain, NeumannOptions};
use crate::error::{Error, Result};
use crate::xray::check_lambda;

/// The bundled demo experiment.
pub const DEMO_CONFIG: &str = include_str!("demo.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    pub geometry: GeometryConfig,
    pub potential: PotentialSpec,
    pub cgo: CgoConfig,
    pub probes: ProbeConfig,
    pub lambda: LambdaConfig,
    pub xray: XrayConfig,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    /// Only `flat_torus` is wired up: base `[−1,1)²`, `M = [−0.3,0.3] × [−½,½]²`.
    pub base: String,
    pub max_cluster: usize,
    /// Base grid points per side.
    pub grid: usize,
    /// x₁ nodes on the cylinder interval `(−0.6, 0.6)`.
    pub n1: usize,
}

/// `q = A·φ((x₁ − s)/w)·ψ(|y − c|/ρ)` with `φ = ψ` the unit bump.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialSpec {
    pub amplitude: f64,
    pub x1_halfwidth: f64,
    #[serde(default)]
    pub x1_shift: f64,
    pub centre: [f64; 2],
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CgoConfig {
    /// Tried in order per moment; the last entry is the cap.
    pub tau_schedule: Vec<f64>,
    /// Stop raising τ once the remainder budget is below `tolerance` times the
    /// moment scale `∫|q|e^{−λr}/r`.
    pub tolerance: f64,
    pub max_contraction: f64,
    /// `ε` of the `q♯ + q♭` split, relative to `‖q‖_{L^{3/2}}`.
    pub split_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeConfig {
    /// Harmonics `e^{imθ}`, `|m| ≤ K`.
    pub harmonics: usize,
    pub omegas: Vec<[f64; 2]>,
}

/// Nonnegative nodes `λ_k = k·max/(count − 1)`; negative ones by conjugation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LambdaConfig {
    pub max: f64,
    pub count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct XrayConfig {
    pub disk_radius: f64,
    pub pixels: usize,
    /// Fine fan rays per ω used to build the smoothed fan rows.
    pub fan_rays: usize,
    pub ridge: f64,
    pub tol: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    /// Standard deviation of additive Gaussian noise on each DN pairing.
    pub dn_sigma: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<String>,
}

fn bump(s: f64) -> f64 {
    if s.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - s * s)).exp()
    }
}

impl PotentialSpec {
    pub fn profile_x1(&self, x1: f64) -> f64 {
        bump((x1 - self.x1_shift) / self.x1_halfwidth)
    }
    pub fn profile_base(&self, y: [f64; 2]) -> f64 {
        bump((y[0] - self.centre[0]).hypot(y[1] - self.centre[1]) / self.radius)
    }
    pub fn eval(&self, x1: f64, y: [f64; 2]) -> f64 {
        self.amplitude * self.profile_x1(x1) * self.profile_base(y)
    }

    /// `∫ φ((x₁ − s)/w) e^{iλx₁} dx₁` by the trapezoid rule (the bump is flat
    /// to all orders at its ends, so this converges spectrally).
    pub fn profile_x1_transform(&self, lambda: f64) -> num_complex::Complex64 {
        let n = 512;
        let (a, w) = (self.x1_shift - self.x1_halfwidth, 2.0 * self.x1_halfwidth);
        let h = w / n as f64;
        (1..n)
            .map(|i| {
                let x = a + i as f64 * h;
                num_complex::Complex64::from_polar(h * self.profile_x1(x), lambda * x)
            })
            .sum()
    }

    /// `f_λ(y) = ∫ q(x₁, y) e^{iλx₁} dx₁`.
    pub fn f_lambda(&self, lambda: f64, y: [f64; 2]) -> num_complex::Complex64 {
        self.profile_x1_transform(lambda) * (self.amplitude * self.profile_base(y))
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self {
            amplitude: self.amplitude * a,
            ..*self
        }
    }
}

fn cfg_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl ExperimentConfig {
    pub fn demo() -> Self {
        Self::from_toml(DEMO_CONFIG).expect("bundled demo config parses")
    }

    pub fn from_toml(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| cfg_err(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn lambdas(&self) -> Vec<f64> {
        let n = self.lambda.count;
        (0..n).map(|k| self.lambda.max * k as f64 / (n - 1) as f64).collect()
    }

    pub fn neumann_options(&self) -> NeumannOptions {
        NeumannOptions {
            max_contraction: self.cgo.max_contraction,
            seed: self.seed,
            ..NeumannOptions::default()
        }
    }

    pub fn domain(&self) -> Result<CgoDomain> {
        let g = &self.geometry;
        CgoDomain::reference(g.max_cluster, g.grid, g.n1)
    }

    /// Checks that need no basis.
    pub fn validate_static(&self) -> Result<()> {
        let g = &self.geometry;
        if g.base != "flat_torus" {
            return Err(cfg_err(format!("unsupported base `{}`", g.base)));
        }
        if g.grid < 16 || g.grid % 4 != 0 {
            return Err(cfg_err("geometry.grid must be a multiple of 4, at least 16"));
        }
        if g.n1 < 21 || (g.n1 - 1) % 4 != 0 {
            return Err(cfg_err("geometry.n1 must be 1 mod 4, at least 21"));
        }
        let c = &self.cgo;
        if c.tau_schedule.is_empty() || c.tau_schedule.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(cfg_err("cgo.tau_schedule must be nonempty and increasing"));
        }
        if !(c.tolerance > 0.0) || !(c.max_contraction > 0.0 && c.max_contraction < 1.0) {
            return Err(cfg_err("cgo.tolerance must be positive and cgo.max_contraction in (0, 1)"));
        }
        if !(c.split_fraction > 0.0 && c.split_fraction <= 1.0) {
            return Err(cfg_err("cgo.split_fraction must lie in (0, 1]"));
        }
        let l = &self.lambda;
        if l.count < 2 || !(l.max > 0.0) {
            return Err(cfg_err("lambda grid needs count >= 2 and max > 0"));
        }
        check_lambda(l.max).map_err(|e| cfg_err(e.to_string()))?;
        let p = &self.potential;
        if !(p.x1_halfwidth > 0.0 && p.radius > 0.0) || !p.amplitude.is_finite() {
            return Err(cfg_err("potential needs positive widths and a finite amplitude"));
        }
        if p.x1_halfwidth + p.x1_shift.abs() > 0.3 {
            return Err(cfg_err("potential must vanish outside |x1| <= 0.3"));
        }
        // Nyquist in λ for an x₁ support of length ℓ: Δλ ≤ π/ℓ
        let ell = 2.0 * (p.x1_halfwidth + p.x1_shift.abs());
        let dl = l.max / (l.count - 1) as f64;
        if dl > std::f64::consts::PI / ell {
            return Err(cfg_err(format!("lambda spacing {dl} undersamples a support of length {ell}")));
        }
        let x = &self.xray;
        if !(x.disk_radius > 0.0 && x.disk_radius < 0.5) {
            return Err(cfg_err("xray.disk_radius must lie in (0, 0.5)"));
        }
        if p.centre[0].hypot(p.centre[1]) + p.radius > x.disk_radius {
            return Err(cfg_err("potential must vanish outside the reconstruction disk"));
        }
        if x.pixels < 8 || x.fan_rays < 8 || !(x.ridge >= 0.0) || !(x.tol > 0.0) {
            return Err(cfg_err("xray needs pixels >= 8, fan_rays >= 8, ridge >= 0, tol > 0"));
        }
        if self.probes.omegas.is_empty() {
            return Err(cfg_err("probes.omegas is empty"));
        }
        if !(self.noise.dn_sigma >= 0.0) {
            return Err(cfg_err("noise.dn_sigma must be nonnegative"));
        }
        Ok(())
    }

    /// Full validation: static checks, τ admissibility for both signs, and
    /// fan centres outside the cutoff support.
    pub fn validate(&self, dom: &CgoDomain) -> Result<()> {
        self.validate_static()?;
        for &tau in &self.cgo.tau_schedule {
            CarlemanParams::new(tau, dom.core, dom.cyl.base())?;
        }
        for &w in &self.probes.omegas {
            dom.check_centre(w)?;
        }
        Ok(())
    }
}

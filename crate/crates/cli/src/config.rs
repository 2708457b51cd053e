//! Experiment configuration: a flat JSON object.
//!
//! Physical parameters (target, data, ε, grid) have no defaults; optimizer
//! knobs, diagnostics toggles and the output directory do.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use wavemap_core::io::load_cauchy;
use wavemap_core::{presets, CauchyData, Grid, MinimizeOptions, TargetManifold, TimeScale, Torus};

pub const EPS_RANGE: (f64, f64) = (0.02, 0.5);

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("config is not valid JSON for this schema: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetKind {
    Sphere,
    So,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PresetKind {
    Constant,
    /// Data along a geodesic, `φ = γ(k x₁)`, `ψ = speed · cos x₁ · γ'(k x₁)`.
    Geodesic,
    /// SO(m) data with velocity out of the geodesic's plane.
    Twisted,
    /// Cauchy data read from `cauchy_file`.
    Custom,
}

fn default_window() -> f64 {
    0.8
}

fn default_reference_eps() -> f64 {
    0.4
}

fn default_output() -> PathBuf {
    PathBuf::from("wavemap-out")
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub target: TargetKind,
    /// Ambient dimension `L` for spheres, matrix order `m` for SO(m).
    pub target_dim: usize,
    pub preset: PresetKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speed: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cauchy_file: Option<PathBuf>,
    pub eps: Vec<f64>,
    pub n: usize,
    pub nx: usize,
    pub nt: usize,
    /// Step in the units of `time_scale`.
    pub dt: f64,
    pub time_scale: TimeScale,
    /// Optional; must equal `nt · dt` when given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tcut: Option<f64>,
    /// Physical-time window of the energy, weak-residual and oracle checks.
    #[serde(default = "default_window")]
    pub window: f64,
    /// ε at which bound constants are fitted and frozen.
    #[serde(default = "default_reference_eps")]
    pub reference_eps: f64,

    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grad_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub memory: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cauchy_corrections: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub perturb: f64,

    #[serde(default = "yes")]
    pub bounds: bool,
    #[serde(default = "yes")]
    pub energy: bool,
    #[serde(default = "yes")]
    pub dual: bool,
    #[serde(default = "yes")]
    pub weak: bool,
    #[serde(default = "yes")]
    pub oracle: bool,

    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    /// Reads and validates a config; relative `cauchy_file` and `output_dir`
    /// paths are resolved against the config's directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg: Self = serde_json::from_str(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        if cfg.output_dir.is_relative() {
            cfg.output_dir = base.join(&cfg.output_dir);
        }
        if let Some(f) = &cfg.cauchy_file {
            if f.is_relative() {
                cfg.cauchy_file = Some(base.join(f));
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn target_manifold(&self) -> Result<TargetManifold, ConfigError> {
        let t = match self.target {
            TargetKind::Sphere => TargetManifold::sphere(self.target_dim),
            TargetKind::So => TargetManifold::special_orthogonal(self.target_dim),
        };
        t.map_err(|e| invalid(e.to_string()))
    }

    pub fn torus(&self) -> Result<Torus, ConfigError> {
        Torus::new(self.n, self.nx).map_err(|e| invalid(e.to_string()))
    }

    pub fn grid(&self, eps: f64) -> Result<Grid, ConfigError> {
        Grid::new(self.torus()?, self.nt, self.dt, self.time_scale, eps).map_err(|e| invalid(format!("eps {eps}: {e}")))
    }

    pub fn options(&self) -> MinimizeOptions {
        let d = MinimizeOptions::default();
        MinimizeOptions {
            max_iter: self.max_iter.unwrap_or(d.max_iter),
            grad_tol: self.grad_tol.unwrap_or(d.grad_tol),
            memory: self.memory.unwrap_or(d.memory),
            cauchy_corrections: self.cauchy_corrections.unwrap_or(d.cauchy_corrections),
            perturb: self.perturb,
            seed: self.seed,
            ..d
        }
    }

    /// Physical `k` and `speed` of the geodesic presets.
    pub fn geodesic_parameters(&self) -> Option<(f64, f64)> {
        match self.preset {
            PresetKind::Geodesic | PresetKind::Twisted => Some((self.k?, self.speed?)),
            _ => None,
        }
    }

    /// Builds (or reads) the Cauchy data.
    pub fn cauchy_data(&self) -> Result<CauchyData, ConfigError> {
        let torus = self.torus()?;
        let target = self.target_manifold()?;
        let param = |name: &str, v: Option<f64>| v.ok_or_else(|| invalid(format!("preset needs `{name}`")));
        let data = match self.preset {
            PresetKind::Constant => presets::constant(torus, target),
            PresetKind::Geodesic => presets::geodesic(torus, target, param("k", self.k)?, param("speed", self.speed)?),
            PresetKind::Twisted => {
                if self.target != TargetKind::So {
                    return Err(invalid("the twisted preset needs an `so` target"));
                }
                presets::twisted(torus, self.target_dim, param("k", self.k)?, param("speed", self.speed)?)
            }
            PresetKind::Custom => {
                let path = self
                    .cauchy_file
                    .as_ref()
                    .ok_or_else(|| invalid("the custom preset needs `cauchy_file`"))?;
                let data = load_cauchy(path).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
                if data.torus != torus || data.target != target {
                    return Err(invalid("cauchy_file does not match the configured torus and target"));
                }
                return Ok(data);
            }
        };
        data.map_err(|e| invalid(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.target_manifold()?;
        self.torus()?;
        if !self.nx.is_power_of_two() {
            return Err(invalid(format!("nx = {} is not a power of two", self.nx)));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(invalid(format!("dt = {} must be positive", self.dt)));
        }
        if self.nt < 4 {
            return Err(invalid(format!("nt = {} must be at least 4", self.nt)));
        }
        if let Some(t) = self.tcut {
            let grid_t = self.nt as f64 * self.dt;
            if (t - grid_t).abs() > 1e-9 * grid_t {
                return Err(invalid(format!("tcut = {t} but nt·dt = {grid_t}")));
            }
        }
        if self.eps.is_empty() {
            return Err(invalid("eps list is empty"));
        }
        for &e in self.eps.iter().chain(std::iter::once(&self.reference_eps)) {
            if !(EPS_RANGE.0..=EPS_RANGE.1).contains(&e) {
                return Err(invalid(format!("eps = {e} is outside [{}, {}]", EPS_RANGE.0, EPS_RANGE.1)));
            }
            let grid = self.grid(e)?;
            let physical_end = grid.rescaled_tcut(e) * e;
            if !(self.window > 0.0 && self.window <= physical_end * (1.0 + 1e-12)) {
                return Err(invalid(format!(
                    "window = {} must lie in (0, {physical_end}] at eps {e}",
                    self.window
                )));
            }
        }
        if let Some(g) = self.grad_tol {
            if !(g.is_finite() && g > 0.0) {
                return Err(invalid("grad_tol must be positive"));
            }
        }
        if !(self.perturb.is_finite() && self.perturb >= 0.0) {
            return Err(invalid("perturb must be non-negative"));
        }
        if self.max_iter == Some(0) {
            return Err(invalid("max_iter must be positive"));
        }
        for (name, v) in [("k", self.k), ("speed", self.speed)] {
            if v.is_some_and(|x| !x.is_finite()) {
                return Err(invalid(format!("{name} must be finite")));
            }
        }
        self.cauchy_data()?;
        Ok(())
    }

    /// Extra checks for a sweep: at least two strictly decreasing ε.
    pub fn validate_sweep(&self) -> Result<(), ConfigError> {
        if self.eps.len() < 2 {
            return Err(invalid("a sweep needs at least two eps values"));
        }
        if self.eps.windows(2).any(|w| w[1] >= w[0]) {
            return Err(invalid("sweep eps values must be strictly decreasing"));
        }
        Ok(())
    }
}

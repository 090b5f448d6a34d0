//! Experiment configuration, read from TOML.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lds::{CostKind, DisturbanceGenerator, DisturbanceKind, LinearSystem, SystemPreset, WalkStep, DEFAULT_DISTURBANCE_BOUND};
use crate::policies::{BpcSettings, ControllerRegistry, ControllerSettings, DacSettings, GpcSettings};
use crate::sysid::SysIdSettings;

/// A preset name or explicit matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SystemSpec {
    Preset(String),
    Matrices { a: Vec<Vec<f64>>, b: Vec<Vec<f64>> },
}

impl SystemSpec {
    pub fn build(&self) -> Result<LinearSystem> {
        match self {
            SystemSpec::Preset(name) => Ok(SystemPreset::from_name(name)?.build()),
            SystemSpec::Matrices { a, b } => {
                LinearSystem::new(matrix_from_rows(a, "system.a")?, matrix_from_rows(b, "system.b")?)
                    .map_err(|e| Error::Config(e.to_string()))
            }
        }
    }
}

pub(crate) fn matrix_from_rows(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>> {
    let cols = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || cols == 0 || rows.iter().any(|r| r.len() != cols) {
        return Err(Error::Config(format!("{what} must be a non-empty rectangular matrix")));
    }
    Ok(DMatrix::from_row_iterator(rows.len(), cols, rows.iter().flatten().copied()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseKind {
    Gaussian,
    Sinusoidal,
    RandomWalk,
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DisturbanceSpec {
    pub kind: NoiseKind,
    /// Random-walk step preset: `walk-var-1-over-T` or `walk-std-0.3`.
    pub walk: Option<String>,
    /// Explicit random-walk step standard deviation (overrides `walk`).
    pub walk_std: Option<f64>,
    pub scale: f64,
    /// Norm clip `W`; `0` disables clipping.
    pub bound: f64,
}

impl Default for DisturbanceSpec {
    fn default() -> Self {
        Self { kind: NoiseKind::Gaussian, walk: None, walk_std: None, scale: 1.0, bound: DEFAULT_DISTURBANCE_BOUND }
    }
}

impl DisturbanceSpec {
    pub fn generator(&self, dim: usize) -> Result<DisturbanceGenerator> {
        let kind = match self.kind {
            NoiseKind::Gaussian => DisturbanceKind::Gaussian,
            NoiseKind::Sinusoidal => DisturbanceKind::Sinusoidal,
            NoiseKind::Zero => DisturbanceKind::Zero,
            NoiseKind::RandomWalk => {
                let step = match (self.walk_std, self.walk.as_deref()) {
                    (Some(std), _) => WalkStep::Std(std),
                    (None, None) | (None, Some("walk-var-1-over-T")) => WalkStep::VarOneOverT,
                    (None, Some("walk-std-0.3")) => WalkStep::Std(0.3),
                    (None, Some(other)) => {
                        return Err(Error::Config(format!("unknown random-walk preset '{other}'")))
                    }
                };
                DisturbanceKind::RandomWalk { step }
            }
        };
        if !(self.scale.is_finite() && self.scale >= 0.0) || !(self.bound >= 0.0) {
            return Err(Error::Config("disturbance scale and bound must be nonnegative".into()));
        }
        Ok(DisturbanceGenerator {
            kind,
            dim,
            scale: self.scale,
            bound: (self.bound > 0.0).then_some(self.bound),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleSettings {
    pub enabled: bool,
    /// Oracle memory; defaults to the learners' `H`.
    pub memory: Option<usize>,
    /// Sum costs from `t = H` instead of `t = 0`.
    pub skip_transient: bool,
    pub max_iterations: usize,
    pub tolerance: f64,
}

impl Default for OracleSettings {
    fn default() -> Self {
        Self { enabled: false, memory: None, skip_transient: false, max_iterations: 10_000, tolerance: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSettings {
    /// Write `raw/<alg>/<seed>.csv`.
    pub raw: bool,
    /// Write `plot.svg`.
    pub plot: bool,
}

impl Default for OutputSettings {
    fn default() -> Self {
        Self { raw: true, plot: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub system: SystemSpec,
    pub cost: CostKind,
    pub algorithms: Vec<String>,
    /// Number of steps `T`; every run plays `t = 0..=T`.
    pub horizon: usize,
    pub runs: usize,
    /// Seeds are `seed, seed + 1, ...` unless `seeds` is given.
    pub seed: u64,
    pub seeds: Option<Vec<u64>>,
    pub disturbance: DisturbanceSpec,
    pub dac: DacSettings,
    pub bpc: BpcSettings,
    pub gpc: GpcSettings,
    pub sysid: SysIdSettings,
    pub oracle: OracleSettings,
    pub output: OutputSettings,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            name: "experiment".into(),
            system: SystemSpec::Preset("double-integrator".into()),
            cost: CostKind::Quadratic,
            algorithms: vec!["lqr".into(), "gpc".into(), "bpc".into()],
            horizon: 1000,
            runs: 25,
            seed: 0,
            seeds: None,
            disturbance: DisturbanceSpec::default(),
            dac: DacSettings::default(),
            bpc: BpcSettings::default(),
            gpc: GpcSettings::default(),
            sysid: SysIdSettings::default(),
            oracle: OracleSettings::default(),
            output: OutputSettings::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config is always serializable")
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn controller_settings(&self) -> ControllerSettings {
        ControllerSettings {
            dac: self.dac.clone(),
            bpc: self.bpc.clone(),
            gpc: self.gpc.clone(),
            sysid: self.sysid.clone(),
        }
    }

    pub fn seed_list(&self) -> Vec<u64> {
        match &self.seeds {
            Some(s) => s.clone(),
            None => (0..self.runs as u64).map(|i| self.seed.wrapping_add(i)).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_with(&ControllerRegistry::with_builtins())
    }

    pub fn validate_with(&self, registry: &ControllerRegistry) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::Config("horizon must be >= 1".into()));
        }
        if self.seeds.as_ref().map_or(self.runs == 0, Vec::is_empty) {
            return Err(Error::Config("runs must be >= 1".into()));
        }
        if let Some(seeds) = &self.seeds {
            if seeds.len() != self.runs {
                return Err(Error::Config(format!(
                    "seeds lists {} values but runs = {}",
                    seeds.len(),
                    self.runs
                )));
            }
        }
        if self.algorithms.is_empty() {
            return Err(Error::Config("algorithm list is empty".into()));
        }
        for (i, name) in self.algorithms.iter().enumerate() {
            if !registry.contains(name) {
                return Err(Error::Config(format!(
                    "unknown algorithm '{name}' (registered: {})",
                    registry.names().join(", ")
                )));
            }
            if self.algorithms[..i].contains(name) {
                return Err(Error::Config(format!("algorithm '{name}' listed twice")));
            }
            if name.contains('/') || name.contains('\\') {
                return Err(Error::Config(format!("algorithm name '{name}' is not a valid directory name")));
            }
        }
        let sys = self.system.build()?;
        self.disturbance.generator(sys.state_dim())?;
        self.controller_settings().validate()?;
        if self.oracle.enabled && !(self.oracle.tolerance > 0.0 && self.oracle.max_iterations > 0) {
            return Err(Error::Config("oracle tolerance and iteration cap must be positive".into()));
        }
        if self.oracle.memory == Some(0) {
            return Err(Error::Config("oracle.memory must be >= 1".into()));
        }
        Ok(())
    }
}

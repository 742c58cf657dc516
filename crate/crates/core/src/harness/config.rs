//! Experiment configuration, read from TOML.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::FieldModelSpec;
use crate::losses::{Formulation, LossConfig};
use crate::optim::OptimizerConfig;
use crate::problem::{case_by_name, OseenCase};
use crate::sampling::{dyadic_grid, tensor_grid, CollocationSet};

use super::report::EVAL_N;

/// Environment variable naming the default output root.
pub const OUT_ENV: &str = "OSEEN_CPINN_OUT";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CaseConfig {
    pub name: String,
    /// Rayleigh-type forcing scale for `example2`.
    pub ra: Option<f64>,
}

impl Default for CaseConfig {
    fn default() -> Self {
        Self {
            name: "example1".into(),
            ra: None,
        }
    }
}

impl CaseConfig {
    pub fn build(&self) -> Result<OseenCase> {
        case_by_name(&self.name, self.ra)
    }
}

/// Collocation grids: a sweep of uniform `N × N` grids, or one dyadic grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub n: Vec<usize>,
    pub k: Option<u32>,
    pub r: Option<usize>,
    /// Take boundary points from a separate `boundary_n × boundary_n` grid.
    pub boundary_n: Option<usize>,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            n: vec![20],
            k: None,
            r: None,
            boundary_n: None,
        }
    }
}

impl GridConfig {
    /// `(N, collocation set)` pairs, where `N` is the per-axis node count.
    pub fn collocation_sets(&self) -> Result<Vec<(usize, CollocationSet)>> {
        let with_boundary = |set: CollocationSet| -> Result<CollocationSet> {
            match self.boundary_n {
                Some(b) => CollocationSet::new(set.interior, tensor_grid(b)?.boundary),
                None => Ok(set),
            }
        };
        match (self.k, self.r) {
            (Some(k), Some(r)) => {
                let n = (1usize << k) * (r - 1).max(1) + 1;
                Ok(vec![(n, with_boundary(CollocationSet::from_points(&dyadic_grid(k, r)?)?)?)])
            }
            (None, None) => {
                if self.n.is_empty() {
                    return Err(Error::Config("grid.n must list at least one size".into()));
                }
                self.n.iter().map(|&n| Ok((n, with_boundary(tensor_grid(n)?)?))).collect()
            }
            _ => Err(Error::Config("grid.k and grid.r must be given together".into())),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RecoveryConfig {
    /// Recover a pressure for formulations that train velocity only.
    pub enabled: bool,
    pub optimizer: OptimizerConfig,
}

impl Default for RecoveryConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            optimizer: OptimizerConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub case: CaseConfig,
    pub grid: GridConfig,
    pub formulations: Vec<Formulation>,
    /// Shared loss settings; the formulation field is overridden per run.
    pub loss: LossConfig,
    pub arch: FieldModelSpec,
    /// Pressure network for divergence-free and two-stage runs; defaults to `arch`.
    pub pressure_arch: Option<FieldModelSpec>,
    pub optimizer: OptimizerConfig,
    pub recovery: RecoveryConfig,
    pub seeds: Vec<u64>,
    /// Forcing scales for the Ra sweep.
    pub ra_values: Vec<f64>,
    pub eval_n: usize,
    pub out_dir: Option<PathBuf>,
    pub save_checkpoints: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            name: "experiment".into(),
            case: CaseConfig::default(),
            grid: GridConfig::default(),
            formulations: vec![Formulation::PinnPrimal, Formulation::CpinnPrimal],
            loss: LossConfig::default(),
            arch: FieldModelSpec::default(),
            pressure_arch: None,
            optimizer: OptimizerConfig::default(),
            recovery: RecoveryConfig::default(),
            seeds: vec![0, 1, 2],
            ra_values: vec![1.0, 1e2, 1e4, 1e6],
            eval_n: EVAL_N,
            out_dir: None,
            save_checkpoints: true,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.optimizer.validate()?;
        if self.recovery.enabled {
            self.recovery.optimizer.validate()?;
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        if self.formulations.is_empty() {
            return Err(Error::Config("at least one formulation is required".into()));
        }
        if self.eval_n < 2 {
            return Err(Error::GridTooSmall(self.eval_n));
        }
        for f in &self.formulations {
            self.loss.with_formulation(*f).validate()?;
        }
        Ok(())
    }

    pub fn pressure_arch(&self) -> FieldModelSpec {
        self.pressure_arch.clone().unwrap_or_else(|| self.arch.clone())
    }

    /// Output directory: the configured one, else `$OSEEN_CPINN_OUT/<name>`, else `out/<name>`.
    pub fn output_dir(&self) -> PathBuf {
        if let Some(dir) = &self.out_dir {
            return dir.clone();
        }
        let root = std::env::var_os(OUT_ENV).map_or_else(|| PathBuf::from("out"), PathBuf::from);
        root.join(&self.name)
    }

    /// Stable digest of the serialized configuration.
    pub fn hash(&self) -> u64 {
        let mut h = DefaultHasher::new();
        self.to_toml().unwrap_or_default().hash(&mut h);
        h.finish()
    }
}

//! JSON run configuration and CLI-flag overrides.

use std::path::{Path, PathBuf};

use disclose::env::EnvConfig;
use disclose::genq::{Bonus, QualityLaw};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Whole-run configuration; the `environment` block drives `solve`,
/// `verify`, `sweep` and `contract`, the `genq` block drives `genq`.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub environment: Option<EnvConfig>,
    /// Time-grid size for the LP oracles (default 512).
    #[serde(default)]
    pub grid: Option<usize>,
    /// Monte Carlo seed (default 0), recorded in every report.
    #[serde(default)]
    pub seed: Option<u64>,
    /// Output directory for CSV emission (default ".").
    #[serde(default)]
    pub out: Option<PathBuf>,
    /// Obedience tolerance override (default 1e-7).
    #[serde(default)]
    pub tol: Option<f64>,
    /// Monte Carlo path count (default 1_000_000).
    #[serde(default)]
    pub mc_paths: Option<u64>,
    /// Number of interior prior points in a sweep (default 200).
    #[serde(default)]
    pub sweep_points: Option<usize>,
    #[serde(default)]
    pub contract: Option<ContractConfig>,
    #[serde(default)]
    pub genq: Option<GenqConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContractConfig {
    pub v_bar: f64,
    pub budget: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenqConfig {
    pub r: f64,
    pub r_p: f64,
    pub lambda: f64,
    pub c: f64,
    pub law: QualityLaw<f64>,
    pub bonus: Bonus<f64>,
}

/// Flag overrides shared by every subcommand.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub grid: Option<usize>,
    pub tol: Option<f64>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let config: RunConfig = serde_json::from_str(&text)?;
        Ok(config)
    }

    pub fn apply(mut self, overrides: &Overrides) -> Self {
        if overrides.seed.is_some() {
            self.seed = overrides.seed;
        }
        if overrides.out.is_some() {
            self.out = overrides.out.clone();
        }
        if overrides.grid.is_some() {
            self.grid = overrides.grid;
        }
        if overrides.tol.is_some() {
            self.tol = overrides.tol;
        }
        self
    }

    pub fn environment(&self) -> Result<disclose::Environment, CliError> {
        let cfg = self
            .environment
            .as_ref()
            .ok_or_else(|| CliError::invalid("config is missing the \"environment\" block"))?;
        Ok(cfg.build()?)
    }

    pub fn grid_size(&self) -> Result<usize, CliError> {
        let n = self.grid.unwrap_or(512);
        if n < 2 {
            return Err(CliError::invalid("grid must have at least 2 points"));
        }
        Ok(n)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("."))
    }

    pub fn tolerance(&self) -> Result<f64, CliError> {
        let tol = self.tol.unwrap_or(disclose::agent::OBEDIENCE_TOL);
        if !(tol.is_finite() && tol > 0.0) {
            return Err(CliError::invalid("tol must be a positive number"));
        }
        Ok(tol)
    }

    pub fn mc_paths(&self) -> Result<u64, CliError> {
        let n = self.mc_paths.unwrap_or(1_000_000);
        if n == 0 {
            return Err(CliError::invalid(
                "mc_paths must be at least 1 (zero-iteration Monte Carlo is rejected)",
            ));
        }
        Ok(n)
    }

    pub fn sweep_points(&self) -> Result<usize, CliError> {
        let n = self.sweep_points.unwrap_or(200);
        if n == 0 {
            return Err(CliError::invalid("sweep_points must be positive"));
        }
        Ok(n)
    }
}

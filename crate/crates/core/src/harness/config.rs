use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cost::CostTable;
use crate::error::{NasError, Result};
use crate::evolve::{EaConfig, RandomSearchConfig};
use crate::fitness::{
    CorrelatedOracle, Evaluator, LandscapeParams, SyntheticLandscape, TabularBenchmark,
};
use crate::space::SearchSpaceSpec;

/// Which oracle scores genomes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OracleSpec {
    Landscape(LandscapeParams),
    Correlated {
        base: Box<OracleSpec>,
        target_pearson: f64,
        oracle_seed: u64,
    },
    /// CSV table; a relative path is resolved against the config file.
    Tabular { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StrategyKind {
    Random(RandomSearchConfig),
    Ea(EaConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategySpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: StrategyKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub space: SearchSpaceSpec,
    /// Zero cost everywhere when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost_table: Option<CostTable>,
    pub evaluator: OracleSpec,
    pub strategies: Vec<StrategySpec>,
    pub seeds: Vec<u64>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn prefixed(prefix: &str, err: NasError) -> NasError {
    match err {
        NasError::Config { field, message } => NasError::Config {
            field: format!("{prefix}.{field}"),
            message,
        },
        NasError::Dimension { expected, actual } => NasError::config(
            prefix,
            format!("dimension mismatch: expected {expected}, got {actual}"),
        ),
        other => NasError::config(prefix, other.to_string()),
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)
            .map_err(|e| NasError::config("<root>", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| NasError::io(path, e))?;
        let mut cfg = Self::from_json(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(table) = &self.cost_table {
            table
                .check_space(&self.space)
                .map_err(|e| prefixed("cost_table", e))?;
        }
        if self.strategies.is_empty() {
            return Err(NasError::config("strategies", "at least one strategy required"));
        }
        if self.seeds.is_empty() {
            return Err(NasError::config("seeds", "at least one seed required"));
        }
        let mut names = HashSet::new();
        for (i, s) in self.strategies.iter().enumerate() {
            let prefix = format!("strategies[{i}]");
            if s.name.is_empty() || !names.insert(s.name.as_str()) {
                return Err(NasError::config(
                    format!("{prefix}.name"),
                    format!("`{}` is empty or duplicated", s.name),
                ));
            }
            match &s.kind {
                StrategyKind::Ea(ea) => ea.validate(&self.space).map_err(|e| prefixed(&prefix, e))?,
                StrategyKind::Random(r) => {
                    if r.budget == 0 {
                        return Err(NasError::config(format!("{prefix}.budget"), "must be positive"));
                    }
                }
            }
            let bound = match &s.kind {
                StrategyKind::Ea(ea) => ea.cost_bound,
                StrategyKind::Random(r) => r.cost_bound,
            };
            if let Some(b) = bound {
                if self.cost_table.is_none() {
                    return Err(NasError::config(
                        format!("{prefix}.cost_bound"),
                        "a cost bound needs a cost_table",
                    ));
                }
                if b.is_nan() || b < 0.0 {
                    return Err(NasError::config(format!("{prefix}.cost_bound"), "must be >= 0"));
                }
            }
        }
        validate_oracle(&self.evaluator, "evaluator")
    }

    pub fn strategy(&self, name: &str) -> Option<&StrategySpec> {
        self.strategies.iter().find(|s| s.name == name)
    }

    pub fn cost_table(&self) -> CostTable {
        self.cost_table
            .clone()
            .unwrap_or_else(|| CostTable::zeros(&self.space))
    }

    pub fn build_evaluator(&self) -> Result<Box<dyn Evaluator>> {
        self.build_oracle(&self.evaluator)
            .map_err(|e| prefixed("evaluator", e))
    }

    fn build_oracle(&self, spec: &OracleSpec) -> Result<Box<dyn Evaluator>> {
        Ok(match spec {
            OracleSpec::Landscape(params) => Box::new(
                SyntheticLandscape::random(&self.space, params)?.with_cost_table(self.cost_table())?,
            ),
            OracleSpec::Correlated {
                base,
                target_pearson,
                oracle_seed,
            } => Box::new(CorrelatedOracle::new(
                self.build_oracle(base)?,
                *target_pearson,
                *oracle_seed,
            )?),
            OracleSpec::Tabular { path } => {
                let path = if path.is_relative() {
                    self.base_dir.join(path)
                } else {
                    path.clone()
                };
                Box::new(TabularBenchmark::from_csv_path(self.space.clone(), &path)?)
            }
        })
    }
}

fn validate_oracle(spec: &OracleSpec, field: &str) -> Result<()> {
    match spec {
        OracleSpec::Landscape(p) => {
            if !(p.unary_scale >= 0.0 && p.pairwise_scale >= 0.0 && p.noise_std >= 0.0) {
                return Err(NasError::config(field, "scales and noise_std must be >= 0"));
            }
        }
        OracleSpec::Correlated {
            base,
            target_pearson,
            ..
        } => {
            if !(-1.0..=1.0).contains(target_pearson) {
                return Err(NasError::config(
                    format!("{field}.target_pearson"),
                    "must be in [-1, 1]",
                ));
            }
            validate_oracle(base, &format!("{field}.base"))?;
        }
        OracleSpec::Tabular { .. } => {}
    }
    Ok(())
}

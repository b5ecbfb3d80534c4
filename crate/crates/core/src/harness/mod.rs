//! Experiment runner: JSON configs in, per-trial JSON traces and study-level
//! CSV/JSON reports out.
//!
//! Output layout under the study directory:
//!
//! ```text
//! trials/<strategy>_seed<seed>.json   one TrialFile per (strategy, seed)
//! study.csv                           one row per trial
//! summary.json                        StudyReport
//! ```

mod config;
mod report;

pub use config::{ExperimentConfig, OracleSpec, StrategyKind, StrategySpec};
pub use report::{ApsRow, StrategySummary, StudyReport, TrialRow};

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cost::CostTable;
use crate::diversity::{nsdi_init, random_init_counted, NsdiConfig};
use crate::cost::CostConstraint;
use crate::error::{NasError, Result};
use crate::evolve::{ea_search, random_search, InitMethod, TrialRecord};
use crate::fitness::Evaluator;
use crate::seeded_rng;

/// Result of one (strategy, seed) pair as stored on disk. Exactly one of
/// `record` and `error` is present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialFile {
    pub strategy: String,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub record: Option<TrialRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl TrialFile {
    pub fn file_name(&self) -> String {
        trial_file_name(&self.strategy, self.seed)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

pub fn trial_file_name(strategy: &str, seed: u64) -> String {
    let safe: String = strategy
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect();
    format!("{safe}_seed{seed}.json")
}

/// Runs one strategy for one seed. The random stream is seeded from `seed`
/// alone, so a trial's result does not depend on what else runs.
pub fn run_trial(
    cfg: &ExperimentConfig,
    evaluator: &dyn Evaluator,
    strategy: &StrategySpec,
    seed: u64,
) -> Result<TrialRecord> {
    let table = cfg.cost_table();
    let mut rng = seeded_rng(seed);
    match &strategy.kind {
        StrategyKind::Ea(ea) => ea_search(&cfg.space, ea, evaluator, Some(&table), seed, &mut rng),
        StrategyKind::Random(rs) => {
            random_search(&cfg.space, rs, evaluator, Some(&table), seed, &mut rng)
        }
    }
}

fn trial_file(
    cfg: &ExperimentConfig,
    evaluator: &dyn Evaluator,
    strategy: &StrategySpec,
    seed: u64,
) -> TrialFile {
    let (record, error) = match run_trial(cfg, evaluator, strategy, seed) {
        Ok(r) => (Some(r), None),
        Err(e) => (None, Some(e.to_string())),
    };
    TrialFile {
        strategy: strategy.name.clone(),
        seed,
        record,
        error,
    }
}

fn thread_pool(parallel: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(parallel)
        .build()
        .map_err(|e| NasError::Parameter(format!("thread pool: {e}")))
}

/// Runs every (strategy, seed) pair without touching the filesystem.
/// `parallel == 0` uses one worker per core. Results come back in config
/// order whatever the degree of parallelism.
pub fn run_trials(cfg: &ExperimentConfig, parallel: usize) -> Result<Vec<TrialFile>> {
    let evaluator = cfg.build_evaluator()?;
    let evaluator: &dyn Evaluator = evaluator.as_ref();
    let jobs: Vec<(&StrategySpec, u64)> = cfg
        .strategies
        .iter()
        .flat_map(|s| cfg.seeds.iter().map(move |&seed| (s, seed)))
        .collect();
    let pool = thread_pool(parallel)?;
    Ok(pool.install(|| {
        jobs.par_iter()
            .map(|&(strategy, seed)| trial_file(cfg, evaluator, strategy, seed))
            .collect()
    }))
}

fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| NasError::io(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| NasError::io(path, e))
}

/// Writes the trial files, `study.csv` and `summary.json` under `out_dir`.
pub fn write_study(out_dir: &Path, trials: &[TrialFile], report: &StudyReport) -> Result<()> {
    let trial_dir = out_dir.join("trials");
    create_dir(&trial_dir)?;
    for t in trials {
        write_file(&trial_dir.join(t.file_name()), t.to_json()?.as_bytes())?;
    }
    write_file(&out_dir.join("study.csv"), &report.rows_csv()?)?;
    write_file(&out_dir.join("summary.json"), report.to_json()?.as_bytes())?;
    Ok(())
}

/// Runs the whole study and writes its outputs to `out_dir` (or the
/// config's `output_dir`). Failing trials are recorded, not fatal.
pub fn run_study(
    cfg: &ExperimentConfig,
    parallel: usize,
    out_dir: Option<&Path>,
) -> Result<StudyReport> {
    let trials = run_trials(cfg, parallel)?;
    let report = StudyReport::from_trials(&trials)?;
    let out: PathBuf = out_dir.map_or_else(|| cfg.output_dir.clone(), Path::to_path_buf);
    write_study(&out, &trials, &report)?;
    Ok(report)
}

/// Reads every trial file in `<dir>/trials`.
pub fn load_trials(dir: &Path) -> Result<Vec<TrialFile>> {
    let trial_dir = dir.join("trials");
    let entries = std::fs::read_dir(&trial_dir).map_err(|e| NasError::io(&trial_dir, e))?;
    let mut paths = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| NasError::io(&trial_dir, e))?.path();
        if path.extension().is_some_and(|e| e == "json") {
            paths.push(path);
        }
    }
    paths.sort();
    paths
        .iter()
        .map(|p| {
            let text = std::fs::read_to_string(p).map_err(|e| NasError::io(p, e))?;
            let trial: TrialFile = serde_json::from_str(&text)?;
            if trial.record.is_some() == trial.error.is_some() {
                return Err(NasError::Input(format!(
                    "{}: exactly one of `record` and `error` expected",
                    p.display()
                )));
            }
            Ok(trial)
        })
        .collect()
}

/// Re-aggregates the trial files under `dir`, rewrites `study.csv` and
/// `summary.json`, and checks any existing summary against the rebuild.
pub fn rebuild_report(dir: &Path) -> Result<StudyReport> {
    let trials = load_trials(dir)?;
    let report = StudyReport::from_trials(&trials)?;
    let summary = dir.join("summary.json");
    if summary.exists() {
        let old = StudyReport::load(&summary)?;
        if old != report {
            return Err(NasError::Input(format!(
                "{} disagrees with the trial files",
                summary.display()
            )));
        }
    }
    write_file(&dir.join("study.csv"), &report.rows_csv()?)?;
    write_file(&summary, report.to_json()?.as_bytes())?;
    Ok(report)
}

fn init_only(
    cfg: &ExperimentConfig,
    table: &CostTable,
    strategy: &StrategySpec,
    seed: u64,
) -> Result<ApsRow> {
    let StrategyKind::Ea(ea) = &strategy.kind else {
        unreachable!("filtered by caller");
    };
    let mut rng = seeded_rng(seed);
    let (pop, samples, threshold) = match &ea.init_method {
        InitMethod::Random => {
            let constraint = CostConstraint::new(Some(table), ea.cost_bound)?;
            let (pop, drawn) =
                random_init_counted(&cfg.space, ea.init_population, constraint, &mut rng)?;
            (pop, drawn, None)
        }
        InitMethod::Nsdi(nsdi) => {
            let nsdi = NsdiConfig {
                cost_bound: ea.cost_bound,
                ..nsdi.clone()
            };
            let (pop, stats) = nsdi_init(&cfg.space, &nsdi, Some(table), &mut rng)?;
            (pop, stats.samples_drawn, Some(stats.final_threshold))
        }
    };
    Ok(ApsRow {
        method: strategy.name.clone(),
        seed,
        aps: Some(pop.average_similarity()?),
        samples_drawn: Some(samples),
        final_threshold: threshold,
    })
}

/// Initialization-only study: for every evolutionary strategy and seed, the
/// APS of the initial population its initializer produces. Random-search
/// strategies have no initial population and are skipped. A failing
/// initializer yields a row with empty values.
pub fn aps_study(cfg: &ExperimentConfig, parallel: usize) -> Result<Vec<ApsRow>> {
    let table = cfg.cost_table();
    let jobs: Vec<(&StrategySpec, u64)> = cfg
        .strategies
        .iter()
        .filter(|s| matches!(s.kind, StrategyKind::Ea(_)))
        .flat_map(|s| cfg.seeds.iter().map(move |&seed| (s, seed)))
        .collect();
    if jobs.is_empty() {
        return Err(NasError::config(
            "strategies",
            "the APS study needs at least one evolutionary strategy",
        ));
    }
    let pool = thread_pool(parallel)?;
    Ok(pool.install(|| {
        jobs.par_iter()
            .map(|&(s, seed)| {
                init_only(cfg, &table, s, seed).unwrap_or_else(|_| ApsRow {
                    method: s.name.clone(),
                    seed,
                    aps: None,
                    samples_drawn: None,
                    final_threshold: None,
                })
            })
            .collect()
    }))
}

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::TrialFile;
use crate::error::{NasError, Result};
use crate::fitness::{mean_std, pearson};

/// One line of `study.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub strategy: String,
    pub seed: u64,
    pub status: String,
    pub best_val: Option<f64>,
    pub best_test: Option<f64>,
    pub evaluated_count: Option<usize>,
    pub init_aps: Option<f64>,
    pub samples_drawn: Option<u64>,
    pub final_threshold: Option<usize>,
    pub threshold_bumps: Option<usize>,
    pub error: Option<String>,
}

impl TrialRow {
    fn from_trial(trial: &TrialFile) -> Self {
        let record = trial.record.as_ref();
        let best = record.and_then(|r| r.best());
        let stats = record.and_then(|r| r.init_stats);
        TrialRow {
            strategy: trial.strategy.clone(),
            seed: trial.seed,
            status: if record.is_some() { "ok" } else { "failed" }.to_string(),
            best_val: best.map(|c| c.report.val_score),
            best_test: best.map(|c| c.report.test_score),
            evaluated_count: record.map(|r| r.evaluated_count),
            init_aps: record.and_then(|r| r.init_aps),
            samples_drawn: stats.map(|s| s.samples_drawn),
            final_threshold: stats.map(|s| s.final_threshold),
            threshold_bumps: stats.map(|s| s.threshold_bumps),
            error: trial.error.clone(),
        }
    }
}

/// Per-strategy aggregates. Standard deviations are population standard
/// deviations over seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategySummary {
    pub strategy: String,
    pub trials: usize,
    pub failed: usize,
    pub best_val_mean: Option<f64>,
    pub best_val_std: Option<f64>,
    pub best_test_mean: Option<f64>,
    pub best_test_std: Option<f64>,
    pub init_aps_mean: Option<f64>,
    /// Pearson correlation of validation and test score over every
    /// evaluation of every seed.
    pub pearson_val_test: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub rows: Vec<TrialRow>,
    pub strategies: Vec<StrategySummary>,
}

fn aggregate(rows: &[&TrialRow]) -> StrategySummary {
    let vals: Vec<f64> = rows.iter().filter_map(|r| r.best_val).collect();
    let tests: Vec<f64> = rows.iter().filter_map(|r| r.best_test).collect();
    let apss: Vec<f64> = rows.iter().filter_map(|r| r.init_aps).collect();
    let val = mean_std(&vals).ok();
    let test = mean_std(&tests).ok();
    StrategySummary {
        strategy: rows[0].strategy.clone(),
        trials: rows.len(),
        failed: rows.iter().filter(|r| r.status != "ok").count(),
        best_val_mean: val.map(|v| v.0),
        best_val_std: val.map(|v| v.1),
        best_test_mean: test.map(|v| v.0),
        best_test_std: test.map(|v| v.1),
        init_aps_mean: mean_std(&apss).ok().map(|v| v.0),
        pearson_val_test: None,
    }
}

fn group(rows: &[TrialRow]) -> BTreeMap<&str, Vec<&TrialRow>> {
    let mut groups: BTreeMap<&str, Vec<&TrialRow>> = BTreeMap::new();
    for row in rows {
        groups.entry(row.strategy.as_str()).or_default().push(row);
    }
    groups
}

impl StudyReport {
    /// Rows are ordered by strategy name then seed.
    pub fn from_trials(trials: &[TrialFile]) -> Result<Self> {
        let mut rows: Vec<TrialRow> = trials.iter().map(TrialRow::from_trial).collect();
        rows.sort_by(|a, b| a.strategy.cmp(&b.strategy).then(a.seed.cmp(&b.seed)));
        if rows
            .windows(2)
            .any(|w| w[0].strategy == w[1].strategy && w[0].seed == w[1].seed)
        {
            return Err(NasError::Input("duplicate (strategy, seed) trial".into()));
        }
        let mut strategies: Vec<StrategySummary> =
            group(&rows).values().map(|g| aggregate(g)).collect();
        for summary in &mut strategies {
            let (vals, tests): (Vec<f64>, Vec<f64>) = trials
                .iter()
                .filter(|t| t.strategy == summary.strategy)
                .filter_map(|t| t.record.as_ref())
                .flat_map(|r| r.history.iter())
                .map(|c| (c.report.val_score, c.report.test_score))
                .unzip();
            summary.pearson_val_test = pearson(&vals, &tests).ok();
        }
        Ok(Self { rows, strategies })
    }

    /// Checks that every aggregate except the correlation can be recomputed
    /// from the rows.
    pub fn check(&self) -> Result<()> {
        let groups = group(&self.rows);
        if groups.len() != self.strategies.len() {
            return Err(NasError::Input("strategy summaries do not match rows".into()));
        }
        for (summary, rows) in self.strategies.iter().zip(groups.values()) {
            let expected = StrategySummary {
                pearson_val_test: summary.pearson_val_test,
                ..aggregate(rows)
            };
            if *summary != expected {
                return Err(NasError::Input(format!(
                    "aggregates for `{}` disagree with its rows",
                    summary.strategy
                )));
            }
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| NasError::io(path, e))?;
        let report: StudyReport = serde_json::from_str(&text)?;
        report.check()?;
        Ok(report)
    }

    pub fn summary(&self, strategy: &str) -> Option<&StrategySummary> {
        self.strategies.iter().find(|s| s.strategy == strategy)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn rows_csv(&self) -> Result<Vec<u8>> {
        let mut out = csv::Writer::from_writer(Vec::new());
        for row in &self.rows {
            out.serialize(row)?;
        }
        out.into_inner()
            .map_err(|e| NasError::Input(e.to_string()))
    }
}

/// One line of the initialization study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApsRow {
    pub method: String,
    pub seed: u64,
    pub aps: Option<f64>,
    pub samples_drawn: Option<u64>,
    pub final_threshold: Option<usize>,
}

impl ApsRow {
    pub fn to_csv(rows: &[ApsRow]) -> Result<Vec<u8>> {
        let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
        out.write_record(["method", "seed", "aps", "samples_drawn", "final_threshold"])?;
        for row in rows {
            out.serialize(row)?;
        }
        out.into_inner()
            .map_err(|e| NasError::Input(e.to_string()))
    }
}

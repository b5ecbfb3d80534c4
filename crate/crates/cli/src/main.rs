//! `evonas` command-line interface.
//!
//! Exit status: 0 on success, 1 on usage errors, 2 on runtime errors.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use evonas::fitness::{mmd_biased, mmd_unbiased, Kernel, KernelSpec, UnbiasedForm};
use evonas::harness::{self, ApsRow, ExperimentConfig, TrialFile};

#[derive(Parser)]
#[command(name = "evonas", version, about = "Diversity-aware evolutionary architecture search")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one strategy for one seed and emit its trial record.
    Search {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: u64,
        /// Strategy name; defaults to the first one in the config.
        #[arg(long)]
        strategy: Option<String>,
        /// Directory for the trial file; printed to stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every strategy for every configured seed.
    Study {
        #[arg(long)]
        config: PathBuf,
        /// Worker threads; 0 means one per core.
        #[arg(long, default_value_t = 0)]
        parallel: usize,
        /// Output directory; overrides the config's `output_dir`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Average population similarity of each initializer, per seed.
    Aps {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 0)]
        parallel: usize,
        /// Directory for `aps.csv`; printed to stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Two-sample MMD between two headerless CSV feature files.
    Mmd {
        file_a: PathBuf,
        file_b: PathBuf,
        #[arg(long, value_enum, default_value_t = KernelArg::Rbf)]
        kernel: KernelArg,
        /// RBF bandwidth; the median heuristic is used when omitted.
        #[arg(long)]
        bandwidth: Option<f64>,
    },
    /// Re-aggregate the trial files of a finished study.
    Report {
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum KernelArg {
    Rbf,
    Linear,
}

fn read_features(path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("cannot open {}", path.display()))?;
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.with_context(|| format!("{}: row {}", path.display(), i + 1))?;
        let row = record
            .iter()
            .map(|v| v.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .with_context(|| format!("{}: row {} is not numeric", path.display(), i + 1))?;
        rows.push(row);
    }
    if rows.is_empty() {
        bail!("{} contains no rows", path.display());
    }
    Ok(rows)
}

fn mmd(file_a: &Path, file_b: &Path, kernel: KernelArg, bandwidth: Option<f64>) -> Result<()> {
    let xs = read_features(file_a)?;
    let ys = read_features(file_b)?;
    let spec = match kernel {
        KernelArg::Linear => KernelSpec::Linear,
        KernelArg::Rbf => KernelSpec::Rbf { bandwidth },
    };
    let kernel = spec.resolve(&xs, &ys)?;
    let biased = mmd_biased(&xs, &ys, &kernel)?;
    // the unbiased forms need two points per sample
    let printed = mmd_unbiased(&xs, &ys, &kernel, UnbiasedForm::AsPrinted).ok();
    let ustat = mmd_unbiased(&xs, &ys, &kernel, UnbiasedForm::UStatistic).ok();
    let (kind, bw) = match kernel {
        Kernel::Linear => ("linear", None),
        Kernel::Rbf { bandwidth } => ("rbf", Some(bandwidth)),
    };
    let out = serde_json::json!({
        "kernel": kind,
        "bandwidth": bw,
        "n_a": xs.len(),
        "n_b": ys.len(),
        "mmd_biased": biased,
        "mmd_unbiased_as_printed": printed,
        "mmd_unbiased_u_statistic": ustat,
    });
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(())
}

fn write_output(out: Option<&Path>, name: &str, bytes: &[u8]) -> Result<()> {
    match out {
        Some(dir) => {
            std::fs::create_dir_all(dir)
                .with_context(|| format!("cannot create {}", dir.display()))?;
            let path = dir.join(name);
            std::fs::write(&path, bytes)
                .with_context(|| format!("cannot write {}", path.display()))?;
            eprintln!("wrote {}", path.display());
        }
        None => std::io::stdout().write_all(bytes)?,
    }
    Ok(())
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Search {
            config,
            seed,
            strategy,
            out,
        } => {
            let cfg = ExperimentConfig::load(&config)?;
            let strategy = match &strategy {
                Some(name) => cfg
                    .strategy(name)
                    .with_context(|| format!("no strategy named `{name}`"))?,
                None => &cfg.strategies[0],
            };
            let evaluator = cfg.build_evaluator()?;
            let record = harness::run_trial(&cfg, evaluator.as_ref(), strategy, seed)?;
            let file = TrialFile {
                strategy: strategy.name.clone(),
                seed,
                record: Some(record),
                error: None,
            };
            let mut json = file.to_json()?;
            json.push('\n');
            write_output(out.as_deref(), &file.file_name(), json.as_bytes())
        }
        Command::Study {
            config,
            parallel,
            out,
        } => {
            let cfg = ExperimentConfig::load(&config)?;
            let report = harness::run_study(&cfg, parallel, out.as_deref())?;
            for s in &report.strategies {
                eprintln!(
                    "{:<16} trials {:>3} failed {:>3} best val {} test {}",
                    s.strategy,
                    s.trials,
                    s.failed,
                    fmt_mean_std(s.best_val_mean, s.best_val_std),
                    fmt_mean_std(s.best_test_mean, s.best_test_std),
                );
            }
            Ok(())
        }
        Command::Aps {
            config,
            parallel,
            out,
        } => {
            let cfg = ExperimentConfig::load(&config)?;
            let rows = harness::aps_study(&cfg, parallel)?;
            write_output(out.as_deref(), "aps.csv", &ApsRow::to_csv(&rows)?)
        }
        Command::Mmd {
            file_a,
            file_b,
            kernel,
            bandwidth,
        } => mmd(&file_a, &file_b, kernel, bandwidth),
        Command::Report { out } => {
            let report = harness::rebuild_report(&out)?;
            println!("{}", report.to_json()?);
            Ok(())
        }
    }
}

fn fmt_mean_std(mean: Option<f64>, std: Option<f64>) -> String {
    match (mean, std) {
        (Some(m), Some(s)) => format!("{m:.2} ± {s:.2}"),
        _ => "-".to_string(),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

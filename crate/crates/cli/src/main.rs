use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use leakbench::bench::{emit_report, run_experiment, BenchError, Experiment, ExperimentConfig, ReportFormat};
use leakbench::corpus::{
    build_instances, generate_synthetic, load_dataset_dir, write_synthetic, Aggregation, CorpusError,
    Dataset, GenConfig, SameDayPolicy,
};
use leakbench::protocol::{audit_split, generate_splits, LeakageReport, Protocol};

#[derive(Parser)]
#[command(name = "leakbench", version, about = "Leakage-aware evaluation of self-report prediction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic dataset described by a generator config.
    Generate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the leakage audit of every split of a protocol.
    Audit {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        protocol: String,
        /// Feature window in days.
        #[arg(long)]
        window: usize,
        #[arg(long, default_value = "mood")]
        target: String,
        /// Seed of the MIXED shuffle.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// MIXED fold count.
        #[arg(long, default_value_t = 5)]
        folds: usize,
    },
    /// Run an experiment and write its report.
    Run {
        #[arg(long)]
        experiment: String,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Markdown,
}

/// Failure with its process exit code.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn config(message: impl Into<String>) -> Self {
        Failure { code: 2, message: message.into() }
    }
}

impl From<CorpusError> for Failure {
    fn from(e: CorpusError) -> Self {
        let code = match e {
            CorpusError::InvalidConfig(_) => 2,
            CorpusError::NoInstances { .. } | CorpusError::UnknownTarget(_) => 4,
            _ => 3,
        };
        Failure { code, message: e.to_string() }
    }
}

impl From<BenchError> for Failure {
    fn from(e: BenchError) -> Self {
        match e {
            BenchError::Data(d) => d.into(),
            BenchError::Config(_) => Failure { code: 2, message: e.to_string() },
            BenchError::Precondition(_)
            | BenchError::Transform(_)
            | BenchError::Protocol(_)
            | BenchError::Learner(_)
            | BenchError::Scoring(_) => Failure { code: 4, message: e.to_string() },
            BenchError::Io { .. } | BenchError::Harness(_) => Failure { code: 1, message: e.to_string() },
        }
    }
}

fn read_config(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::config(format!("cannot read {}: {e}", path.display())))
}

fn load(dir: &Path, policy: SameDayPolicy) -> Result<Dataset, Failure> {
    Ok(load_dataset_dir(dir, policy)?)
}

fn generate(config: &Path, out: &Path) -> Result<(), Failure> {
    let cfg: GenConfig =
        serde_json::from_str(&read_config(config)?).map_err(|e| Failure::config(e.to_string()))?;
    let ds = generate_synthetic(&cfg)?;
    fs::create_dir_all(out).map_err(|e| Failure { code: 1, message: format!("{}: {e}", out.display()) })?;
    write_synthetic(&ds, &cfg, out)?;
    eprintln!("wrote {} users, {} reports to {}", ds.users().len(), ds.reports().len(), out.display());
    Ok(())
}

fn audit(
    data: &Path,
    protocol: &str,
    window: usize,
    target: &str,
    seed: u64,
    folds: usize,
) -> Result<(), Failure> {
    let protocol: Protocol =
        protocol.parse().map_err(|e: leakbench::protocol::ProtocolError| Failure::config(e.to_string()))?;
    if window == 0 {
        return Err(Failure::config("window must be at least 1 day"));
    }
    let ds = load(data, SameDayPolicy::Average)?;
    let xs = build_instances(&ds, target, window, Aggregation::Mean, 0)?;
    let set = generate_splits(protocol, &xs, folds, seed)
        .map_err(|e| Failure { code: 4, message: e.to_string() })?;
    println!("{}", LeakageReport::CSV_HEADER);
    for split in &set.splits {
        println!("{}", audit_split(split, &xs).csv_row());
    }
    if !set.skipped_users.is_empty() {
        eprintln!("{} user(s) with a single instance skipped", set.skipped_users.len());
    }
    Ok(())
}

fn run(
    experiment: &str,
    data: &Path,
    config: &Path,
    out: &Path,
    format: Format,
    seed: Option<u64>,
) -> Result<(), Failure> {
    let experiment: Experiment =
        experiment.parse().map_err(|e: BenchError| Failure::config(e.to_string()))?;
    let mut cfg = ExperimentConfig::from_json(&read_config(config)?)?;
    match cfg.experiment {
        Some(e) if e != experiment => {
            return Err(Failure::config(format!("config is for {e}, not {experiment}")));
        }
        _ => cfg.experiment = Some(experiment),
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    let policy = if cfg.last_score_per_day { SameDayPolicy::Last } else { SameDayPolicy::Average };
    let ds = load(data, policy)?;
    let table = run_experiment(&ds, &cfg)?;
    let format = match format {
        Format::Csv => ReportFormat::Csv,
        Format::Markdown => ReportFormat::Markdown,
    };
    emit_report(&table, out, format)?;
    eprintln!("wrote {} rows to {}", table.rows.len(), out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Generate { config, out } => generate(config, out),
        Command::Audit { data, protocol, window, target, seed, folds } => {
            audit(data, protocol, *window, target, *seed, *folds)
        }
        Command::Run { experiment, data, config, out, format, seed } => {
            run(experiment, data, config, out, *format, *seed)
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

//! Command-line front end: dataset generation, redundancy curves, readout
//! fits, seeded sweeps, invariant checks, and result merging.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rssl_core::experiment::{
    self, ExperimentConfig, ExportFormat, ModelSpec, ResultRow, SweepVariable,
};
use rssl_core::genmodel::GenerativeModel;
use rssl_core::seeding::mix_seed;
use rssl_core::{lowrank, matching, regress, Error, Result};

#[derive(Parser)]
#[command(name = "rssl", version, about = "Reconstructive SSL experiment toolkit")]
struct Cli {
    /// Master seed for model draws and sampling (overrides config seeds).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// JSON file: a model spec, or a full sweep config for `sweep`.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output path; stdout when omitted (except `generate`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Output format where both are supported: csv | json.
    #[arg(long, global = true)]
    format: Option<String>,
    /// Override the trial count of a sweep config.
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Worker threads for sweeps (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a model description (model.json) and a sampled dataset
    /// (dataset.csv) into the --out directory.
    Generate {
        /// Rows to sample.
        #[arg(long, default_value_t = 1_000)]
        n: usize,
    },
    /// Write the redundancy curve over every candidate rank as CSV.
    Epsilon {
        /// Rows to sample for the curve.
        #[arg(long, default_value_t = 2_000)]
        n: usize,
        /// Monte-Carlo draws for the mean encoding.
        #[arg(long, default_value_t = 20_000)]
        mc: usize,
    },
    /// Fit the linear readout on oracle features and report held-out risk.
    Fit {
        /// Labeled training rows.
        #[arg(long, default_value_t = 300)]
        n: usize,
        /// Held-out evaluation rows.
        #[arg(long, default_value_t = 1_000)]
        n_test: usize,
        /// Fixed ridge penalty; cross-validated when omitted.
        #[arg(long)]
        lambda: Option<f64>,
    },
    /// Run the sweep described by the --config file.
    Sweep,
    /// Run the bundled invariant checks for a model.
    Check,
    /// Merge result CSVs into one plot-ready long-format table.
    Report {
        /// Result CSV files to merge.
        files: Vec<PathBuf>,
    },
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(exit_code(&e));
    }
}

fn exit_code(err: &Error) -> i32 {
    if err.is_numerical() {
        2
    } else {
        1
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    }
    let seed = cli.seed.unwrap_or(0);
    let format = match cli.format.as_deref() {
        Some(text) => Some(text.parse::<ExportFormat>()?),
        None => None,
    };

    match &cli.command {
        Command::Generate { n } => generate(&cli, seed, *n),
        Command::Epsilon { n, mc } => epsilon(&cli, seed, *n, *mc),
        Command::Fit { n, n_test, lambda } => fit(&cli, seed, *n, *n_test, *lambda),
        Command::Sweep => sweep(&cli, format),
        Command::Check => check(&cli, seed),
        Command::Report { files } => report(&cli, files, format),
    }
}

/// Model spec from --config, or the standard benchmark family.
fn load_model_spec(config: Option<&Path>) -> Result<ModelSpec> {
    match config {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            Ok(serde_json::from_str(&text)?)
        }
        None => Ok(ModelSpec::Benchmark { d1: 10, d2: 20, p: 2, s_true: 5 }),
    }
}

fn build_model(spec: &ModelSpec, seed: u64) -> Result<GenerativeModel> {
    spec.build(None, mix_seed(seed, 0, u64::MAX))
}

/// Writes `text` to --out, or stdout when omitted.
fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => {
            std::fs::write(path, text)?;
            Ok(())
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn generate(cli: &Cli, seed: u64, n: usize) -> Result<()> {
    let dir = cli
        .out
        .as_deref()
        .ok_or_else(|| Error::InvalidArgument("generate requires --out <dir>".into()))?;
    std::fs::create_dir_all(dir)?;
    let spec = load_model_spec(cli.config.as_deref())?;
    let model = build_model(&spec, seed)?;
    let dataset = model.sample(n, mix_seed(seed, 1, 0))?;
    let model_path = dir.join("model.json");
    let data_path = dir.join("dataset.csv");
    std::fs::write(&model_path, model.to_json()?)?;
    dataset.to_csv_path(&data_path)?;
    println!("{}", model_path.display());
    println!("{}", data_path.display());
    Ok(())
}

fn epsilon(cli: &Cli, seed: u64, n: usize, mc: usize) -> Result<()> {
    let spec = load_model_spec(cli.config.as_deref())?;
    let model = build_model(&spec, seed)?;
    let dataset = model.sample(n, mix_seed(seed, 1, 0))?;
    let encoding = model.mean_encoding(mc, mix_seed(seed, 2, 0))?;
    let eps0 = matching::epsilon_zero(&dataset, &encoding.mean)?;
    let spectrum = lowrank::residual_spectrum(&dataset, &encoding.mean)?;
    let mut text = String::from("s,epsilon\n");
    text.push_str(&format!("0,{eps0}\n"));
    for s in 1..=(model.d2 - model.p) {
        text.push_str(&format!("{s},{}\n", spectrum[s - 1].epsilon_tail));
    }
    emit(cli.out.as_deref(), &text)
}

fn fit(cli: &Cli, seed: u64, n: usize, n_test: usize, lambda: Option<f64>) -> Result<()> {
    let spec = load_model_spec(cli.config.as_deref())?;
    let model = build_model(&spec, seed)?;
    let labeled = model.sample(n, mix_seed(seed, 1, 0))?;
    let test = model.sample(n_test, mix_seed(seed, 2, 0))?;
    let fitted = match lambda {
        Some(lambda) => regress::fit_ridge(&labeled.psi_star, &labeled.y, lambda)?,
        None => {
            let cv = regress::cross_validate_lambda(
                &labeled.psi_star,
                &labeled.y,
                5,
                mix_seed(seed, 3, 0),
            )?;
            regress::fit_ridge(&labeled.psi_star, &labeled.y, cv.lambda_star)?
        }
    };
    let risk = regress::excess_risk(&fitted, &test)?;
    let payload = serde_json::json!({
        "lambda": fitted.lambda,
        "n_train": n,
        "n_eval": risk.n_eval,
        "accuracy": risk.accuracy,
        "readout_risk": risk.excess_risk,
        "readout_floor": risk.error_apx_at_fit,
        "excess_risk": (risk.excess_risk - risk.error_apx_at_fit).max(0.0),
    });
    let mut text = serde_json::to_string_pretty(&payload)?;
    text.push('\n');
    emit(cli.out.as_deref(), &text)
}

fn sweep(cli: &Cli, format: Option<ExportFormat>) -> Result<()> {
    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| Error::InvalidArgument("sweep requires --config <file>".into()))?;
    let mut config: ExperimentConfig = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    if let Some(seed) = cli.seed {
        config.master_seed = seed;
    }
    if let Some(trials) = cli.trials {
        config.trials = trials;
    }
    let result = match config.sweep {
        SweepVariable::GeneratingRank => experiment::run_s_sweep(&config)?,
        SweepVariable::SampleSize => experiment::run_n_sweep(&config)?,
        SweepVariable::Shrinkage => experiment::run_sweep(&config)?,
    };
    let format = format.unwrap_or(ExportFormat::Csv);
    match cli.out.as_deref() {
        Some(path) => experiment::export(&result, path, format),
        None => match format {
            ExportFormat::Csv => experiment::write_result_csv(&result, std::io::stdout().lock()),
            ExportFormat::Json => {
                let mut text = serde_json::to_string_pretty(&result)?;
                text.push('\n');
                emit(None, &text)
            }
        },
    }
}

fn check(cli: &Cli, seed: u64) -> Result<()> {
    let spec = load_model_spec(cli.config.as_deref())?;
    let report = experiment::run_check_suite(&spec, seed)?;
    for item in &report.items {
        eprintln!("{} {}: {}", if item.pass { "PASS" } else { "FAIL" }, item.name, item.detail);
    }
    let mut text = report.to_json()?;
    text.push('\n');
    emit(cli.out.as_deref(), &text)
}

fn report(cli: &Cli, files: &[PathBuf], format: Option<ExportFormat>) -> Result<()> {
    if files.is_empty() {
        return Err(Error::InvalidArgument("report requires at least one CSV file".into()));
    }
    let mut rows: Vec<ResultRow> = Vec::new();
    for file in files {
        rows.extend(experiment::import_csv(file)?);
    }
    rows.sort_by(|a, b| {
        (a.grid_var.label(), a.method.label())
            .cmp(&(b.grid_var.label(), b.method.label()))
            .then(a.grid_value.total_cmp(&b.grid_value))
    });
    match format.unwrap_or(ExportFormat::Csv) {
        ExportFormat::Csv => match cli.out.as_deref() {
            Some(path) => experiment::write_rows_csv(&rows, std::fs::File::create(path)?),
            None => experiment::write_rows_csv(&rows, std::io::stdout().lock()),
        },
        ExportFormat::Json => {
            let mut text = serde_json::to_string_pretty(&rows)?;
            text.push('\n');
            emit(cli.out.as_deref(), &text)
        }
    }
}

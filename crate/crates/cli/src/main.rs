//! Command-line front end: train a generator on a CSV dataset, sample
//! synthetic tables from a checkpoint, and evaluate real/synthetic pairs.
//!
//! Exit codes: 0 success, 2 invalid config, 3 invalid data, 4 training
//! fault (a diagnostic checkpoint is written first), 5 I/O fault.

mod config;

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use fairsynth::checkpoint::{
    load_checkpoint, load_checkpoint_with_privacy, save_checkpoint_with_privacy,
};
use fairsynth::error::Error as CoreError;
use fairsynth::eval::report::{
    read_report_json, write_plot_data, write_report_json, write_table_row_csv,
};
use fairsynth::eval::{evaluate_all, evaluate_checkpoint, EvalReport};
use fairsynth::schema::{load_csv, split};
use fairsynth::synth::{generate, write_csv};
use fairsynth::trainer::{
    feature_weights, precompute_privacy_reference, TrainLogRecord, Trainer,
};
use fairsynth::transform;

use config::RunConfig;

const EXIT_CONFIG: u8 = 2;
const EXIT_DATA: u8 = 3;
const EXIT_TRAINING: u8 = 4;
const EXIT_IO: u8 = 5;

#[derive(Parser)]
#[command(
    name = "fairsynth",
    about = "Privacy- and fairness-penalized synthetic tabular data",
    long_about = None,
    after_help = "Thread count is controlled by the RAYON_NUM_THREADS environment variable."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a generator from a run-config JSON file.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides the config's output_dir).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the training seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Store checkpoints at 64-bit precision for bit-exact resume.
        #[arg(long)]
        deterministic: bool,
    },
    /// Sample a synthetic CSV from a trained checkpoint.
    Generate {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Rows to generate; defaults to the training-split size.
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a real/synthetic pair on utility, fairness, and privacy.
    Evaluate {
        #[arg(long)]
        config: PathBuf,
        /// Real dataset CSV (defaults to the config's dataset path).
        #[arg(long)]
        real: Option<PathBuf>,
        /// Synthetic CSV to evaluate (any generator's output).
        #[arg(long, required_unless_present = "checkpoint")]
        synth: Option<PathBuf>,
        /// Evaluate a checkpoint instead, sampling fresh synthetic data
        /// per repetition.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Output directory for report.json and table_row.csv.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the evaluation seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Label for the evaluated model in reports.
        #[arg(long)]
        model_id: Option<String>,
    },
    /// Merge evaluation reports into per-figure CSVs (utility, fairness,
    /// privacy).
    PlotData {
        /// Report JSON files produced by `evaluate`.
        #[arg(long, num_args = 1.., required = true)]
        reports: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn config(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_CONFIG,
            message: message.into(),
        }
    }
}

impl From<CoreError> for Failure {
    fn from(err: CoreError) -> Self {
        let code = match &err {
            CoreError::Config(_) | CoreError::Json(_) => EXIT_CONFIG,
            CoreError::SchemaMismatch(_)
            | CoreError::EmptyTable(_)
            | CoreError::SplitDegenerate(_)
            | CoreError::UnseenCategory { .. }
            | CoreError::Fit(_)
            | CoreError::DegenerateTraining(_) => EXIT_DATA,
            CoreError::NonFinite { .. }
            | CoreError::TrainingFault { .. }
            | CoreError::DegenerateBatch(_)
            | CoreError::Shape(_)
            | CoreError::Contract(_) => EXIT_TRAINING,
            CoreError::Checkpoint(_) | CoreError::Io(_) | CoreError::Csv(_) => EXIT_IO,
        };
        Failure {
            code,
            message: err.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(err: std::io::Error) -> Self {
        Failure {
            code: EXIT_IO,
            message: err.to_string(),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train {
            config,
            out,
            seed,
            deterministic,
        } => cmd_train(&config, out, seed, deterministic),
        Command::Generate {
            checkpoint,
            n,
            seed,
            out,
        } => cmd_generate(&checkpoint, n, seed, &out),
        Command::Evaluate {
            config,
            real,
            synth,
            checkpoint,
            out,
            seed,
            model_id,
        } => cmd_evaluate(&config, real, synth, checkpoint, out, seed, model_id),
        Command::PlotData { reports, out } => cmd_plot_data(&reports, &out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}

fn print_epoch(record: &TrainLogRecord, total: usize) {
    println!(
        "epoch {:>4}/{total}  critic {:+.4}  adv {:+.4}  privacy {:.4}  fairness {:.4}  gp {:.4}  {}  [{:.1}s]",
        record.epoch,
        record.critic_loss,
        record.adv_loss,
        record.privacy_loss,
        record.fairness_loss,
        record.gradient_penalty,
        if record.phase_active { "pf" } else { "--" },
        record.wall_time_secs
    );
}

fn cmd_train(
    config_path: &Path,
    out: Option<PathBuf>,
    seed: Option<u64>,
    deterministic: bool,
) -> Result<(), Failure> {
    let mut run = RunConfig::load(config_path)?;
    if let Some(seed) = seed {
        run.train.seed = seed;
    }
    if deterministic {
        run.train.deterministic = true;
    }
    if let Some(out) = out {
        run.output_dir = out;
    }
    let schema = run.schema.to_table_schema()?;
    run.train.validate()?;
    fs::create_dir_all(&run.output_dir)?;

    let loaded = load_csv(&run.dataset, &schema, &run.schema.derive)?;
    println!(
        "loaded {} rows from {} ({} dropped)",
        loaded.table.n_rows(),
        run.dataset.display(),
        loaded.dropped_rows
    );
    let (train_table, _test_table) = split(&loaded.table, &run.split)?;
    println!("train split: {} rows", train_table.n_rows());

    let model = transform::fit(&train_table)?;
    let matrix = transform::encode(&train_table, &model)?;
    let tensor = matrix.to_tensor();
    let weights = feature_weights(&tensor, run.train.feature_weighting);
    println!("encoded width: {}", model.encoded_width);
    let privacy = precompute_privacy_reference(&tensor, &weights)?;
    if privacy.duplicate_rows > 0 {
        println!(
            "privacy reference: {} duplicate rows have zero reference distance",
            privacy.duplicate_rows
        );
    }

    // Resolved-config snapshot: every default materialized.
    fs::write(
        run.output_dir.join("config.resolved.json"),
        serde_json::to_string_pretty(&run.resolved_snapshot()).map_err(CoreError::from)?,
    )?;

    let mut log_file = fs::File::create(run.output_dir.join("train_log.jsonl"))?;
    let mut trainer = Trainer::new(run.train.clone(), model)?;
    let checkpoint_path = run.output_dir.join("checkpoint.pfw");
    let total = trainer.config.epochs;

    while trainer.epoch() < total {
        match trainer.run_epoch(&tensor, &privacy) {
            Ok(record) => {
                print_epoch(&record, total);
                let line = serde_json::to_string(&record).map_err(CoreError::from)?;
                writeln!(log_file, "{line}")?;
                let every = trainer.config.checkpoint_every;
                if every > 0 && record.epoch % every == 0 && record.epoch < total {
                    let path = run
                        .output_dir
                        .join(format!("checkpoint_epoch{:04}.pfw", record.epoch));
                    save_checkpoint_with_privacy(&trainer.to_checkpoint(), Some(&privacy), &path)?;
                }
            }
            Err(err) => {
                let diag = run.output_dir.join("diagnostic.pfw");
                save_checkpoint_with_privacy(&trainer.to_checkpoint(), Some(&privacy), &diag)?;
                return Err(CoreError::TrainingFault {
                    reason: err.to_string(),
                    diagnostic_path: diag.display().to_string(),
                }
                .into());
            }
        }
    }

    save_checkpoint_with_privacy(&trainer.to_checkpoint(), Some(&privacy), &checkpoint_path)?;
    println!("checkpoint: {}", checkpoint_path.display());
    Ok(())
}

fn cmd_generate(
    checkpoint: &Path,
    n: Option<usize>,
    seed: u64,
    out: &Path,
) -> Result<(), Failure> {
    let cp = load_checkpoint(checkpoint)?;
    let n = n.unwrap_or(cp.train_rows);
    if n == 0 {
        return Err(Failure::config(
            "row count is zero; pass --n for checkpoints without a recorded training size",
        ));
    }
    let table = generate(&cp, n, seed)?;
    if let Some(dir) = out.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    write_csv(&table, out)?;
    println!("wrote {n} synthetic rows to {}", out.display());
    Ok(())
}

fn cmd_evaluate(
    config_path: &Path,
    real: Option<PathBuf>,
    synth: Option<PathBuf>,
    checkpoint: Option<PathBuf>,
    out: Option<PathBuf>,
    seed: Option<u64>,
    model_id: Option<String>,
) -> Result<(), Failure> {
    let run = RunConfig::load(config_path)?;
    let schema = run.schema.to_table_schema()?;
    let mut eval_cfg = run.eval.clone();
    if let Some(seed) = seed {
        eval_cfg.seed = seed;
    }
    if let Some(model_id) = model_id {
        eval_cfg.model_id = model_id;
    }
    if eval_cfg.dataset.is_empty() {
        eval_cfg.dataset = run
            .dataset
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
    }

    let real_path = real.unwrap_or_else(|| run.dataset.clone());
    let loaded = load_csv(&real_path, &schema, &run.schema.derive)?;
    let (real_train, real_test) = split(&loaded.table, &run.split)?;

    let report: EvalReport = if let Some(cp_path) = checkpoint {
        let (cp, _) = load_checkpoint_with_privacy(&cp_path)?;
        if eval_cfg.model_id.is_empty() {
            eval_cfg.model_id = "checkpoint".into();
        }
        evaluate_checkpoint(&cp, &real_train, &real_test, &eval_cfg, None)?
    } else {
        let synth_path = synth.expect("clap enforces synth without checkpoint");
        let synth_loaded = load_csv(&synth_path, &schema, &run.schema.derive)?;
        if eval_cfg.model_id.is_empty() {
            eval_cfg.model_id = synth_path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
        }
        evaluate_all(&real_train, &real_test, &synth_loaded.table, &eval_cfg)?
    };

    let out_dir = out.unwrap_or_else(|| run.output_dir.clone());
    fs::create_dir_all(&out_dir)?;
    write_report_json(&report, &out_dir.join("report.json"))?;
    write_table_row_csv(&report, &out_dir.join("table_row.csv"))?;

    if let Some(u) = &report.utility {
        println!(
            "utility:        accuracy {:.4} ± {:.4}  f1 {:.4} ± {:.4}  auc {:.4} ± {:.4}",
            u.accuracy.mean, u.accuracy.std, u.f1.mean, u.f1.std, u.auc_roc.mean, u.auc_roc.std
        );
    }
    if let Some(b) = &report.real_baseline {
        println!(
            "real baseline:  accuracy {:.4} ± {:.4}  f1 {:.4} ± {:.4}  auc {:.4} ± {:.4}",
            b.accuracy.mean, b.accuracy.std, b.f1.mean, b.f1.std, b.auc_roc.mean, b.auc_roc.std
        );
    }
    println!(
        "fairness:       dp gap {:.4} ± {:.4}",
        report.dp_gap.mean, report.dp_gap.std
    );
    println!(
        "privacy:        identifiability {:.4} ± {:.4}",
        report.identifiability.mean, report.identifiability.std
    );
    for w in &report.warnings {
        println!("warning: {w}");
    }
    println!("report: {}", out_dir.join("report.json").display());
    Ok(())
}

fn cmd_plot_data(reports: &[PathBuf], out: &Path) -> Result<(), Failure> {
    let mut parsed = Vec::with_capacity(reports.len());
    for path in reports {
        parsed.push(read_report_json(path)?);
    }
    let written = write_plot_data(&parsed, out)?;
    for path in written {
        println!("wrote {}", path.display());
    }
    Ok(())
}

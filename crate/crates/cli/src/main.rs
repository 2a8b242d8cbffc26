//! `ids`: synthetic data, training runs, evaluation, prediction and
//! importance analysis for IoT flow classifiers.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ids_core::pipeline::{
    cmd_evaluate, cmd_importance, cmd_predict, cmd_synth, cmd_train, ExperimentConfig,
    PipelineError, SynthSpec,
};
use log::{error, info};

#[derive(Parser)]
#[command(name = "ids", version, about = "IoT flow intrusion detection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic labeled connection log.
    Synth {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the configured models and write a run directory.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Log file or directory of logs; overrides `paths.data`.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Run directory; overrides `paths.out`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score a trained model on labeled logs.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        report: PathBuf,
    },
    /// Predict labels for (possibly unlabeled) logs.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Permutation importance of every feature.
    Importance {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 5)]
        repeats: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, PipelineError> {
    let text = fs::read_to_string(path).map_err(|source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    match cli.command {
        Command::Synth { spec, out } => {
            let spec: SynthSpec = read_json(&spec)?;
            let path = cmd_synth(&spec, &out)?;
            info!("wrote {}", path.display());
        }
        Command::Train { config, data, out } => {
            let text = fs::read_to_string(&config).map_err(|source| PipelineError::Io {
                path: config.clone(),
                source,
            })?;
            let cfg = ExperimentConfig::from_json(&text)?;
            let missing = |what: &str| PipelineError::Config(format!("no {what} path given"));
            let data = data.or_else(|| cfg.paths.data.clone()).ok_or_else(|| missing("data"))?;
            let out = out.or_else(|| cfg.paths.out.clone()).ok_or_else(|| missing("output"))?;
            let report = cmd_train(&cfg, &data, &out)?;
            for (kind, m) in &report.metrics {
                println!("{}\taccuracy={:.4}\tmacro_f1={:.4}", kind.as_str(), m.accuracy, m.macro_f1);
            }
        }
        Command::Evaluate { model, data, report } => {
            let m = cmd_evaluate(&model, &data, &report)?;
            println!("accuracy={:.4}\tmacro_f1={:.4}", m.accuracy, m.macro_f1);
        }
        Command::Predict { model, input, output } => {
            let pred = cmd_predict(&model, &input, &output)?;
            info!("predicted {} rows", pred.len());
        }
        Command::Importance { model, data, repeats, seed, out } => {
            let rep = cmd_importance(&model, &data, repeats, seed, &out)?;
            info!("base accuracy {:.4}", rep.base_accuracy);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let level = std::env::var("IDS_LOG_LEVEL").unwrap_or_else(|_| "error".into());
    env_logger::Builder::new().parse_filters(&level).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

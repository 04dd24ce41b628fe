//! The `pdd` command-line tool and its HTTP services.

pub mod args;
pub mod backends;
pub mod commands;
pub mod config;
pub mod manifest;
pub mod server;
pub mod wire_server;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use chrono::Utc;
use clap::Parser;

use args::{Cli, Command};
use config::Config;
use manifest::{sha256_hex, RunManifest, RunRecord};

/// An invalid combination of arguments, reported with exit code 2.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

pub const EXIT_DATA: u8 = 1;
pub const EXIT_USAGE: u8 = 2;

/// Parses `argv`, runs the command and maps failures to exit codes.
pub fn main_with_args(argv: Vec<String>) -> ExitCode {
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli, &argv) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::from(EXIT_DATA)
            }
        }
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Synth(_) => "synth",
        Command::Ingest(_) => "ingest",
        Command::Segment(_) => "segment",
        Command::Split(_) => "split",
        Command::Stats(_) => "stats",
        Command::ServeAnnotation(_) => "serve-annotation",
        Command::Agreement(_) => "agreement",
        Command::ExportTrain(_) => "export-train",
        Command::TrainBaseline(_) => "train-baseline",
        Command::Predict(_) => "predict",
        Command::Evaluate(_) => "evaluate",
        Command::Analyze(_) => "analyze",
        Command::Report(_) => "report",
        Command::ServeMockBackend(_) => "serve-mock-backend",
    }
}

pub fn run(cli: Cli, argv: &[String]) -> anyhow::Result<()> {
    let config = match &cli.config {
        Some(path) => Config::load(path).map_err(|e| UsageError(e.to_string()))?,
        None => Config::default(),
    };
    let jobs = cli.jobs.or(config.jobs);
    if let Some(n) = jobs {
        if n == 0 {
            return Err(UsageError("--jobs must be at least 1".into()).into());
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the worker pool")?;
    }
    let started_at = Utc::now();
    let mut record = RunRecord::default();
    if let Some(path) = &cli.config {
        record.input(path);
    }
    let name = command_name(&cli.command);
    match &cli.command {
        Command::Synth(a) => commands::data::synth(a, &config, &mut record)?,
        Command::Ingest(a) => commands::data::ingest(a, &mut record)?,
        Command::Segment(a) => commands::data::segment(a, &mut record)?,
        Command::Split(a) => commands::data::split(a, &config, &mut record)?,
        Command::Stats(a) => commands::data::stats(a, &mut record)?,
        Command::ServeAnnotation(a) => commands::annotate::serve(a, &config, &mut record)?,
        Command::Agreement(a) => commands::annotate::agreement(a, &mut record)?,
        Command::ExportTrain(a) => commands::model::export_train(a, &config, &mut record)?,
        Command::TrainBaseline(a) => commands::model::train_baseline(a, &config, &mut record)?,
        Command::Predict(a) => commands::model::predict(a, &config, &mut record)?,
        Command::Evaluate(a) => commands::model::evaluate(a, &mut record)?,
        Command::Analyze(a) => commands::analyze::analyze(a, &config, &mut record)?,
        Command::Report(a) => commands::model::report(a, &mut record)?,
        Command::ServeMockBackend(a) => commands::model::serve_mock_backend(a, &config, &mut record)?,
    }
    let manifest = RunManifest {
        command: name.to_string(),
        args: argv.iter().skip(1).cloned().collect(),
        config_hash: sha256_hex(serde_json::to_string(&config)?.as_bytes()),
        inputs: RunRecord::digests(&record.inputs)?,
        outputs: RunRecord::digests(&record.outputs)?,
        seed: record.seed,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        started_at,
        finished_at: Utc::now(),
        details: record.details,
    };
    let text = serde_json::to_string_pretty(&manifest)? + "\n";
    match cli.manifest.or_else(|| record.outputs.first().map(|p| manifest_path(p))) {
        Some(path) => std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?,
        None => eprint!("{text}"),
    }
    Ok(())
}

/// `<output>.manifest.json`, placed next to the output.
pub fn manifest_path(output: &Path) -> PathBuf {
    let mut name = output.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    output.with_file_name(name)
}

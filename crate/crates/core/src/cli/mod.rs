//! Command-line front end: configuration, presets, the run/baseline/report
//! commands and their output files.

pub mod args;
pub mod config;
pub mod presets;
pub mod report;
pub mod run;

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

use crate::error::{BackendError, ConfigError, EvalError, PipelineError};
use crate::types::{EvalItem, ValidationError};

pub use args::{Cli, Command};
pub use config::{AppConfig, Overrides, ResolvedConfig};
pub use presets::{builtin_language_sets, model_profiles};
pub use report::{cmd_report, GridOverride};
pub use run::{cmd_baseline, cmd_run, Summary};

pub const SUMMARY_FILE: &str = "summary.json";
pub const SWEEP_FILE: &str = "sweep.csv";
pub const CURVE_FILE: &str = "acc_vs_coverage.csv";
pub const TRACES_FILE: &str = "traces.jsonl";
pub const JUDGED_FILE: &str = "judged.jsonl";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{what} not found: {}", path.display())]
    Missing { what: &'static str, path: PathBuf },
    #[error("dataset has {} invalid item(s)", .0.len())]
    Validation(Vec<ValidationError>),
    #[error("{}:{line}: {detail}", path.display())]
    Parse { path: PathBuf, line: usize, detail: String },
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Config(c) => CliError::Config(c),
            PipelineError::Backend(b) => CliError::Backend(b),
        }
    }
}

impl CliError {
    /// 2 for problems with the invocation, configuration or inputs; 1 for failures while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_)
            | CliError::Missing { .. }
            | CliError::Validation(_)
            | CliError::Parse { .. }
            | CliError::Config(_)
            | CliError::Backend(BackendError::Configuration { .. }) => 2,
            _ => 1,
        }
    }
}

fn io_error(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn read_input(path: &Path, what: &'static str) -> Result<String, CliError> {
    match fs::read_to_string(path) {
        Ok(text) => Ok(text),
        Err(e) if e.kind() == io::ErrorKind::NotFound => Err(CliError::Missing {
            what,
            path: path.to_path_buf(),
        }),
        Err(e) => Err(io_error(path)(e)),
    }
}

/// Parses one JSON value per non-blank line; errors carry the 1-based line number.
pub fn parse_jsonl<T: DeserializeOwned>(text: &str, path: &Path) -> Result<Vec<T>, CliError> {
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    text.lines()
        .enumerate()
        .filter(|(_, line)| !line.trim().is_empty())
        .map(|(i, line)| {
            serde_json::from_str(line).map_err(|e| CliError::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                detail: e.to_string(),
            })
        })
        .collect()
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path, what: &'static str) -> Result<Vec<T>, CliError> {
    parse_jsonl(&read_input(path, what)?, path)
}

pub fn load_dataset(path: &Path) -> Result<Vec<EvalItem>, CliError> {
    read_jsonl(path, "dataset")
}

pub fn write_jsonl<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<(), CliError> {
    let mut out = io::BufWriter::new(fs::File::create(path).map_err(io_error(path))?);
    for row in rows {
        let line = serde_json::to_string(&row).expect("records serialize");
        writeln!(out, "{line}").map_err(io_error(path))?;
    }
    out.flush().map_err(io_error(path))
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(io_error(path))
}

pub fn create_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path).map_err(io_error(path))
}

/// Runs the parsed command and returns the process exit code.
pub async fn dispatch(cli: Cli) -> i32 {
    let result = match cli.command {
        Command::Run(a) => cmd_run(&a.config, &a.overrides()).await.map(|s| s.render()),
        Command::Baseline(a) => cmd_baseline(&a.config, &a.overrides()).await.map(|s| s.render()),
        Command::Report(a) => cmd_report(&a.results, &a.grid(), a.out_dir.as_deref()).map(|r| r.render()),
    };
    match result {
        Ok(text) => {
            print!("{text}");
            0
        }
        Err(e) => {
            if let CliError::Validation(errors) = &e {
                for v in errors {
                    eprintln!("invalid item: {v}");
                }
            }
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

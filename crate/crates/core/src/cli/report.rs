//! Offline re-sweeps of stored judged results.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::{create_dir, read_jsonl, write_file, CliError, CURVE_FILE, SWEEP_FILE};
use crate::error::EvalError;
use crate::evaluation::report::{curve_csv_string, sweep_csv_string};
use crate::evaluation::{curve_from_rows, default_grid, judged_only, optimal_cutoff, sweep, uniform_grid, OptimalCutoff, SweepRow};
use crate::pipeline::ItemResult;

#[derive(Debug, Clone, PartialEq)]
pub enum GridOverride {
    Default,
    Steps(usize),
    Cutoffs(Vec<f64>),
}

impl GridOverride {
    pub fn cutoffs(&self) -> Result<Vec<f64>, CliError> {
        match self {
            GridOverride::Default => Ok(default_grid()),
            GridOverride::Steps(0) => Err(CliError::Usage("--steps must be positive".into())),
            GridOverride::Steps(n) => Ok(uniform_grid(*n)),
            GridOverride::Cutoffs(c) => Ok(c.clone()),
        }
    }
}

/// Sweeps judged results, mapping a malformed grid to a usage error.
pub fn sweep_judged(results: &[ItemResult], cutoffs: &[f64]) -> Result<(Vec<SweepRow>, usize), CliError> {
    let (judged, skipped) = judged_only(results);
    if skipped > 0 {
        tracing::warn!(skipped, "items without a judgment are excluded from the sweep");
    }
    let rows = sweep(&judged, cutoffs).map_err(|e| match e {
        EvalError::BadGrid => CliError::Usage(format!("invalid cutoff grid: {e}")),
        other => CliError::Eval(other),
    })?;
    Ok((rows, skipped))
}

/// Writes the sweep and accuracy-coverage CSVs under the given names.
pub fn write_sweep_files(dir: &Path, rows: &[SweepRow], sweep_name: &str, curve_name: &str) -> Result<(), CliError> {
    write_file(&dir.join(sweep_name), &sweep_csv_string(rows))?;
    write_file(&dir.join(curve_name), &curve_csv_string(&curve_from_rows(rows)))
}

#[derive(Debug, Clone, Serialize)]
pub struct FileReport {
    pub results: PathBuf,
    pub sweep_csv: PathBuf,
    pub curve_csv: PathBuf,
    pub items: usize,
    pub unjudged: usize,
    pub rows: Vec<SweepRow>,
    pub optimal: OptimalCutoff,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReportOutput {
    pub files: Vec<FileReport>,
    /// Best cutoff by `AC_eff` averaged over all files with equal weight.
    pub optimal: OptimalCutoff,
}

impl ReportOutput {
    pub fn render(&self) -> String {
        let mut s = String::new();
        for f in &self.files {
            let _ = writeln!(
                s,
                "{}: {} rows -> {} (best cutoff {} with AC_eff {})",
                f.results.display(),
                f.rows.len(),
                f.sweep_csv.display(),
                f.optimal.cutoff,
                f.optimal.mean_accuracy
            );
        }
        let _ = writeln!(
            s,
            "optimal cutoff: {} (mean AC_eff {} over {} run(s))",
            self.optimal.cutoff,
            self.optimal.mean_accuracy,
            self.files.len()
        );
        s
    }
}

/// Re-sweeps each judged results file and reports the cross-run optimal cutoff.
///
/// With one input the CSVs are `sweep.csv` and `acc_vs_coverage.csv`; with
/// several, each name gets the input's 1-based position as a suffix.
pub fn cmd_report(results: &[PathBuf], grid: &GridOverride, out_dir: Option<&Path>) -> Result<ReportOutput, CliError> {
    let first = results
        .first()
        .ok_or_else(|| CliError::Usage("no results files given".into()))?;
    let cutoffs = grid.cutoffs()?;
    let out_dir = match out_dir {
        Some(d) => d.to_path_buf(),
        None => first.parent().unwrap_or(Path::new(".")).join("report"),
    };

    let mut files = Vec::with_capacity(results.len());
    for path in results {
        let loaded: Vec<ItemResult> = read_jsonl(path, "results file")?;
        let (rows, unjudged) = sweep_judged(&loaded, &cutoffs)?;
        let optimal = optimal_cutoff(std::slice::from_ref(&rows))?;
        let (sweep_name, curve_name) = if results.len() == 1 {
            (SWEEP_FILE.to_string(), CURVE_FILE.to_string())
        } else {
            let n = files.len() + 1;
            (format!("sweep_{n}.csv"), format!("acc_vs_coverage_{n}.csv"))
        };
        files.push(FileReport {
            results: path.clone(),
            sweep_csv: out_dir.join(&sweep_name),
            curve_csv: out_dir.join(&curve_name),
            items: loaded.len(),
            unjudged,
            rows,
            optimal,
        });
    }

    let sweeps: Vec<Vec<SweepRow>> = files.iter().map(|f| f.rows.clone()).collect();
    let optimal = optimal_cutoff(&sweeps)?;

    create_dir(&out_dir)?;
    for f in &files {
        write_file(&f.sweep_csv, &sweep_csv_string(&f.rows))?;
        write_file(&f.curve_csv, &curve_csv_string(&curve_from_rows(&f.rows)))?;
    }
    Ok(ReportOutput { files, optimal })
}

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use super::config::Overrides;
use super::report::GridOverride;
use crate::pipeline::RunMode;
use crate::types::LanguageCode;

#[derive(Debug, Parser)]
#[command(name = "mka", version, about = "Multilingual answer-or-abstain evaluation for multiple-choice QA")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the multilingual pipeline (or the mode set in the config) and score it.
    Run(RunArgs),
    /// Prompt once in the target language, never abstain, and report plain accuracy.
    Baseline(RunArgs),
    /// Re-sweep stored judged results without calling any backend.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Configuration file (TOML).
    pub config: PathBuf,
    #[arg(long)]
    pub cutoff: Option<f64>,
    /// Auxiliary language set: high, mid, low or a set defined in the config.
    #[arg(long)]
    pub aux_set: Option<String>,
    #[arg(long)]
    pub target_lang: Option<String>,
    /// mka or baseline.
    #[arg(long)]
    pub mode: Option<RunMode>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub sample_size: Option<usize>,
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
    /// Serve every request from the cache; a miss is an error.
    #[arg(long)]
    pub offline: bool,
}

impl RunArgs {
    pub fn overrides(&self) -> Overrides {
        Overrides {
            cutoff: self.cutoff,
            aux_set: self.aux_set.clone(),
            target_language: self.target_lang.as_deref().map(LanguageCode::from),
            mode: self.mode,
            seed: self.seed,
            sample_size: self.sample_size,
            cache_dir: self.cache_dir.clone(),
            offline: self.offline,
        }
    }
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// One or more judged.jsonl files.
    #[arg(required = true)]
    pub results: Vec<PathBuf>,
    /// Number of equally spaced cutoffs (default 50).
    #[arg(long, conflicts_with = "cutoffs")]
    pub steps: Option<usize>,
    /// Explicit comma-separated cutoffs, strictly increasing.
    #[arg(long, value_delimiter = ',')]
    pub cutoffs: Option<Vec<f64>>,
    /// Output directory; defaults to `report/` next to the first results file.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

impl ReportArgs {
    pub fn grid(&self) -> GridOverride {
        match (&self.cutoffs, self.steps) {
            (Some(c), _) => GridOverride::Cutoffs(c.clone()),
            (None, Some(n)) => GridOverride::Steps(n),
            (None, None) => GridOverride::Default,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_run_flags() {
        let cli = Cli::try_parse_from([
            "mka", "run", "c.toml", "--cutoff", "0.6", "--aux-set", "low", "--target-lang", "yor_Latn",
            "--mode", "baseline", "--seed", "3", "--sample-size", "10", "--offline",
        ])
        .unwrap();
        let Command::Run(args) = cli.command else { panic!() };
        let o = args.overrides();
        assert_eq!(o.cutoff, Some(0.6));
        assert_eq!(o.mode, Some(RunMode::Baseline));
        assert_eq!(o.target_language, Some("yor_Latn".into()));
        assert!(o.offline);
    }

    #[test]
    fn report_grid_choices() {
        let cli = Cli::try_parse_from(["mka", "report", "a.jsonl", "b.jsonl", "--cutoffs", "0.1,0.5"]).unwrap();
        let Command::Report(args) = cli.command else { panic!() };
        assert_eq!(args.results.len(), 2);
        assert_eq!(args.grid(), GridOverride::Cutoffs(vec![0.1, 0.5]));
        assert!(Cli::try_parse_from(["mka", "report"]).is_err());
        assert!(Cli::try_parse_from(["mka", "run", "c.toml", "--mode", "vote"]).is_err());
    }
}

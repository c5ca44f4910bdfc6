//! Command-line verbs and their exit codes.

use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use dtsn_core::cost_model::{compare, CostError};
use dtsn_core::security::{evaluate, parse_script, report_csv, SecurityError};
use thiserror::Error;

use crate::presets::{run_preset, CaseStudyModel, PresetError, PresetName, ACCURACY_CSV_HEADER};
use crate::scenario::{load_scenario, seed_override, LoadError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

pub const SECURITY_REPORT: &str = "security_report.csv";

#[derive(Debug, Parser)]
#[command(name = "dtsnsim", version, about = "Digital twin network simulator: FL baseline vs. LLM-Twin")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run an experiment preset and write CSV tables and SVG charts.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        /// fig5, fig6, fig7, fig8, fig9, casestudy, or custom:<param>=<v1>,<v2>,...
        #[arg(long)]
        preset: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print both construction totals and the efficiency hypotheses as JSON.
    Compare {
        #[arg(long)]
        scenario: PathBuf,
    },
    /// Run an adversary script through the real and ideal worlds.
    Security {
        #[arg(long)]
        script: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Query the case-study model with reverse or forward prompts.
    Attack(AttackArgs),
}

#[derive(Debug, Args)]
pub struct AttackArgs {
    /// "Who has <value>?" queries against secret keys.
    #[arg(long, conflicts_with = "forward", required_unless_present = "forward")]
    pub reverse: bool,
    /// Queries on trained keys.
    #[arg(long)]
    pub forward: bool,
    #[arg(long)]
    pub trials: usize,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Load(#[from] LoadError),
    #[error(transparent)]
    Preset(#[from] PresetError),
    #[error("{path}: {source}")]
    Script { path: String, source: SecurityError },
    #[error(transparent)]
    Security(#[from] SecurityError),
    #[error(transparent)]
    Cost(#[from] CostError),
    #[error("cannot read {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("writing {path}: {source}")]
    Write { path: String, source: std::io::Error },
    #[error("{failed} of {total} security checks failed; see {report}")]
    ChecksFailed { failed: usize, total: usize, report: String },
    #[error("--trials must be >= 1")]
    ZeroTrials,
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Load(e) => match e {
                LoadError::Io { .. } | LoadError::Parse { .. } | LoadError::SeedOverride { .. } => EXIT_USAGE,
                LoadError::Validation { .. } => EXIT_VALIDATION,
                LoadError::Measure { .. } | LoadError::NotConverged { .. } => EXIT_RUNTIME,
            },
            CliError::Preset(e) if e.is_usage() => EXIT_USAGE,
            CliError::Preset(PresetError::Cost(_)) | CliError::Cost(_) => EXIT_VALIDATION,
            CliError::Script { .. } | CliError::Read { .. } | CliError::ZeroTrials => EXIT_USAGE,
            CliError::Preset(_) | CliError::Security(_) | CliError::Write { .. } | CliError::ChecksFailed { .. } => {
                EXIT_RUNTIME
            }
        }
    }
}

fn load(path: &Path) -> Result<dtsn_core::Scenario, CliError> {
    let mut sc = load_scenario(path)?;
    if let Some(seed) = seed_override()? {
        sc.seed = seed;
    }
    Ok(sc)
}

fn env_seed(explicit: Option<u64>) -> Result<u64, CliError> {
    Ok(match explicit {
        Some(s) => s,
        None => seed_override()?.unwrap_or(0),
    })
}

/// Runs one command and returns what it prints on stdout.
pub fn run(cli: Cli) -> Result<String, CliError> {
    match cli.command {
        Command::Simulate { scenario, preset, out } => {
            let preset: PresetName = preset.parse()?;
            let sc = load(&scenario)?;
            let written = run_preset(&preset, &sc)?.write(&out)?;
            Ok(written.iter().map(|p| format!("{}\n", p.display())).collect())
        }
        Command::Compare { scenario } => {
            let sc = load(&scenario)?;
            let c = compare(&sc)?;
            Ok(serde_json::to_string_pretty(&c).expect("comparison serializes") + "\n")
        }
        Command::Security { script, out } => {
            let label = script.display().to_string();
            let text =
                std::fs::read_to_string(&script).map_err(|source| CliError::Read { path: label.clone(), source })?;
            let file = parse_script(&text).map_err(|source| CliError::Script { path: label, source })?;
            let results = evaluate(&file, env_seed(None)?)?;
            std::fs::create_dir_all(&out)
                .map_err(|source| CliError::Write { path: out.display().to_string(), source })?;
            let path = out.join(SECURITY_REPORT);
            let csv = report_csv(&results);
            std::fs::write(&path, &csv)
                .map_err(|source| CliError::Write { path: path.display().to_string(), source })?;
            let failed = results.iter().filter(|r| !r.passed).count();
            if failed > 0 {
                return Err(CliError::ChecksFailed {
                    failed,
                    total: results.len(),
                    report: path.display().to_string(),
                });
            }
            Ok(csv)
        }
        Command::Attack(a) => {
            if a.trials == 0 {
                return Err(CliError::ZeroTrials);
            }
            let seed = env_seed(a.seed)?;
            let model = CaseStudyModel::build(seed)?;
            let (kind, report) = if a.reverse {
                ("reverse", model.reverse(a.trials, seed)?)
            } else {
                ("normal", model.forward(a.trials, seed)?)
            };
            Ok(format!(
                "{ACCURACY_CSV_HEADER}\n{kind},{},{},{}\n",
                report.trials,
                report.successes,
                report.trials - report.successes
            ))
        }
    }
}

/// Parses `args`, runs, and reports. Returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
        }
    };
    match run(cli) {
        Ok(stdout) => {
            print!("{stdout}");
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(main_with(["dtsnsim"]), EXIT_USAGE);
        assert_eq!(main_with(["dtsnsim", "attack", "--trials", "3"]), EXIT_USAGE);
        assert_eq!(main_with(["dtsnsim", "attack", "--reverse", "--forward", "--trials", "3"]), EXIT_USAGE);
        assert_eq!(main_with(["dtsnsim", "--help"]), EXIT_OK);
    }

    #[test]
    fn exit_codes_by_error_kind() {
        let cost = CliError::Preset(PresetError::Cost(CostError::InvalidChannel));
        assert_eq!(cost.exit_code(), EXIT_VALIDATION);
        assert_eq!(CliError::Preset(PresetError::UnknownPreset("x".into())).exit_code(), EXIT_USAGE);
        assert_eq!(CliError::ChecksFailed { failed: 1, total: 2, report: "r".into() }.exit_code(), EXIT_RUNTIME);
    }
}

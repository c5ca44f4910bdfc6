//! Scenario files.
//!
//! A scenario is a JSON document with the fields of [`Scenario`]. Two
//! additions exist only in files:
//!
//! - `fl_rounds` may be `{"measured": {"task": {...}, "fedavg": {...}}}`,
//!   in which case `K` is measured by running FedAvg on the synthetic task.
//! - `entity_count` replicates the first entity (and its link) `n` times.

use std::path::Path;

use dtsn_core::cost_model::{ChannelConfig, CostError, EntityProfile, Scenario, ServerProfile};
use dtsn_core::fl_baseline::{measure_rounds, FedAvgConfig, FlError, SyntheticTask};
use serde::Deserialize;
use thiserror::Error;

pub const SEED_ENV: &str = "DTSNSIM_SEED";

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}:{line}:{column}: {message}")]
    Parse { path: String, line: usize, column: usize, message: String },
    #[error("{path}: {source}")]
    Validation { path: String, source: CostError },
    #[error("{path}: measuring FL rounds failed: {source}")]
    Measure { path: String, source: FlError },
    #[error("{path}: FedAvg did not converge within {rounds} rounds")]
    NotConverged { path: String, rounds: u32 },
    #[error("{var} must be an unsigned integer, got {value:?}")]
    SeedOverride { var: &'static str, value: String },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasuredRounds {
    #[serde(default)]
    pub task: SyntheticTask,
    #[serde(default)]
    pub fedavg: FedAvgConfig,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum RoundsSpec {
    Fixed(u32),
    Measured { measured: MeasuredRounds },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    name: String,
    #[serde(default)]
    seed: u64,
    entities: Vec<EntityProfile>,
    #[serde(default)]
    entity_count: Option<usize>,
    server: ServerProfile,
    channel: ChannelConfig,
    fl_rounds: RoundsSpec,
    kb_period: u32,
    prompt_db_size: f64,
    #[serde(default = "one")]
    bytes_per_unit: f64,
}

fn one() -> f64 {
    1.0
}

/// Parses and validates scenario text. `path` only labels errors.
pub fn parse_scenario(text: &str, path: &str) -> Result<Scenario, LoadError> {
    let file: ScenarioFile = serde_json::from_str(text).map_err(|e| LoadError::Parse {
        path: path.into(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let fl_rounds = match &file.fl_rounds {
        RoundsSpec::Fixed(k) => *k,
        RoundsSpec::Measured { measured } => {
            let run = measure_rounds(&measured.task, &measured.fedavg)
                .map_err(|source| LoadError::Measure { path: path.into(), source })?;
            if !run.converged {
                return Err(LoadError::NotConverged { path: path.into(), rounds: run.rounds });
            }
            run.rounds
        }
    };
    let mut sc = Scenario {
        name: file.name,
        seed: file.seed,
        entities: file.entities,
        server: file.server,
        channel: file.channel,
        fl_rounds,
        kb_period: file.kb_period,
        prompt_db_size: file.prompt_db_size,
        bytes_per_unit: file.bytes_per_unit,
    };
    let invalid = |source| LoadError::Validation { path: path.into(), source };
    if let Some(n) = file.entity_count {
        if sc.entities.is_empty() || sc.channel.entity_subchannels.is_empty() || sc.channel.snr.is_empty() {
            return Err(invalid(CostError::InvalidScenario("entity_count needs one template entity".into())));
        }
        if n == 0 {
            return Err(invalid(CostError::InvalidScenario("entity_count must be >= 1".into())));
        }
        sc = sc.with_entity_count(n);
    }
    sc.validate().map_err(invalid)?;
    Ok(sc)
}

pub fn load_scenario(path: &Path) -> Result<Scenario, LoadError> {
    let label = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|source| LoadError::Io { path: label.clone(), source })?;
    parse_scenario(&text, &label)
}

/// Seed from [`SEED_ENV`], if set.
pub fn seed_override() -> Result<Option<u64>, LoadError> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse().map(Some).map_err(|_| LoadError::SeedOverride { var: SEED_ENV, value: v }),
        Err(_) => Ok(None),
    }
}

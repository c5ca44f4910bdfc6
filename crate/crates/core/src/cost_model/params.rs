//! Entity, server, and channel parameters, plus the scenario that bundles them.
//!
//! Sizes are abstract: data-units for states and histories, parameter-units for
//! model weights. `bytes_per_unit` only affects report formatting.

use serde::{Deserialize, Serialize};

use super::{Constraint, CostError};

/// Resources and data sizes of one physical entity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityProfile {
    pub id: String,
    /// CPU cycle frequency `f_u` in cycles per second.
    pub cpu_freq: f64,
    /// Cycles per (data-unit x parameter-unit) of local training.
    pub train_cycles: f64,
    /// Historical data `|H|` used by FL training.
    pub history_size: f64,
    /// Static state `|S_s|`, the input of edge fine-tuning.
    pub static_state: f64,
    /// Full current state `|S|` synchronized by the FL paradigm.
    pub full_state: f64,
    /// Dynamic state `|S_d|` before semantic encoding.
    pub dynamic_state: f64,
    /// Semantic payload `|S~_d|` actually transmitted.
    pub semantic_state: f64,
    /// Full model parameters `|w|`.
    pub full_params: f64,
    /// Fine-tuned delta parameters `|w~|`.
    pub delta_params: f64,
}

impl EntityProfile {
    /// Checks positivity and finiteness only; the size orderings are checked by
    /// [`EntityProfile::validate_orderings`].
    pub fn validate_basic(&self) -> Result<(), CostError> {
        if !(self.cpu_freq.is_finite() && self.cpu_freq > 0.0) {
            return Err(CostError::InvalidProfile(format!(
                "entity {}: cpu_freq must be > 0, got {}",
                self.id, self.cpu_freq
            )));
        }
        let sizes = [
            ("train_cycles", self.train_cycles),
            ("history_size", self.history_size),
            ("static_state", self.static_state),
            ("full_state", self.full_state),
            ("dynamic_state", self.dynamic_state),
            ("semantic_state", self.semantic_state),
            ("full_params", self.full_params),
            ("delta_params", self.delta_params),
        ];
        for (name, v) in sizes {
            if !(v.is_finite() && v >= 0.0) {
                return Err(CostError::InvalidProfile(format!(
                    "entity {}: {name} must be finite and >= 0, got {v}",
                    self.id
                )));
            }
        }
        Ok(())
    }

    /// Size orderings every LLM-Twin entity must satisfy.
    pub fn validate_orderings(&self) -> Result<(), CostError> {
        let checks = [
            (Constraint::SemanticBelowDynamic, self.semantic_state < self.dynamic_state),
            (Constraint::DynamicBelowFull, self.dynamic_state < self.full_state),
            (Constraint::StaticBelowFull, self.static_state < self.full_state),
            (Constraint::DeltaBelowFull, self.delta_params < self.full_params),
        ];
        for (constraint, ok) in checks {
            if !ok {
                return Err(CostError::Constraint { entity: self.id.clone(), constraint });
            }
        }
        Ok(())
    }
}

/// The digital twin server.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServerProfile {
    /// CPU cycle frequency `f_g`.
    pub cpu_freq: f64,
    /// Cycles per parameter-unit of aggregation or merging.
    pub agg_cycles: f64,
    /// Virtual network rate `r_N`. When absent it resolves to
    /// [`DEFAULT_VIRTUAL_RATE_FACTOR`] times the fastest physical rate.
    #[serde(default)]
    pub virtual_rate: Option<f64>,
}

pub const DEFAULT_VIRTUAL_RATE_FACTOR: f64 = 100.0;

impl ServerProfile {
    pub fn validate(&self) -> Result<(), CostError> {
        if !(self.cpu_freq.is_finite() && self.cpu_freq > 0.0) {
            return Err(CostError::InvalidProfile(format!("server cpu_freq must be > 0, got {}", self.cpu_freq)));
        }
        if !(self.agg_cycles.is_finite() && self.agg_cycles > 0.0) {
            return Err(CostError::InvalidProfile(format!("server agg_cycles must be > 0, got {}", self.agg_cycles)));
        }
        if let Some(r) = self.virtual_rate {
            if !(r.is_finite() && r > 0.0) {
                return Err(CostError::DeadChannel(r));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LogBase {
    /// Shannon capacity in bits.
    #[default]
    Two,
    /// Capacity in nats.
    Natural,
}

impl LogBase {
    pub fn log1p_snr(self, snr: f64) -> f64 {
        match self {
            LogBase::Two => (1.0 + snr).log2(),
            LogBase::Natural => snr.ln_1p(),
        }
    }
}

/// Subchannel allocation over a shared band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelConfig {
    pub bandwidth_hz: f64,
    pub total_subchannels: u32,
    /// One entry per entity, index-aligned with `Scenario::entities`.
    pub entity_subchannels: Vec<u32>,
    #[serde(default)]
    pub server_subchannels: Vec<u32>,
    /// Linear SNR of each entity's uplink, index-aligned with the entities.
    pub snr: Vec<f64>,
    #[serde(default)]
    pub log_base: LogBase,
}

/// One complete experiment parameterization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    pub entities: Vec<EntityProfile>,
    pub server: ServerProfile,
    pub channel: ChannelConfig,
    /// FL rounds to convergence, `K`.
    pub fl_rounds: u32,
    /// Knowledge-base sync period in decision cycles, `lambda`.
    pub kb_period: u32,
    /// Prompt database size `|H~|` in data-units.
    pub prompt_db_size: f64,
    #[serde(default = "default_bytes_per_unit")]
    pub bytes_per_unit: f64,
}

fn default_bytes_per_unit() -> f64 {
    1.0
}

impl Scenario {
    /// Enforces every type invariant. Does not check the efficiency-theorem
    /// hypotheses; see [`super::theorem_violations`].
    pub fn validate(&self) -> Result<(), CostError> {
        if self.entities.is_empty() {
            return Err(CostError::InvalidScenario("entity list is empty".into()));
        }
        if self.fl_rounds == 0 {
            return Err(CostError::InvalidScenario("fl_rounds must be >= 1".into()));
        }
        if self.kb_period == 0 {
            return Err(CostError::InvalidScenario("kb_period must be >= 1".into()));
        }
        if !(self.prompt_db_size.is_finite() && self.prompt_db_size >= 0.0) {
            return Err(CostError::InvalidScenario(format!(
                "prompt_db_size must be finite and >= 0, got {}",
                self.prompt_db_size
            )));
        }
        let n = self.entities.len();
        if self.channel.entity_subchannels.len() != n || self.channel.snr.len() != n {
            return Err(CostError::InvalidScenario(format!(
                "channel lists must have one entry per entity ({n}); got {} subchannel and {} snr entries",
                self.channel.entity_subchannels.len(),
                self.channel.snr.len()
            )));
        }
        let mut seen = std::collections::BTreeSet::new();
        for e in &self.entities {
            if !seen.insert(e.id.as_str()) {
                return Err(CostError::InvalidScenario(format!("duplicate entity id {}", e.id)));
            }
            e.validate_basic()?;
            e.validate_orderings()?;
        }
        self.server.validate()?;
        if let super::AllocationCheck::Violation { requested, available, .. } =
            super::validate_allocation(&self.channel)
        {
            return Err(CostError::Allocation { requested, available });
        }
        // Every entity needs a live uplink.
        super::entity_rates(self)?;
        Ok(())
    }

    /// Same scenario with `K = 1` and `lambda = 1`.
    pub fn unit_periods(&self) -> Scenario {
        Scenario { fl_rounds: 1, kb_period: 1, ..self.clone() }
    }

    /// Replicates the first entity (and its link) until there are `n` entities.
    ///
    /// When the replicated allocation no longer fits, the band is widened so
    /// that each subchannel keeps its bandwidth and per-entity rates are unchanged.
    pub fn with_entity_count(&self, n: usize) -> Scenario {
        assert!(n >= 1, "entity count must be >= 1");
        let template = self.entities[0].clone();
        let c = self.channel.entity_subchannels[0];
        let snr = self.channel.snr[0];
        let entities: Vec<_> =
            (0..n).map(|i| EntityProfile { id: format!("{}-{i}", template.id), ..template.clone() }).collect();
        let server_total: u64 = self.channel.server_subchannels.iter().map(|&x| x as u64).sum();
        let needed = c as u64 * n as u64 + server_total;
        let mut channel = self.channel.clone();
        if needed > channel.total_subchannels as u64 {
            let widened = u32::try_from(needed).expect("subchannel count overflows u32");
            channel.bandwidth_hz *= widened as f64 / channel.total_subchannels as f64;
            channel.total_subchannels = widened;
        }
        channel.entity_subchannels = vec![c; n];
        channel.snr = vec![snr; n];
        Scenario { entities, channel, ..self.clone() }
    }
}

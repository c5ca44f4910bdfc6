//! Analytical time model for the FL-based DTN and the LLM-Twin paradigm.
//!
//! Every function here is pure. The per-entity building blocks mirror the
//! compute, channel, and communication terms; [`fl_total`] and [`lt_total`]
//! compose them into the time to construct one DTN.
//!
//! Both totals take the slowest entity: the FL round barrier waits for the
//! slowest local trainer, and each paradigm finishes when its last twin does.

mod params;
mod random;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use params::{ChannelConfig, EntityProfile, LogBase, Scenario, ServerProfile, DEFAULT_VIRTUAL_RATE_FACTOR};
pub use random::feasible_scenario;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CostError {
    #[error("invalid channel: total subchannel count C0 is 0")]
    InvalidChannel,
    #[error("invalid channel: snr must be finite and >= 0, got {0}")]
    InvalidSnr(f64),
    #[error("allocation of {requested} subchannels exceeds C0 = {available}")]
    Allocation { requested: u64, available: u64 },
    #[error("invalid profile: {0}")]
    InvalidProfile(String),
    #[error("dead channel: rate must be > 0, got {0}")]
    DeadChannel(f64),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("entity {entity}: violates {constraint}")]
    Constraint { entity: String, constraint: Constraint },
}

/// The size and rate inequalities under which LLM-Twin is guaranteed to be faster.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Constraint {
    SemanticBelowDynamic,
    DynamicBelowFull,
    StaticBelowFull,
    DeltaBelowFull,
    FinetuneWorkBelowTraining,
    DeltaBelowAggregate,
    SyncPayloadBelowFull,
    StaticBelowHistory,
    StateWithinHistory,
    VirtualLinkDominance,
}

impl Constraint {
    pub const ALL: [Constraint; 10] = [
        Constraint::SemanticBelowDynamic,
        Constraint::DynamicBelowFull,
        Constraint::StaticBelowFull,
        Constraint::DeltaBelowFull,
        Constraint::FinetuneWorkBelowTraining,
        Constraint::DeltaBelowAggregate,
        Constraint::SyncPayloadBelowFull,
        Constraint::StaticBelowHistory,
        Constraint::StateWithinHistory,
        Constraint::VirtualLinkDominance,
    ];

    pub fn inequality(self) -> &'static str {
        match self {
            Constraint::SemanticBelowDynamic => "|S~_d| < |S_d|",
            Constraint::DynamicBelowFull => "|S_d| < |S|",
            Constraint::StaticBelowFull => "|S_s| < |S|",
            Constraint::DeltaBelowFull => "|w~| < |w|",
            Constraint::FinetuneWorkBelowTraining => "|S_s|*|w~| < |S|*|w|",
            Constraint::DeltaBelowAggregate => "|w~| < sum_i |w_i|",
            Constraint::SyncPayloadBelowFull => "|w~| + |S~_d| < |w| + |S|",
            Constraint::StaticBelowHistory => "|S_s| < |H|",
            Constraint::StateWithinHistory => "|S| <= |H|",
            Constraint::VirtualLinkDominance => "|H~| / r_N <= |w| / r",
        }
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} ({})", self, self.inequality())
    }
}

/// Result of checking a subchannel allocation against `C0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AllocationCheck {
    Ok,
    Violation { requested: u64, available: u64, excess: u64 },
}

/// Per-phase times of one paradigm.
///
/// For FL, `inter_comm` equals `server_compute` (aggregation *is* the
/// inter-twin exchange) and is reported but not added into `total`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeBreakdown {
    pub entity_compute: f64,
    pub server_compute: f64,
    pub intra_comm: f64,
    pub inter_comm: f64,
    pub total: f64,
    /// Index of the entity that determines `total`.
    pub critical_entity: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    /// `lt_total - fl_total` evaluated with `K = 1` and `lambda = 1`.
    pub difference: f64,
    /// `lt_total - fl_total` at the configured `K` and `lambda`.
    pub configured_difference: f64,
    /// `fl_total / lt_total` at the configured `K` and `lambda`.
    pub ratio: f64,
    pub constraints_satisfied: bool,
    pub violations: Vec<(String, Constraint)>,
    pub fl: TimeBreakdown,
    pub llm_twin: TimeBreakdown,
}

pub fn channel_rate(subchannels: u32, cfg: &ChannelConfig, snr: f64) -> Result<f64, CostError> {
    if cfg.total_subchannels == 0 {
        return Err(CostError::InvalidChannel);
    }
    if subchannels > cfg.total_subchannels {
        return Err(CostError::Allocation { requested: subchannels as u64, available: cfg.total_subchannels as u64 });
    }
    if !(snr.is_finite() && snr >= 0.0) {
        return Err(CostError::InvalidSnr(snr));
    }
    let share = subchannels as f64 / cfg.total_subchannels as f64;
    Ok(share * cfg.bandwidth_hz * cfg.log_base.log1p_snr(snr))
}

pub fn validate_allocation(cfg: &ChannelConfig) -> AllocationCheck {
    let requested: u64 = cfg.entity_subchannels.iter().chain(&cfg.server_subchannels).map(|&c| c as u64).sum();
    let available = cfg.total_subchannels as u64;
    if requested <= available {
        AllocationCheck::Ok
    } else {
        AllocationCheck::Violation { requested, available, excess: requested - available }
    }
}

fn check_freq(f: f64, who: &str) -> Result<(), CostError> {
    if f.is_finite() && f > 0.0 {
        Ok(())
    } else {
        Err(CostError::InvalidProfile(format!("{who}: cpu_freq must be > 0, got {f}")))
    }
}

fn check_rate(r: f64) -> Result<(), CostError> {
    if r.is_finite() && r > 0.0 {
        Ok(())
    } else {
        Err(CostError::DeadChannel(r))
    }
}

/// Local full-parameter training time `xi * |H| * |w| / f_u`.
pub fn fl_entity_compute(e: &EntityProfile) -> Result<f64, CostError> {
    check_freq(e.cpu_freq, &e.id)?;
    Ok(e.train_cycles * e.history_size * e.full_params / e.cpu_freq)
}

/// Server aggregation time `alpha * sum |w_i| / f_g`.
pub fn fl_server_aggregate(s: &ServerProfile, param_sizes: &[f64]) -> Result<f64, CostError> {
    check_freq(s.cpu_freq, "server")?;
    let total: f64 = param_sizes.iter().sum();
    Ok(s.agg_cycles * total / s.cpu_freq)
}

/// Edge fine-tuning time `xi * |S_s| * |w~| / f_u`.
pub fn lt_entity_finetune(e: &EntityProfile) -> Result<f64, CostError> {
    check_freq(e.cpu_freq, &e.id)?;
    Ok(e.train_cycles * e.static_state * e.delta_params / e.cpu_freq)
}

/// Delta merge time `alpha * |w~| / f_g`. Only the requesting entity's
/// delta is loaded, so the entity count does not enter.
pub fn lt_server_merge(s: &ServerProfile, delta_size: f64) -> Result<f64, CostError> {
    check_freq(s.cpu_freq, "server")?;
    Ok(s.agg_cycles * delta_size / s.cpu_freq)
}

/// FL intra-twin time `(|w| + |S|) / r`.
pub fn fl_intra_time(e: &EntityProfile, rate: f64) -> Result<f64, CostError> {
    check_rate(rate)?;
    Ok((e.full_params + e.full_state) / rate)
}

/// FL inter-twin time, identical to the aggregation time.
pub fn fl_inter_time(s: &ServerProfile, param_sizes: &[f64]) -> Result<f64, CostError> {
    fl_server_aggregate(s, param_sizes)
}

/// LLM-Twin intra-twin time `(|w~| + |S~_d|) / r`.
pub fn lt_intra_time(e: &EntityProfile, rate: f64) -> Result<f64, CostError> {
    check_rate(rate)?;
    Ok((e.delta_params + e.semantic_state) / rate)
}

/// LLM-Twin inter-twin time `|H~| / r_N`.
pub fn lt_inter_time(prompt_db_size: f64, virtual_rate: f64) -> Result<f64, CostError> {
    check_rate(virtual_rate)?;
    Ok(prompt_db_size / virtual_rate)
}

/// Uplink rate of every entity, index-aligned with `sc.entities`.
pub fn entity_rates(sc: &Scenario) -> Result<Vec<f64>, CostError> {
    if sc.channel.entity_subchannels.len() != sc.entities.len() || sc.channel.snr.len() != sc.entities.len() {
        return Err(CostError::InvalidScenario("channel lists must have one entry per entity".into()));
    }
    sc.channel
        .entity_subchannels
        .iter()
        .zip(&sc.channel.snr)
        .map(|(&c, &snr)| {
            let r = channel_rate(c, &sc.channel, snr)?;
            check_rate(r)?;
            Ok(r)
        })
        .collect()
}

/// `r_N`, either configured or derived from the fastest physical link.
pub fn virtual_rate(sc: &Scenario) -> Result<f64, CostError> {
    let r = match sc.server.virtual_rate {
        Some(r) => r,
        None => {
            let fastest = entity_rates(sc)?.into_iter().fold(0.0, f64::max);
            DEFAULT_VIRTUAL_RATE_FACTOR * fastest
        }
    };
    check_rate(r)?;
    Ok(r)
}

fn ensure_nonempty(sc: &Scenario) -> Result<(), CostError> {
    if sc.entities.is_empty() {
        return Err(CostError::InvalidScenario("entity list is empty".into()));
    }
    if sc.fl_rounds == 0 || sc.kb_period == 0 {
        return Err(CostError::InvalidScenario("fl_rounds and kb_period must be >= 1".into()));
    }
    Ok(())
}

/// Index of the maximum, lowest index on ties.
fn argmax(values: impl IntoIterator<Item = f64>) -> (usize, f64) {
    values.into_iter().enumerate().fold((0, f64::NEG_INFINITY), |best, (i, v)| if v > best.1 { (i, v) } else { best })
}

/// Time to construct the FL-based DTN:
/// `K * (max_i T_u_i + T_g + (|w(t)| + |w(t+1)|) / r) + |H| / r`.
pub fn fl_total(sc: &Scenario) -> Result<TimeBreakdown, CostError> {
    ensure_nonempty(sc)?;
    for e in &sc.entities {
        e.validate_basic()?;
    }
    let rates = entity_rates(sc)?;
    let k = sc.fl_rounds as f64;
    let local: Vec<f64> = sc.entities.iter().map(fl_entity_compute).collect::<Result<_, _>>()?;
    let slowest = local.iter().copied().fold(0.0, f64::max);
    let sizes: Vec<f64> = sc.entities.iter().map(|e| e.full_params).collect();
    let aggregate = fl_server_aggregate(&sc.server, &sizes)?;

    // Weights go up and come back every round; the history is uploaded once.
    let comm = sc.entities.iter().zip(&rates).map(|(e, r)| (k * (e.full_params + e.full_params) + e.history_size) / r);
    let (critical_entity, intra_comm) = argmax(comm);

    let entity_compute = k * slowest;
    let server_compute = k * aggregate;
    Ok(TimeBreakdown {
        entity_compute,
        server_compute,
        intra_comm,
        inter_comm: server_compute,
        total: entity_compute + server_compute + intra_comm,
        critical_entity,
    })
}

fn lt_entity_breakdown(sc: &Scenario, e: &EntityProfile, rate: f64, r_n: f64) -> Result<TimeBreakdown, CostError> {
    let lambda = sc.kb_period as f64;
    let entity_compute = lt_entity_finetune(e)? / lambda;
    let server_compute = lt_server_merge(&sc.server, e.delta_params)? / lambda;
    let intra_comm = (e.delta_params / lambda + e.semantic_state) / rate;
    let inter_comm = lt_inter_time(sc.prompt_db_size, r_n)?;
    Ok(TimeBreakdown {
        entity_compute,
        server_compute,
        intra_comm,
        inter_comm,
        total: entity_compute + server_compute + intra_comm + inter_comm,
        critical_entity: 0,
    })
}

fn lt_total_unchecked(sc: &Scenario) -> Result<TimeBreakdown, CostError> {
    ensure_nonempty(sc)?;
    let rates = entity_rates(sc)?;
    let r_n = virtual_rate(sc)?;
    let mut best: Option<TimeBreakdown> = None;
    for (i, (e, &r)) in sc.entities.iter().zip(&rates).enumerate() {
        let b = TimeBreakdown { critical_entity: i, ..lt_entity_breakdown(sc, e, r, r_n)? };
        if best.is_none_or(|cur| b.total > cur.total) {
            best = Some(b);
        }
    }
    Ok(best.expect("non-empty entity list"))
}

/// Time per decision cycle of LLM-Twin:
/// `(T~_u + T~_g + |w~| / r) / lambda + |S~_d| / r + |H~| / r_N`.
///
/// Enforces the size orderings of every entity.
pub fn lt_total(sc: &Scenario) -> Result<TimeBreakdown, CostError> {
    for e in &sc.entities {
        e.validate_basic()?;
        e.validate_orderings()?;
    }
    lt_total_unchecked(sc)
}

/// Every hypothesis of the efficiency theorem that the scenario violates.
pub fn theorem_violations(sc: &Scenario) -> Result<Vec<(String, Constraint)>, CostError> {
    let rates = entity_rates(sc)?;
    let r_n = virtual_rate(sc)?;
    let sum_w: f64 = sc.entities.iter().map(|e| e.full_params).sum();
    let mut out = Vec::new();
    for (e, &r) in sc.entities.iter().zip(&rates) {
        let holds = |c: Constraint| match c {
            Constraint::SemanticBelowDynamic => e.semantic_state < e.dynamic_state,
            Constraint::DynamicBelowFull => e.dynamic_state < e.full_state,
            Constraint::StaticBelowFull => e.static_state < e.full_state,
            Constraint::DeltaBelowFull => e.delta_params < e.full_params,
            Constraint::FinetuneWorkBelowTraining => e.static_state * e.delta_params < e.full_state * e.full_params,
            Constraint::DeltaBelowAggregate => e.delta_params < sum_w,
            Constraint::SyncPayloadBelowFull => e.delta_params + e.semantic_state < e.full_params + e.full_state,
            Constraint::StaticBelowHistory => e.static_state < e.history_size,
            Constraint::StateWithinHistory => e.full_state <= e.history_size,
            Constraint::VirtualLinkDominance => sc.prompt_db_size / r_n <= e.full_params / r,
        };
        out.extend(Constraint::ALL.into_iter().filter(|&c| !holds(c)).map(|c| (e.id.clone(), c)));
    }
    Ok(out)
}

/// Compares both paradigms. The sign of `difference` is guaranteed negative
/// whenever `constraints_satisfied` holds.
pub fn compare(sc: &Scenario) -> Result<Comparison, CostError> {
    let unit = sc.unit_periods();
    let difference = lt_total_unchecked(&unit)?.total - fl_total(&unit)?.total;
    let fl = fl_total(sc)?;
    let llm_twin = lt_total_unchecked(sc)?;
    let violations = theorem_violations(sc)?;
    Ok(Comparison {
        difference,
        configured_difference: llm_twin.total - fl.total,
        ratio: fl.total / llm_twin.total,
        constraints_satisfied: violations.is_empty(),
        violations,
        fl,
        llm_twin,
    })
}

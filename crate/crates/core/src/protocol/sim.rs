//! Discrete-event runs of both paradigms over logical ticks.
//!
//! Actors are an entity id, `dt:<id>` for work done by that entity's twin
//! on the server, or `server` for work shared by all entities. An entity's
//! elapsed time is the sum over its own, its twin's, and shared events.

use std::fmt;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    build_twin, decide_with_context, intra_sync, parse_percent, push_prompt, query_prompts, Decision, DecisionRequest,
    DigitalTwin, EntityId, PhysicalEntity, PromptDatabase, ProtocolError, StateField, StateRecord,
};
use crate::cost_model::{
    entity_rates, fl_entity_compute, fl_server_aggregate, lt_entity_finetune, lt_server_merge, virtual_rate, Scenario,
};
use crate::mini_giant::{ToyModel, DEFAULT_BUDGET_FRACTION};

pub const EVENT_CSV_HEADER: &str = "tick,actor,event,units,seconds,paradigm";
pub const DEFAULT_SEMANTIC_RATIO: f64 = 0.05;
const SERVER: &str = "server";
const BASE_KEYS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Paradigm {
    Fl,
    LlmTwin,
}

impl fmt::Display for Paradigm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Paradigm::Fl => "fl",
            Paradigm::LlmTwin => "llm-twin",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub tick: u64,
    pub actor: String,
    pub event: &'static str,
    pub units: f64,
    pub seconds: f64,
    pub paradigm: Paradigm,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EventLog {
    pub events: Vec<Event>,
}

pub fn twin_actor(id: &str) -> String {
    format!("dt:{id}")
}

impl EventLog {
    fn push(&mut self, tick: u64, actor: &str, event: &'static str, units: f64, seconds: f64, paradigm: Paradigm) {
        self.events.push(Event { tick, actor: actor.to_owned(), event, units, seconds, paradigm });
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(EVENT_CSV_HEADER);
        out.push('\n');
        for e in &self.events {
            writeln!(out, "{},{},{},{},{},{}", e.tick, e.actor, e.event, e.units, e.seconds, e.paradigm).unwrap();
        }
        out
    }

    /// Seconds attributed to `entity`: its own, its twin's, and shared events.
    pub fn entity_seconds(&self, entity: &str) -> f64 {
        let twin = twin_actor(entity);
        self.events
            .iter()
            .filter(|e| e.actor == entity || e.actor == twin || e.actor == SERVER)
            .map(|e| e.seconds)
            .sum()
    }

    /// Elapsed time of the slowest entity.
    pub fn max_entity_seconds<'a>(&self, entities: impl IntoIterator<Item = &'a str>) -> f64 {
        entities.into_iter().map(|id| self.entity_seconds(id)).fold(0.0, f64::max)
    }

    pub fn total_units(&self, event: &str) -> f64 {
        self.events.iter().filter(|e| e.event == event).map(|e| e.units).sum()
    }
}

/// FL construction of the network: one history upload, then `K` rounds of
/// local training, barrier, weight exchange, and aggregation.
pub fn simulate_fl(sc: &Scenario) -> Result<EventLog, ProtocolError> {
    sc.validate()?;
    let rates = entity_rates(sc)?;
    let local: Vec<f64> = sc.entities.iter().map(fl_entity_compute).collect::<Result<_, _>>()?;
    let slowest = local.iter().copied().fold(0.0, f64::max);
    let sizes: Vec<f64> = sc.entities.iter().map(|e| e.full_params).collect();
    let aggregate = fl_server_aggregate(&sc.server, &sizes)?;

    let mut log = EventLog::default();
    let p = Paradigm::Fl;
    for (e, r) in sc.entities.iter().zip(&rates) {
        log.push(0, &e.id, "history_upload", e.history_size, e.history_size / r, p);
    }
    for tick in 1..=sc.fl_rounds as u64 {
        for ((e, r), t) in sc.entities.iter().zip(&rates).zip(&local) {
            log.push(tick, &e.id, "local_train", e.history_size, *t, p);
            log.push(tick, &e.id, "barrier_wait", 0.0, slowest - t, p);
            log.push(tick, &e.id, "weight_upload", e.full_params, e.full_params / r, p);
        }
        log.push(tick, SERVER, "aggregate", sizes.iter().sum(), aggregate, p);
        for (e, r) in sc.entities.iter().zip(&rates) {
            log.push(tick, &e.id, "weight_download", e.full_params, e.full_params / r, p);
        }
    }
    Ok(log)
}

/// How the prompt traffic of an LLM-Twin run is priced.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DbPricing {
    /// Profile payload sizes and the scenario's declared `|H~|`.
    #[default]
    Declared,
    /// Actual record sizes and the database size at query time.
    Live,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LtConfig {
    pub ticks: u64,
    /// Semantic compression ratio; `None` uses `|S~_d| / |S_d|` per entity.
    pub semantic_ratio: Option<f64>,
    pub budget_fraction: f64,
    pub pricing: DbPricing,
    pub property: String,
}

impl LtConfig {
    pub fn new(ticks: u64) -> Self {
        LtConfig {
            ticks,
            semantic_ratio: None,
            budget_fraction: DEFAULT_BUDGET_FRACTION,
            pricing: DbPricing::Declared,
            property: "brightness".into(),
        }
    }

    /// One knowledge-base period of the scenario.
    pub fn cycle(sc: &Scenario) -> Self {
        Self::new(sc.kb_period as u64)
    }
}

/// Entities and the shared base model of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct World {
    pub base: ToyModel,
    pub entities: Vec<PhysicalEntity>,
}

impl World {
    /// Smart-home world: every entity owns a light with a private brightness
    /// cap and a live brightness reading.
    pub fn synthetic(sc: &Scenario) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(sc.seed);
        let base = ToyModel::synthetic("base", BASE_KEYS.max(100 * sc.entities.len()), 1, rng.random());
        let entities = sc
            .entities
            .iter()
            .map(|p| {
                let cap = rng.random_range(60..=100u32);
                let reading = rng.random_range(20..=100u32);
                let static_units = p.static_state / 2.0;
                PhysicalEntity {
                    id: p.id.clone(),
                    profile: p.clone(),
                    static_state: vec![StateRecord {
                        fields: vec![
                            StateField {
                                name: "property".into(),
                                value: "brightness.max".into(),
                                units: static_units,
                                sensitive: false,
                            },
                            StateField {
                                name: "value".into(),
                                value: format!("{cap}%"),
                                units: static_units,
                                sensitive: true,
                            },
                        ],
                    }],
                    dynamic_state: vec![StateRecord::reading(
                        "smart-home",
                        "light",
                        "brightness",
                        &format!("{reading}%"),
                        p.dynamic_state,
                    )],
                    local_pairs: vec![],
                }
            })
            .collect();
        World { base, entities }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LtRun {
    pub log: EventLog,
    pub db: PromptDatabase,
    pub twins: Vec<DigitalTwin>,
    pub decisions: Vec<(u64, EntityId, Decision)>,
}

impl LtRun {
    /// Mean elapsed time per tick of the slowest entity.
    pub fn per_tick_seconds(&self, ticks: u64) -> f64 {
        let ids = self.twins.iter().map(|t| t.owner.as_str());
        self.log.max_entity_seconds(ids) / ticks as f64
    }
}

/// LLM-Twin operation over `cfg.ticks` decision cycles.
///
/// Twins are built at tick 0 outside the timed cycle. Each tick runs due
/// knowledge-base syncs, then every entity pushes its semantic prompt, then
/// every twin queries the database and decides.
pub fn simulate_lt(sc: &Scenario, world: &World, cfg: &LtConfig) -> Result<LtRun, ProtocolError> {
    sc.validate()?;
    if world.entities.len() != sc.entities.len() {
        return Err(ProtocolError::UnknownEntity(format!(
            "world has {} entities, scenario has {}",
            world.entities.len(),
            sc.entities.len()
        )));
    }
    if let Some(e) = world.entities.iter().zip(&sc.entities).find(|(w, p)| w.id != p.id) {
        return Err(ProtocolError::UnknownEntity(e.0.id.clone()));
    }
    let rates = entity_rates(sc)?;
    let r_n = virtual_rate(sc)?;
    let lambda = sc.kb_period as u64;
    let p = Paradigm::LlmTwin;
    let mut rng = ChaCha8Rng::seed_from_u64(sc.seed ^ 0x5eed);

    let mut entities = world.entities.clone();
    let mut twins: Vec<DigitalTwin> =
        entities.iter().map(|e| build_twin(e, &world.base, cfg.budget_fraction)).collect::<Result<_, _>>()?;
    let mut db = PromptDatabase::new();
    let mut log = EventLog::default();
    let mut decisions = Vec::new();

    for tick in 1..=cfg.ticks {
        for (((e, dt), r), prof) in entities.iter().zip(twins.iter_mut()).zip(&rates).zip(&sc.entities) {
            if intra_sync(e, dt, &world.base, tick, lambda, cfg.budget_fraction)?.is_some() {
                log.push(tick, &e.id, "finetune", prof.static_state, lt_entity_finetune(prof)?, p);
                log.push(tick, &e.id, "delta_upload", prof.delta_params, prof.delta_params / r, p);
                let merge = lt_server_merge(&sc.server, prof.delta_params)?;
                log.push(tick, &twin_actor(&e.id), "merge", prof.delta_params, merge, p);
            }
        }
        for ((e, r), prof) in entities.iter_mut().zip(&rates).zip(&sc.entities) {
            drift(e, &mut rng);
            let ratio = cfg.semantic_ratio.unwrap_or(prof.semantic_state / prof.dynamic_state);
            let size = push_prompt(e, &mut db, tick, ratio)?.size as f64;
            let units = match cfg.pricing {
                DbPricing::Declared => prof.semantic_state,
                DbPricing::Live => size,
            };
            log.push(tick, &e.id, "prompt_push", units, units / r, p);
        }
        for (e, dt) in entities.iter().zip(&twins) {
            let units = match cfg.pricing {
                DbPricing::Declared => sc.prompt_db_size,
                DbPricing::Live => db.total_size() as f64,
            };
            let actor = twin_actor(&e.id);
            log.push(tick, &actor, "prompt_query", units, units / r_n, p);
            let context = query_prompts(&db, &e.id, &cfg.property);
            let current = e.dynamic_state.iter().find_map(|r| r.get("value").and_then(parse_percent)).unwrap_or(0.0);
            let request = DecisionRequest { property: cfg.property.clone(), current };
            let decision = decide_with_context(dt, &request, &context);
            log.push(tick, &actor, "decide", 0.0, 0.0, p);
            decisions.push((tick, e.id.clone(), decision));
        }
    }
    Ok(LtRun { log, db, twins, decisions })
}

/// Random walk of each brightness reading, clamped to 0..=100.
fn drift(e: &mut PhysicalEntity, rng: &mut ChaCha8Rng) {
    for r in &mut e.dynamic_state {
        if let Some(f) = r.fields.iter_mut().find(|f| f.name == "value") {
            if let Some(v) = parse_percent(&f.value) {
                let next = (v + rng.random_range(-5.0..=5.0f64)).round().clamp(0.0, 100.0);
                f.value = format!("{next}%");
            }
        }
    }
}

//! Twin lifecycle: construction, knowledge-base sync, semantic prompts, and
//! inter-twin decisions.
//!
//! Logical ticks stand in for decision cycles. Timing is never measured on
//! the host; every event is priced by [`crate::cost_model`].

mod sim;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cost_model::{CostError, EntityProfile};
use crate::mini_giant::{
    self, encode_secure_pairs, fit_delta, generate, merge, Delta, Generation, MiniGiantError, ToyModel, TrainingPair,
};

pub use sim::{
    simulate_fl, simulate_lt, twin_actor, DbPricing, Event, EventLog, LtConfig, LtRun, Paradigm, World,
    DEFAULT_SEMANTIC_RATIO, EVENT_CSV_HEADER,
};

pub type EntityId = String;

/// Field names that may leave the entity inside a semantic payload.
pub const SHAREABLE_FIELDS: [&str; 4] = ["system", "device", "property", "value"];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProtocolError {
    #[error("nothing to encode: the dynamic state is empty")]
    NothingToEncode,
    #[error("semantic ratio must be in (0, 1), got {0}")]
    InvalidRatio(f64),
    #[error("payload of {payload} units does not compress a state of {state} units")]
    NoCompression { payload: u64, state: f64 },
    #[error("unknown entity {0}")]
    UnknownEntity(String),
    #[error(transparent)]
    Cost(#[from] CostError),
    #[error(transparent)]
    Model(#[from] MiniGiantError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateField {
    pub name: String,
    pub value: String,
    /// Data-units this field occupies.
    pub units: f64,
    #[serde(default)]
    pub sensitive: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct StateRecord {
    pub fields: Vec<StateField>,
}

impl StateRecord {
    /// Record with `system/device/property/value` fields sharing `units`.
    pub fn reading(system: &str, device: &str, property: &str, value: &str, units: f64) -> Self {
        let field = |name: &str, value: &str| StateField {
            name: name.into(),
            value: value.into(),
            units: units / 4.0,
            sensitive: false,
        };
        StateRecord {
            fields: vec![
                field("system", system),
                field("device", device),
                field("property", property),
                field("value", value),
            ],
        }
    }

    pub fn get(&self, name: &str) -> Option<&str> {
        self.fields.iter().find(|f| f.name == name).map(|f| f.value.as_str())
    }

    pub fn units(&self) -> f64 {
        self.fields.iter().map(|f| f.units).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalEntity {
    pub id: EntityId,
    pub profile: EntityProfile,
    /// Static preferences as `property`/`value` records, e.g.
    /// `brightness.max = 100%`.
    pub static_state: Vec<StateRecord>,
    pub dynamic_state: Vec<StateRecord>,
    pub local_pairs: Vec<TrainingPair>,
}

impl PhysicalEntity {
    /// Static facts in forward orientation followed by the local pairs.
    pub fn training_pairs(&self) -> Vec<TrainingPair> {
        self.static_state
            .iter()
            .filter_map(|r| Some(TrainingPair::fact(&self.id, r.get("property")?, r.get("value")?)))
            .chain(self.local_pairs.iter().cloned())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DigitalTwin {
    pub owner: EntityId,
    pub merged_model: ToyModel,
    pub delta: Delta,
    pub kb_version: u64,
    pub last_sync_tick: u64,
}

/// Semantically encoded dynamic state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptRecord {
    pub entity: EntityId,
    pub tick: u64,
    pub payload: Vec<String>,
    pub size: u64,
}

impl PromptRecord {
    /// Value of a `name=value` token in the payload.
    pub fn field(&self, name: &str) -> Option<&str> {
        self.payload.iter().find_map(|t| t.strip_prefix(name)?.strip_prefix('='))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SemanticPayload {
    pub tokens: Vec<String>,
    pub size: u64,
}

/// Append-only prompt store.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PromptDatabase {
    records: Vec<PromptRecord>,
    total_size: u64,
}

impl PromptDatabase {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn append(&mut self, record: PromptRecord) -> &PromptRecord {
        self.total_size += record.size;
        self.records.push(record);
        self.records.last().unwrap()
    }

    pub fn records(&self) -> &[PromptRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// `|H~|` in data-units.
    pub fn total_size(&self) -> u64 {
        self.total_size
    }
}

/// Keeps only non-sensitive shareable fields, as `name=value` tokens.
///
/// The payload size is `ceil(ratio * |S_d|)` and must be strictly below
/// `|S_d|`.
pub fn encode_semantic(state: &[StateRecord], ratio: f64) -> Result<SemanticPayload, ProtocolError> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(ProtocolError::InvalidRatio(ratio));
    }
    let total: f64 = state.iter().map(StateRecord::units).sum();
    if state.is_empty() || total <= 0.0 {
        return Err(ProtocolError::NothingToEncode);
    }
    let size = (ratio * total).ceil() as u64;
    if size as f64 >= total {
        return Err(ProtocolError::NoCompression { payload: size, state: total });
    }
    let tokens = state
        .iter()
        .flat_map(|r| &r.fields)
        .filter(|f| !f.sensitive && SHAREABLE_FIELDS.contains(&f.name.as_str()))
        .map(|f| format!("{}={}", f.name, mini_giant::canonical(&f.value).replace(' ', "_")))
        .collect();
    Ok(SemanticPayload { tokens, size })
}

/// Fits the entity's delta from its secure-encoded pairs and merges it into
/// `base`. The twin starts at `kb_version = 1`.
pub fn build_twin(e: &PhysicalEntity, base: &ToyModel, budget_fraction: f64) -> Result<DigitalTwin, ProtocolError> {
    let delta = fit_entity(e, base, budget_fraction)?;
    Ok(DigitalTwin { owner: e.id.clone(), merged_model: merge(base, &delta), delta, kb_version: 1, last_sync_tick: 0 })
}

fn fit_entity(e: &PhysicalEntity, base: &ToyModel, budget_fraction: f64) -> Result<Delta, ProtocolError> {
    let pairs = encode_secure_pairs(&e.training_pairs());
    if pairs.is_empty() {
        return Ok(Delta::empty(&e.id));
    }
    Ok(fit_delta(base, &pairs, budget_fraction, &e.id)?)
}

/// Sync due at `tick` for period `lambda`.
pub fn sync_due(dt: &DigitalTwin, tick: u64, lambda: u64) -> bool {
    tick.saturating_sub(dt.last_sync_tick) >= lambda
}

/// Re-fits the knowledge base when a sync is due. Returns the uploaded
/// delta, or `None` when the sync is skipped.
pub fn intra_sync(
    e: &PhysicalEntity,
    dt: &mut DigitalTwin,
    base: &ToyModel,
    tick: u64,
    lambda: u64,
    budget_fraction: f64,
) -> Result<Option<Delta>, ProtocolError> {
    if !sync_due(dt, tick, lambda) {
        return Ok(None);
    }
    let delta = fit_entity(e, base, budget_fraction)?;
    dt.merged_model = merge(base, &delta);
    dt.delta = delta.clone();
    dt.kb_version += 1;
    dt.last_sync_tick = tick;
    Ok(Some(delta))
}

/// Encodes the entity's dynamic state and appends it to the database.
pub fn push_prompt<'a>(
    e: &PhysicalEntity,
    db: &'a mut PromptDatabase,
    tick: u64,
    ratio: f64,
) -> Result<&'a PromptRecord, ProtocolError> {
    let payload = encode_semantic(&e.dynamic_state, ratio)?;
    Ok(db.append(PromptRecord { entity: e.id.clone(), tick, payload: payload.tokens, size: payload.size }))
}

/// Newest record per other entity whose payload carries `property`, sorted
/// by entity id. The requester's own records are excluded.
pub fn query_prompts(db: &PromptDatabase, requester: &str, property: &str) -> Vec<PromptRecord> {
    let mut newest: BTreeMap<&str, &PromptRecord> = BTreeMap::new();
    for r in db.records() {
        if r.entity == requester || r.field("property") != Some(property) {
            continue;
        }
        match newest.get(r.entity.as_str()) {
            Some(cur) if cur.tick > r.tick => {}
            _ => {
                newest.insert(&r.entity, r);
            }
        }
    }
    newest.into_values().cloned().collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRequest {
    pub property: String,
    /// Current own value, e.g. `60` for 60%.
    pub current: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Decision {
    Set { property: String, value: f64 },
    Keep { property: String, value: f64 },
    NoKnowledge,
}

impl Decision {
    pub fn text(&self) -> String {
        match self {
            Decision::Set { property, value } => format!("set {property} to {}", format_percent(*value)),
            Decision::Keep { property, value } => format!("keep {property} at {}", format_percent(*value)),
            Decision::NoKnowledge => Generation::NO_KNOWLEDGE_MARKER.to_owned(),
        }
    }
}

/// Parses `70%` or `70` into `70.0`.
pub fn parse_percent(text: &str) -> Option<f64> {
    text.trim().trim_end_matches('%').parse().ok().filter(|v: &f64| v.is_finite())
}

/// Formats with at most two decimals and a `%` suffix.
pub fn format_percent(v: f64) -> String {
    let s = format!("{v:.2}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    format!("{s}%")
}

/// Regional mean of `property` over a context, ignoring unparseable values.
pub fn context_mean(context: &[PromptRecord]) -> Option<f64> {
    let values: Vec<f64> = context.iter().filter_map(|r| r.field("value").and_then(parse_percent)).collect();
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

/// Mean-compare-then-clamp rule over the shared context.
///
/// The owner's cap comes from its own knowledge base under
/// `<owner>.<property>.max`. If the regional mean exceeds the current value
/// the setting rises to `min(mean, cap)`; otherwise it is kept.
pub fn inter_twin_decide(dt: &DigitalTwin, request: &DecisionRequest, db: &PromptDatabase) -> Decision {
    let context = query_prompts(db, &dt.owner, &request.property);
    decide_with_context(dt, request, &context)
}

pub fn decide_with_context(dt: &DigitalTwin, request: &DecisionRequest, context: &[PromptRecord]) -> Decision {
    let cap_key = format!("{}.{}.max", dt.owner, request.property);
    let Some(cap) = generate(&dt.merged_model, &cap_key, &[]).completion().and_then(parse_percent) else {
        return Decision::NoKnowledge;
    };
    let property = request.property.clone();
    match context_mean(context) {
        Some(mean) if mean > request.current => Decision::Set { property, value: mean.min(cap) },
        _ => Decision::Keep { property, value: request.current },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn profile(id: &str) -> EntityProfile {
        EntityProfile {
            id: id.into(),
            cpu_freq: 1e9,
            train_cycles: 1.0,
            history_size: 1e4,
            static_state: 10.0,
            full_state: 200.0,
            dynamic_state: 100.0,
            semantic_state: 5.0,
            full_params: 1e6,
            delta_params: 100.0,
        }
    }

    fn home(id: &str, brightness: &str, cap: &str) -> PhysicalEntity {
        PhysicalEntity {
            id: id.into(),
            profile: profile(id),
            static_state: vec![StateRecord {
                fields: vec![
                    StateField {
                        name: "property".into(),
                        value: "brightness.max".into(),
                        units: 5.0,
                        sensitive: false,
                    },
                    StateField { name: "value".into(), value: cap.into(), units: 5.0, sensitive: true },
                ],
            }],
            dynamic_state: vec![StateRecord::reading("smart-home", "light", "brightness", brightness, 100.0)],
            local_pairs: vec![],
        }
    }

    fn base() -> ToyModel {
        ToyModel::synthetic("base", 500, 1, 3)
    }

    #[test]
    fn encode_ceil_size() {
        let state = vec![StateRecord::reading("s", "d", "p", "v", 100.0)];
        let p = encode_semantic(&state, 0.05).unwrap();
        assert_eq!(p.size, 5);
        assert_eq!(p.tokens, ["system=s", "device=d", "property=p", "value=v"]);
        assert_eq!(encode_semantic(&state, 0.05).unwrap(), p);
        assert_eq!(encode_semantic(&state, 0.051).unwrap().size, 6);
    }

    #[test]
    fn encode_errors() {
        assert_eq!(encode_semantic(&[], 0.1), Err(ProtocolError::NothingToEncode));
        let state = vec![StateRecord::reading("s", "d", "p", "v", 1.0)];
        assert_eq!(encode_semantic(&state, 1.0), Err(ProtocolError::InvalidRatio(1.0)));
        assert_eq!(encode_semantic(&state, 0.5), Err(ProtocolError::NoCompression { payload: 1, state: 1.0 }));
    }

    #[test]
    fn encode_drops_sensitive_and_private_fields() {
        let mut r = StateRecord::reading("s", "d", "brightness", "60%", 100.0);
        r.fields[3].sensitive = true;
        r.fields.push(StateField { name: "owner".into(), value: "alice".into(), units: 1.0, sensitive: false });
        let p = encode_semantic(&[r], 0.05).unwrap();
        assert!(p.tokens.iter().all(|t| !t.contains("60%") && !t.contains("alice")));
    }

    #[test]
    fn twin_with_no_pairs_is_base() {
        let mut e = home("h1", "60%", "100%");
        e.static_state.clear();
        let b = base();
        let dt = build_twin(&e, &b, 0.01).unwrap();
        assert_eq!(dt.merged_model, b);
        assert_eq!(dt.kb_version, 1);
    }

    #[test]
    fn twin_answers_own_static_query() {
        let dt = build_twin(&home("h1", "60%", "100%"), &base(), 0.01).unwrap();
        assert_eq!(generate(&dt.merged_model, "h1.brightness.max", &[]), Generation::Completion("100%".into()));
        let other = build_twin(&home("h2", "60%", "65%"), &base(), 0.01).unwrap();
        assert_eq!(generate(&other.merged_model, "h1.brightness.max", &[]), Generation::NoKnowledge);
    }

    #[test]
    fn sync_counts() {
        let e = home("h1", "60%", "100%");
        let b = base();
        for (lambda, expected) in [(1, 10), (5, 2), (3, 3)] {
            let mut dt = build_twin(&e, &b, 0.01).unwrap();
            let synced = (1..=10).filter(|&t| intra_sync(&e, &mut dt, &b, t, lambda, 0.01).unwrap().is_some()).count();
            assert_eq!(synced, expected, "lambda {lambda}");
            assert_eq!(dt.kb_version, 1 + expected as u64);
        }
    }

    #[test]
    fn prompt_database_growth() {
        let mut db = PromptDatabase::new();
        let homes: Vec<_> = (0..3).map(|i| home(&format!("h{i}"), "60%", "100%")).collect();
        for t in 0..4 {
            for h in &homes {
                push_prompt(h, &mut db, t, 0.05).unwrap();
            }
        }
        assert_eq!(db.len(), 12);
        assert_eq!(db.total_size(), 3 * 5 * 4);
    }

    #[test]
    fn query_newest_per_other_entity() {
        let mut db = PromptDatabase::new();
        assert!(query_prompts(&db, "h0", "brightness").is_empty());
        for (i, v) in ["50%", "60%", "70%"].iter().enumerate() {
            push_prompt(&home(&format!("h{i}"), v, "100%"), &mut db, 1, 0.05).unwrap();
        }
        push_prompt(&home("h1", "90%", "100%"), &mut db, 2, 0.05).unwrap();
        let ctx = query_prompts(&db, "x", "brightness");
        assert_eq!(ctx.len(), 3);
        assert_eq!(ctx[1].field("value"), Some("90%"));
        assert_eq!(query_prompts(&db, "h0", "brightness").len(), 2);
        assert!(query_prompts(&db, "x", "temperature").is_empty());
    }

    fn region(values: &[&str]) -> PromptDatabase {
        let mut db = PromptDatabase::new();
        for (i, v) in values.iter().enumerate() {
            push_prompt(&home(&format!("n{i}"), v, "100%"), &mut db, 1, 0.05).unwrap();
        }
        db
    }

    #[test]
    fn case_study_raise_to_mean() {
        let dt = build_twin(&home("me", "60%", "100%"), &base(), 0.01).unwrap();
        let req = DecisionRequest { property: "brightness".into(), current: 60.0 };
        let d = inter_twin_decide(&dt, &req, &region(&["60%", "70%", "80%"]));
        assert_eq!(d.text(), "set brightness to 70%");
    }

    #[test]
    fn case_study_clamped() {
        let dt = build_twin(&home("me", "60%", "65%"), &base(), 0.01).unwrap();
        let req = DecisionRequest { property: "brightness".into(), current: 60.0 };
        let d = inter_twin_decide(&dt, &req, &region(&["70%"]));
        assert_eq!(d, Decision::Set { property: "brightness".into(), value: 65.0 });
    }

    #[test]
    fn decision_without_context_or_knowledge() {
        let dt = build_twin(&home("me", "60%", "100%"), &base(), 0.01).unwrap();
        let req = DecisionRequest { property: "brightness".into(), current: 60.0 };
        assert_eq!(inter_twin_decide(&dt, &req, &PromptDatabase::new()).text(), "keep brightness at 60%");
        let lower = inter_twin_decide(&dt, &req, &region(&["40%"]));
        assert_eq!(lower, Decision::Keep { property: "brightness".into(), value: 60.0 });
        let unknown = DecisionRequest { property: "volume".into(), current: 1.0 };
        assert_eq!(inter_twin_decide(&dt, &unknown, &region(&["40%"])), Decision::NoKnowledge);
    }

    #[test]
    fn percent_formatting() {
        assert_eq!(format_percent(70.0), "70%");
        assert_eq!(format_percent(66.666_666), "66.67%");
        assert_eq!(format_percent(12.5), "12.5%");
        assert_eq!(parse_percent(" 80% "), Some(80.0));
        assert_eq!(parse_percent("bright"), None);
    }
}

//! Table-driven stand-in for the giant model and its fine-tuned deltas.
//!
//! A [`ToyModel`] maps canonical prompt keys to distributions over
//! completions. Fine-tuning on prompt/completion pairs is solved exactly:
//! the count ratio maximizes the conditional log-likelihood of the pairs, so
//! [`fit_delta`] returns the optimal sparse overlay for the touched keys.
//! Completions are whole strings; token-level factorization is not modeled.
//!
//! The public surface is forward only. Neither [`ToyModel`] nor [`Delta`]
//! offers lookup by completion or reconstruction of training pairs.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::protocol::PromptRecord;

/// Fraction of base parameters a delta may touch by default ("1% or less").
pub const DEFAULT_BUDGET_FRACTION: f64 = 0.01;
/// Stricter "one in ten thousand" budget.
pub const STRICT_BUDGET_FRACTION: f64 = 1e-4;

const NORMALIZATION_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MiniGiantError {
    #[error("no training pairs")]
    EmptyPairs,
    #[error("training pair {0} has an empty prompt or completion")]
    EmptyPair(usize),
    #[error("budget fraction must be in (0, 1], got {0}")]
    InvalidBudget(f64),
    #[error("delta needs {required} entries but the budget allows {allowed}")]
    Budget { required: usize, allowed: usize },
    #[error("distribution for key {key:?} sums to {sum}")]
    Denormalized { key: String, sum: f64 },
    #[error("weight file line {line}: {reason}")]
    WeightFile { line: usize, reason: String },
}

/// Lowercases and splits on whitespace.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_lowercase).collect()
}

/// Canonical single-space-joined token string.
pub fn canonical(text: &str) -> String {
    tokenize(text).join(" ")
}

/// A canonical prompt key.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PromptKey(String);

impl PromptKey {
    pub fn new(text: &str) -> Self {
        PromptKey(canonical(text))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.0.split(' ').filter(|t| !t.is_empty())
    }
}

/// Normalized distribution over canonical completions.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Distribution(BTreeMap<String, f64>);

impl Distribution {
    pub fn point(completion: &str) -> Self {
        Distribution(BTreeMap::from([(canonical(completion), 1.0)]))
    }

    pub fn from_weights(weights: impl IntoIterator<Item = (String, f64)>) -> Self {
        let mut map = BTreeMap::new();
        for (c, w) in weights {
            *map.entry(canonical(&c)).or_insert(0.0) += w;
        }
        let sum: f64 = map.values().sum();
        map.values_mut().for_each(|p| *p /= sum);
        Distribution(map)
    }

    pub fn probability(&self, completion: &str) -> f64 {
        self.0.get(&canonical(completion)).copied().unwrap_or(0.0)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.0.iter().map(|(c, p)| (c.as_str(), *p))
    }

    /// Most probable completion; ties go to the lexicographically smallest.
    pub fn argmax(&self) -> Option<&str> {
        let mut best: Option<(&str, f64)> = None;
        for (c, &p) in &self.0 {
            if best.is_none_or(|(_, bp)| p > bp) {
                best = Some((c, p));
            }
        }
        best.map(|(c, _)| c)
    }

    fn check(&self, key: &PromptKey) -> Result<(), MiniGiantError> {
        let sum: f64 = self.0.values().sum();
        let finite = self.0.values().all(|p| p.is_finite() && *p >= 0.0);
        if self.0.is_empty() || !finite || (sum - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(MiniGiantError::Denormalized { key: key.0.clone(), sum });
        }
        Ok(())
    }
}

/// Output of [`generate`]. Unknown keys yield `NoKnowledge` rather than noise.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Generation {
    Completion(String),
    NoKnowledge,
}

impl Generation {
    pub const NO_KNOWLEDGE_MARKER: &'static str = "<no-knowledge>";

    pub fn as_text(&self) -> &str {
        match self {
            Generation::Completion(c) => c,
            Generation::NoKnowledge => Self::NO_KNOWLEDGE_MARKER,
        }
    }

    pub fn completion(&self) -> Option<&str> {
        match self {
            Generation::Completion(c) => Some(c),
            Generation::NoKnowledge => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ToyModel {
    table: BTreeMap<PromptKey, Distribution>,
    vocab: BTreeSet<String>,
    param_count: usize,
}

impl ToyModel {
    pub fn new(table: BTreeMap<PromptKey, Distribution>) -> Result<Self, MiniGiantError> {
        for (k, d) in &table {
            d.check(k)?;
        }
        Ok(Self::from_checked(table))
    }

    fn from_checked(table: BTreeMap<PromptKey, Distribution>) -> Self {
        let mut m = ToyModel { table: BTreeMap::new(), vocab: BTreeSet::new(), param_count: 0 };
        for (k, d) in &table {
            m.learn_tokens(k, d);
            m.param_count += d.len();
        }
        m.table = table;
        m
    }

    fn learn_tokens(&mut self, k: &PromptKey, d: &Distribution) {
        let completions = d.iter().flat_map(|(c, _)| c.split(' '));
        for t in k.tokens().chain(completions) {
            if !self.vocab.contains(t) {
                self.vocab.insert(t.to_owned());
            }
        }
    }

    /// Random base model with `keys` prompts of the form `<namespace> k<i>`.
    pub fn synthetic(namespace: &str, keys: usize, completions_per_key: usize, seed: u64) -> Self {
        assert!(completions_per_key >= 1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let table = (0..keys)
            .map(|i| {
                let weights = (0..completions_per_key)
                    .map(|j| (format!("v{j}-{}", rng.random_range(0..1000u32)), rng.random_range(0.1..1.0)));
                (PromptKey::new(&format!("{namespace} k{i}")), Distribution::from_weights(weights))
            })
            .collect();
        Self::from_checked(table)
    }

    /// Total (prompt, completion) entries, `|w|`.
    pub fn param_count(&self) -> usize {
        self.param_count
    }

    /// Every token the model has seen, including those of replaced entries.
    pub fn vocab(&self) -> &BTreeSet<String> {
        &self.vocab
    }

    pub fn key_count(&self) -> usize {
        self.table.len()
    }

    pub fn distribution(&self, prompt: &str) -> Option<&Distribution> {
        self.table.get(&PromptKey::new(prompt))
    }

    fn lookup(&self, key: &PromptKey) -> Generation {
        match self.table.get(key).and_then(Distribution::argmax) {
            Some(c) => Generation::Completion(c.to_owned()),
            None => Generation::NoKnowledge,
        }
    }
}

/// Sparse overlay produced by edge fine-tuning.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Delta {
    overlays: BTreeMap<PromptKey, Distribution>,
    owner: String,
}

impl Delta {
    pub fn empty(owner: &str) -> Self {
        Delta { overlays: BTreeMap::new(), owner: owner.to_owned() }
    }

    pub fn owner(&self) -> &str {
        &self.owner
    }

    pub fn is_empty(&self) -> bool {
        self.overlays.is_empty()
    }

    /// Touched prompt keys.
    pub fn key_count(&self) -> usize {
        self.overlays.len()
    }

    /// Serializes as the uploaded weight file: one
    /// `key<TAB>completion<TAB>probability` line per entry, sorted by key.
    pub fn to_weight_file(&self) -> String {
        let mut out = String::new();
        for (k, d) in &self.overlays {
            for (c, p) in d.iter() {
                writeln!(out, "{}\t{}\t{}", k.0, c, p).unwrap();
            }
        }
        out
    }

    pub fn from_weight_file(owner: &str, text: &str) -> Result<Self, MiniGiantError> {
        let mut overlays: BTreeMap<PromptKey, BTreeMap<String, f64>> = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let err = |reason: &str| MiniGiantError::WeightFile { line: i + 1, reason: reason.into() };
            let mut fields = line.split('\t');
            let (Some(k), Some(c), Some(p), None) = (fields.next(), fields.next(), fields.next(), fields.next()) else {
                return Err(err("expected 3 tab-separated fields"));
            };
            let p: f64 = p.parse().map_err(|_| err("probability is not a number"))?;
            if k.is_empty() || c.is_empty() {
                return Err(err("empty key or completion"));
            }
            overlays.entry(PromptKey::new(k)).or_default().insert(canonical(c), p);
        }
        let overlays: BTreeMap<_, _> = overlays.into_iter().map(|(k, d)| (k, Distribution(d))).collect();
        for (k, d) in &overlays {
            d.check(k)?;
        }
        Ok(Delta { overlays, owner: owner.to_owned() })
    }
}

/// Exact overlay entry count `|w~|`.
pub fn delta_size(d: &Delta) -> usize {
    d.overlays.values().map(Distribution::len).sum()
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TrainingPair {
    pub prompt: String,
    pub completion: String,
    pub sensitive: bool,
}

impl TrainingPair {
    pub fn new(prompt: &str, completion: &str) -> Self {
        TrainingPair { prompt: prompt.into(), completion: completion.into(), sensitive: false }
    }

    pub fn sensitive(prompt: &str, completion: &str) -> Self {
        TrainingPair { sensitive: true, ..Self::new(prompt, completion) }
    }

    /// Sensitive fact in `<Sensitive to Answer>` form: `owner.attribute` -> value.
    pub fn fact(owner: &str, attribute: &str, value: &str) -> Self {
        Self::sensitive(&format!("{owner}.{attribute}"), value)
    }
}

/// Count-ratio MLE of `P(completion | prompt)` over `pairs`.
///
/// `budget_fraction` caps the delta at that fraction of the base model's
/// parameter count.
pub fn fit_delta(
    base: &ToyModel,
    pairs: &[TrainingPair],
    budget_fraction: f64,
    owner: &str,
) -> Result<Delta, MiniGiantError> {
    if !(budget_fraction > 0.0 && budget_fraction <= 1.0) {
        return Err(MiniGiantError::InvalidBudget(budget_fraction));
    }
    if pairs.is_empty() {
        return Err(MiniGiantError::EmptyPairs);
    }
    let mut counts: BTreeMap<PromptKey, BTreeMap<String, u64>> = BTreeMap::new();
    for (i, pair) in pairs.iter().enumerate() {
        let (key, completion) = (PromptKey::new(&pair.prompt), canonical(&pair.completion));
        if key.0.is_empty() || completion.is_empty() {
            return Err(MiniGiantError::EmptyPair(i));
        }
        *counts.entry(key).or_default().entry(completion).or_insert(0) += 1;
    }
    let overlays: BTreeMap<PromptKey, Distribution> = counts
        .into_iter()
        .map(|(k, cs)| {
            let total: u64 = cs.values().sum();
            let dist = cs.into_iter().map(|(c, n)| (c, n as f64 / total as f64)).collect();
            (k, Distribution(dist))
        })
        .collect();
    let delta = Delta { overlays, owner: owner.to_owned() };
    let required = delta_size(&delta);
    let allowed = (budget_fraction * base.param_count() as f64).floor() as usize;
    if required > allowed {
        return Err(MiniGiantError::Budget { required, allowed });
    }
    Ok(delta)
}

/// Loads a delta into the base: overlaid keys take the delta's distribution.
pub fn merge(base: &ToyModel, d: &Delta) -> ToyModel {
    let mut merged = base.clone();
    for (k, dist) in &d.overlays {
        merged.learn_tokens(k, dist);
        merged.param_count += dist.len();
        if let Some(old) = merged.table.insert(k.clone(), dist.clone()) {
            merged.param_count -= old.len();
        }
    }
    merged
}

/// Context in canonical order: newest record per entity, sorted by entity.
pub fn canonical_context(context: &[PromptRecord]) -> Vec<&PromptRecord> {
    let mut newest: BTreeMap<&str, &PromptRecord> = BTreeMap::new();
    for r in context {
        match newest.get(r.entity.as_str()) {
            Some(cur) if cur.tick >= r.tick => {}
            _ => {
                newest.insert(&r.entity, r);
            }
        }
    }
    newest.into_values().collect()
}

/// Key formed from a prompt plus its canonicalized context.
pub fn context_key(prompt: &str, context: &[PromptRecord]) -> PromptKey {
    let mut text = canonical(prompt);
    for r in canonical_context(context) {
        text.push_str(" | ");
        text.push_str(&r.entity);
        for tok in &r.payload {
            text.push(' ');
            text.push_str(tok);
        }
    }
    PromptKey::new(&text)
}

/// Deterministic argmax completion for the prompt and context.
pub fn generate(m: &ToyModel, prompt: &str, context: &[PromptRecord]) -> Generation {
    m.lookup(&context_key(prompt, context))
}

/// Splits text into comparison atoms: lowercase words, further split on
/// `.`, with surrounding punctuation trimmed.
pub fn atoms(text: &str) -> Vec<String> {
    text.split_whitespace()
        .flat_map(|w| w.split('.'))
        .map(|a| a.trim_matches(|c: char| "?!,;:\"'()[]".contains(c)).to_lowercase())
        .filter(|a| !a.is_empty())
        .collect()
}

fn contains_run(haystack: &[String], needle: &[String]) -> bool {
    !needle.is_empty() && haystack.windows(needle.len()).any(|w| w == needle)
}

/// True when `pair` asks for a sensitive pair's prompt given its answer.
pub fn is_reverse_of(pair: &TrainingPair, sensitive: &TrainingPair) -> bool {
    let answer = atoms(&sensitive.completion);
    let secret: BTreeSet<String> = atoms(&sensitive.prompt).into_iter().collect();
    contains_run(&atoms(&pair.prompt), &answer) && atoms(&pair.completion).iter().any(|a| secret.contains(a))
}

/// Keeps sensitive data in `<Sensitive to Answer>` orientation only.
///
/// Sensitive pairs are taken as forward facts, in order; a later pair that
/// reverses an earlier kept fact is dropped, as is any non-sensitive pair
/// that reverses a kept fact. Everything else passes through unchanged.
pub fn encode_secure_pairs(pairs: &[TrainingPair]) -> Vec<TrainingPair> {
    let mut facts: Vec<&TrainingPair> = Vec::new();
    for p in pairs.iter().filter(|p| p.sensitive) {
        if !facts.iter().any(|f| is_reverse_of(p, f)) {
            facts.push(p);
        }
    }
    pairs
        .iter()
        .filter(|p| {
            if p.sensitive {
                facts.iter().any(|f| std::ptr::eq(*f, *p))
            } else {
                !facts.iter().any(|f| is_reverse_of(p, f))
            }
        })
        .cloned()
        .collect()
}

//! Three-party data-service protocol, its ideal functionality, and the
//! checks run against them.
//!
//! Party A holds pairs `(E, P)`, uploads the fine-tuned delta `(E', P')` to
//! the server C, and requestor B queries the merged model. The ideal world
//! replaces C by a functionality that stores the pairs and answers queries
//! by plaintext counting. Indistinguishability is checked as equality of
//! canonical transcripts. C is honest-but-curious: it may be observed but
//! never deviates.

mod script;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::OnceLock;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::mini_giant::{
    self, atoms, canonical, encode_secure_pairs, fit_delta, generate, is_reverse_of, merge, Delta, Generation,
    MiniGiantError, ToyModel, TrainingPair, DEFAULT_BUDGET_FRACTION,
};

pub use script::{parse_script, Action, AdversaryScript, Role, ScriptFile};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SecurityError {
    #[error("script line {line}: {message}")]
    Script { line: usize, message: String },
    #[error("transcripts come from different scripts ({0} vs {1})")]
    Provenance(String, String),
    #[error("attack needs at least one trial")]
    ZeroTrials,
    #[error(transparent)]
    Model(#[from] MiniGiantError),
}

/// Hex SHA-256 of `label` and `content`, separated by a NUL byte.
pub fn digest(label: &str, content: &str) -> String {
    let mut h = Sha256::new();
    h.update(label.as_bytes());
    h.update([0u8]);
    h.update(content.as_bytes());
    hex::encode(h.finalize())
}

fn serialize_pairs(pairs: &[TrainingPair]) -> String {
    pairs.iter().map(|p| format!("{}\t{}\t{}\n", canonical(&p.prompt), canonical(&p.completion), p.sensitive)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Endpoint {
    Party(Role),
    Adversary,
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Endpoint::Party(r) => r.fmt(f),
            Endpoint::Adversary => f.write_str("Z"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MessageKind {
    Upload,
    Receipt,
    Request,
    Response,
    Observe,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WorldKind {
    Real,
    Ideal,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub step: u64,
    pub from: Endpoint,
    pub to: Endpoint,
    pub kind: MessageKind,
    pub digest: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    pub world: WorldKind,
    /// Digest of the script and inputs that produced the run.
    pub provenance: String,
    pub messages: Vec<Message>,
}

impl Transcript {
    fn new(world: WorldKind, provenance: String) -> Self {
        Transcript { world, provenance, messages: Vec::new() }
    }

    fn send(&mut self, from: Endpoint, to: Endpoint, kind: MessageKind, digest: String) {
        let step = self.messages.len() as u64 + 1;
        self.messages.push(Message { step, from, to, kind, digest });
    }

    /// Steps renumbered from 1 and digests lowercased.
    pub fn canonical(&self) -> Transcript {
        let messages = self
            .messages
            .iter()
            .enumerate()
            .map(|(i, m)| Message { step: i as u64 + 1, digest: m.digest.to_lowercase(), ..m.clone() })
            .collect();
        Transcript { messages, ..self.clone() }
    }

    pub fn kinds(&self) -> Vec<MessageKind> {
        self.messages.iter().map(|m| m.kind).collect()
    }
}

/// Shared public base model and fine-tuning budget of a session.
#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    pub base: ToyModel,
    pub budget_fraction: f64,
}

impl Session {
    /// Public base in its own namespace, large enough for `pairs` entries
    /// under the default budget.
    pub fn for_pairs(pairs: usize, seed: u64) -> Self {
        Session {
            base: ToyModel::synthetic("public", 1000.max(100 * pairs), 1, seed),
            budget_fraction: DEFAULT_BUDGET_FRACTION,
        }
    }

    fn fit(&self, pairs: &[TrainingPair]) -> Result<Delta, SecurityError> {
        if pairs.is_empty() {
            return Ok(Delta::empty("A"));
        }
        Ok(fit_delta(&self.base, pairs, self.budget_fraction, "A")?)
    }
}

fn provenance(script: &AdversaryScript, pairs: &[TrainingPair], queries: &[String]) -> String {
    let text = format!(
        "{}\n{:?}\n{:?}\n{}{}",
        script.name,
        script.corruptions,
        script.actions,
        serialize_pairs(pairs),
        queries.join("\n")
    );
    digest("provenance", &text)
}

/// A's input: its pairs plus any injected by a corrupted A.
fn provider_input(script: &AdversaryScript, pairs: &[TrainingPair]) -> Vec<TrainingPair> {
    let injected = script.actions.iter().filter_map(|a| match a {
        Action::Inject(p) => Some(p.clone()),
        _ => None,
    });
    pairs.iter().cloned().chain(injected).collect()
}

/// Scripted queries followed by the extra ones of a corrupted B.
fn all_queries(script: &AdversaryScript, queries: &[String]) -> Vec<String> {
    let extra = script.actions.iter().filter_map(|a| match a {
        Action::Request(q) => Some(q.clone()),
        _ => None,
    });
    queries.iter().cloned().chain(extra).collect()
}

fn modifications(script: &AdversaryScript) -> Vec<String> {
    script
        .actions
        .iter()
        .filter_map(|a| match a {
            Action::ModifyResponse(p) => Some(p.clone()),
            _ => None,
        })
        .collect()
}

fn observed(script: &AdversaryScript) -> Vec<Role> {
    script
        .actions
        .iter()
        .filter_map(|a| match a {
            Action::Observe(r) => Some(*r),
            _ => None,
        })
        .collect()
}

/// Upload digest as seen from outside: content only if A or C is corrupted.
fn upload_digest(script: &AdversaryScript, weight_file: &str) -> String {
    if script.is_corrupted(Role::A) || script.is_corrupted(Role::C) {
        digest("upload", weight_file)
    } else {
        digest("upload", "")
    }
}

/// Views of A, B, C at the end of a run.
struct Views {
    a: String,
    b: String,
    c: String,
}

fn finish(t: &mut Transcript, script: &AdversaryScript, views: &Views) {
    for role in observed(script) {
        let view = match role {
            Role::A => &views.a,
            Role::B => &views.b,
            Role::C => &views.c,
        };
        t.send(Endpoint::Party(role), Endpoint::Adversary, MessageKind::Observe, digest("view", view));
    }
}

fn exchange(
    t: &mut Transcript,
    script: &AdversaryScript,
    queries: &[String],
    mut answer: impl FnMut(&str) -> String,
) -> String {
    use Endpoint::Party;
    let mut mods = modifications(script).into_iter();
    let mut b_view = String::new();
    for q in all_queries(script, queries) {
        t.send(Party(Role::B), Party(Role::C), MessageKind::Request, digest("request", &canonical(&q)));
        let mut p = answer(&q);
        if script.is_corrupted(Role::B) {
            if let Some(alt) = mods.next() {
                p = alt;
            }
        }
        t.send(Party(Role::C), Party(Role::B), MessageKind::Response, digest("response", &p));
        b_view.push_str(&p);
        b_view.push('\n');
    }
    b_view
}

/// Executes the protocol: A secure-encodes and fine-tunes, uploads the
/// serialized delta, C merges it, and B's queries are answered by the
/// merged model.
pub fn real_run(
    session: &Session,
    script: &AdversaryScript,
    pairs: &[TrainingPair],
    queries: &[String],
) -> Result<Transcript, SecurityError> {
    use Endpoint::Party;
    script.validate()?;
    let mut t = Transcript::new(WorldKind::Real, provenance(script, pairs, queries));
    let input = provider_input(script, pairs);
    let weight_file = session.fit(&encode_secure_pairs(&input))?.to_weight_file();
    t.send(Party(Role::A), Party(Role::C), MessageKind::Upload, upload_digest(script, &weight_file));

    // C only ever holds the uploaded bytes.
    let merged = merge(&session.base, &Delta::from_weight_file("A", &weight_file)?);
    t.send(Party(Role::C), Party(Role::A), MessageKind::Receipt, digest("receipt", "stored"));

    let b_view = exchange(&mut t, script, queries, |q| generate(&merged, q, &[]).as_text().to_owned());
    let views = Views { a: serialize_pairs(&input), b: b_view, c: weight_file };
    finish(&mut t, script, &views);
    Ok(t)
}

/// Answer of the ideal functionality: plaintext count-argmax over stored
/// pairs, falling back to the public base model.
pub fn plaintext_answer(stored: &[TrainingPair], base: &ToyModel, query: &str) -> Generation {
    let key = canonical(query);
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for p in stored.iter().filter(|p| canonical(&p.prompt) == key) {
        *counts.entry(canonical(&p.completion)).or_default() += 1;
    }
    let mut best: Option<(&String, usize)> = None;
    for (c, &n) in &counts {
        best = match best {
            Some((bc, bn)) if bn > n || (bn == n && bc < c) => Some((bc, bn)),
            _ => Some((c, n)),
        };
    }
    match best {
        Some((c, _)) => Generation::Completion(c.clone()),
        None => generate(base, query, &[]),
    }
}

/// What the simulator reports alongside an ideal run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SimulatorLog {
    pub entries: Vec<String>,
}

/// The ideal world: the functionality stores A's secure-encoded pairs and
/// answers B; the simulator produces the messages of corrupted parties.
///
/// With C corrupted the simulator sends a dummy upload and is leaked the
/// serialized delta to build C's view. With A corrupted it extracts A's
/// input and runs the honest upload on its behalf. With B corrupted it
/// relays, and possibly alters, the functionality's answer.
pub fn ideal_run(
    session: &Session,
    script: &AdversaryScript,
    pairs: &[TrainingPair],
    queries: &[String],
) -> Result<(Transcript, SimulatorLog), SecurityError> {
    use Endpoint::Party;
    script.validate()?;
    let mut t = Transcript::new(WorldKind::Ideal, provenance(script, pairs, queries));
    let mut log = SimulatorLog::default();
    let input = provider_input(script, pairs);
    let stored = encode_secure_pairs(&input);

    let leaked = if script.is_corrupted(Role::A) || script.is_corrupted(Role::C) {
        session.fit(&stored)?.to_weight_file()
    } else {
        String::new()
    };
    if script.is_corrupted(Role::C) {
        log.entries.push(format!("dummy upload dummy_E/dummy_P of {} lines", leaked.lines().count()));
    }
    if script.is_corrupted(Role::A) {
        log.entries.push(format!("extracted {} pairs from A", input.len()));
    }
    t.send(Party(Role::A), Party(Role::C), MessageKind::Upload, upload_digest(script, &leaked));
    t.send(Party(Role::C), Party(Role::A), MessageKind::Receipt, digest("receipt", "stored"));

    let b_view =
        exchange(&mut t, script, queries, |q| plaintext_answer(&stored, &session.base, q).as_text().to_owned());
    if script.is_corrupted(Role::B) && !modifications(script).is_empty() {
        log.entries.push("relayed altered responses for B".into());
    }
    let views = Views { a: serialize_pairs(&input), b: b_view, c: leaked };
    finish(&mut t, script, &views);
    Ok((t, log))
}

/// True iff the canonical transcripts differ in length, order, kind,
/// endpoints, or digests.
pub fn distinguish(real: &Transcript, ideal: &Transcript) -> Result<bool, SecurityError> {
    if real.provenance != ideal.provenance {
        return Err(SecurityError::Provenance(real.provenance.clone(), ideal.provenance.clone()));
    }
    Ok(real.canonical().messages != ideal.canonical().messages)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttackReport {
    pub trials: usize,
    pub successes: usize,
}

impl AttackReport {
    pub fn rate(&self) -> f64 {
        self.successes as f64 / self.trials as f64
    }
}

const REVERSE_TEMPLATES: [&str; 3] = ["who has {}", "which key maps to {}", "{} belongs to"];

/// Reverse queries ("who has <answer>?") over the known answers plus random
/// decoys. A trial succeeds when the output contains an atom of any secret
/// key.
pub fn reversal_attack(
    model: &ToyModel,
    known_answers: &[String],
    secret_keys: &[String],
    trials: usize,
    seed: u64,
) -> Result<AttackReport, SecurityError> {
    if trials == 0 {
        return Err(SecurityError::ZeroTrials);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut vocab: Vec<String> = known_answers.to_vec();
    vocab.extend((0..known_answers.len().max(1)).map(|i| format!("decoy-{i}-{}", rng.random::<u32>())));
    let secrets: Vec<String> = secret_keys.iter().flat_map(|k| atoms(k)).collect();
    let mut successes = 0;
    for _ in 0..trials {
        let answer = vocab.choose(&mut rng).expect("non-empty vocabulary");
        let template = REVERSE_TEMPLATES.choose(&mut rng).unwrap();
        let query = template.replace("{}", answer);
        if let Generation::Completion(out) = generate(model, &query, &[]) {
            if atoms(&out).iter().any(|a| secrets.contains(a)) {
                successes += 1;
            }
        }
    }
    Ok(AttackReport { trials, successes })
}

/// Forward queries drawn from `pairs`; a trial succeeds when the model
/// returns the pair's completion.
pub fn forward_accuracy(
    model: &ToyModel,
    pairs: &[TrainingPair],
    trials: usize,
    seed: u64,
) -> Result<AttackReport, SecurityError> {
    if trials == 0 || pairs.is_empty() {
        return Err(SecurityError::ZeroTrials);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let successes = (0..trials)
        .filter(|_| {
            let p = pairs.choose(&mut rng).unwrap();
            generate(model, &p.prompt, &[]).completion() == Some(canonical(&p.completion).as_str())
        })
        .count();
    Ok(AttackReport { trials, successes })
}

/// Fine-tune, merge, and generate agree with plaintext counting on every
/// query. Runs over a shared public base with no fine-tuning budget.
pub fn homomorphism_check(pairs: &[TrainingPair], queries: &[String]) -> Result<bool, SecurityError> {
    static SHARED: OnceLock<Session> = OnceLock::new();
    let session = SHARED.get_or_init(|| Session { budget_fraction: 1.0, ..Session::for_pairs(0, 0x40e0) });
    let merged = merge(&session.base, &session.fit(pairs)?);
    Ok(queries.iter().all(|q| generate(&merged, q, &[]) == plaintext_answer(pairs, &session.base, q)))
}

/// Weight-file entries that reverse any sensitive pair.
pub fn reverse_entries(weight_file: &str, sensitive: &[TrainingPair]) -> Vec<String> {
    weight_file
        .lines()
        .filter(|line| {
            let mut f = line.split('\t');
            let (Some(k), Some(c)) = (f.next(), f.next()) else { return false };
            let entry = TrainingPair::new(k, c);
            sensitive.iter().any(|s| is_reverse_of(&entry, s))
        })
        .map(str::to_owned)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub check: String,
    pub kind: String,
    pub passed: bool,
    pub detail: String,
}

pub const REPORT_CSV_HEADER: &str = "check,kind,result,detail";

pub fn report_csv(results: &[CheckResult]) -> String {
    let mut out = format!("{REPORT_CSV_HEADER}\n");
    for r in results {
        let detail = r.detail.replace(',', ";");
        out.push_str(&format!("{},{},{},{}\n", r.check, r.kind, if r.passed { "pass" } else { "fail" }, detail));
    }
    out
}

/// Runs both worlds and every security property for one script file.
pub fn evaluate(file: &ScriptFile, seed: u64) -> Result<Vec<CheckResult>, SecurityError> {
    let name = &file.script.name;
    let input = provider_input(&file.script, &file.pairs);
    let session = Session::for_pairs(input.len(), seed);
    let real = real_run(&session, &file.script, &file.pairs, &file.queries)?;
    let (ideal, _) = ideal_run(&session, &file.script, &file.pairs, &file.queries)?;
    let mut out = Vec::new();
    let mut push = |kind: &str, passed: bool, detail: String| {
        out.push(CheckResult { check: name.clone(), kind: kind.into(), passed, detail })
    };

    let distinguishable = distinguish(&real, &ideal)?;
    push("indistinguishability", !distinguishable, format!("{} messages", real.messages.len()));
    let canon = real.canonical();
    push("canonical-idempotent", canon.canonical() == canon, String::new());

    let secure = encode_secure_pairs(&input);
    let delta = session.fit(&secure)?;
    let model = merge(&session.base, &delta);
    let facts: Vec<TrainingPair> = secure.iter().filter(|p| p.sensitive).cloned().collect();
    if !facts.is_empty() {
        let fwd = forward_accuracy(&model, &facts, facts.len().max(100), seed)?;
        push("forward-recovery", fwd.successes == fwd.trials, format!("{}/{}", fwd.successes, fwd.trials));
    }
    let leaks = reverse_entries(&delta.to_weight_file(), &facts);
    push("delta-one-way", leaks.is_empty(), format!("{} reverse entries", leaks.len()));
    if let Some(trials) = file.reverse_trials {
        let answers: Vec<String> = facts.iter().map(|p| p.completion.clone()).collect();
        let keys: Vec<String> = facts.iter().map(|p| p.prompt.clone()).collect();
        let rep = reversal_attack(&model, &answers, &keys, trials, seed)?;
        push("reversal-attack", rep.successes == 0, format!("{}/{} recovered", rep.successes, rep.trials));
    }
    Ok(out)
}

/// Answer of the public base model alone.
pub fn base_answer(session: &Session, query: &str) -> Generation {
    mini_giant::generate(&session.base, query, &[])
}

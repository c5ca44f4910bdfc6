//! Experiment presets: parameter sweeps over a scenario, written as CSV
//! tables with an SVG chart each.
//!
//! Grids are chosen so trends are visible; they are not read off any
//! published axis.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use dtsn_core::cost_model::{
    entity_rates, fl_entity_compute, fl_server_aggregate, fl_total, lt_entity_finetune, lt_server_merge, lt_total,
    CostError, Scenario,
};
use dtsn_core::mini_giant::{encode_secure_pairs, fit_delta, merge, MiniGiantError, ToyModel, TrainingPair};
use dtsn_core::protocol::twin_actor;
use dtsn_core::protocol::{simulate_lt, DbPricing, LtConfig, ProtocolError, World};
use dtsn_core::security::{forward_accuracy, reversal_attack, AttackReport, SecurityError};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::chart::{render_svg, ChartError};

#[derive(Debug, Error)]
pub enum PresetError {
    #[error("unknown preset {0:?}; expected fig5, fig6, fig7, fig8, fig9, casestudy, or custom:<param>=<v1>,<v2>,...")]
    UnknownPreset(String),
    #[error("custom sweep: {0}")]
    Custom(String),
    #[error(transparent)]
    Cost(#[from] CostError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Model(#[from] MiniGiantError),
    #[error(transparent)]
    Security(#[from] SecurityError),
    #[error(transparent)]
    Chart(#[from] ChartError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("writing {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl PresetError {
    /// Bad user input rather than a failure while running.
    pub fn is_usage(&self) -> bool {
        matches!(self, PresetError::UnknownPreset(_) | PresetError::Custom(_))
    }
}

/// Scenario parameters a custom sweep can vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    HistorySize,
    StaticState,
    FullParams,
    DeltaParams,
    FlRounds,
    KbPeriod,
    EntityCount,
    PromptDbSize,
}

impl SweepParam {
    const NAMES: [(&'static str, SweepParam); 8] = [
        ("history_size", SweepParam::HistorySize),
        ("static_state", SweepParam::StaticState),
        ("full_params", SweepParam::FullParams),
        ("delta_params", SweepParam::DeltaParams),
        ("fl_rounds", SweepParam::FlRounds),
        ("kb_period", SweepParam::KbPeriod),
        ("entity_count", SweepParam::EntityCount),
        ("prompt_db_size", SweepParam::PromptDbSize),
    ];

    pub fn name(self) -> &'static str {
        Self::NAMES.iter().find(|(_, p)| *p == self).unwrap().0
    }

    fn is_count(self) -> bool {
        matches!(self, SweepParam::FlRounds | SweepParam::KbPeriod | SweepParam::EntityCount)
    }

    fn apply(self, sc: &Scenario, v: f64) -> Scenario {
        let mut out = match self {
            SweepParam::EntityCount => return sc.with_entity_count(v as usize),
            _ => sc.clone(),
        };
        match self {
            SweepParam::FlRounds => out.fl_rounds = v as u32,
            SweepParam::KbPeriod => out.kb_period = v as u32,
            SweepParam::PromptDbSize => out.prompt_db_size = v,
            _ => {
                for e in &mut out.entities {
                    match self {
                        SweepParam::HistorySize => e.history_size = v,
                        SweepParam::StaticState => e.static_state = v,
                        SweepParam::FullParams => e.full_params = v,
                        SweepParam::DeltaParams => e.delta_params = v,
                        _ => unreachable!(),
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CustomSweep {
    pub param: SweepParam,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PresetName {
    Fig5,
    Fig6,
    Fig7,
    Fig8,
    Fig9,
    CaseStudy,
    Custom(CustomSweep),
}

impl FromStr for PresetName {
    type Err = PresetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "fig5" => PresetName::Fig5,
            "fig6" => PresetName::Fig6,
            "fig7" => PresetName::Fig7,
            "fig8" => PresetName::Fig8,
            "fig9" => PresetName::Fig9,
            "casestudy" => PresetName::CaseStudy,
            _ => match s.strip_prefix("custom:") {
                Some(spec) => PresetName::Custom(parse_custom(spec)?),
                None => return Err(PresetError::UnknownPreset(s.to_owned())),
            },
        })
    }
}

impl fmt::Display for PresetName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PresetName::Fig5 => f.write_str("fig5"),
            PresetName::Fig6 => f.write_str("fig6"),
            PresetName::Fig7 => f.write_str("fig7"),
            PresetName::Fig8 => f.write_str("fig8"),
            PresetName::Fig9 => f.write_str("fig9"),
            PresetName::CaseStudy => f.write_str("casestudy"),
            PresetName::Custom(c) => write!(f, "custom_{}", c.param.name()),
        }
    }
}

fn parse_custom(spec: &str) -> Result<CustomSweep, PresetError> {
    let bad = |m: String| PresetError::Custom(m);
    let (name, values) = spec.split_once('=').ok_or_else(|| bad(format!("expected <param>=<values>, got {spec:?}")))?;
    let param = SweepParam::NAMES.iter().find(|(n, _)| *n == name.trim()).map(|(_, p)| *p).ok_or_else(|| {
        let known: Vec<_> = SweepParam::NAMES.iter().map(|(n, _)| *n).collect();
        bad(format!("unknown parameter {name:?}; known: {}", known.join(", ")))
    })?;
    let values: Vec<f64> = values
        .split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|_| bad(format!("{v:?} is not a number"))))
        .collect::<Result<_, _>>()?;
    if values.is_empty() {
        return Err(bad("empty grid".into()));
    }
    for &v in &values {
        if !(v.is_finite() && v >= 0.0) || (param.is_count() && (v < 1.0 || v.fract() != 0.0 || v > u32::MAX as f64)) {
            return Err(bad(format!("{v} is out of range for {}", param.name())));
        }
    }
    Ok(CustomSweep { param, values })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub sweep_value: f64,
    pub fl: f64,
    pub llm_twin: f64,
}

/// One curve pair over a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    /// File stem of the CSV and SVG.
    pub name: String,
    pub title: String,
    /// `seconds` or `units`.
    pub unit: &'static str,
    pub rows: Vec<Row>,
}

impl ResultTable {
    pub fn header(&self) -> [String; 4] {
        ["sweep_value".into(), format!("fl_{}", self.unit), format!("llm_twin_{}", self.unit), "ratio".into()]
    }

    /// CSV with `ratio = llm_twin / fl`.
    pub fn to_csv(&self) -> Result<String, PresetError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(self.header())?;
        for r in &self.rows {
            w.write_record([
                r.sweep_value.to_string(),
                r.fl.to_string(),
                r.llm_twin.to_string(),
                (r.llm_twin / r.fl).to_string(),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| csv::Error::from(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

/// Everything a preset produces.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PresetOutput {
    pub tables: Vec<ResultTable>,
    /// Additional CSV files as (file name, contents).
    pub files: Vec<(String, String)>,
}

impl PresetOutput {
    /// Writes every table as CSV plus SVG and every extra file. Returns the
    /// paths in write order.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>, PresetError> {
        std::fs::create_dir_all(dir).map_err(|source| PresetError::Io { path: dir.to_owned(), source })?;
        let mut written = Vec::new();
        let mut put = |name: String, contents: &str| -> Result<(), PresetError> {
            let path = dir.join(name);
            std::fs::write(&path, contents).map_err(|source| PresetError::Io { path: path.clone(), source })?;
            written.push(path);
            Ok(())
        };
        for t in &self.tables {
            let csv = t.to_csv()?;
            put(format!("{}.csv", t.name), &csv)?;
            put(format!("{}.svg", t.name), &render_svg(&csv, &t.title)?)?;
        }
        for (name, contents) in &self.files {
            put(name.clone(), contents)?;
        }
        Ok(written)
    }
}

/// Total parameter counts of the two model sizes compared in the sweeps.
pub const MODEL_SIZES: [(&str, f64); 2] = [("3.5b", 3.5e9), ("7b", 7e9)];
pub const FIG5_GROWTH: [f64; 8] = [1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0];
pub const FIG6_ENTITIES: [usize; 8] = [1, 2, 5, 10, 20, 50, 100, 200];
pub const FIG7_TICKS: u64 = 60;
pub const FIG9_K: std::ops::RangeInclusive<u32> = 1..=20;
pub const FIG9_GROWTH: [f64; 6] = [1.0, 2.0, 4.0, 8.0, 16.0, 32.0];
pub const CASE_STUDY_HOMES: usize = 100;
pub const CASE_STUDY_FACTS_PER_HOME: usize = 16;
pub const CASE_STUDY_BASE_KEYS: usize = 160_000;
/// (prompt type, query count) rows of the accuracy table.
pub const ACCURACY_ROWS: [(&str, usize); 3] = [("normal", 100), ("reverse", 500), ("reverse", 1000)];

/// Same scenario with `|w|` set to `full` and `|w~|` kept at the same fraction.
fn with_model_size(sc: &Scenario, full: f64) -> Scenario {
    let mut out = sc.clone();
    for e in &mut out.entities {
        e.delta_params = full * (e.delta_params / e.full_params);
        e.full_params = full;
    }
    out
}

/// Evaluates grid points in parallel, keeping grid order.
fn sweep<T: Sync>(
    grid: &[T],
    f: impl Fn(&T) -> Result<Row, PresetError> + Sync + Send,
) -> Result<Vec<Row>, PresetError> {
    grid.par_iter().map(f).collect()
}

fn max_over<T>(items: &[T], f: impl Fn(&T) -> Result<f64, CostError>) -> Result<f64, CostError> {
    items.iter().map(f).try_fold(0.0, |m, v| Ok(f64::max(m, v?)))
}

/// Entity compute as the history grows; the static state does not.
pub fn fig5(sc: &Scenario) -> Result<Vec<ResultTable>, PresetError> {
    MODEL_SIZES
        .iter()
        .map(|&(label, full)| {
            let sized = with_model_size(sc, full);
            let rows = sweep(&FIG5_GROWTH, |&m| {
                let mut grown = sized.clone();
                for e in &mut grown.entities {
                    e.history_size *= m;
                }
                Ok(Row {
                    sweep_value: m,
                    fl: max_over(&grown.entities, fl_entity_compute)?,
                    llm_twin: max_over(&grown.entities, lt_entity_finetune)?,
                })
            })?;
            Ok(ResultTable {
                name: format!("fig5_w{label}"),
                title: format!("Entity computation vs. data growth (|w| = {label})"),
                unit: "seconds",
                rows,
            })
        })
        .collect()
}

/// Server compute as the entity count grows.
pub fn fig6(sc: &Scenario) -> Result<Vec<ResultTable>, PresetError> {
    MODEL_SIZES
        .iter()
        .map(|&(label, full)| {
            let sized = with_model_size(sc, full);
            let rows = sweep(&FIG6_ENTITIES, |&n| {
                let grown = sized.with_entity_count(n);
                let sizes: Vec<f64> = grown.entities.iter().map(|e| e.full_params).collect();
                let delta = grown.entities.iter().map(|e| e.delta_params).fold(0.0, f64::max);
                Ok(Row {
                    sweep_value: n as f64,
                    fl: fl_server_aggregate(&grown.server, &sizes)?,
                    llm_twin: lt_server_merge(&grown.server, delta)?,
                })
            })?;
            Ok(ResultTable {
                name: format!("fig6_w{label}"),
                title: format!("Server computation vs. entity count (|w| = {label})"),
                unit: "seconds",
                rows,
            })
        })
        .collect()
}

const LT_COMM_EVENTS: [&str; 3] = ["prompt_push", "delta_upload", "prompt_query"];

/// Per-tick communication of the slowest entity over `FIG7_TICKS` ticks.
///
/// FL moves full weights and the full state every tick. LLM-Twin is read
/// from an event-driven run priced by live record and database sizes, so its
/// query cost grows with the prompt database.
fn comm_per_tick(sc: &Scenario) -> Result<(ResultTable, ResultTable), PresetError> {
    let rates = entity_rates(sc)?;
    let (mut fl_s, mut fl_u) = (0.0f64, 0.0f64);
    for (e, r) in sc.entities.iter().zip(&rates) {
        let units = e.full_params + e.full_state;
        fl_s = fl_s.max(units / r);
        fl_u = fl_u.max(units);
    }
    let mut cfg = LtConfig::new(FIG7_TICKS);
    cfg.pricing = DbPricing::Live;
    let run = simulate_lt(sc, &World::synthetic(sc), &cfg)?;
    let ticks = FIG7_TICKS as usize;
    let n = sc.entities.len();
    // [tick][entity] -> (seconds, units)
    let mut acc = vec![vec![(0.0f64, 0.0f64); n]; ticks];
    let actors: Vec<(String, String)> = sc.entities.iter().map(|e| (e.id.clone(), twin_actor(&e.id))).collect();
    for ev in run.log.events.iter().filter(|ev| LT_COMM_EVENTS.contains(&ev.event)) {
        if let Some(i) = actors.iter().position(|(id, dt)| ev.actor == *id || ev.actor == *dt) {
            let slot = &mut acc[ev.tick as usize - 1][i];
            slot.0 += ev.seconds;
            slot.1 += ev.units;
        }
    }
    let row = |t: usize, fl: f64, pick: fn(&(f64, f64)) -> f64| Row {
        sweep_value: (t + 1) as f64,
        fl,
        llm_twin: acc[t].iter().map(pick).fold(0.0, f64::max),
    };
    let seconds = ResultTable {
        name: "fig7".into(),
        title: "Communication time per tick".into(),
        unit: "seconds",
        rows: (0..ticks).map(|t| row(t, fl_s, |s| s.0)).collect(),
    };
    let units = ResultTable {
        name: "fig8".into(),
        title: "Communication content per tick".into(),
        unit: "units",
        rows: (0..ticks).map(|t| row(t, fl_u, |s| s.1)).collect(),
    };
    Ok((seconds, units))
}

/// Construction totals against `K`, and against history growth.
pub fn fig9(sc: &Scenario) -> Result<Vec<ResultTable>, PresetError> {
    let ks: Vec<u32> = FIG9_K.collect();
    let by_k = sweep(&ks, |&k| {
        let s = Scenario { fl_rounds: k, ..sc.clone() };
        Ok(Row { sweep_value: k as f64, fl: fl_total(&s)?.total, llm_twin: lt_total(&s)?.total })
    })?;
    let by_history = sweep(&FIG9_GROWTH, |&m| {
        let mut s = sc.clone();
        for e in &mut s.entities {
            e.history_size *= m;
        }
        Ok(Row { sweep_value: m, fl: fl_total(&s)?.total, llm_twin: lt_total(&s)?.total })
    })?;
    Ok(vec![
        ResultTable { name: "fig9_k".into(), title: "Total time vs. FL rounds K".into(), unit: "seconds", rows: by_k },
        ResultTable {
            name: "fig9_history".into(),
            title: "Total time vs. history growth".into(),
            unit: "seconds",
            rows: by_history,
        },
    ])
}

pub fn custom(sc: &Scenario, c: &CustomSweep) -> Result<Vec<ResultTable>, PresetError> {
    let rows = sweep(&c.values, |&v| {
        let s = c.param.apply(sc, v);
        s.validate()?;
        Ok(Row { sweep_value: v, fl: fl_total(&s)?.total, llm_twin: lt_total(&s)?.total })
    })?;
    Ok(vec![ResultTable {
        name: format!("custom_{}", c.param.name()),
        title: format!("Total time vs. {}", c.param.name()),
        unit: "seconds",
        rows,
    }])
}

/// Private preferences of the case-study homes, plus the merged model
/// trained on their secure encoding.
pub struct CaseStudyModel {
    pub facts: Vec<TrainingPair>,
    pub model: ToyModel,
    pub delta_size: usize,
}

impl CaseStudyModel {
    pub fn build(seed: u64) -> Result<Self, PresetError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let facts: Vec<TrainingPair> = (0..CASE_STUDY_HOMES)
            .flat_map(|h| (0..CASE_STUDY_FACTS_PER_HOME).map(move |a| (h, a)))
            .map(|(h, a)| {
                TrainingPair::fact(&format!("home{h}"), &format!("pref{a}"), &format!("{}%", rng.random_range(0..=100)))
            })
            .collect();
        let base = ToyModel::synthetic("base", CASE_STUDY_BASE_KEYS, 1, rng.random());
        let delta =
            fit_delta(&base, &encode_secure_pairs(&facts), dtsn_core::mini_giant::DEFAULT_BUDGET_FRACTION, "homes")?;
        Ok(CaseStudyModel { delta_size: dtsn_core::mini_giant::delta_size(&delta), model: merge(&base, &delta), facts })
    }

    pub fn reverse(&self, trials: usize, seed: u64) -> Result<AttackReport, PresetError> {
        let answers: Vec<String> = self.facts.iter().map(|f| f.completion.clone()).collect();
        let keys: Vec<String> = self.facts.iter().map(|f| f.prompt.clone()).collect();
        Ok(reversal_attack(&self.model, &answers, &keys, trials, seed)?)
    }

    pub fn forward(&self, trials: usize, seed: u64) -> Result<AttackReport, PresetError> {
        Ok(forward_accuracy(&self.model, &self.facts, trials, seed)?)
    }
}

pub const ACCURACY_CSV_HEADER: &str = "prompt_type,prompt_number,correct,incorrect";
pub const DECISIONS_CSV_HEADER: &str = "tick,entity,decision";

/// Event log and decisions of two knowledge-base periods, plus the
/// normal/reverse accuracy table.
pub fn case_study(sc: &Scenario) -> Result<Vec<(String, String)>, PresetError> {
    let run = simulate_lt(sc, &World::synthetic(sc), &LtConfig::new(2 * sc.kb_period as u64))?;
    let mut decisions = csv::Writer::from_writer(Vec::new());
    decisions.write_record(DECISIONS_CSV_HEADER.split(','))?;
    for (tick, entity, d) in &run.decisions {
        decisions.write_record([tick.to_string(), entity.clone(), d.text()])?;
    }
    let decisions = String::from_utf8(decisions.into_inner().map_err(|e| csv::Error::from(e.into_error()))?)
        .expect("csv output is utf-8");

    let cs = CaseStudyModel::build(sc.seed)?;
    let mut accuracy = csv::Writer::from_writer(Vec::new());
    accuracy.write_record(ACCURACY_CSV_HEADER.split(','))?;
    for (i, &(kind, n)) in ACCURACY_ROWS.iter().enumerate() {
        let seed = sc.seed.wrapping_add(i as u64);
        let report = if kind == "normal" { cs.forward(n, seed)? } else { cs.reverse(n, seed)? };
        accuracy.write_record([
            kind.to_owned(),
            n.to_string(),
            report.successes.to_string(),
            (report.trials - report.successes).to_string(),
        ])?;
    }
    let accuracy = String::from_utf8(accuracy.into_inner().map_err(|e| csv::Error::from(e.into_error()))?)
        .expect("csv output is utf-8");
    Ok(vec![
        ("casestudy_events.csv".into(), run.log.to_csv()),
        ("casestudy_decisions.csv".into(), decisions),
        ("casestudy_accuracy.csv".into(), accuracy),
    ])
}

pub fn run_preset(preset: &PresetName, sc: &Scenario) -> Result<PresetOutput, PresetError> {
    sc.validate()?;
    let tables = match preset {
        PresetName::Fig5 => fig5(sc)?,
        PresetName::Fig6 => fig6(sc)?,
        PresetName::Fig7 => vec![comm_per_tick(sc)?.0],
        PresetName::Fig8 => vec![comm_per_tick(sc)?.1],
        PresetName::Fig9 => fig9(sc)?,
        PresetName::Custom(c) => custom(sc, c)?,
        PresetName::CaseStudy => return Ok(PresetOutput { tables: vec![], files: case_study(sc)? }),
    };
    Ok(PresetOutput { tables, files: vec![] })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::parse_scenario;

    fn scenario() -> Scenario {
        parse_scenario(include_str!("../assets/scenarios/paper_preset.json"), "paper_preset.json").unwrap()
    }

    #[test]
    fn preset_names_round_trip() {
        for name in ["fig5", "fig6", "fig7", "fig8", "fig9", "casestudy"] {
            assert_eq!(name.parse::<PresetName>().unwrap().to_string(), name);
        }
        let c: PresetName = "custom:fl_rounds=1,2,3".parse().unwrap();
        assert_eq!(c.to_string(), "custom_fl_rounds");
        assert!(matches!("fig10".parse::<PresetName>(), Err(PresetError::UnknownPreset(_))));
        assert!(matches!("custom:nope=1".parse::<PresetName>(), Err(PresetError::Custom(_))));
        assert!(matches!("custom:fl_rounds=0".parse::<PresetName>(), Err(PresetError::Custom(_))));
        assert!(matches!("custom:fl_rounds=1.5".parse::<PresetName>(), Err(PresetError::Custom(_))));
        assert!(matches!("custom:history_size=".parse::<PresetName>(), Err(PresetError::Custom(_))));
    }

    #[test]
    fn csv_has_documented_header_and_ratio() {
        let t = ResultTable {
            name: "t".into(),
            title: "t".into(),
            unit: "seconds",
            rows: vec![Row { sweep_value: 1.0, fl: 4.0, llm_twin: 1.0 }],
        };
        assert_eq!(t.to_csv().unwrap(), "sweep_value,fl_seconds,llm_twin_seconds,ratio\n1,4,1,0.25\n");
    }

    #[test]
    fn fig6_merge_is_flat_and_aggregation_grows() {
        for t in fig6(&scenario()).unwrap() {
            assert_eq!(t.rows.len(), FIG6_ENTITIES.len());
            assert!(t.rows.windows(2).all(|w| w[0].llm_twin == w[1].llm_twin && w[0].fl < w[1].fl));
        }
    }

    #[test]
    fn fig9_is_linear_in_k_and_flat_for_llm_twin() {
        let t = &fig9(&scenario()).unwrap()[0];
        assert_eq!(t.rows.len(), 20);
        let step = t.rows[1].fl - t.rows[0].fl;
        for w in t.rows.windows(2) {
            assert!(((w[1].fl - w[0].fl) - step).abs() <= 1e-9 * w[1].fl);
            assert_eq!(w[0].llm_twin, w[1].llm_twin);
        }
    }

    #[test]
    fn fig7_fl_is_constant_and_llm_twin_query_cost_grows() {
        let (secs, units) = comm_per_tick(&scenario()).unwrap();
        assert_eq!(secs.rows.len(), FIG7_TICKS as usize);
        assert!(secs.rows.iter().all(|r| r.fl == secs.rows[0].fl && r.llm_twin < r.fl));
        assert!(units.rows.iter().all(|r| r.llm_twin < r.fl));
        // Ticks without a sync: cost rises as the database grows.
        let quiet: Vec<&Row> = units.rows.iter().filter(|r| !(r.sweep_value as u64).is_multiple_of(10)).collect();
        assert!(quiet.windows(2).all(|w| w[0].llm_twin < w[1].llm_twin));
    }

    #[test]
    fn custom_sweep_validates_each_point() {
        let c = match "custom:delta_params=1e5,7e9".parse::<PresetName>().unwrap() {
            PresetName::Custom(c) => c,
            _ => unreachable!(),
        };
        assert!(matches!(custom(&scenario(), &c), Err(PresetError::Cost(CostError::Constraint { .. }))));
    }
}

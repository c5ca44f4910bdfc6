//! Acceptance criteria 1 to 9. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use dtsn_core::cost_model::{compare, feasible_scenario, fl_total, lt_total, Scenario};
use dtsn_core::fl_baseline::{
    global_aggregate, local_gradient, local_loss, local_update, LocalDataset, Sample, WeightVector,
};
use dtsn_core::mini_giant::{canonical, fit_delta, generate, merge, Generation, ToyModel, TrainingPair};
use dtsn_core::protocol::{simulate_fl, simulate_lt, LtConfig, World};
use dtsn_core::security::{distinguish, homomorphism_check, ideal_run, parse_script, real_run, Session};
use dtsnsim::presets::{fig5, run_preset, CaseStudyModel, PresetName};
use dtsnsim::scenario::load_scenario;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn asset(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("assets").join(rel)
}

fn scenario(name: &str) -> Scenario {
    load_scenario(&asset(&format!("scenarios/{name}.json"))).expect("bundled scenario loads")
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn sign_property() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let n = 10_000;
    for i in 0..n {
        let sc = feasible_scenario(&mut rng, 8).unit_periods();
        let c = compare(&sc).map_err(|e| format!("scenario {i}: {e}"))?;
        ensure(c.constraints_satisfied, || format!("scenario {i} violates {:?}", c.violations))?;
        ensure(c.difference < 0.0, || format!("scenario {i}: difference {} >= 0", c.difference))?;
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(10), || format!("took {elapsed:?}"))?;
    Ok(format!("{n} scenarios, all negative, {:.2}s", elapsed.as_secs_f64()))
}

fn edge_compute_ratio() -> Outcome {
    let mut points = 0;
    for name in ["paper_preset", "paper_preset_1pct"] {
        let sc = scenario(name);
        for e in &sc.entities {
            ensure(e.static_state <= e.history_size && e.delta_params / e.full_params <= 1e-2, || {
                format!("{name} is not a preset with |S_s| <= |H| and |w~|/|w| <= 1e-2")
            })?;
        }
        for t in fig5(&sc).map_err(|e| e.to_string())? {
            for r in &t.rows {
                let ratio = r.llm_twin / r.fl;
                ensure(ratio <= 0.01, || format!("{name}/{}: ratio {ratio} at {}", t.name, r.sweep_value))?;
                points += 1;
            }
        }
    }
    Ok(format!("{points} grid points at or below 0.01"))
}

fn efficiency_factor() -> Outcome {
    let c = compare(&scenario("paper_preset")).map_err(|e| e.to_string())?;
    ensure(c.ratio > 100.0, || format!("fl/lt = {}", c.ratio))?;
    Ok(format!("fl/lt = {:.1}", c.ratio))
}

fn dataset(rng: &mut ChaCha8Rng, owner: &str, n: usize, dim: usize) -> LocalDataset {
    let samples = (0..n)
        .map(|_| Sample { x: (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect(), y: rng.random_range(-5.0..5.0) })
        .collect();
    LocalDataset { owner: owner.into(), samples }
}

/// `w - eta * (2/n) * sum (w.x - y) x` over the pooled samples.
fn central_step(w: &[f64], samples: &[&Sample], eta: f64) -> Vec<f64> {
    let mut grad = vec![0.0; w.len()];
    for s in samples {
        let err: f64 = w.iter().zip(&s.x).map(|(a, b)| a * b).sum::<f64>() - s.y;
        for (g, x) in grad.iter_mut().zip(&s.x) {
            *g += 2.0 * err * x;
        }
    }
    w.iter().zip(&grad).map(|(wi, g)| wi - eta * g / samples.len() as f64).collect()
}

fn fedavg_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst_step = 0.0f64;
    for case in 0..100 {
        let (dim, per, m) = (rng.random_range(1..6), rng.random_range(1..30), rng.random_range(1..8));
        let parts: Vec<_> = (0..m).map(|i| dataset(&mut rng, &format!("u{i}"), per, dim)).collect();
        let w = WeightVector { values: (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect(), round: 0 };
        let eta = rng.random_range(0.001..0.2);
        let locals: Vec<_> = parts
            .iter()
            .map(|p| local_update(&w, p, eta).map(|u| (u, p.len())))
            .collect::<Result<_, _>>()
            .map_err(|e| e.to_string())?;
        let fed = global_aggregate(&locals).map_err(|e| e.to_string())?;
        let pooled: Vec<&Sample> = parts.iter().flat_map(|p| &p.samples).collect();
        for (a, b) in fed.values.iter().zip(central_step(&w.values, &pooled, eta)) {
            worst_step = worst_step.max((a - b).abs());
            ensure((a - b).abs() <= 1e-12, || format!("case {case}: fedavg {a} vs central {b}"))?;
        }
    }
    let mut worst_fd = 0.0f64;
    for case in 0..100 {
        let (dim, n) = (rng.random_range(1..6), rng.random_range(1..40));
        let d = dataset(&mut rng, "u", n, dim);
        let w = WeightVector { values: (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect(), round: 0 };
        let g = local_gradient(&w, &d).map_err(|e| e.to_string())?;
        let h = 1e-5;
        for (j, &gj) in g.iter().enumerate() {
            let (mut plus, mut minus) = (w.clone(), w.clone());
            plus.values[j] += h;
            minus.values[j] -= h;
            let fd = (local_loss(&plus, &d).unwrap() - local_loss(&minus, &d).unwrap()) / (2.0 * h);
            let rel = (gj - fd).abs() / gj.abs().max(1.0);
            worst_fd = worst_fd.max(rel);
            ensure(rel <= 1e-6, || format!("case {case}, coordinate {j}: {gj} vs {fd}"))?;
        }
    }
    Ok(format!("max step error {worst_step:.1e}, max gradient error {worst_fd:.1e}"))
}

fn events_match_closed_form() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let rel = |a: f64, b: f64| (a - b).abs() / b.abs();
    let mut worst = 0.0f64;
    for i in 0..100 {
        let sc = feasible_scenario(&mut rng, 5);
        let ids: Vec<&str> = sc.entities.iter().map(|e| e.id.as_str()).collect();
        let fl = simulate_fl(&sc).map_err(|e| e.to_string())?.max_entity_seconds(ids.iter().copied());
        let lt = simulate_lt(&sc, &World::synthetic(&sc), &LtConfig::cycle(&sc)).map_err(|e| e.to_string())?;
        let lt = lt.per_tick_seconds(sc.kb_period as u64);
        let (fl_err, lt_err) = (rel(fl, fl_total(&sc).unwrap().total), rel(lt, lt_total(&sc).unwrap().total));
        worst = worst.max(fl_err).max(lt_err);
        ensure(fl_err <= 1e-9 && lt_err <= 1e-9, || format!("scenario {i}: fl {fl_err:e}, lt {lt_err:e}"))?;
    }
    Ok(format!("100 scenarios, max relative error {worst:.1e}"))
}

/// Most frequent completion per prompt, ties to the smallest.
fn count_argmax(pairs: &[TrainingPair], prompt: &str) -> Option<String> {
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for p in pairs.iter().filter(|p| canonical(&p.prompt) == canonical(prompt)) {
        *counts.entry(canonical(&p.completion)).or_default() += 1;
    }
    let best = *counts.values().max()?;
    counts.into_iter().find(|(_, n)| *n == best).map(|(c, _)| c)
}

fn homomorphism() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let base = ToyModel::synthetic("base", 1000, 2, 6);
    let mut queries_checked = 0;
    for case in 0..1000 {
        let n = rng.random_range(1..40);
        let pairs: Vec<TrainingPair> = (0..n)
            .map(|_| {
                let p = rng.random_range(0..12);
                let prompt = if rng.random_bool(0.5) { format!("Q {p}") } else { format!("q  {p}") };
                TrainingPair::new(&prompt, &format!("a{}", rng.random_range(0..4)))
            })
            .collect();
        let delta = fit_delta(&base, &pairs, 1.0, "u").map_err(|e| e.to_string())?;
        let model = merge(&base, &delta);
        let queries: Vec<String> = pairs.iter().map(|p| p.prompt.clone()).collect();
        for q in &queries {
            let expected = count_argmax(&pairs, q).map_or(Generation::NoKnowledge, Generation::Completion);
            ensure(generate(&model, q, &[]) == expected, || format!("case {case}: query {q:?}"))?;
            queries_checked += 1;
        }
        ensure(homomorphism_check(&pairs, &queries).map_err(|e| e.to_string())?, || format!("case {case}"))?;
    }
    Ok(format!("1000 instances, {queries_checked} queries equal the count-argmax oracle"))
}

fn reversal_attack() -> Outcome {
    let cs = CaseStudyModel::build(7).map_err(|e| e.to_string())?;
    let reverse = cs.reverse(1000, 7).map_err(|e| e.to_string())?;
    ensure(reverse.successes == 0, || format!("{} of 1000 reverse queries succeeded", reverse.successes))?;
    let forward = cs.forward(100, 7).map_err(|e| e.to_string())?;
    ensure(forward.successes == forward.trials, || format!("forward {}/{}", forward.successes, forward.trials))?;
    for f in &cs.facts {
        let out = generate(&cs.model, &f.prompt, &[]);
        ensure(out.completion() == Some(canonical(&f.completion).as_str()), || format!("{} -> {out:?}", f.prompt))?;
    }
    Ok(format!(
        "reverse 0/1000, forward {}/{} sampled and {}/{} exhaustive",
        forward.successes,
        forward.trials,
        cs.facts.len(),
        cs.facts.len()
    ))
}

fn indistinguishability() -> Outcome {
    let mut names = Vec::new();
    for name in ["honest", "corrupt_a", "corrupt_b", "corrupt_c", "reverse_attack"] {
        let text = std::fs::read_to_string(asset(&format!("scripts/{name}.adv"))).map_err(|e| e.to_string())?;
        let file = parse_script(&text).map_err(|e| format!("{name}: {e}"))?;
        let session = Session::for_pairs(file.pairs.len() + 1, 8);
        let real = real_run(&session, &file.script, &file.pairs, &file.queries).map_err(|e| e.to_string())?;
        let (ideal, _) = ideal_run(&session, &file.script, &file.pairs, &file.queries).map_err(|e| e.to_string())?;
        ensure(!distinguish(&real, &ideal).map_err(|e| e.to_string())?, || format!("{name} is distinguishable"))?;
        names.push(name);
    }
    Ok(format!("indistinguishable: {}", names.join(", ")))
}

fn determinism() -> Outcome {
    let cases = [
        ("fig5", "paper_preset"),
        ("fig6", "paper_preset"),
        ("fig7", "paper_preset"),
        ("fig8", "paper_preset"),
        ("fig9", "paper_preset"),
        ("custom:history_size=1e5,1e6,1e7", "paper_preset"),
        ("casestudy", "smart_home"),
    ];
    let mut files = 0;
    for (preset, sc_name) in cases {
        let p: PresetName = preset.parse().map_err(|e: dtsnsim::presets::PresetError| e.to_string())?;
        let render = || -> Result<Vec<String>, String> {
            let out = run_preset(&p, &scenario(sc_name)).map_err(|e| e.to_string())?;
            let mut csvs: Vec<String> = out.tables.iter().map(|t| t.to_csv().unwrap()).collect();
            csvs.extend(out.files.into_iter().map(|(_, c)| c));
            Ok(csvs)
        };
        let (a, b) = (render()?, render()?);
        ensure(!a.is_empty() && a == b, || format!("{preset} differs between runs"))?;
        files += a.len();
    }
    Ok(format!("{} presets, {files} CSV files byte-identical", cases.len()))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("sign of the time difference", sign_property),
        ("edge compute ratio", edge_compute_ratio),
        ("overall efficiency factor", efficiency_factor),
        ("FedAvg oracle equivalence", fedavg_oracle),
        ("event/closed-form agreement", events_match_closed_form),
        ("homomorphism", homomorphism),
        ("reversal attack", reversal_attack),
        ("UC indistinguishability", indistinguishability),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("criterion {}: PASS {name} ({detail})", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {}: FAIL {name} ({why})", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

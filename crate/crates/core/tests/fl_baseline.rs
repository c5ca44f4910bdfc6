use dtsn_core::fl_baseline::{
    global_aggregate, local_gradient, local_loss, local_update, measure_rounds, run_federated, FedAvgConfig,
    LocalDataset, Sample, SyntheticTask, WeightVector,
};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_dataset(rng: &mut ChaCha8Rng, owner: &str, n: usize, dim: usize) -> LocalDataset {
    let samples = (0..n)
        .map(|_| Sample { x: (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect(), y: rng.random_range(-5.0..5.0) })
        .collect();
    LocalDataset { owner: owner.into(), samples }
}

fn weights(rng: &mut ChaCha8Rng, dim: usize) -> WeightVector {
    WeightVector { values: (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect(), round: 0 }
}

#[test]
fn gradient_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for _ in 0..100 {
        let dim = rng.random_range(1..6);
        let n = rng.random_range(1..40);
        let d = random_dataset(&mut rng, "u", n, dim);
        let w = weights(&mut rng, dim);
        let g = local_gradient(&w, &d).unwrap();
        let h = 1e-5;
        for (j, &gj) in g.iter().enumerate() {
            let mut plus = w.clone();
            let mut minus = w.clone();
            plus.values[j] += h;
            minus.values[j] -= h;
            let fd = (local_loss(&plus, &d).unwrap() - local_loss(&minus, &d).unwrap()) / (2.0 * h);
            let err = (gj - fd).abs() / gj.abs().max(1.0);
            assert!(err <= 1e-6, "coordinate {j}: analytic {gj} vs numeric {fd}");
        }
    }
}

#[test]
fn fedavg_round_equals_centralized_step() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..100 {
        let dim = rng.random_range(1..5);
        let per = rng.random_range(1..30);
        let m = rng.random_range(1..8);
        let parts: Vec<_> = (0..m).map(|i| random_dataset(&mut rng, &format!("u{i}"), per, dim)).collect();
        let pooled =
            LocalDataset { owner: "all".into(), samples: parts.iter().flat_map(|p| p.samples.clone()).collect() };
        let w = weights(&mut rng, dim);
        let eta = rng.random_range(0.001..0.2);
        let locals: Vec<_> = parts.iter().map(|p| (local_update(&w, p, eta).unwrap(), p.len())).collect();
        let fed = global_aggregate(&locals).unwrap();
        let central = local_update(&w, &pooled, eta).unwrap();
        for (a, b) in fed.values.iter().zip(&central.values) {
            assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
        }
    }
}

#[test]
fn fedavg_converges_to_least_squares_solution() {
    let task = SyntheticTask { entities: 5, samples_per_entity: 40, dim: 3, noise_std: 0.3, seed: 3 };
    let (data, _) = task.generate();
    let rows: Vec<&Sample> = data.iter().flat_map(|d| &d.samples).collect();
    let x = DMatrix::from_fn(rows.len(), task.dim, |i, j| rows[i].x[j]);
    let y = DVector::from_iterator(rows.len(), rows.iter().map(|s| s.y));
    let xt = x.transpose();
    let optimum = (&xt * &x).try_inverse().unwrap() * (&xt * &y);

    let cfg = FedAvgConfig { eta: 0.1, tolerance: 1e-15, max_rounds: 100_000, parallel: false };
    let run = run_federated(&data, &cfg).unwrap();
    assert!(run.converged);
    for (a, b) in run.weights.values.iter().zip(optimum.iter()) {
        assert!((a - b).abs() < 1e-6, "{a} vs {b}");
    }
}

#[test]
fn rounds_do_not_increase_as_tolerance_loosens() {
    let task = SyntheticTask::default();
    let mut prev = u32::MAX;
    for tol in [1e-10, 1e-8, 1e-6, 1e-4, 1e-2] {
        let cfg = FedAvgConfig { tolerance: tol, ..FedAvgConfig::default() };
        let k = measure_rounds(&task, &cfg).unwrap().rounds;
        assert!(k <= prev, "tolerance {tol}: {k} > {prev}");
        prev = k;
    }
}

#[test]
fn parallel_and_sequential_runs_agree() {
    let task = SyntheticTask { entities: 12, ..SyntheticTask::default() };
    let seq = measure_rounds(&task, &FedAvgConfig::default()).unwrap();
    let par = measure_rounds(&task, &FedAvgConfig { parallel: true, ..FedAvgConfig::default() }).unwrap();
    assert_eq!(seq, par);
    assert_eq!(seq.loss_csv(), par.loss_csv());
}

#[test]
fn loss_is_non_increasing_for_small_steps() {
    let task = SyntheticTask::default();
    let run = measure_rounds(&task, &FedAvgConfig { eta: 0.01, ..FedAvgConfig::default() }).unwrap();
    assert!(run.loss_history.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    assert!(*run.loss_history.last().unwrap() < run.initial_loss);
}

proptest! {
    #[test]
    fn aggregate_stays_within_inputs(
        updates in prop::collection::vec((prop::collection::vec(-1e6f64..1e6, 3), 1usize..1000), 1..10)
    ) {
        let ws: Vec<_> = updates.iter().map(|(v, n)| (WeightVector { values: v.clone(), round: 1 }, *n)).collect();
        let agg = global_aggregate(&ws).unwrap();
        for j in 0..3 {
            let lo = updates.iter().map(|(v, _)| v[j]).fold(f64::INFINITY, f64::min);
            let hi = updates.iter().map(|(v, _)| v[j]).fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(agg.values[j] >= lo && agg.values[j] <= hi);
        }
    }

    #[test]
    fn aggregate_of_identical_weights_is_identity(v in prop::collection::vec(-1e3f64..1e3, 1..6), sizes in prop::collection::vec(1usize..100, 1..6)) {
        let ws: Vec<_> = sizes.iter().map(|&n| (WeightVector { values: v.clone(), round: 2 }, n)).collect();
        prop_assert_eq!(global_aggregate(&ws).unwrap().values, v);
    }

    #[test]
    fn synthetic_tasks_are_deterministic(seed in any::<u64>()) {
        let task = SyntheticTask { seed, entities: 3, samples_per_entity: 5, ..SyntheticTask::default() };
        prop_assert_eq!(task.generate(), task.generate());
    }
}

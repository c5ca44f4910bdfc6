//! Fixtures shared by the benchmarks.

use dtsn_core::cost_model::{feasible_scenario, Scenario};
use dtsn_core::fl_baseline::{LocalDataset, SyntheticTask};
use dtsn_core::mini_giant::{ToyModel, TrainingPair};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// `n` random scenarios that satisfy every efficiency hypothesis.
pub fn scenarios(n: usize, max_entities: usize) -> Vec<Scenario> {
    let mut rng = ChaCha8Rng::seed_from_u64(0xbe7c);
    (0..n).map(|_| feasible_scenario(&mut rng, max_entities)).collect()
}

pub fn base_model(keys: usize) -> ToyModel {
    ToyModel::synthetic("base", keys, 2, 1)
}

/// `homes * per_home` private preference facts.
pub fn facts(homes: usize, per_home: usize) -> Vec<TrainingPair> {
    (0..homes)
        .flat_map(|h| {
            (0..per_home).map(move |a| {
                TrainingPair::fact(&format!("home{h}"), &format!("pref{a}"), &format!("{}%", (h * 7 + a * 13) % 101))
            })
        })
        .collect()
}

pub fn fl_data(entities: usize, samples: usize, dim: usize) -> Vec<LocalDataset> {
    SyntheticTask { entities, samples_per_entity: samples, dim, noise_std: 0.1, seed: 2 }.generate().0
}

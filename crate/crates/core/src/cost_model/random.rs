//! Random scenarios that satisfy every efficiency-theorem hypothesis.

use rand::Rng;

use super::{ChannelConfig, EntityProfile, LogBase, Scenario, ServerProfile};

fn log_uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    (rng.random_range(lo.ln()..hi.ln())).exp()
}

/// Draws a scenario with `1..=max_entities` entities whose sizes and rates
/// satisfy all hypotheses of [`super::theorem_violations`]. `K` and `lambda`
/// are drawn from `1..=20`. Every dynamic state spans at least 50 units, so
/// a semantic payload of up to 90% of it still compresses after rounding up.
pub fn feasible_scenario<R: Rng>(rng: &mut R, max_entities: usize) -> Scenario {
    assert!(max_entities >= 1);
    let n = rng.random_range(1..=max_entities);
    let entities: Vec<EntityProfile> = (0..n)
        .map(|i| {
            let full_params = log_uniform(rng, 1e5, 1e10);
            let history_size = log_uniform(rng, 1e4, 1e7);
            let full_state = history_size * rng.random_range(0.1..=1.0);
            let dynamic_state = full_state * rng.random_range(0.05..0.95);
            EntityProfile {
                id: format!("e{i}"),
                cpu_freq: log_uniform(rng, 1e8, 4e9),
                train_cycles: log_uniform(rng, 1.0, 100.0),
                history_size,
                static_state: full_state * rng.random_range(0.01..0.99),
                full_state,
                dynamic_state,
                semantic_state: dynamic_state * log_uniform(rng, 1e-3, 0.9),
                full_params,
                delta_params: full_params * log_uniform(rng, 1e-5, 0.5),
            }
        })
        .collect();
    let entity_subchannels: Vec<u32> = (0..n).map(|_| rng.random_range(1..=4)).collect();
    let used: u32 = entity_subchannels.iter().sum();
    let channel = ChannelConfig {
        bandwidth_hz: log_uniform(rng, 1e5, 1e8),
        total_subchannels: used + rng.random_range(0..=8),
        entity_subchannels,
        server_subchannels: vec![],
        snr: (0..n).map(|_| log_uniform(rng, 0.1, 1000.0)).collect(),
        log_base: if rng.random_bool(0.5) { LogBase::Two } else { LogBase::Natural },
    };
    let virtual_rate = rng.random_bool(0.5).then(|| log_uniform(rng, 1e6, 1e12));
    let mut sc = Scenario {
        name: "random".into(),
        seed: rng.random(),
        entities,
        server: ServerProfile {
            cpu_freq: log_uniform(rng, 1e9, 1e10),
            agg_cycles: log_uniform(rng, 0.1, 10.0),
            virtual_rate,
        },
        channel,
        fl_rounds: rng.random_range(1..=20),
        kb_period: rng.random_range(1..=20),
        prompt_db_size: 0.0,
        bytes_per_unit: 1.0,
    };
    // |H~| / r_N <= |w_i| / r_i for every entity.
    let rates = super::entity_rates(&sc).expect("positive rates");
    let r_n = super::virtual_rate(&sc).expect("positive virtual rate");
    let bound = sc.entities.iter().zip(&rates).map(|(e, r)| e.full_params * r_n / r).fold(f64::INFINITY, f64::min);
    sc.prompt_db_size = bound * rng.random_range(0.01..=1.0);
    sc
}

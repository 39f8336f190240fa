//! Small reproducible systems for tests, benchmarks and demos.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::epidemic::{compile, EpidemicParams};
use crate::error::Result;
use crate::io::random_contacts;
use crate::model::{
    sample_trajectory, EventSpec, ObservationModel, Participant, SkmSystem, TrajectoryBundle,
};

/// A system, its emission model and one sampled realization.
#[derive(Debug, Clone)]
pub struct Fixture {
    pub system: SkmSystem,
    pub obs_model: ObservationModel,
    pub bundle: TrajectoryBundle,
}

/// Rate ids used by [`random_system`].
pub const RATE_UP: usize = 0;
pub const RATE_DOWN: usize = 1;
pub const RATE_PAIR: usize = 2;

fn below_top(s: usize) -> Vec<f64> {
    (0..s).map(|x| if x + 1 < s { 1.0 } else { 0.0 }).collect()
}

fn above_bottom(s: usize) -> Vec<f64> {
    (0..s).map(|x| if x > 0 { 1.0 } else { 0.0 }).collect()
}

fn at_top(s: usize) -> Vec<f64> {
    (0..s).map(|x| if x + 1 == s { 1.0 } else { 0.0 }).collect()
}

/// Random interacting system: every individual can step up or down each
/// step, and one random ordered pair per step carries a catalyzed step-up
/// (the catalyst must sit in the top state). Worst-case total hazard per
/// step stays at or below 0.6.
pub fn random_system(seed: u64, m: usize, s: usize, t: usize) -> Result<SkmSystem> {
    assert!(s >= 2, "random systems need at least two states");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut up = rng.random_range(0.02..0.12);
    let mut down = rng.random_range(0.02..0.12);
    let mut pair = if m > 1 {
        rng.random_range(0.05..0.2)
    } else {
        0.0
    };
    let per_individual = up + down;
    let worst = m as f64 * per_individual + pair;
    if worst > 0.6 {
        let scale = 0.6 / worst;
        up *= scale;
        down *= scale;
        pair *= scale;
    }
    let initial: Vec<Vec<f64>> = (0..m)
        .map(|_| {
            let raw: Vec<f64> = (0..s).map(|_| rng.random_range(0.2..1.0)).collect();
            let z: f64 = raw.iter().sum();
            raw.into_iter().map(|v| v / z).collect()
        })
        .collect();
    let mut events = vec![Vec::new()];
    for _ in 1..t {
        let mut step = Vec::with_capacity(2 * m + 1);
        for i in 0..m {
            step.push(EventSpec::new(
                RATE_UP,
                vec![Participant::new(i, below_top(s), 1)],
            ));
            step.push(EventSpec::new(
                RATE_DOWN,
                vec![Participant::new(i, above_bottom(s), -1)],
            ));
        }
        if m > 1 {
            let a = rng.random_range(0..m);
            let mut b = rng.random_range(0..m - 1);
            if b >= a {
                b += 1;
            }
            step.push(EventSpec::new(
                RATE_PAIR,
                vec![
                    Participant::new(a, below_top(s), 1),
                    Participant::catalyst(b, at_top(s)),
                ],
            ));
        }
        events.push(step);
    }
    SkmSystem::new(m, s, initial, vec![up, down, pair], events)
}

/// Noisy emission with diagonal mass drawn from `[0.7, 0.9)`.
pub fn random_emission(seed: u64, s: usize) -> ObservationModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let rows = (0..s)
        .map(|x| {
            let keep = rng.random_range(0.7..0.9);
            let mut row: Vec<f64> = (0..s).map(|_| rng.random_range(0.1..1.0)).collect();
            row[x] = 0.0;
            let z: f64 = row.iter().sum();
            row.iter_mut().for_each(|v| *v *= (1.0 - keep) / z);
            row[x] = keep;
            row
        })
        .collect();
    ObservationModel::new(rows).expect("rows are normalized by construction")
}

/// [`random_system`] plus a sampled path with a fraction of observations hidden.
pub fn random_fixture(
    seed: u64,
    m: usize,
    s: usize,
    t: usize,
    observed_fraction: f64,
) -> Result<Fixture> {
    let system = random_system(seed, m, s, t)?;
    let obs_model = random_emission(seed, s);
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
    let mut bundle = sample_trajectory(&system, &obs_model, &mut rng)?;
    for tt in 0..t {
        for i in 0..m {
            if rng.random::<f64>() >= observed_fraction {
                bundle.observations.set(tt, i, None);
            }
        }
    }
    Ok(Fixture {
        system,
        obs_model,
        bundle,
    })
}

/// Independent two-state chains whose moves are confined to disjoint time
/// steps: chain `i` may flip only at steps `t` with `t % m == i`. No event
/// involves two individuals and no step lets two chains move.
pub fn interleaved_chains(seed: u64, m: usize, t: usize) -> Result<Fixture> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rates: Vec<f64> = (0..2 * m).map(|_| rng.random_range(0.05..0.45)).collect();
    let initial: Vec<Vec<f64>> = (0..m)
        .map(|_| {
            let p = rng.random_range(0.2..0.8);
            vec![p, 1.0 - p]
        })
        .collect();
    let mut events = vec![Vec::new()];
    for tt in 1..t {
        let i = tt % m;
        events.push(vec![
            EventSpec::new(2 * i, vec![Participant::new(i, vec![1.0, 0.0], 1)]),
            EventSpec::new(2 * i + 1, vec![Participant::new(i, vec![0.0, 1.0], -1)]),
        ]);
    }
    let system = SkmSystem::new(m, 2, initial, rates, events)?;
    let obs_model = random_emission(seed, 2);
    let mut bundle = sample_trajectory(&system, &obs_model, &mut rng)?;
    for tt in 0..t {
        for i in 0..m {
            if rng.random::<f64>() < 0.3 {
                bundle.observations.set(tt, i, None);
            }
        }
    }
    Ok(Fixture {
        system,
        obs_model,
        bundle,
    })
}

/// SIS outbreak on random contacts (expected degree 2) with rates scaled so
/// that the whole population's worst-case hazard stays below 0.8; usable by
/// every engine including the single-event samplers. Fully observed with
/// 0.95 sensitivity and specificity.
pub fn epidemic_bench(m: usize, t: usize, seed: u64) -> Result<Fixture> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let graph = random_contacts(m, t, 2.0, &mut rng)?;
    let max_edges = (1..t)
        .map(|tt| graph.num_edges_at(tt))
        .max()
        .unwrap_or(0)
        .max(1);
    let params = EpidemicParams {
        c1: 0.4 / m as f64,
        c2: 0.4 / (2 * max_edges) as f64,
        c3: 0.04 / m as f64,
        ..Default::default()
    };
    let system = compile(&graph, &params, 0.2)?;
    let obs_model = params.obs_model()?;
    let bundle = sample_trajectory(&system, &obs_model, &mut rng)?;
    Ok(Fixture {
        system,
        obs_model,
        bundle,
    })
}

//! Synthetic outbreaks on random dynamic contact graphs.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::epidemic::{simulate, ContactGraph, EpidemicParams, SimulationMode};
use crate::error::{Result, SkmError};
use crate::model::TrajectoryBundle;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSpec {
    pub num_individuals: usize,
    pub horizon: usize,
    /// Expected number of contacts per individual per step.
    pub contact_density: f64,
    pub params: EpidemicParams,
    pub initial_prevalence: f64,
    pub seed: u64,
}

impl Default for BenchmarkSpec {
    fn default() -> Self {
        BenchmarkSpec {
            num_individuals: 50,
            horizon: 200,
            contact_density: 2.0,
            params: EpidemicParams::default(),
            initial_prevalence: 0.1,
            seed: 0,
        }
    }
}

/// Per-step Erdos-Renyi contacts plus an independent-transition SIS outbreak.
/// Each individual starts infectious with probability `initial_prevalence`.
pub fn generate_benchmark(spec: &BenchmarkSpec) -> Result<(ContactGraph, TrajectoryBundle)> {
    let m = spec.num_individuals;
    if m == 0 || spec.horizon == 0 {
        return Err(SkmError::Config("M and T must be positive".into()));
    }
    if !(spec.contact_density >= 0.0) || (m > 1 && spec.contact_density > (m - 1) as f64) {
        return Err(SkmError::Config(format!(
            "contact density {} must lie in [0, {}]",
            spec.contact_density,
            m.saturating_sub(1)
        )));
    }
    if !(0.0..=1.0).contains(&spec.initial_prevalence) {
        return Err(SkmError::Config("initial prevalence outside [0, 1]".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let graph = random_contacts(m, spec.horizon, spec.contact_density, &mut rng)?;
    let infected: Vec<usize> = (0..m)
        .filter(|_| rng.random::<f64>() < spec.initial_prevalence)
        .collect();
    let bundle = simulate(
        &graph,
        &spec.params,
        &infected,
        rng.random(),
        SimulationMode::Independent,
    )
    .map_err(|e| match e {
        SkmError::InvalidModel(msg) => SkmError::InvalidModel(format!(
            "{msg}; try a contact density below {}",
            spec.contact_density
        )),
        other => other,
    })?;
    Ok((graph, bundle))
}

/// Independent Erdos-Renyi graph at every step `t >= 1` with expected degree `density`.
pub fn random_contacts<R: Rng + ?Sized>(
    m: usize,
    horizon: usize,
    density: f64,
    rng: &mut R,
) -> Result<ContactGraph> {
    let p = if m > 1 { density / (m - 1) as f64 } else { 0.0 };
    let mut graph = ContactGraph::new(m, horizon);
    for t in 1..horizon {
        for u in 0..m {
            for v in u + 1..m {
                if rng.random::<f64>() < p {
                    graph.add_edge(t, u, v)?;
                }
            }
        }
    }
    Ok(graph)
}

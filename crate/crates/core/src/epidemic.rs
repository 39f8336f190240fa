//! SIS epidemics on dynamic contact graphs.
//!
//! States: 0 = susceptible, 1 = infectious. Contacts listed at step `t`
//! govern the transition from `x_{t-1}` to `x_t`; contacts at `t = 0` have
//! no transition to act on and are ignored.

use std::collections::BTreeSet;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SkmError};
use crate::model::{
    sample_observations, sample_trajectory, EventSpec, ObservationModel, Participant, SkmSystem,
    TrajectoryBundle,
};

pub const SUSCEPTIBLE: usize = 0;
pub const INFECTIOUS: usize = 1;

pub const RATE_RECOVERY: usize = 0;
pub const RATE_CONTACT: usize = 1;
pub const RATE_OUTSIDE: usize = 2;

const IS_S: [f64; 2] = [1.0, 0.0];
const IS_I: [f64; 2] = [0.0, 1.0];

/// Undirected contacts per time step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContactGraph {
    num_individuals: usize,
    edges: Vec<BTreeSet<(usize, usize)>>,
}

impl ContactGraph {
    pub fn new(num_individuals: usize, horizon: usize) -> Self {
        ContactGraph {
            num_individuals,
            edges: vec![BTreeSet::new(); horizon],
        }
    }

    /// Adds `{u, v}` at `t`; duplicates collapse.
    pub fn add_edge(&mut self, t: usize, u: usize, v: usize) -> Result<()> {
        if u == v {
            return Err(SkmError::InvalidModel(format!(
                "self-contact of {u} at t={t}"
            )));
        }
        if u >= self.num_individuals || v >= self.num_individuals {
            return Err(SkmError::Dimension(format!(
                "contact ({u}, {v}) at t={t} references an individual >= {}",
                self.num_individuals
            )));
        }
        let horizon = self.edges.len();
        let step = self.edges.get_mut(t).ok_or_else(|| {
            SkmError::Dimension(format!("contact at t={t} outside horizon {horizon}"))
        })?;
        step.insert((u.min(v), u.max(v)));
        Ok(())
    }

    pub fn num_individuals(&self) -> usize {
        self.num_individuals
    }

    pub fn horizon(&self) -> usize {
        self.edges.len()
    }

    /// Edges at `t` as `(min, max)` pairs in sorted order.
    pub fn edges_at(&self, t: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges[t].iter().copied()
    }

    pub fn num_edges_at(&self, t: usize) -> usize {
        self.edges[t].len()
    }

    pub fn total_edges(&self) -> usize {
        self.edges.iter().map(BTreeSet::len).sum()
    }

    /// Degree of every individual at `t`.
    pub fn degrees(&self, t: usize) -> Vec<usize> {
        let mut deg = vec![0; self.num_individuals];
        for &(u, v) in &self.edges[t] {
            deg[u] += 1;
            deg[v] += 1;
        }
        deg
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpidemicParams {
    /// Recovery probability per step.
    pub c1: f64,
    /// Infection probability per infectious contact per step.
    pub c2: f64,
    /// Outside infection probability per step.
    pub c3: f64,
    pub sensitivity: f64,
    pub specificity: f64,
}

impl Default for EpidemicParams {
    fn default() -> Self {
        EpidemicParams {
            c1: 0.1,
            c2: 0.05,
            c3: 0.005,
            sensitivity: 0.95,
            specificity: 0.95,
        }
    }
}

impl EpidemicParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("c1", self.c1),
            ("c2", self.c2),
            ("c3", self.c3),
            ("sensitivity", self.sensitivity),
            ("specificity", self.specificity),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(SkmError::InvalidModel(format!("{name}={v} outside [0, 1]")));
            }
        }
        Ok(())
    }

    pub fn rates(&self) -> Vec<f64> {
        vec![self.c1, self.c2, self.c3]
    }

    pub fn obs_model(&self) -> Result<ObservationModel> {
        ObservationModel::binary(self.sensitivity, self.specificity)
    }
}

/// Per-step event sets for the graph: recovery and outside infection for
/// every individual, then one contact infection per edge and direction.
pub fn compile(
    graph: &ContactGraph,
    params: &EpidemicParams,
    initial_prevalence: f64,
) -> Result<SkmSystem> {
    params.validate()?;
    if !(0.0..=1.0).contains(&initial_prevalence) {
        return Err(SkmError::InvalidModel(format!(
            "initial prevalence {initial_prevalence} outside [0, 1]"
        )));
    }
    check_hazards(graph, params)?;
    let m_count = graph.num_individuals();
    let mut events = vec![Vec::new()];
    for t in 1..graph.horizon() {
        let mut step = Vec::with_capacity(2 * m_count + 2 * graph.num_edges_at(t));
        for m in 0..m_count {
            step.push(EventSpec::new(
                RATE_RECOVERY,
                vec![Participant::new(m, IS_I.to_vec(), -1)],
            ));
        }
        for m in 0..m_count {
            step.push(EventSpec::new(
                RATE_OUTSIDE,
                vec![Participant::new(m, IS_S.to_vec(), 1)],
            ));
        }
        for (u, v) in graph.edges_at(t) {
            for (sus, inf) in [(u, v), (v, u)] {
                step.push(EventSpec::new(
                    RATE_CONTACT,
                    vec![
                        Participant::new(sus, IS_S.to_vec(), 1),
                        Participant::catalyst(inf, IS_I.to_vec()),
                    ],
                ));
            }
        }
        events.push(step);
    }
    let initial = vec![vec![1.0 - initial_prevalence, initial_prevalence]; m_count];
    SkmSystem::new(m_count, 2, initial, params.rates(), events)
}

/// Each individual's own hazard budget `c3 + degree * c2` must fit in one.
fn check_hazards(graph: &ContactGraph, params: &EpidemicParams) -> Result<()> {
    let mut worst: Option<(usize, usize, usize)> = None;
    for t in 1..graph.horizon() {
        for (m, &d) in graph.degrees(t).iter().enumerate() {
            if worst.is_none_or(|(_, _, wd)| d > wd) {
                worst = Some((t, m, d));
            }
        }
    }
    if let Some((t, m, d)) = worst {
        let total = params.c3 + d as f64 * params.c2;
        if total > 1.0 + crate::model::HAZARD_SLACK {
            return Err(SkmError::InvalidModel(format!(
                "infection hazard {total} exceeds 1 for individual {m} at t={t} \
                 (degree {d}); lower c2 or the contact density"
            )));
        }
    }
    Ok(())
}

/// Row-stochastic 2x2 kernel for an individual with `c` infectious contacts,
/// with independent contact and outside infections.
pub fn closed_form_kernel(params: &EpidemicParams, c: usize) -> [[f64; 2]; 2] {
    let escape = (1.0 - params.c3) * (1.0 - params.c2).powi(c as i32);
    [[escape, 1.0 - escape], [params.c1, 1.0 - params.c1]]
}

/// First-order form of [`closed_form_kernel`]: infection probability
/// `c3 + c2 * c`. This is what the compiled event model yields.
pub fn linearized_kernel(params: &EpidemicParams, c: usize) -> [[f64; 2]; 2] {
    let infect = params.c3 + params.c2 * c as f64;
    [[1.0 - infect, infect], [params.c1, 1.0 - params.c1]]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SimulationMode {
    /// Each individual transitions independently given the previous snapshot.
    #[default]
    Independent,
    /// At most one event per step across the whole population.
    SingleEvent,
}

/// Samples hidden states and noisy observations; fully observed.
pub fn simulate(
    graph: &ContactGraph,
    params: &EpidemicParams,
    initial_infected: &[usize],
    seed: u64,
    mode: SimulationMode,
) -> Result<TrajectoryBundle> {
    params.validate()?;
    let m_count = graph.num_individuals();
    let horizon = graph.horizon();
    let mut x0 = vec![SUSCEPTIBLE; m_count];
    for &m in initial_infected {
        if m >= m_count {
            return Err(SkmError::Dimension(format!(
                "initially infected individual {m} >= {m_count}"
            )));
        }
        x0[m] = INFECTIOUS;
    }
    let obs = params.obs_model()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match mode {
        SimulationMode::SingleEvent => {
            let initial = x0
                .iter()
                .map(|&x| {
                    if x == INFECTIOUS {
                        IS_I.to_vec()
                    } else {
                        IS_S.to_vec()
                    }
                })
                .collect();
            let system = compile(graph, params, 0.0)?.with_initial(initial)?;
            sample_trajectory(&system, &obs, &mut rng)
        }
        SimulationMode::Independent => {
            check_hazards(graph, params)?;
            let mut states = Vec::with_capacity(horizon);
            states.push(x0);
            let mut infected_contacts = vec![0usize; m_count];
            for t in 1..horizon {
                let prev: &Vec<usize> = &states[t - 1];
                infected_contacts.iter_mut().for_each(|c| *c = 0);
                for (u, v) in graph.edges_at(t) {
                    infected_contacts[u] += (prev[v] == INFECTIOUS) as usize;
                    infected_contacts[v] += (prev[u] == INFECTIOUS) as usize;
                }
                let next: Vec<usize> = (0..m_count)
                    .map(|m| {
                        let row = closed_form_kernel(params, infected_contacts[m])[prev[m]];
                        if rng.random::<f64>() < row[INFECTIOUS] {
                            INFECTIOUS
                        } else {
                            SUSCEPTIBLE
                        }
                    })
                    .collect();
                states.push(next);
            }
            let observations = sample_observations(&states, &obs, &mut rng);
            Ok(TrajectoryBundle {
                states,
                observations,
                events: vec![None; horizon],
            })
        }
    }
}

//! Two-slice statistics, event probabilities and the Bethe free energy.

use rayon::prelude::*;

use crate::error::{Result, SkmError};
use crate::model::{EventSpec, ObservationModel, Observations, SkmSystem};

use super::kernel::{for_each_branch, Branch, NeighborSummaries};
use super::{Coupling, Engine, IndividualPosterior, Messages, Mode, ViConfig};

/// Branch-resolved two-slice marginal of one individual across one step.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoSlice {
    pub num_states: usize,
    /// `(branch, S x S)` normalized jointly over all branches. Under global
    /// coupling the stay mass of events not involving the individual is
    /// folded into a single entry labelled `None`.
    pub branches: Vec<(Option<Branch>, Vec<f64>)>,
}

impl TwoSlice {
    /// Sum over branches, row = previous state.
    pub fn total(&self) -> Vec<f64> {
        let s = self.num_states;
        let mut out = vec![0.0; s * s];
        for (_, w) in &self.branches {
            for (o, v) in out.iter_mut().zip(w) {
                *o += v;
            }
        }
        out
    }

    pub fn branch(&self, branch: Branch) -> Option<&[f64]> {
        self.branches
            .iter()
            .find(|(b, _)| *b == Some(branch))
            .map(|(_, w)| w.as_slice())
    }
}

/// Index of the participant whose view defines an event's firing probability:
/// the first one that changes state, else the first.
pub(crate) fn subject(ev: &EventSpec) -> usize {
    ev.participants
        .iter()
        .position(|p| p.delta != 0)
        .unwrap_or(0)
}

/// Visits unnormalized two-slice entries `(branch, a, b, xi, w, e_b)` for
/// `(m, t)` and returns their total.
fn visit_slice(
    engine: &Engine<'_>,
    messages: &Messages,
    summaries: &NeighborSummaries,
    t: usize,
    m: usize,
    mut visit: impl FnMut(Option<Branch>, usize, usize, f64, f64, f64),
) -> f64 {
    let system = engine.system;
    let s = system.num_states();
    let alpha = messages.alpha(m, t - 1);
    let beta = messages.beta(m, t);
    let hidden = engine.config.mode == Mode::Filtering;
    let mut z = 0.0;
    let coupling = engine.coupling;
    for_each_branch(
        system,
        summaries,
        t,
        m,
        coupling,
        engine.config.floor,
        false,
        |br, a, b, w| {
            let e = engine.emission(t, m, b);
            let xi = alpha[a] * w * e * if hidden { 1.0 } else { beta[b] };
            z += xi;
            visit(Some(br), a, b, xi, w, e);
        },
    );
    if coupling == Coupling::Global {
        let mut other = summaries.total_tilde;
        for inv in system.involvement(t, m) {
            other -= summaries.event_tilde[inv.event];
        }
        if other > 0.0 {
            for a in 0..s {
                let e = engine.emission(t, m, a);
                let xi = alpha[a] * other * e * if hidden { 1.0 } else { beta[a] };
                z += xi;
                visit(None, a, a, xi, other, e);
            }
        }
    }
    z
}

impl<'a> Engine<'a> {
    /// Branch-resolved two-slice marginal of `m` across step `t >= 1`.
    pub fn two_slice_stats(
        &self,
        messages: &Messages,
        summaries: &NeighborSummaries,
        t: usize,
        m: usize,
    ) -> TwoSlice {
        let s = self.system.num_states();
        let mut branches: Vec<(Option<Branch>, Vec<f64>)> = Vec::new();
        let z = visit_slice(self, messages, summaries, t, m, |br, a, b, xi, _, _| {
            let idx = match branches.iter().position(|(x, _)| *x == br) {
                Some(i) => i,
                None => {
                    branches.push((br, vec![0.0; s * s]));
                    branches.len() - 1
                }
            };
            branches[idx].1[a * s + b] += xi;
        });
        if z > 0.0 {
            for (_, w) in branches.iter_mut() {
                w.iter_mut().for_each(|v| *v /= z);
            }
        }
        TwoSlice {
            num_states: s,
            branches,
        }
    }
}

/// Summed pair marginals (`M x T x S x S`) and per-instance event probabilities.
pub(crate) fn pair_and_event_probs(
    engine: &Engine<'_>,
    messages: &Messages,
    summaries: &[NeighborSummaries],
) -> (Vec<f64>, Vec<Vec<f64>>) {
    let system = engine.system;
    let (m_count, horizon, s) = engine.dims();
    let ss = s * s;
    let mut pair = vec![0.0; m_count * horizon * ss];
    let found: Vec<Vec<(usize, usize, f64)>> = pair
        .par_chunks_mut(horizon * ss)
        .enumerate()
        .map(|(m, pair_m)| {
            let mut found = Vec::new();
            let mut mass: Vec<(usize, f64)> = Vec::new();
            for t in 1..horizon {
                let events = system.events_at(t);
                let block = &mut pair_m[t * ss..(t + 1) * ss];
                mass.clear();
                let z = visit_slice(
                    engine,
                    messages,
                    &summaries[t],
                    t,
                    m,
                    |br, a, b, xi, _, _| {
                        block[a * s + b] += xi;
                        if let Some(Branch::Event(k)) = br {
                            let ev = &events[k];
                            if ev.participants[subject(ev)].individual == m {
                                match mass.iter_mut().find(|(kk, _)| *kk == k) {
                                    Some(entry) => entry.1 += xi,
                                    None => mass.push((k, xi)),
                                }
                            }
                        }
                    },
                );
                if z > 0.0 {
                    block.iter_mut().for_each(|v| *v /= z);
                    found.extend(mass.iter().map(|&(k, xi)| (t, k, xi / z)));
                } else {
                    found.extend(mass.iter().map(|&(k, _)| (t, k, 0.0)));
                }
            }
            found
        })
        .collect();
    let mut event_prob: Vec<Vec<f64>> = (0..horizon)
        .map(|t| vec![0.0; system.events_at(t).len()])
        .collect();
    for (t, k, p) in found.into_iter().flatten() {
        event_prob[t][k] = p;
    }
    (pair, event_prob)
}

/// Per-individual Bethe decomposition of the variational free energy.
pub(crate) fn free_energy(
    engine: &Engine<'_>,
    messages: &Messages,
    summaries: &[NeighborSummaries],
    gamma: &[f64],
) -> f64 {
    let system = engine.system;
    let (m_count, horizon, s) = engine.dims();
    let floor = engine.config.floor;
    let xlogy = |x: f64, y: f64| {
        if x > 0.0 {
            x * (x / y.max(floor)).ln()
        } else {
            0.0
        }
    };
    // Collected before summing so the reduction order is fixed.
    let per_individual: Vec<f64> = (0..m_count)
        .into_par_iter()
        .map(|m| {
            let g = |t: usize| &gamma[(m * horizon + t) * s..(m * horizon + t + 1) * s];
            let init = system.initial(m);
            let mut f = 0.0;
            for x in 0..s {
                f += xlogy(g(0)[x], init[x] * engine.emission(0, m, x));
            }
            let mut entries: Vec<(f64, f64)> = Vec::new();
            for t in 1..horizon {
                entries.clear();
                let z = visit_slice(
                    engine,
                    messages,
                    &summaries[t],
                    t,
                    m,
                    |_, _, _, xi, w, e| {
                        entries.push((xi, w * e));
                    },
                );
                if z > 0.0 {
                    for &(xi, we) in &entries {
                        f += xlogy(xi / z, we);
                    }
                }
            }
            for t in 0..horizon.saturating_sub(1) {
                for &p in g(t) {
                    if p > 0.0 {
                        f -= p * p.ln();
                    }
                }
            }
            f
        })
        .collect();
    per_individual.iter().sum()
}

/// Bethe free energy of a variational posterior. Equals `-log p(y)` at the
/// fixed point for a single individual.
pub fn bethe_free_energy(
    system: &SkmSystem,
    obs_model: &ObservationModel,
    observations: &Observations,
    posterior: &IndividualPosterior,
) -> Result<f64> {
    let state = posterior
        .variational
        .as_ref()
        .ok_or_else(|| SkmError::Config("posterior carries no variational state".into()))?;
    let config = ViConfig {
        coupling: state.coupling,
        floor: state.floor,
        mode: if posterior.has_predictive() {
            Mode::Filtering
        } else {
            Mode::Smoothing
        },
        ..Default::default()
    };
    let engine = Engine::new(system, obs_model, observations, &config)?;
    let gamma: Vec<f64> = (0..posterior.num_individuals)
        .flat_map(|m| (0..posterior.horizon).flat_map(move |t| posterior.gamma(m, t).to_vec()))
        .collect();
    Ok(free_energy(
        &engine,
        &state.messages,
        &state.summaries,
        &gamma,
    ))
}

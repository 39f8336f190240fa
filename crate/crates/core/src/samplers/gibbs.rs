//! Blocked Gibbs sampling: each sweep redraws every individual's whole state
//! sequence by forward-filtering backward-sampling, conditioned on the other
//! individuals' current sequences.

use std::time::Instant;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, SkmError};
use crate::model::{sample_index, ObservationModel, Observations, SkmSystem};
use crate::vi::IndividualPosterior;

use super::pf::draw_path;
use super::{GibbsOutput, SamplerConfig};

const INIT_PARTICLES: usize = 200;

struct Chain<'a> {
    system: &'a SkmSystem,
    /// `x[t][m]`, always a positive-probability joint path.
    x: Vec<Vec<usize>>,
    /// Total hazard at each step, evaluated on `x[t - 1]`.
    total: Vec<f64>,
    /// Individuals whose state changes between `t - 1` and `t`.
    movers: Vec<Vec<usize>>,
    /// Events that fire without changing any state.
    null_events: Vec<Vec<usize>>,
}

impl<'a> Chain<'a> {
    fn new(system: &'a SkmSystem, x: Vec<Vec<usize>>) -> Result<Self> {
        let horizon = system.horizon();
        let mut total = vec![0.0; horizon];
        let mut movers = vec![Vec::new(); horizon];
        let mut null_events = vec![Vec::new(); horizon];
        for t in 1..horizon {
            total[t] = system.total_hazard(t, &x[t - 1])?;
            movers[t] = (0..system.num_individuals())
                .filter(|&m| x[t][m] != x[t - 1][m])
                .collect();
            null_events[t] = system
                .events_at(t)
                .iter()
                .enumerate()
                .filter(|(_, ev)| ev.participants.iter().all(|p| p.delta == 0))
                .map(|(k, _)| k)
                .collect();
        }
        Ok(Chain {
            system,
            x,
            total,
            movers,
            null_events,
        })
    }

    fn hazard_with(&self, t: usize, k: usize, m: usize, a: usize) -> f64 {
        let ev = &self.system.events_at(t)[k];
        let mut h = self.system.rate_of(ev);
        for p in &ev.participants {
            let state = if p.individual == m {
                a
            } else {
                self.x[t - 1][p.individual]
            };
            h *= p.g[state];
            if h == 0.0 {
                break;
            }
        }
        h
    }

    /// Whether event `k` maps `(a, others_{t-1})` onto `(b, others_t)`.
    fn explains(
        &self,
        t: usize,
        k: usize,
        m: usize,
        a: usize,
        b: usize,
        others_moved: &[usize],
    ) -> bool {
        let s = self.system.num_states();
        let ev = &self.system.events_at(t)[k];
        let mut moved_m = false;
        let mut covered = 0;
        for p in &ev.participants {
            if p.individual == m {
                match p.target(a, s) {
                    Some(y) if y == b => moved_m = true,
                    _ => return false,
                }
            } else {
                let from = self.x[t - 1][p.individual];
                match p.target(from, s) {
                    Some(y) if y == self.x[t][p.individual] => {
                        if y != from {
                            covered += 1;
                        }
                    }
                    _ => return false,
                }
            }
        }
        if !moved_m && a != b {
            return false;
        }
        covered == others_moved.len()
    }

    /// Conditional kernel of chain `m` at step `t`, written into `out` (`S x S`).
    fn conditional_kernel(&self, t: usize, m: usize, out: &mut [f64]) {
        let s = self.system.num_states();
        out.iter_mut().for_each(|v| *v = 0.0);
        let others_moved: Vec<usize> = self.movers[t].iter().copied().filter(|&i| i != m).collect();
        let involvement = self.system.involvement(t, m);
        // Hazard of m's own events on the current path, to rebase the total.
        let own_now: f64 = involvement
            .iter()
            .map(|inv| self.hazard_with(t, inv.event, m, self.x[t - 1][m]))
            .sum();
        let rest = self.total[t] - own_now;
        for a in 0..s {
            if others_moved.is_empty() {
                let own: f64 = involvement
                    .iter()
                    .map(|inv| self.hazard_with(t, inv.event, m, a))
                    .sum();
                out[a * s + a] += (1.0 - rest - own).max(0.0);
                for inv in involvement {
                    let h = self.hazard_with(t, inv.event, m, a);
                    if h == 0.0 {
                        continue;
                    }
                    let ev = &self.system.events_at(t)[inv.event];
                    if ev
                        .participants
                        .iter()
                        .any(|p| p.individual != m && p.delta != 0)
                    {
                        continue;
                    }
                    let b = ev.participants[inv.participant]
                        .target(a, s)
                        .expect("validated events stay in range");
                    out[a * s + b] += h;
                }
                for &k in &self.null_events[t] {
                    if !self.system.events_at(t)[k].involves(m) {
                        out[a * s + a] += self.hazard_with(t, k, m, a);
                    }
                }
            } else {
                let lead = others_moved[0];
                for inv in self.system.involvement(t, lead) {
                    let k = inv.event;
                    let h = self.hazard_with(t, k, m, a);
                    if h == 0.0 {
                        continue;
                    }
                    for b in 0..s {
                        if self.explains(t, k, m, a, b, &others_moved) {
                            out[a * s + b] += h;
                        }
                    }
                }
            }
        }
    }

    /// Posterior probability of each event at `t` given the current path.
    fn event_weights(&self, t: usize, out: &mut Vec<(usize, f64)>) {
        out.clear();
        let prev = &self.x[t - 1];
        let curr = &self.x[t];
        let candidates: Vec<usize> = match self.movers[t].first() {
            Some(&lead) => self
                .system
                .involvement(t, lead)
                .iter()
                .map(|inv| inv.event)
                .collect(),
            None => self.null_events[t].clone(),
        };
        let mut z = if self.movers[t].is_empty() {
            1.0 - self.total[t]
        } else {
            0.0
        };
        for k in candidates {
            let ev = &self.system.events_at(t)[k];
            let h = self.system.rate_of(ev) * ev.gate(prev);
            if h > 0.0 && self.system.apply_event(t, prev, k).as_deref() == Some(curr.as_slice()) {
                out.push((k, h));
                z += h;
            }
        }
        if z > 0.0 {
            out.iter_mut().for_each(|(_, h)| *h /= z);
        }
    }

    /// Redraws chain `m`; returns the number of changed cells.
    fn resample<R: Rng + ?Sized>(
        &mut self,
        m: usize,
        obs_model: &ObservationModel,
        observations: &Observations,
        kernels: &mut [f64],
        alpha: &mut [f64],
        rng: &mut R,
    ) -> usize {
        let system = self.system;
        let s = system.num_states();
        let ss = s * s;
        let horizon = system.horizon();
        let e = |t: usize, x: usize| obs_model.likelihood(x, observations.get(t, m));
        for x in 0..s {
            alpha[x] = system.initial(m)[x] * e(0, x);
        }
        normalize(&mut alpha[..s]);
        for t in 1..horizon {
            self.conditional_kernel(t, m, &mut kernels[t * ss..(t + 1) * ss]);
            let k = &kernels[t * ss..(t + 1) * ss];
            let (before, after) = alpha.split_at_mut(t * s);
            let prev = &before[(t - 1) * s..];
            for b in 0..s {
                after[b] = (0..s).map(|a| prev[a] * k[a * s + b]).sum::<f64>() * e(t, b);
            }
            normalize(&mut after[..s]);
        }
        let old: Vec<usize> = (0..horizon).map(|t| self.x[t][m]).collect();
        let mut new = vec![0; horizon];
        new[horizon - 1] = sample_index(&alpha[(horizon - 1) * s..horizon * s], rng);
        let mut w = vec![0.0; s];
        for t in (1..horizon).rev() {
            let k = &kernels[t * ss..(t + 1) * ss];
            for a in 0..s {
                w[a] = alpha[(t - 1) * s + a] * k[a * s + new[t]];
            }
            new[t - 1] = sample_index(&w, rng);
        }
        let changed = old.iter().zip(&new).filter(|(a, b)| a != b).count();
        if changed > 0 {
            // Rebase totals on the new path before writing it.
            for t in 1..horizon {
                if old[t - 1] != new[t - 1] {
                    for inv in system.involvement(t, m) {
                        self.total[t] += self.hazard_with(t, inv.event, m, new[t - 1])
                            - self.hazard_with(t, inv.event, m, old[t - 1]);
                    }
                }
            }
            for t in 0..horizon {
                self.x[t][m] = new[t];
            }
            for t in 1..horizon {
                let moves = new[t] != new[t - 1];
                let listed = self.movers[t].iter().position(|&i| i == m);
                match (moves, listed) {
                    (true, None) => {
                        self.movers[t].push(m);
                        self.movers[t].sort_unstable();
                    }
                    (false, Some(i)) => {
                        self.movers[t].remove(i);
                    }
                    _ => {}
                }
            }
        }
        changed
    }
}

fn normalize(row: &mut [f64]) {
    let z: f64 = row.iter().sum();
    if z > 0.0 {
        row.iter_mut().for_each(|v| *v /= z);
    }
}

/// Blocked Gibbs sampler; `config.samples` is the number of sweeps.
pub fn gibbs_infer(
    system: &SkmSystem,
    obs_model: &ObservationModel,
    observations: &Observations,
    config: &SamplerConfig,
) -> Result<GibbsOutput> {
    config.validate()?;
    observations.check_against(system, obs_model)?;
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let m_count = system.num_individuals();
    let horizon = system.horizon();
    let s = system.num_states();
    let ss = s * s;
    let init = draw_path(system, obs_model, observations, INIT_PARTICLES, &mut rng)?;
    let mut chain = Chain::new(system, init)?;

    let mut gamma = vec![0.0; m_count * horizon * s];
    let mut pair = vec![0.0; m_count * horizon * ss];
    let mut event_prob: Vec<Vec<f64>> = (0..horizon)
        .map(|t| vec![0.0; system.events_at(t).len()])
        .collect();
    let mut kernels = vec![0.0; horizon * ss];
    let mut alpha = vec![0.0; horizon * s];
    let mut weights = Vec::new();
    let mut change_trace = Vec::with_capacity(config.samples);
    let burn_in = config.burn_in();
    for sweep in 0..config.samples {
        let mut changed = 0;
        for m in 0..m_count {
            changed += chain.resample(
                m,
                obs_model,
                observations,
                &mut kernels,
                &mut alpha,
                &mut rng,
            );
        }
        change_trace.push(changed as f64 / (m_count * horizon) as f64);
        if sweep < burn_in {
            continue;
        }
        for t in 0..horizon {
            for m in 0..m_count {
                gamma[(m * horizon + t) * s + chain.x[t][m]] += 1.0;
                if t > 0 {
                    pair[(m * horizon + t) * ss + chain.x[t - 1][m] * s + chain.x[t][m]] += 1.0;
                }
            }
            if t > 0 {
                chain.event_weights(t, &mut weights);
                for &(k, w) in &weights {
                    event_prob[t][k] += w;
                }
            }
        }
    }
    let kept = config.samples - burn_in;
    if kept == 0 {
        return Err(SkmError::Config("no sweeps kept after burn-in".into()));
    }
    let scale = 1.0 / kept as f64;
    gamma.iter_mut().for_each(|v| *v *= scale);
    pair.iter_mut().for_each(|v| *v *= scale);
    event_prob
        .iter_mut()
        .for_each(|row| row.iter_mut().for_each(|v| *v *= scale));
    Ok(GibbsOutput {
        posterior: IndividualPosterior::new(m_count, horizon, s, gamma, pair, event_prob),
        change_trace,
        kept_sweeps: kept,
        wall_time: start.elapsed(),
    })
}

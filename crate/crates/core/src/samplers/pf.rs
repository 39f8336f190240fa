//! Bootstrap particle filter over joint states with ancestral-path smoothing.

use std::time::Instant;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, SkmError};
use crate::model::{sample_index, ObservationModel, Observations, SkmSystem, HAZARD_SLACK};
use crate::vi::IndividualPosterior;

use super::{PfOutput, SamplerConfig};

/// Full particle history. States are stored compactly as `u16`.
pub(crate) struct ParticleRun {
    pub n: usize,
    /// `states[t]`: `n x M` joint states after propagation at `t`.
    pub states: Vec<Vec<u16>>,
    /// `parents[t][i]`: index at `t - 1` of particle `i`'s parent.
    pub parents: Vec<Vec<u32>>,
    pub events: Vec<Vec<Option<u32>>>,
    /// Normalized final weights.
    pub weights: Vec<f64>,
    pub filtering: Vec<Vec<Vec<f64>>>,
    pub predictive: Vec<Vec<Vec<f64>>>,
    pub ess_trace: Vec<f64>,
    pub resamples: usize,
    pub log_evidence: f64,
}

fn normalize_log_weights(logw: &[f64], t: usize) -> Result<(Vec<f64>, f64)> {
    let max = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY || max.is_nan() {
        return Err(SkmError::WeightCollapse { t });
    }
    let w: Vec<f64> = logw.iter().map(|l| (l - max).exp()).collect();
    let z: f64 = w.iter().sum();
    Ok((w.into_iter().map(|v| v / z).collect(), max + z.ln()))
}

fn marginals(states: &[u16], weights: &[f64], m_count: usize, s: usize) -> Vec<Vec<f64>> {
    let mut out = vec![vec![0.0; s]; m_count];
    for (i, w) in weights.iter().enumerate() {
        if *w == 0.0 {
            continue;
        }
        let row = &states[i * m_count..(i + 1) * m_count];
        for (m, &x) in row.iter().enumerate() {
            out[m][x as usize] += w;
        }
    }
    out
}

pub(crate) fn run_filter<R: Rng + ?Sized>(
    system: &SkmSystem,
    obs_model: &ObservationModel,
    observations: &Observations,
    n: usize,
    ess_threshold: f64,
    rng: &mut R,
) -> Result<ParticleRun> {
    observations.check_against(system, obs_model)?;
    let m_count = system.num_individuals();
    let s = system.num_states();
    let horizon = system.horizon();
    if s > u16::MAX as usize {
        return Err(SkmError::Config(format!(
            "{s} states exceed the particle store"
        )));
    }
    let emission_log = |t: usize, x: &[u16]| -> f64 {
        x.iter()
            .enumerate()
            .map(|(m, &v)| {
                obs_model
                    .likelihood(v as usize, observations.get(t, m))
                    .ln()
            })
            .sum()
    };

    let mut states = Vec::with_capacity(horizon);
    let mut parents = Vec::with_capacity(horizon);
    let mut events = Vec::with_capacity(horizon);
    let mut filtering = Vec::with_capacity(horizon);
    let mut predictive = Vec::with_capacity(horizon);
    let mut ess_trace = Vec::with_capacity(horizon);
    let mut resamples = 0;

    let mut x0 = vec![0u16; n * m_count];
    for i in 0..n {
        for m in 0..m_count {
            x0[i * m_count + m] = sample_index(system.initial(m), rng) as u16;
        }
    }
    let uniform = vec![1.0 / n as f64; n];
    predictive.push(marginals(&x0, &uniform, m_count, s));
    let logw: Vec<f64> = (0..n)
        .map(|i| emission_log(0, &x0[i * m_count..(i + 1) * m_count]))
        .collect();
    let (mut weights, mut log_evidence) = normalize_log_weights(&logw, 0)?;
    log_evidence -= (n as f64).ln();
    filtering.push(marginals(&x0, &weights, m_count, s));
    states.push(x0);
    parents.push(Vec::new());
    events.push(vec![None; n]);

    let mut scratch = vec![0usize; m_count];
    let mut hazards = Vec::new();
    for t in 1..horizon {
        let ess = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();
        ess_trace.push(ess);
        let parent_idx: Vec<u32> = if ess < ess_threshold * n as f64 {
            resamples += 1;
            let mut cdf = Vec::with_capacity(n);
            let mut acc = 0.0;
            for w in &weights {
                acc += w;
                cdf.push(acc);
            }
            let idx = (0..n)
                .map(|_| {
                    let u = rng.random::<f64>() * acc;
                    cdf.partition_point(|&c| c <= u).min(n - 1) as u32
                })
                .collect();
            weights.iter_mut().for_each(|w| *w = 1.0 / n as f64);
            idx
        } else {
            (0..n as u32).collect()
        };
        let prev = &states[t - 1];
        let mut next = vec![0u16; n * m_count];
        let mut fired = vec![None; n];
        for i in 0..n {
            let p = parent_idx[i] as usize;
            for m in 0..m_count {
                scratch[m] = prev[p * m_count + m] as usize;
            }
            hazards.clear();
            let mut total = 0.0;
            for ev in system.events_at(t) {
                let h = system.rate_of(ev) * ev.gate(&scratch);
                total += h;
                hazards.push(h);
            }
            if total > 1.0 + HAZARD_SLACK {
                return Err(SkmError::HazardOverflow {
                    t,
                    event: None,
                    value: total,
                });
            }
            let u: f64 = rng.random();
            let mut acc = 0.0;
            for (k, h) in hazards.iter().enumerate() {
                acc += h;
                if u < acc {
                    fired[i] = Some(k as u32);
                    let ev = &system.events_at(t)[k];
                    for part in &ev.participants {
                        scratch[part.individual] = part
                            .target(scratch[part.individual], s)
                            .expect("events with positive hazard stay in range");
                    }
                    break;
                }
            }
            for m in 0..m_count {
                next[i * m_count + m] = scratch[m] as u16;
            }
        }
        predictive.push(marginals(&next, &weights, m_count, s));
        let logw: Vec<f64> = (0..n)
            .map(|i| weights[i].ln() + emission_log(t, &next[i * m_count..(i + 1) * m_count]))
            .collect();
        let (w, log_inc) = normalize_log_weights(&logw, t)?;
        log_evidence += log_inc;
        weights = w;
        filtering.push(marginals(&next, &weights, m_count, s));
        states.push(next);
        parents.push(parent_idx);
        events.push(fired);
    }
    Ok(ParticleRun {
        n,
        states,
        parents,
        events,
        weights,
        filtering,
        predictive,
        ess_trace,
        resamples,
        log_evidence,
    })
}

impl ParticleRun {
    /// Ancestor index at `t` of every final particle; `out[t][i]`.
    fn lineage(&self) -> Vec<Vec<u32>> {
        let horizon = self.states.len();
        let mut out = vec![Vec::new(); horizon];
        out[horizon - 1] = (0..self.n as u32).collect();
        for t in (1..horizon).rev() {
            out[t - 1] = out[t]
                .iter()
                .map(|&i| self.parents[t][i as usize])
                .collect();
        }
        out
    }

    /// Path of one final particle.
    pub fn path(&self, final_index: usize, m_count: usize) -> Vec<Vec<usize>> {
        let horizon = self.states.len();
        let mut idx = final_index;
        let mut rows = vec![Vec::new(); horizon];
        for t in (0..horizon).rev() {
            rows[t] = self.states[t][idx * m_count..(idx + 1) * m_count]
                .iter()
                .map(|&x| x as usize)
                .collect();
            if t > 0 {
                idx = self.parents[t][idx] as usize;
            }
        }
        rows
    }
}

/// Bootstrap particle filter; `config.samples` is the particle count.
pub fn pf_infer(
    system: &SkmSystem,
    obs_model: &ObservationModel,
    observations: &Observations,
    config: &SamplerConfig,
) -> Result<PfOutput> {
    config.validate()?;
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let n = config.samples;
    let run = run_filter(
        system,
        obs_model,
        observations,
        n,
        config.ess_threshold,
        &mut rng,
    )?;
    let m_count = system.num_individuals();
    let horizon = system.horizon();
    let s = system.num_states();
    let ss = s * s;
    let lineage = run.lineage();

    let mut gamma = vec![0.0; m_count * horizon * s];
    let mut pair = vec![0.0; m_count * horizon * ss];
    let mut event_prob: Vec<Vec<f64>> = (0..horizon)
        .map(|t| vec![0.0; system.events_at(t).len()])
        .collect();
    for (i, &w) in run.weights.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        for t in 0..horizon {
            let a = lineage[t][i] as usize;
            let row = &run.states[t][a * m_count..(a + 1) * m_count];
            for (m, &x) in row.iter().enumerate() {
                gamma[(m * horizon + t) * s + x as usize] += w;
            }
            if t > 0 {
                let p = lineage[t - 1][i] as usize;
                let prev = &run.states[t - 1][p * m_count..(p + 1) * m_count];
                for m in 0..m_count {
                    pair[(m * horizon + t) * ss + prev[m] as usize * s + row[m] as usize] += w;
                }
                if let Some(k) = run.events[t][a] {
                    event_prob[t][k as usize] += w;
                }
            }
        }
    }
    let mut posterior = IndividualPosterior::new(m_count, horizon, s, gamma, pair, event_prob);
    let mut predictive = vec![0.0; m_count * horizon * s];
    for t in 0..horizon {
        for m in 0..m_count {
            let i = (m * horizon + t) * s;
            predictive[i..i + s].copy_from_slice(&run.predictive[t][m]);
        }
    }
    posterior.set_predictive(predictive);
    let mut roots: Vec<u32> = lineage[0].clone();
    roots.sort_unstable();
    roots.dedup();
    Ok(PfOutput {
        posterior,
        filtering: run.filtering,
        ess_trace: run.ess_trace,
        resamples: run.resamples,
        surviving_roots: roots.len(),
        log_evidence: run.log_evidence,
        wall_time: start.elapsed(),
    })
}

/// One joint path with positive posterior probability, drawn from a small filter.
pub(crate) fn draw_path<R: Rng + ?Sized>(
    system: &SkmSystem,
    obs_model: &ObservationModel,
    observations: &Observations,
    particles: usize,
    rng: &mut R,
) -> Result<Vec<Vec<usize>>> {
    let run = run_filter(system, obs_model, observations, particles, 0.5, rng)?;
    let pick = sample_index(&run.weights, rng);
    Ok(run.path(pick, system.num_individuals()))
}

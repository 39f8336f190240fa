//! Exact forward-backward over the joint state space.
//!
//! Joint states are mixed-radix integers with individual 0 as the least
//! significant digit. Only usable for small systems; it is the ground truth
//! the approximate engines are checked against.

use crate::error::{Result, SkmError};
use crate::model::{ObservationModel, Observations, SkmSystem};

pub const DEFAULT_STATE_CAP: usize = 1 << 20;

/// Mixed-radix encoding of joint states.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct JointCodec {
    pub num_individuals: usize,
    pub num_states: usize,
}

impl JointCodec {
    pub fn size(&self) -> usize {
        self.num_states.pow(self.num_individuals as u32)
    }

    pub fn encode(&self, x: &[usize]) -> usize {
        x.iter().rev().fold(0, |acc, &s| acc * self.num_states + s)
    }

    pub fn decode_into(&self, mut index: usize, out: &mut [usize]) {
        for slot in out.iter_mut() {
            *slot = index % self.num_states;
            index /= self.num_states;
        }
    }

    pub fn decode(&self, index: usize) -> Vec<usize> {
        let mut out = vec![0; self.num_individuals];
        self.decode_into(index, &mut out);
        out
    }

    #[inline]
    pub fn component(&self, index: usize, m: usize) -> usize {
        (index / self.num_states.pow(m as u32)) % self.num_states
    }
}

/// One nonzero entry of the two-slice posterior.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointTransition {
    pub prev: usize,
    pub curr: usize,
    pub event: Option<usize>,
    pub prob: f64,
}

#[derive(Debug, Clone)]
pub struct JointPosterior {
    pub codec: JointCodec,
    /// `P(x_t | y_0..t)`.
    pub filtered: Vec<Vec<f64>>,
    /// `P(x_t | y_0..t-1)`; row 0 is the prior.
    pub predictive: Vec<Vec<f64>>,
    /// `P(x_t | y_0..T-1)`.
    pub gamma: Vec<Vec<f64>>,
    /// Nonzero `P(x_{t-1}, x_t, v_t | y)` entries; `xi[0]` is empty.
    pub xi: Vec<Vec<JointTransition>>,
    pub log_evidence: f64,
}

/// Nonzero kernel entries `(curr, event, prob)` leaving joint state `prev`.
fn transitions_from(
    system: &SkmSystem,
    codec: &JointCodec,
    t: usize,
    prev: usize,
    scratch: &mut [usize],
    out: &mut Vec<(usize, Option<usize>, f64)>,
) -> Result<()> {
    out.clear();
    codec.decode_into(prev, scratch);
    let mut total = 0.0;
    for (k, ev) in system.events_at(t).iter().enumerate() {
        let h = system.rate_of(ev) * ev.gate(scratch);
        if h > 0.0 {
            total += h;
            let next = system
                .apply_event(t, scratch, k)
                .expect("validated events stay in range");
            out.push((codec.encode(&next), Some(k), h));
        }
    }
    if total > 1.0 + crate::model::HAZARD_SLACK {
        return Err(SkmError::HazardOverflow {
            t,
            event: None,
            value: total,
        });
    }
    let stay = 1.0 - total;
    if stay > 0.0 {
        out.push((prev, None, stay));
    }
    Ok(())
}

pub fn exact_forward_backward(
    system: &SkmSystem,
    obs_model: &ObservationModel,
    observations: &Observations,
    cap: usize,
) -> Result<JointPosterior> {
    observations.check_against(system, obs_model)?;
    let m_count = system.num_individuals();
    let s = system.num_states();
    let states = (s as u128).checked_pow(m_count as u32).unwrap_or(u128::MAX);
    if states > cap as u128 {
        return Err(SkmError::StateSpaceTooLarge { states, cap });
    }
    let codec = JointCodec {
        num_individuals: m_count,
        num_states: s,
    };
    let n = codec.size();
    let horizon = system.horizon();
    let mut scratch = vec![0; m_count];
    let mut trans = Vec::new();

    let emission = |t: usize, x: usize| -> f64 {
        (0..m_count)
            .map(|m| obs_model.likelihood(codec.component(x, m), observations.get(t, m)))
            .product()
    };

    let mut predictive = Vec::with_capacity(horizon);
    let mut filtered: Vec<Vec<f64>> = Vec::with_capacity(horizon);
    let mut norms = Vec::with_capacity(horizon);

    let prior: Vec<f64> = (0..n)
        .map(|x| {
            (0..m_count)
                .map(|m| system.initial(m)[codec.component(x, m)])
                .product()
        })
        .collect();
    predictive.push(prior);

    for t in 0..horizon {
        if t > 0 {
            let mut pred = vec![0.0; n];
            for (prev, &a) in filtered[t - 1].iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                transitions_from(system, &codec, t, prev, &mut scratch, &mut trans)?;
                for &(curr, _, p) in &trans {
                    pred[curr] += a * p;
                }
            }
            predictive.push(pred);
        }
        let mut alpha: Vec<f64> = predictive[t]
            .iter()
            .enumerate()
            .map(|(x, &p)| p * emission(t, x))
            .collect();
        let z: f64 = alpha.iter().sum();
        if z <= 0.0 || !z.is_finite() {
            return Err(SkmError::ImpossibleEvidence { t });
        }
        alpha.iter_mut().for_each(|a| *a /= z);
        norms.push(z);
        filtered.push(alpha);
    }

    let mut beta = vec![vec![1.0; n]; horizon];
    for t in (1..horizon).rev() {
        let mut next = vec![0.0; n];
        for (prev, slot) in next.iter_mut().enumerate() {
            transitions_from(system, &codec, t, prev, &mut scratch, &mut trans)?;
            let mut acc = 0.0;
            for &(curr, _, p) in &trans {
                acc += p * emission(t, curr) * beta[t][curr];
            }
            *slot = acc / norms[t];
        }
        beta[t - 1] = next;
    }

    let gamma: Vec<Vec<f64>> = (0..horizon)
        .map(|t| {
            let mut row: Vec<f64> = filtered[t]
                .iter()
                .zip(&beta[t])
                .map(|(a, b)| a * b)
                .collect();
            let z: f64 = row.iter().sum();
            row.iter_mut().for_each(|g| *g /= z);
            row
        })
        .collect();

    let mut xi = vec![Vec::new(); horizon];
    for t in 1..horizon {
        let mut entries = Vec::new();
        for prev in 0..n {
            let a = filtered[t - 1][prev];
            if a == 0.0 {
                continue;
            }
            transitions_from(system, &codec, t, prev, &mut scratch, &mut trans)?;
            for &(curr, event, p) in &trans {
                let w = a * p * emission(t, curr) * beta[t][curr] / norms[t];
                if w > 0.0 {
                    entries.push(JointTransition {
                        prev,
                        curr,
                        event,
                        prob: w,
                    });
                }
            }
        }
        xi[t] = entries;
    }

    Ok(JointPosterior {
        codec,
        filtered,
        predictive,
        gamma,
        xi,
        log_evidence: norms.iter().map(|z| z.ln()).sum(),
    })
}

fn marginalize(codec: &JointCodec, grid: &[Vec<f64>], m: usize) -> Vec<Vec<f64>> {
    grid.iter()
        .map(|row| {
            let mut out = vec![0.0; codec.num_states];
            for (x, &p) in row.iter().enumerate() {
                out[codec.component(x, m)] += p;
            }
            out
        })
        .collect()
}

/// Smoothed `T x S` marginals of individual `m`.
pub fn exact_individual_marginals(post: &JointPosterior, m: usize) -> Vec<Vec<f64>> {
    marginalize(&post.codec, &post.gamma, m)
}

pub fn exact_individual_filtering(post: &JointPosterior, m: usize) -> Vec<Vec<f64>> {
    marginalize(&post.codec, &post.filtered, m)
}

/// One-step-ahead predictive marginals of individual `m`.
pub fn exact_individual_predictive(post: &JointPosterior, m: usize) -> Vec<Vec<f64>> {
    let mut rows = marginalize(&post.codec, &post.predictive, m);
    for row in &mut rows {
        let z: f64 = row.iter().sum();
        row.iter_mut().for_each(|p| *p /= z);
    }
    rows
}

/// `S x S` pair marginal of individual `m` across step `t` (row = previous state).
pub fn exact_individual_pair(post: &JointPosterior, m: usize, t: usize) -> Vec<f64> {
    let s = post.codec.num_states;
    let mut out = vec![0.0; s * s];
    for e in &post.xi[t] {
        let a = post.codec.component(e.prev, m);
        let b = post.codec.component(e.curr, m);
        out[a * s + b] += e.prob;
    }
    out
}

/// Posterior probability of every event instance at `t`.
pub fn exact_event_probabilities(system: &SkmSystem, post: &JointPosterior, t: usize) -> Vec<f64> {
    let mut out = vec![0.0; system.events_at(t).len()];
    for e in &post.xi[t] {
        if let Some(k) = e.event {
            out[k] += e.prob;
        }
    }
    out
}

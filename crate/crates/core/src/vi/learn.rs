//! Rate learning by alternating variational inference and closed-form updates.

use crate::error::{Result, SkmError};
use crate::model::{ObservationModel, Observations, SkmSystem};

use super::kernel::Branch;
use super::stats::subject;
use super::{Engine, IndividualPosterior, ViConfig, ViDiagnostics};

/// How the expected exposure of each rate is computed in the update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RateEstimator {
    /// Expected gate under the one-slice marginals of the previous step.
    #[default]
    Approximate,
    /// Expected gate restricted to steps where nothing fired, plus the
    /// expected event count; the stationary point of the per-step Bernoulli
    /// likelihood for small hazards.
    Exact,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnConfig {
    pub vi: ViConfig,
    pub max_iters: usize,
    /// Converged once every rate moves by less than this relative amount.
    pub rel_tol: f64,
    pub estimator: RateEstimator,
}

impl Default for LearnConfig {
    fn default() -> Self {
        LearnConfig {
            vi: ViConfig {
                track_free_energy: false,
                ..Default::default()
            },
            max_iters: 50,
            rel_tol: 1e-4,
            estimator: RateEstimator::Approximate,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LearnResult {
    pub rates: Vec<f64>,
    /// Rates after each outer iteration; entry 0 is the starting point.
    pub trace: Vec<Vec<f64>>,
    pub iterations: usize,
    pub converged: bool,
    /// Rates with zero expected exposure; these keep their starting value.
    pub no_evidence: Vec<bool>,
    pub posterior: IndividualPosterior,
    pub diagnostics: ViDiagnostics,
}

/// Learns the rate table starting from `system.rates()`.
pub fn learn_rates(
    system: &SkmSystem,
    obs_model: &ObservationModel,
    observations: &Observations,
    config: &LearnConfig,
) -> Result<LearnResult> {
    if config.max_iters == 0 || !(config.rel_tol > 0.0) {
        return Err(SkmError::Config(
            "learning needs max_iters >= 1 and a positive tolerance".into(),
        ));
    }
    let mut current = system.clone();
    let mut trace = vec![system.rates().to_vec()];
    let mut converged = false;
    let mut iterations = 0;
    let mut no_evidence = vec![false; system.rates().len()];
    loop {
        let engine = Engine::new(&current, obs_model, observations, &config.vi)?;
        let (posterior, diagnostics) = engine.infer()?;
        if iterations == config.max_iters || converged {
            return Ok(LearnResult {
                rates: current.rates().to_vec(),
                trace,
                iterations,
                converged,
                no_evidence,
                posterior,
                diagnostics,
            });
        }
        iterations += 1;
        let (counts, exposure) = expected_counts(&engine, &posterior, config.estimator);
        let old = current.rates().to_vec();
        let mut next = old.clone();
        for r in 0..old.len() {
            if exposure[r] > 0.0 {
                next[r] = (counts[r] / exposure[r]).clamp(0.0, 1.0);
                no_evidence[r] = false;
            } else {
                no_evidence[r] = true;
            }
        }
        converged = old.iter().zip(&next).all(|(a, b)| {
            let scale = a.abs().max(b.abs());
            scale == 0.0 || (a - b).abs() / scale < config.rel_tol
        });
        trace.push(next.clone());
        current = current.with_rates(next)?;
    }
}

/// Expected firing count and exposure per rate.
fn expected_counts(
    engine: &Engine<'_>,
    posterior: &IndividualPosterior,
    estimator: RateEstimator,
) -> (Vec<f64>, Vec<f64>) {
    let system = engine.system;
    let n_rates = system.rates().len();
    let s = system.num_states();
    let mut counts = vec![0.0; n_rates];
    let mut exposure = vec![0.0; n_rates];
    let state = posterior
        .variational
        .as_ref()
        .expect("engine posteriors carry their messages");
    for t in 1..system.horizon() {
        for (k, ev) in system.events_at(t).iter().enumerate() {
            counts[ev.rate] += posterior.event_prob[t][k];
            match estimator {
                RateEstimator::Approximate => {
                    let mut prod = 1.0;
                    for p in &ev.participants {
                        let g = posterior.gamma(p.individual, t - 1);
                        prod *= (0..s).map(|x| g[x] * p.g[x]).sum::<f64>();
                    }
                    exposure[ev.rate] += prod;
                }
                RateEstimator::Exact => {
                    let j = subject(ev);
                    let m = ev.participants[j].individual;
                    let slice = engine.two_slice_stats(&state.messages, &state.summaries[t], t, m);
                    let mut others = 1.0;
                    let off = system.participant_offsets(t)[k];
                    for i in 0..ev.participants.len() {
                        if i != j {
                            others *= state.summaries[t].hat[off + i];
                        }
                    }
                    let stay = slice.branch(Branch::NoEvent).map_or(0.0, |w| {
                        (0..s).map(|a| w[a * s + a] * ev.participants[j].g[a]).sum()
                    });
                    exposure[ev.rate] += stay * others + posterior.event_prob[t][k];
                }
            }
        }
    }
    (counts, exposure)
}

//! Hiding observations to set up prediction, smoothing and expansion tasks.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SkmError};
use crate::model::Observations;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "task", rename_all = "lowercase")]
pub enum MaskTask {
    /// One-step-ahead prediction. With a query time only that step is
    /// hidden; without one every cell at `t >= 1` is a target and the
    /// observations stay intact (filtering never sees `y_t` when predicting it).
    Predict { query_time: Option<usize> },
    /// Hide contiguous intervals covering `fraction` of the observed cells.
    Smooth {
        fraction: f64,
        min_len: usize,
        max_len: usize,
    },
    /// Keep only a random `observed_fraction` of individuals.
    Expand { observed_fraction: f64 },
}

impl MaskTask {
    pub fn smooth() -> Self {
        MaskTask::Smooth {
            fraction: 0.2,
            min_len: 1,
            max_len: 5,
        }
    }

    pub fn expand() -> Self {
        MaskTask::Expand {
            observed_fraction: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaskSpec {
    #[serde(flatten)]
    pub task: MaskTask,
    pub seed: u64,
}

impl MaskSpec {
    pub fn validate(&self) -> Result<()> {
        let frac = |name: &str, f: f64| {
            if f > 0.0 && f <= 1.0 {
                Ok(())
            } else {
                Err(SkmError::Config(format!("{name} {f} outside (0, 1]")))
            }
        };
        match self.task {
            MaskTask::Predict { .. } => Ok(()),
            MaskTask::Smooth {
                fraction,
                min_len,
                max_len,
            } => {
                frac("smoothing fraction", fraction)?;
                if min_len == 0 || min_len > max_len {
                    return Err(SkmError::Config(format!(
                        "interval lengths {min_len}..={max_len} are invalid"
                    )));
                }
                Ok(())
            }
            MaskTask::Expand { observed_fraction } => frac("observed fraction", observed_fraction),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaskedObservations {
    pub observations: Observations,
    /// Evaluation targets `(t, m)`, sorted.
    pub ledger: Vec<(usize, usize)>,
}

pub fn apply_mask(observations: &Observations, spec: &MaskSpec) -> Result<MaskedObservations> {
    spec.validate()?;
    let horizon = observations.horizon();
    let m_count = observations.num_individuals();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut masked = observations.clone();
    let mut ledger = Vec::new();
    match spec.task {
        MaskTask::Predict { query_time } => match query_time {
            Some(q) => {
                if q == 0 || q >= horizon {
                    return Err(SkmError::Config(format!(
                        "query time {q} must lie in 1..{horizon}"
                    )));
                }
                for m in 0..m_count {
                    masked.set(q, m, None);
                    ledger.push((q, m));
                }
            }
            None => {
                for t in 1..horizon {
                    for m in 0..m_count {
                        ledger.push((t, m));
                    }
                }
            }
        },
        MaskTask::Smooth {
            fraction,
            min_len,
            max_len,
        } => {
            let target = (fraction * observations.observed_count() as f64).round() as usize;
            let mut hidden = 0;
            while hidden < target {
                let m = rng.random_range(0..m_count);
                let len = rng.random_range(min_len..=max_len);
                let start = rng.random_range(0..horizon);
                for t in start..(start + len).min(horizon) {
                    if masked.get(t, m).is_some() && hidden < target {
                        masked.set(t, m, None);
                        ledger.push((t, m));
                        hidden += 1;
                    }
                }
            }
        }
        MaskTask::Expand { observed_fraction } => {
            let keep = ((observed_fraction * m_count as f64).round() as usize)
                .max(1)
                .min(m_count);
            let mut visible = vec![false; m_count];
            for i in rand::seq::index::sample(&mut rng, m_count, keep) {
                visible[i] = true;
            }
            for t in 0..horizon {
                for (m, &vis) in visible.iter().enumerate() {
                    if !vis && masked.get(t, m).is_some() {
                        masked.set(t, m, None);
                        ledger.push((t, m));
                    }
                }
            }
        }
    }
    ledger.sort_unstable();
    Ok(MaskedObservations {
        observations: masked,
        ledger,
    })
}

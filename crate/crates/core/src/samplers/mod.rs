//! Monte Carlo baselines: blocked Gibbs sampling and a bootstrap particle filter.
//!
//! Both target the single-event kernel exactly and hold rates fixed.

mod gibbs;
mod pf;

use std::time::Duration;

use crate::error::{Result, SkmError};
use crate::vi::IndividualPosterior;

pub use gibbs::gibbs_infer;
pub use pf::pf_infer;

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig {
    /// Gibbs sweeps or particle count.
    pub samples: usize,
    /// Gibbs sweeps discarded before collecting; defaults to a tenth.
    pub burn_in: Option<usize>,
    /// Resample when the effective sample size drops below this fraction.
    pub ess_threshold: f64,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            samples: 1000,
            burn_in: None,
            ess_threshold: 0.5,
            seed: 0,
        }
    }
}

impl SamplerConfig {
    pub fn with_samples(samples: usize, seed: u64) -> Self {
        SamplerConfig {
            samples,
            seed,
            ..Default::default()
        }
    }

    pub fn burn_in(&self) -> usize {
        self.burn_in.unwrap_or(self.samples / 10)
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(SkmError::Config("sample count must be positive".into()));
        }
        if self.burn_in() >= self.samples {
            return Err(SkmError::Config(format!(
                "burn-in {} must be below the sample count {}",
                self.burn_in(),
                self.samples
            )));
        }
        if !(0.0..=1.0).contains(&self.ess_threshold) {
            return Err(SkmError::Config("ESS threshold must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct GibbsOutput {
    pub posterior: IndividualPosterior,
    /// Fraction of `(m, t)` cells that changed in each sweep.
    pub change_trace: Vec<f64>,
    pub kept_sweeps: usize,
    pub wall_time: Duration,
}

#[derive(Debug, Clone)]
pub struct PfOutput {
    /// Smoothed marginals from ancestral paths; predictive marginals included.
    pub posterior: IndividualPosterior,
    /// `filtering[t][m]`: `P(x_t^(m) | y_0..t)` estimate.
    pub filtering: Vec<Vec<Vec<f64>>>,
    pub ess_trace: Vec<f64>,
    pub resamples: usize,
    /// Distinct ancestors at `t = 0` among the final particles.
    pub surviving_roots: usize,
    pub log_evidence: f64,
    pub wall_time: Duration,
}

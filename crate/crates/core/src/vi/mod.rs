//! Variational forward/backward message passing for stochastic kinetic models.
//!
//! Each individual keeps its own forward (`alpha`) and backward (`beta`)
//! messages. The coupling between individuals enters only through
//! [`NeighborSummaries`]: the expected gating factors of the other
//! participants of every event, which turn the joint event kernel into a
//! per-individual marginalized kernel. One iteration freezes all summaries
//! from the previous messages (Jacobi schedule), then runs a full forward
//! sweep and a full backward sweep. Cost per iteration is linear in the
//! number of individuals.

mod kernel;
mod learn;
mod stats;

use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::error::{Result, SkmError};
use crate::model::{ObservationModel, Observations, SkmSystem};

pub use kernel::{Branch, MarginalKernel, NeighborSummaries};
pub use learn::{learn_rates, LearnConfig, LearnResult, RateEstimator};
pub use stats::{bethe_free_energy, TwoSlice};

/// Which events shape an individual's marginalized kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Coupling {
    /// `Global` when the worst-case total hazard of every step fits in one,
    /// `Local` otherwise.
    #[default]
    Auto,
    /// Only events the individual participates in.
    Local,
    /// Every event at the step; events not involving the individual add a
    /// stay-in-place mass and compete for the no-event probability.
    Global,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mode {
    #[default]
    Smoothing,
    /// Backward messages stay uniform; also yields one-step-ahead predictions.
    Filtering,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ViConfig {
    pub max_iters: usize,
    /// Stop once the largest change in any one-slice marginal is below this.
    pub tol: f64,
    /// Weight of the previous message when blending in an update.
    pub damping: f64,
    /// Probability floor for degenerate denominators and negative masses.
    pub floor: f64,
    pub mode: Mode,
    pub coupling: Coupling,
    pub track_free_energy: bool,
    /// Run exactly `max_iters` iterations regardless of the residual.
    pub pinned: bool,
}

impl Default for ViConfig {
    fn default() -> Self {
        ViConfig {
            max_iters: 100,
            tol: 1e-6,
            damping: 0.0,
            floor: 1e-12,
            mode: Mode::Smoothing,
            coupling: Coupling::Auto,
            track_free_energy: true,
            pinned: false,
        }
    }
}

impl ViConfig {
    pub fn filtering() -> Self {
        ViConfig {
            mode: Mode::Filtering,
            ..Default::default()
        }
    }

    /// Fixed iteration count, for timing.
    pub fn pinned(iterations: usize) -> Self {
        ViConfig {
            max_iters: iterations,
            pinned: true,
            track_free_energy: false,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(SkmError::Config("tol must be positive".into()));
        }
        if !(self.floor > 0.0) {
            return Err(SkmError::Config("floor must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.damping) {
            return Err(SkmError::Config("damping must lie in [0, 1)".into()));
        }
        if self.max_iters == 0 {
            return Err(SkmError::Config("max_iters must be at least 1".into()));
        }
        Ok(())
    }
}

/// Per-individual forward/backward messages, each row normalized.
#[derive(Debug, Clone, PartialEq)]
pub struct Messages {
    num_individuals: usize,
    horizon: usize,
    num_states: usize,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    log_z: Vec<f64>,
}

impl Messages {
    pub fn uniform(num_individuals: usize, horizon: usize, num_states: usize) -> Self {
        let n = num_individuals * horizon * num_states;
        let u = 1.0 / num_states as f64;
        Messages {
            num_individuals,
            horizon,
            num_states,
            alpha: vec![u; n],
            beta: vec![u; n],
            log_z: vec![0.0; num_individuals * horizon],
        }
    }

    #[inline]
    fn idx(&self, m: usize, t: usize) -> usize {
        (m * self.horizon + t) * self.num_states
    }

    #[inline]
    pub fn alpha(&self, m: usize, t: usize) -> &[f64] {
        let i = self.idx(m, t);
        &self.alpha[i..i + self.num_states]
    }

    #[inline]
    pub fn beta(&self, m: usize, t: usize) -> &[f64] {
        let i = self.idx(m, t);
        &self.beta[i..i + self.num_states]
    }

    /// Overwrites the forward message of `(m, t)`; `row` should be normalized.
    pub fn set_alpha(&mut self, m: usize, t: usize, row: &[f64]) {
        let i = self.idx(m, t);
        self.alpha[i..i + self.num_states].copy_from_slice(row);
    }

    pub fn set_beta(&mut self, m: usize, t: usize, row: &[f64]) {
        let i = self.idx(m, t);
        self.beta[i..i + self.num_states].copy_from_slice(row);
    }

    /// Log of the forward normalizer of `(m, t)`.
    pub fn log_z(&self, m: usize, t: usize) -> f64 {
        self.log_z[m * self.horizon + t]
    }

    pub fn num_individuals(&self) -> usize {
        self.num_individuals
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }
}

/// Counters for numerical safeguards that fired.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Degeneracy {
    pub floored_denominators: usize,
    pub clamped_no_event: usize,
    pub zero_rows: usize,
}

impl Degeneracy {
    fn absorb(&mut self, other: Degeneracy) {
        self.floored_denominators += other.floored_denominators;
        self.clamped_no_event += other.clamped_no_event;
        self.zero_rows += other.zero_rows;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ViDiagnostics {
    pub iterations: usize,
    pub converged: bool,
    pub residual: f64,
    pub residual_trace: Vec<f64>,
    pub free_energy_trace: Vec<f64>,
    pub degeneracy: Degeneracy,
    pub wall_time: Duration,
}

/// Message state kept alongside a variational posterior.
#[derive(Debug, Clone)]
pub struct VariationalState {
    pub messages: Messages,
    /// Summaries used by the final sweeps; index 0 is unused.
    pub summaries: Vec<NeighborSummaries>,
    pub coupling: Coupling,
    pub floor: f64,
}

/// Per-individual posterior statistics.
#[derive(Debug, Clone)]
pub struct IndividualPosterior {
    pub num_individuals: usize,
    pub horizon: usize,
    pub num_states: usize,
    gamma: Vec<f64>,
    pair: Vec<f64>,
    /// `event_prob[t][k]`: posterior probability that event instance `k` fires at `t`.
    pub event_prob: Vec<Vec<f64>>,
    predictive: Option<Vec<f64>>,
    pub variational: Option<VariationalState>,
}

impl IndividualPosterior {
    pub(crate) fn new(
        num_individuals: usize,
        horizon: usize,
        num_states: usize,
        gamma: Vec<f64>,
        pair: Vec<f64>,
        event_prob: Vec<Vec<f64>>,
    ) -> Self {
        IndividualPosterior {
            num_individuals,
            horizon,
            num_states,
            gamma,
            pair,
            event_prob,
            predictive: None,
            variational: None,
        }
    }

    pub(crate) fn set_predictive(&mut self, predictive: Vec<f64>) {
        self.predictive = Some(predictive);
    }

    /// One-slice marginal of individual `m` at `t`.
    pub fn gamma(&self, m: usize, t: usize) -> &[f64] {
        let i = (m * self.horizon + t) * self.num_states;
        &self.gamma[i..i + self.num_states]
    }

    /// `T x S` marginals of individual `m`.
    pub fn marginals(&self, m: usize) -> Vec<Vec<f64>> {
        (0..self.horizon)
            .map(|t| self.gamma(m, t).to_vec())
            .collect()
    }

    /// Two-slice marginal of `m` across step `t >= 1`, summed over events
    /// (`S x S`, row = previous state).
    pub fn pair(&self, m: usize, t: usize) -> &[f64] {
        let ss = self.num_states * self.num_states;
        let i = (m * self.horizon + t) * ss;
        &self.pair[i..i + ss]
    }

    /// One-step-ahead predictive marginal, available in filtering mode.
    pub fn predictive(&self, m: usize, t: usize) -> Option<&[f64]> {
        self.predictive.as_ref().map(|p| {
            let i = (m * self.horizon + t) * self.num_states;
            &p[i..i + self.num_states]
        })
    }

    pub fn has_predictive(&self) -> bool {
        self.predictive.is_some()
    }

    /// Probability of state `s` for every `(t, m)` as a `T x M` grid.
    pub fn state_probability_grid(&self, s: usize) -> Vec<Vec<f64>> {
        (0..self.horizon)
            .map(|t| {
                (0..self.num_individuals)
                    .map(|m| self.gamma(m, t)[s])
                    .collect()
            })
            .collect()
    }
}

/// Bundles the inputs shared by all engine operations.
pub struct Engine<'a> {
    pub system: &'a SkmSystem,
    pub obs_model: &'a ObservationModel,
    pub observations: &'a Observations,
    pub config: &'a ViConfig,
    /// Resolved coupling, never `Auto`.
    pub coupling: Coupling,
    /// `P(y_t^(m) | x)` at `(t * M + m) * S + x`.
    emission: Vec<f64>,
    plan: kernel::KernelPlan,
}

/// Resolves `Auto` against the system's worst-case hazard budget.
pub fn resolve_coupling(system: &SkmSystem, coupling: Coupling) -> Coupling {
    match coupling {
        Coupling::Auto => {
            let fits = (1..system.horizon()).all(|t| {
                let worst: f64 = system
                    .events_at(t)
                    .iter()
                    .map(|ev| {
                        system.rate_of(ev)
                            * ev.participants
                                .iter()
                                .map(|p| p.g.iter().cloned().fold(0.0, f64::max))
                                .product::<f64>()
                    })
                    .sum();
                worst <= 1.0 + crate::model::HAZARD_SLACK
            });
            if fits {
                Coupling::Global
            } else {
                Coupling::Local
            }
        }
        other => other,
    }
}

/// Dense kernels for every `(m, t)`, laid out `m`-major.
struct KernelCache {
    data: Vec<f64>,
    degeneracy: Degeneracy,
}

impl<'a> Engine<'a> {
    pub fn new(
        system: &'a SkmSystem,
        obs_model: &'a ObservationModel,
        observations: &'a Observations,
        config: &'a ViConfig,
    ) -> Result<Self> {
        config.validate()?;
        observations.check_against(system, obs_model)?;
        let (m_count, horizon, s) = (
            system.num_individuals(),
            system.horizon(),
            system.num_states(),
        );
        let mut emission = vec![0.0; horizon * m_count * s];
        for t in 0..horizon {
            for m in 0..m_count {
                let y = observations.get(t, m);
                for x in 0..s {
                    emission[(t * m_count + m) * s + x] = obs_model.likelihood(x, y);
                }
            }
        }
        Ok(Engine {
            system,
            obs_model,
            observations,
            config,
            coupling: resolve_coupling(system, config.coupling),
            emission,
            plan: kernel::KernelPlan::new(system),
        })
    }

    #[inline]
    fn emission(&self, t: usize, m: usize, x: usize) -> f64 {
        self.emission[(t * self.system.num_individuals() + m) * self.system.num_states() + x]
    }

    fn step_emission(&self, t: usize) -> &[f64] {
        let n = self.system.num_individuals() * self.system.num_states();
        &self.emission[t * n..(t + 1) * n]
    }

    fn dims(&self) -> (usize, usize, usize) {
        (
            self.system.num_individuals(),
            self.system.horizon(),
            self.system.num_states(),
        )
    }

    /// Neighbor summaries for step `t >= 1` from the given messages.
    pub fn neighbor_summaries(&self, messages: &Messages, t: usize) -> NeighborSummaries {
        self.plan.summaries(
            self.system,
            messages,
            t,
            self.config.floor,
            Some(self.step_emission(t)),
        )
    }

    /// Summaries with step `t`'s evidence hidden and uniform backward
    /// messages, as needed for one-step-ahead prediction.
    fn predictive_summaries(&self, messages: &Messages, t: usize) -> NeighborSummaries {
        let (m_count, horizon, s) = self.dims();
        let mut causal = messages.clone();
        let u = 1.0 / s as f64;
        for m in 0..m_count {
            let i = causal.idx(m, t);
            causal.beta[i..i + s].iter_mut().for_each(|b| *b = u);
        }
        debug_assert!(t < horizon);
        self.plan
            .summaries(self.system, &causal, t, self.config.floor, None)
    }

    fn all_summaries(&self, messages: &Messages) -> Vec<NeighborSummaries> {
        let horizon = self.system.horizon();
        let mut out: Vec<NeighborSummaries> = (1..horizon)
            .into_par_iter()
            .map(|t| self.neighbor_summaries(messages, t))
            .collect();
        out.insert(0, NeighborSummaries::default());
        out
    }

    /// Marginalized kernel of individual `m` at step `t`.
    pub fn marginal_kernel(
        &self,
        summaries: &NeighborSummaries,
        t: usize,
        m: usize,
    ) -> MarginalKernel {
        MarginalKernel::build(
            self.system,
            summaries,
            t,
            m,
            self.coupling,
            self.config.floor,
        )
    }

    fn kernel_cache(&self, summaries: &[NeighborSummaries]) -> KernelCache {
        let (_, horizon, s) = self.dims();
        let ss = s * s;
        let mut data = vec![0.0; self.system.num_individuals() * horizon * ss];
        let clamped: usize = data
            .par_chunks_mut(horizon * ss)
            .enumerate()
            .map(|(m, chunk)| {
                let mut clamped = 0;
                for t in 1..horizon {
                    clamped += self.plan.fill(
                        &summaries[t],
                        t,
                        m,
                        self.coupling,
                        self.config.floor,
                        &mut chunk[t * ss..(t + 1) * ss],
                    );
                }
                clamped
            })
            .sum();
        KernelCache {
            data,
            degeneracy: Degeneracy {
                floored_denominators: summaries.iter().map(|s| s.degenerate).sum(),
                clamped_no_event: clamped,
                zero_rows: 0,
            },
        }
    }

    /// Recomputes every forward message from the given summaries.
    pub fn forward_sweep(
        &self,
        messages: &mut Messages,
        summaries: &[NeighborSummaries],
    ) -> Degeneracy {
        let cache = self.kernel_cache(summaries);
        let mut d = cache.degeneracy;
        d.zero_rows += self.forward_with(messages, &cache);
        d
    }

    /// Recomputes every backward message from the given summaries.
    pub fn backward_sweep(
        &self,
        messages: &mut Messages,
        summaries: &[NeighborSummaries],
    ) -> Degeneracy {
        let cache = self.kernel_cache(summaries);
        let mut d = cache.degeneracy;
        d.zero_rows += self.backward_with(messages, &cache);
        d
    }

    fn forward_with(&self, messages: &mut Messages, cache: &KernelCache) -> usize {
        let (_, horizon, s) = self.dims();
        let ss = s * s;
        let damping = self.config.damping;
        let Messages { alpha, log_z, .. } = messages;
        alpha
            .par_chunks_mut(horizon * s)
            .zip(log_z.par_chunks_mut(horizon))
            .zip(cache.data.par_chunks(horizon * ss))
            .enumerate()
            .map(|(m, ((alpha_m, logz_m), kern_m))| {
                let mut zero_rows = 0;
                let mut next = vec![0.0; s];
                for t in 0..horizon {
                    if t == 0 {
                        let init = self.system.initial(m);
                        for x in 0..s {
                            next[x] = init[x] * self.emission(0, m, x);
                        }
                    } else {
                        let (before, rest) = alpha_m.split_at(t * s);
                        let prev = &before[(t - 1) * s..];
                        let k = &kern_m[t * ss..(t + 1) * ss];
                        let _ = rest;
                        for b in 0..s {
                            let mut acc = 0.0;
                            for a in 0..s {
                                acc += prev[a] * k[a * s + b];
                            }
                            next[b] = acc * self.emission(t, m, b);
                        }
                    }
                    let row = &mut alpha_m[t * s..(t + 1) * s];
                    let (z, zero) = normalize_into(&next, row, damping);
                    zero_rows += zero as usize;
                    logz_m[t] = z.ln();
                }
                zero_rows
            })
            .sum()
    }

    fn backward_with(&self, messages: &mut Messages, cache: &KernelCache) -> usize {
        let (_, horizon, s) = self.dims();
        let ss = s * s;
        let damping = self.config.damping;
        let u = 1.0 / s as f64;
        messages
            .beta
            .par_chunks_mut(horizon * s)
            .zip(cache.data.par_chunks(horizon * ss))
            .enumerate()
            .map(|(m, (beta_m, kern_m))| {
                let mut zero_rows = 0;
                let mut next = vec![0.0; s];
                beta_m[(horizon - 1) * s..].iter_mut().for_each(|b| *b = u);
                for t in (1..horizon).rev() {
                    let k = &kern_m[t * ss..(t + 1) * ss];
                    {
                        let later = &beta_m[t * s..(t + 1) * s];
                        for a in 0..s {
                            let mut acc = 0.0;
                            for b in 0..s {
                                acc += k[a * s + b] * self.emission(t, m, b) * later[b];
                            }
                            next[a] = acc;
                        }
                    }
                    let row = &mut beta_m[(t - 1) * s..t * s];
                    let (_, zero) = normalize_into(&next, row, damping);
                    zero_rows += zero as usize;
                }
                zero_rows
            })
            .sum()
    }

    fn gamma_of(&self, messages: &Messages, mode: Mode) -> Vec<f64> {
        let (m_count, horizon, s) = self.dims();
        let mut gamma = vec![0.0; m_count * horizon * s];
        gamma
            .par_chunks_mut(horizon * s)
            .enumerate()
            .for_each(|(m, g_m)| {
                for t in 0..horizon {
                    let a = messages.alpha(m, t);
                    let b = messages.beta(m, t);
                    let row = &mut g_m[t * s..(t + 1) * s];
                    let mut z = 0.0;
                    for x in 0..s {
                        row[x] = match mode {
                            Mode::Smoothing => a[x] * b[x],
                            Mode::Filtering => a[x],
                        };
                        z += row[x];
                    }
                    if z > 0.0 {
                        row.iter_mut().for_each(|v| *v /= z);
                    } else {
                        row.iter_mut().for_each(|v| *v = 1.0 / s as f64);
                    }
                }
            });
        gamma
    }

    /// Causal first pass: summaries for step `t` are built from the forward
    /// messages just computed at `t - 1` with uniform backward messages.
    fn initialize(&self, messages: &mut Messages) -> (Vec<NeighborSummaries>, Degeneracy) {
        let (m_count, horizon, s) = self.dims();
        let ss = s * s;
        let mut summaries = vec![NeighborSummaries::default(); horizon];
        let mut degeneracy = Degeneracy::default();
        let mut kern = vec![0.0; ss];
        let mut next = vec![0.0; s];
        for m in 0..m_count {
            let init = self.system.initial(m);
            for x in 0..s {
                next[x] = init[x] * self.emission(0, m, x);
            }
            let i = messages.idx(m, 0);
            let (z, zero) = normalize_into(&next, &mut messages.alpha[i..i + s], 0.0);
            degeneracy.zero_rows += zero as usize;
            messages.log_z[m * horizon] = z.ln();
        }
        for t in 1..horizon {
            let sm = self.neighbor_summaries(messages, t);
            degeneracy.floored_denominators += sm.degenerate;
            for m in 0..m_count {
                degeneracy.clamped_no_event +=
                    self.plan
                        .fill(&sm, t, m, self.coupling, self.config.floor, &mut kern);
                let prev = messages.alpha(m, t - 1).to_vec();
                for b in 0..s {
                    let acc: f64 = (0..s).map(|a| prev[a] * kern[a * s + b]).sum();
                    next[b] = acc * self.emission(t, m, b);
                }
                let i = messages.idx(m, t);
                let (z, zero) = normalize_into(&next, &mut messages.alpha[i..i + s], 0.0);
                degeneracy.zero_rows += zero as usize;
                messages.log_z[m * horizon + t] = z.ln();
            }
            summaries[t] = sm;
        }
        (summaries, degeneracy)
    }

    /// Runs message passing to convergence (or the iteration cap).
    pub fn infer(&self) -> Result<(IndividualPosterior, ViDiagnostics)> {
        // Enter the thread pool once; every parallel sweep then starts from a
        // worker instead of paying a cross-thread handoff.
        let start = Instant::now();
        rayon::scope(|_| self.run(start))
    }

    fn run(&self, start: Instant) -> Result<(IndividualPosterior, ViDiagnostics)> {
        let (m_count, horizon, s) = self.dims();
        let mode = self.config.mode;
        let mut messages = Messages::uniform(m_count, horizon, s);
        let (mut summaries, mut degeneracy) = self.initialize(&mut messages);
        let mut gamma = self.gamma_of(&messages, Mode::Filtering);

        let mut residual_trace = Vec::new();
        let mut free_energy_trace = Vec::new();
        let mut converged = false;
        let mut residual = f64::INFINITY;
        let mut iterations = 0;
        while iterations < self.config.max_iters {
            iterations += 1;
            summaries = self.all_summaries(&messages);
            let cache = self.kernel_cache(&summaries);
            degeneracy.absorb(cache.degeneracy);
            degeneracy.zero_rows += self.forward_with(&mut messages, &cache);
            if mode == Mode::Smoothing {
                degeneracy.zero_rows += self.backward_with(&mut messages, &cache);
            }
            let next = self.gamma_of(&messages, mode);
            residual = gamma
                .iter()
                .zip(&next)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            gamma = next;
            residual_trace.push(residual);
            if self.config.track_free_energy {
                free_energy_trace.push(stats::free_energy(self, &messages, &summaries, &gamma));
            }
            if residual < self.config.tol {
                converged = true;
                if !self.config.pinned {
                    break;
                }
            }
        }

        let (pair, event_prob) = stats::pair_and_event_probs(self, &messages, &summaries);
        let mut posterior = IndividualPosterior::new(m_count, horizon, s, gamma, pair, event_prob);
        if mode == Mode::Filtering {
            posterior.set_predictive(self.predictive(&messages));
        }
        posterior.variational = Some(VariationalState {
            messages,
            summaries,
            coupling: self.coupling,
            floor: self.config.floor,
        });
        let diagnostics = ViDiagnostics {
            iterations,
            converged,
            residual,
            residual_trace,
            free_energy_trace,
            degeneracy,
            wall_time: start.elapsed(),
        };
        Ok((posterior, diagnostics))
    }

    /// `P(x_t | y_0..t-1)` for every `(m, t)`.
    fn predictive(&self, messages: &Messages) -> Vec<f64> {
        let (m_count, horizon, s) = self.dims();
        let ss = s * s;
        let mut out = vec![0.0; m_count * horizon * s];
        let sums: Vec<NeighborSummaries> = (1..horizon)
            .into_par_iter()
            .map(|t| self.predictive_summaries(messages, t))
            .collect();
        out.par_chunks_mut(horizon * s)
            .enumerate()
            .for_each(|(m, out_m)| {
                let mut kern = vec![0.0; ss];
                out_m[..s].copy_from_slice(self.system.initial(m));
                for t in 1..horizon {
                    self.plan.fill(
                        &sums[t - 1],
                        t,
                        m,
                        self.coupling,
                        self.config.floor,
                        &mut kern,
                    );
                    let prev = messages.alpha(m, t - 1);
                    let row = &mut out_m[t * s..(t + 1) * s];
                    let mut z = 0.0;
                    for b in 0..s {
                        row[b] = (0..s).map(|a| prev[a] * kern[a * s + b]).sum();
                        z += row[b];
                    }
                    if z > 0.0 {
                        row.iter_mut().for_each(|v| *v /= z);
                    }
                }
            });
        out
    }
}

/// Normalizes `src` into `dst`, optionally blending with the old `dst`.
/// Returns the normalizer and whether the row was all zero (replaced by uniform).
fn normalize_into(src: &[f64], dst: &mut [f64], damping: f64) -> (f64, bool) {
    let z: f64 = src.iter().sum();
    let n = src.len() as f64;
    if !(z > 0.0) || !z.is_finite() {
        dst.iter_mut().for_each(|d| *d = 1.0 / n);
        return (f64::MIN_POSITIVE, true);
    }
    if damping > 0.0 {
        for (d, v) in dst.iter_mut().zip(src) {
            *d = (1.0 - damping) * (v / z) + damping * *d;
        }
        let zz: f64 = dst.iter().sum();
        dst.iter_mut().for_each(|d| *d /= zz);
    } else {
        for (d, v) in dst.iter_mut().zip(src) {
            *d = v / z;
        }
    }
    (z, false)
}

/// Runs variational inference with the given configuration.
pub fn infer(
    system: &SkmSystem,
    obs_model: &ObservationModel,
    observations: &Observations,
    config: &ViConfig,
) -> Result<(IndividualPosterior, ViDiagnostics)> {
    Engine::new(system, obs_model, observations, config)?.infer()
}

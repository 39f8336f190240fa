use std::path::PathBuf;

use clap::ValueEnum;
use serde::Serialize;
use serde_json::{json, Value};
use skm_core::epidemic::INFECTIOUS;
use skm_core::exact::{
    exact_forward_backward, exact_individual_filtering, exact_individual_marginals,
    exact_individual_predictive, DEFAULT_STATE_CAP,
};
use skm_core::io::{
    apply_mask, write_cell_values, write_json, write_ledger, CellValue, MaskSpec, MaskTask,
};
use skm_core::model::{ObservationModel, Observations};
use skm_core::samplers::{gibbs_infer, pf_infer, SamplerConfig};
use skm_core::vi::{infer, IndividualPosterior, Mode, ViConfig};
use skm_core::SkmSystem;

use crate::dataset::Dataset;
use crate::manifest::Run;
use crate::UsageError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Viskm,
    Gibbs,
    Pf,
    Exact,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Predict,
    Smooth,
    Expand,
}

#[derive(clap::Args, Debug, Serialize)]
pub struct Args {
    /// Dataset directory written by `simulate`.
    #[arg(long)]
    pub dir: PathBuf,
    #[arg(long, value_enum, default_value_t = Method::Viskm)]
    pub method: Method,
    #[arg(long, value_enum, default_value_t = Task::Smooth)]
    pub task: Task,
    /// Hidden fraction for smooth (default 0.2); observed-individual fraction for expand (default 0.1).
    #[arg(long)]
    pub mask_fraction: Option<f64>,
    /// 1-based step to predict; without it every step after the first is scored.
    #[arg(long)]
    pub query_time: Option<usize>,
    /// VI iteration cap (default 100), or Gibbs sweeps / particles (default 1000).
    #[arg(long)]
    pub iters: Option<usize>,
    /// VI convergence tolerance.
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    /// Seed for the mask and the samplers.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

/// Infection probabilities as `[t][m]` grids.
struct Estimate {
    posterior: Vec<Vec<f64>>,
    predictive: Option<Vec<Vec<f64>>>,
    converged: bool,
    /// Deterministic engine diagnostics; timing is kept apart so outputs hash reproducibly.
    diagnostics: Value,
    seconds: f64,
}

fn grid(horizon: usize, m_count: usize, f: impl Fn(usize, usize) -> f64) -> Vec<Vec<f64>> {
    (0..horizon)
        .map(|t| (0..m_count).map(|m| f(t, m)).collect())
        .collect()
}

fn predictive_grid(post: &IndividualPosterior) -> Option<Vec<Vec<f64>>> {
    post.has_predictive().then(|| {
        grid(post.horizon, post.num_individuals, |t, m| {
            post.predictive(m, t).expect("checked above")[INFECTIOUS]
        })
    })
}

fn mask_task(args: &Args) -> anyhow::Result<MaskTask> {
    let task = match args.task {
        Task::Predict => {
            if args.mask_fraction.is_some() {
                return Err(UsageError("--mask-fraction does not apply to predict".into()).into());
            }
            let query_time = match args.query_time {
                Some(0) => return Err(UsageError("--query-time is 1-based".into()).into()),
                q => q.map(|t| t - 1),
            };
            MaskTask::Predict { query_time }
        }
        Task::Smooth | Task::Expand if args.query_time.is_some() => {
            return Err(UsageError("--query-time only applies to predict".into()).into());
        }
        Task::Smooth => match (MaskTask::smooth(), args.mask_fraction) {
            (
                MaskTask::Smooth {
                    min_len, max_len, ..
                },
                Some(fraction),
            ) => MaskTask::Smooth {
                fraction,
                min_len,
                max_len,
            },
            (task, _) => task,
        },
        Task::Expand => match args.mask_fraction {
            Some(observed_fraction) => MaskTask::Expand { observed_fraction },
            None => MaskTask::expand(),
        },
    };
    Ok(task)
}

fn estimate(
    args: &Args,
    system: &SkmSystem,
    obs_model: &ObservationModel,
    observations: &Observations,
) -> anyhow::Result<Estimate> {
    let predict = args.task == Task::Predict;
    let (horizon, m_count) = (system.horizon(), system.num_individuals());
    let sampler = SamplerConfig::with_samples(args.iters.unwrap_or(1000), args.seed);
    let start = std::time::Instant::now();
    let estimate = match args.method {
        Method::Viskm => {
            let config = ViConfig {
                max_iters: args.iters.unwrap_or(100),
                tol: args.tol,
                mode: if predict {
                    Mode::Filtering
                } else {
                    Mode::Smoothing
                },
                ..Default::default()
            };
            let (post, diag) = infer(system, obs_model, observations, &config)?;
            Estimate {
                posterior: post.state_probability_grid(INFECTIOUS),
                predictive: predictive_grid(&post),
                converged: diag.converged,
                diagnostics: json!({
                    "iterations": diag.iterations,
                    "converged": diag.converged,
                    "residual": diag.residual,
                    "residual_trace": diag.residual_trace,
                    "free_energy": diag.free_energy_trace.last(),
                    "floored_denominators": diag.degeneracy.floored_denominators,
                    "clamped_no_event": diag.degeneracy.clamped_no_event,
                    "zero_rows": diag.degeneracy.zero_rows,
                }),
                seconds: diag.wall_time.as_secs_f64(),
            }
        }
        Method::Gibbs => {
            if predict {
                return Err(UsageError(
                    "gibbs gives no one-step predictions; use viskm, pf or exact".into(),
                )
                .into());
            }
            let out = gibbs_infer(system, obs_model, observations, &sampler)?;
            let tail = &out.change_trace[out.change_trace.len().saturating_sub(out.kept_sweeps)..];
            Estimate {
                posterior: out.posterior.state_probability_grid(INFECTIOUS),
                predictive: None,
                converged: true,
                diagnostics: json!({
                    "sweeps": sampler.samples,
                    "kept_sweeps": out.kept_sweeps,
                    "mean_change_rate": tail.iter().sum::<f64>() / tail.len().max(1) as f64,
                }),
                seconds: out.wall_time.as_secs_f64(),
            }
        }
        Method::Pf => {
            let out = pf_infer(system, obs_model, observations, &sampler)?;
            let posterior = if predict {
                grid(horizon, m_count, |t, m| out.filtering[t][m][INFECTIOUS])
            } else {
                out.posterior.state_probability_grid(INFECTIOUS)
            };
            Estimate {
                posterior,
                predictive: predictive_grid(&out.posterior),
                converged: true,
                diagnostics: json!({
                    "particles": sampler.samples,
                    "resamples": out.resamples,
                    "surviving_roots": out.surviving_roots,
                    "min_ess": out.ess_trace.iter().copied().fold(f64::INFINITY, f64::min),
                    "log_evidence": out.log_evidence,
                }),
                seconds: out.wall_time.as_secs_f64(),
            }
        }
        Method::Exact => {
            let post = exact_forward_backward(system, obs_model, observations, DEFAULT_STATE_CAP)?;
            let per_m: Vec<Vec<Vec<f64>>> = (0..m_count)
                .map(|m| {
                    if predict {
                        exact_individual_filtering(&post, m)
                    } else {
                        exact_individual_marginals(&post, m)
                    }
                })
                .collect();
            let pred: Vec<Vec<Vec<f64>>> = (0..m_count)
                .map(|m| exact_individual_predictive(&post, m))
                .collect();
            Estimate {
                posterior: grid(horizon, m_count, |t, m| per_m[m][t][INFECTIOUS]),
                predictive: Some(grid(horizon, m_count, |t, m| pred[m][t][INFECTIOUS])),
                converged: true,
                diagnostics: json!({ "log_evidence": post.log_evidence }),
                seconds: start.elapsed().as_secs_f64(),
            }
        }
    };
    Ok(estimate)
}

pub fn run(args: &Args) -> anyhow::Result<()> {
    let task = mask_task(args)?;
    let mut run = Run::start("infer", args, vec![args.seed], &args.out)?;
    let data = Dataset::load(&args.dir, &mut run)?;
    let system = data.system(&data.model.params)?;
    let obs_model = data.model.params.obs_model()?;
    let masked = apply_mask(
        &data.observations,
        &MaskSpec {
            task,
            seed: args.seed,
        },
    )?;
    let est = estimate(args, &system, &obs_model, &masked.observations)?;

    let scores: Vec<CellValue> = masked
        .ledger
        .iter()
        .map(|&(t, m)| {
            let value = match (&est.predictive, args.task) {
                (Some(p), Task::Predict) => p[t][m],
                _ => est.posterior[t][m],
            };
            CellValue { t, m, value }
        })
        .collect();
    let posterior: Vec<CellValue> = est
        .posterior
        .iter()
        .enumerate()
        .flat_map(|(t, row)| {
            row.iter()
                .enumerate()
                .map(move |(m, &value)| CellValue { t, m, value })
        })
        .collect();
    write_ledger(&run.path("ledger.jsonl"), &masked.ledger, &data.ids)?;
    write_cell_values(&run.path("scores.jsonl"), "score", &scores, &data.ids)?;
    write_cell_values(&run.path("posterior.jsonl"), "p", &posterior, &data.ids)?;
    write_json(&run.path("diagnostics.json"), &est.diagnostics)?;
    for name in [
        "ledger.jsonl",
        "scores.jsonl",
        "posterior.jsonl",
        "diagnostics.json",
    ] {
        run.output(name)?;
    }
    if !est.converged {
        eprintln!("warning: inference did not converge; see diagnostics.json");
    }
    run.finish(json!({
        "converged": est.converged,
        "targets": masked.ledger.len(),
        "hidden_observations": data.observations.observed_count() - masked.observations.observed_count(),
        "engine_seconds": est.seconds,
        "engine": est.diagnostics,
    }))?;
    Ok(())
}

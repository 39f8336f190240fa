use std::fmt::Write as _;
use std::path::PathBuf;

use serde::Serialize;
use serde_json::json;
use skm_core::epidemic::{EpidemicParams, RATE_CONTACT, RATE_OUTSIDE, RATE_RECOVERY};
use skm_core::io::write_json;
use skm_core::vi::{learn_rates, LearnConfig};
use skm_core::SkmError;

use crate::dataset::Dataset;
use crate::manifest::Run;
use crate::UsageError;

const NAMES: [&str; 3] = ["c1", "c2", "c3"];

#[derive(clap::Args, Debug, Serialize)]
pub struct Args {
    /// Dataset directory written by `simulate`.
    #[arg(long)]
    pub dir: PathBuf,
    /// Starting constants `c1,c2,c3`; defaults to the dataset's model file.
    #[arg(long, value_delimiter = ',')]
    pub init_c: Option<Vec<f64>>,
    #[arg(long, default_value_t = 50)]
    pub max_em_iters: usize,
    /// Stop once every constant moves by less than this relative amount.
    #[arg(long, default_value_t = 1e-4)]
    pub tol: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Serialize)]
struct Learned {
    c1: f64,
    c2: f64,
    c3: f64,
    iterations: usize,
    converged: bool,
    /// Constants that kept their starting value for lack of exposure.
    no_evidence: Vec<&'static str>,
}

pub fn run(args: &Args) -> anyhow::Result<()> {
    let mut run = Run::start("learn", args, vec![], &args.out)?;
    let data = Dataset::load(&args.dir, &mut run)?;
    let mut start = data.model.params;
    if let Some(c) = &args.init_c {
        let [c1, c2, c3] = c[..] else {
            return Err(UsageError("--init-c takes three values".into()).into());
        };
        start = EpidemicParams {
            c1,
            c2,
            c3,
            ..start
        };
    }
    let system = data.system(&start)?;
    let config = LearnConfig {
        max_iters: args.max_em_iters,
        rel_tol: args.tol,
        ..Default::default()
    };
    let result = learn_rates(&system, &start.obs_model()?, &data.observations, &config)?;

    let order = [RATE_RECOVERY, RATE_CONTACT, RATE_OUTSIDE];
    let mut trace = String::from("iteration,c1,c2,c3\n");
    for (i, rates) in result.trace.iter().enumerate() {
        let row: Vec<String> = order.iter().map(|&r| rates[r].to_string()).collect();
        writeln!(trace, "{i},{}", row.join(",")).expect("writing to a string");
    }
    std::fs::write(run.path("trace.csv"), trace).map_err(|e| SkmError::Io {
        path: run.path("trace.csv").display().to_string(),
        msg: e.to_string(),
    })?;
    let learned = Learned {
        c1: result.rates[RATE_RECOVERY],
        c2: result.rates[RATE_CONTACT],
        c3: result.rates[RATE_OUTSIDE],
        iterations: result.iterations,
        converged: result.converged,
        no_evidence: order
            .iter()
            .zip(NAMES)
            .filter(|(&r, _)| result.no_evidence[r])
            .map(|(_, name)| name)
            .collect(),
    };
    write_json(&run.path("rates.json"), &learned)?;
    run.output("trace.csv")?;
    run.output("rates.json")?;

    let degenerate = data.observations.observed_count() == 0 || !learned.no_evidence.is_empty();
    if degenerate {
        eprintln!(
            "warning: degenerate run; the observations carry no information about some constants"
        );
    }
    if !learned.converged {
        eprintln!("warning: learning stopped at the iteration cap before converging");
    }
    run.finish(json!({
        "converged": learned.converged,
        "degenerate": degenerate,
        "observed_cells": data.observations.observed_count(),
        "iterations": learned.iterations,
    }))?;
    Ok(())
}

use std::path::PathBuf;

use serde::Serialize;
use serde_json::json;
use skm_core::epidemic::{EpidemicParams, INFECTIOUS};
use skm_core::eval::truth_curve;
use skm_core::io::{
    generate_benchmark, write_contacts, write_ids, write_json, write_observations, write_states,
    BenchmarkSpec, IdMap,
};

use crate::dataset::{ModelFile, CONTACTS, IDS, MODEL, OBSERVATIONS, TRUTH};
use crate::manifest::Run;

#[derive(clap::Args, Debug, Serialize)]
pub struct Args {
    /// Number of individuals.
    #[arg(long, default_value_t = 50)]
    pub m: usize,
    /// Number of time steps.
    #[arg(long, default_value_t = 200)]
    pub t: usize,
    /// Expected contacts per individual per step.
    #[arg(long, default_value_t = 2.0)]
    pub density: f64,
    /// Recovery probability per step.
    #[arg(long, default_value_t = 0.1)]
    pub c1: f64,
    /// Infection probability per infectious contact.
    #[arg(long, default_value_t = 0.05)]
    pub c2: f64,
    /// Outside infection probability per step.
    #[arg(long, default_value_t = 0.005)]
    pub c3: f64,
    /// Probability that an infectious individual reports symptoms.
    #[arg(long, default_value_t = 0.95)]
    pub sens: f64,
    /// Probability that a susceptible individual reports none.
    #[arg(long, default_value_t = 0.95)]
    pub spec: f64,
    /// Fraction of individuals infectious at the first step.
    #[arg(long, default_value_t = 0.1)]
    pub prevalence: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(args: &Args) -> anyhow::Result<()> {
    let params = EpidemicParams {
        c1: args.c1,
        c2: args.c2,
        c3: args.c3,
        sensitivity: args.sens,
        specificity: args.spec,
    };
    params.validate()?;
    let spec = BenchmarkSpec {
        num_individuals: args.m,
        horizon: args.t,
        contact_density: args.density,
        params,
        initial_prevalence: args.prevalence,
        seed: args.seed,
    };
    let (graph, bundle) = generate_benchmark(&spec)?;
    let mut run = Run::start("simulate", args, vec![args.seed], &args.out)?;
    let ids = IdMap::dense(args.m);
    write_ids(&run.path(IDS), &ids)?;
    write_contacts(&run.path(CONTACTS), &graph, &ids, 2)?;
    write_observations(&run.path(OBSERVATIONS), &bundle.observations, &ids, 2)?;
    write_states(&run.path(TRUTH), &bundle.states, &ids, 2)?;
    let model = ModelFile {
        params,
        initial_prevalence: args.prevalence,
    };
    write_json(&run.path(MODEL), &model)?;
    for name in [IDS, CONTACTS, OBSERVATIONS, TRUTH, MODEL] {
        run.output(name)?;
    }
    let infected = truth_curve(&bundle.states, INFECTIOUS);
    run.finish(json!({
        "contacts": graph.total_edges(),
        "peak_infected": infected.iter().copied().fold(0.0, f64::max),
        "final_infected": infected.last().copied().unwrap_or(0.0),
    }))?;
    Ok(())
}

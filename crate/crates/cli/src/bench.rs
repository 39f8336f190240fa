use std::path::PathBuf;

use serde::Serialize;
use skm_core::eval::{scaling_benchmark, write_bench_csv, BenchInstance};
use skm_core::fixtures::epidemic_bench;
use skm_core::io::write_json;

use crate::manifest::Run;

#[derive(clap::Args, Debug, Serialize)]
pub struct Args {
    /// Population sizes, increasing.
    #[arg(long, value_delimiter = ',', default_value = "15,30,60")]
    pub sizes: Vec<usize>,
    /// Pinned VI iterations per run.
    #[arg(long, default_value_t = 20)]
    pub iters: usize,
    /// Timed rounds over all sizes; the fastest run per size is reported.
    #[arg(long, default_value_t = 5)]
    pub repeats: usize,
    /// Time steps of each benchmark instance.
    #[arg(long, default_value_t = 100)]
    pub horizon: usize,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(args: &Args) -> anyhow::Result<()> {
    let mut run = Run::start("bench", args, vec![args.seed], &args.out)?;
    let report = scaling_benchmark(&args.sizes, args.iters, args.repeats, |m| {
        let f = epidemic_bench(m, args.horizon, args.seed)?;
        Ok(BenchInstance {
            system: f.system,
            obs_model: f.obs_model,
            observations: f.bundle.observations,
        })
    })?;
    write_bench_csv(&run.path("bench.csv"), &report)?;
    write_json(&run.path("bench.json"), &report)?;
    run.output("bench.csv")?;
    run.output("bench.json")?;
    for row in &report.rows {
        println!("M={:<5} {:.3} ms", row.num_individuals, row.seconds * 1e3);
    }
    if let Some(r2) = report.r_squared {
        println!("ratios {:.3?}, linear fit R^2 {r2:.4}", report.ratios());
    }
    let ratios = report.ratios();
    run.finish(serde_json::json!({
        "ratios": ratios,
        "r_squared": report.r_squared,
    }))?;
    Ok(())
}

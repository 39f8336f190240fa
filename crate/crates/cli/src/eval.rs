use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;
use skm_core::epidemic::INFECTIOUS;
use skm_core::eval::{roc_curve, truth_curve, write_counts_csv, write_roc_csv, ScoredCell};
use skm_core::io::{load_cell_values, load_ids, write_json};
use skm_core::SkmError;

use crate::dataset::{load_truth, IDS};
use crate::manifest::Run;

#[derive(clap::Args, Debug, Serialize)]
pub struct Args {
    /// Per-cell scores written by `infer`.
    #[arg(long)]
    pub scores: PathBuf,
    /// True states written by `simulate`.
    #[arg(long)]
    pub truth: PathBuf,
    /// Id table; defaults to ids.jsonl beside the truth file.
    #[arg(long)]
    pub ids: Option<PathBuf>,
    /// Posterior probabilities written by `infer`, for the infection-count curve.
    #[arg(long)]
    pub posterior: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(args: &Args) -> anyhow::Result<()> {
    let mut run = Run::start("eval", args, vec![], &args.out)?;
    let ids_path = args
        .ids
        .clone()
        .unwrap_or_else(|| args.truth.parent().unwrap_or(Path::new(".")).join(IDS));
    run.input(&ids_path)?;
    let ids = load_ids(&ids_path)?;
    let truth = load_truth(&args.truth, &ids, &mut run)?;
    run.input(&args.scores)?;
    let scores = load_cell_values(&args.scores, &ids)?;

    let mut cells = Vec::with_capacity(scores.len());
    for v in &scores {
        let row = truth.get(v.t).ok_or_else(|| {
            SkmError::Dimension(format!(
                "score at t={} beyond the truth horizon {}",
                v.t + 1,
                truth.len()
            ))
        })?;
        cells.push(ScoredCell {
            t: v.t,
            m: v.m,
            score: v.value,
            label: row[v.m] == INFECTIOUS,
        });
    }
    let roc = roc_curve(&cells)?;
    write_roc_csv(&run.path("roc.csv"), &roc)?;
    run.output("roc.csv")?;

    if let Some(path) = &args.posterior {
        run.input(path)?;
        let mut expected = vec![0.0; truth.len()];
        for v in load_cell_values(path, &ids)? {
            *expected.get_mut(v.t).ok_or_else(|| {
                SkmError::Dimension(format!(
                    "posterior at t={} beyond the truth horizon",
                    v.t + 1
                ))
            })? += v.value;
        }
        let actual = truth_curve(&truth, INFECTIOUS);
        write_counts_csv(&run.path("counts.csv"), &expected, Some(&actual))?;
        run.output("counts.csv")?;
    }

    let summary = json!({
        "auc": roc.auc,
        "positives": roc.positives,
        "negatives": roc.negatives,
    });
    write_json(&run.path("eval.json"), &summary)?;
    run.output("eval.json")?;
    println!("AUC {:.4} over {} cells", roc.auc, cells.len());
    run.finish(summary)?;
    Ok(())
}

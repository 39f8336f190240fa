//! ROC analysis, infection-count curves and runtime scaling.

use std::fmt::Write as _;
use std::path::Path;
use std::time::{Duration, Instant};

use serde::Serialize;

use crate::error::{Result, SkmError};
use crate::model::{ObservationModel, Observations, SkmSystem};
use crate::vi::{infer, IndividualPosterior, ViConfig};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredCell {
    pub t: usize,
    pub m: usize,
    pub score: f64,
    pub label: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RocPoint {
    /// Cells scoring at or above this value are called positive.
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RocCurve {
    /// From `(0, 0)` at threshold `+inf` to `(1, 1)`.
    pub points: Vec<RocPoint>,
    pub auc: f64,
    pub positives: usize,
    pub negatives: usize,
}

/// ROC curve with one point per distinct score; tied scores move the curve
/// diagonally, so the trapezoid area counts ties as half.
pub fn roc_curve(cells: &[ScoredCell]) -> Result<RocCurve> {
    if let Some(c) = cells.iter().find(|c| !c.score.is_finite()) {
        return Err(SkmError::Config(format!(
            "non-finite score at t={} m={}",
            c.t, c.m
        )));
    }
    let positives = cells.iter().filter(|c| c.label).count();
    let negatives = cells.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(SkmError::Config(
            "ROC needs both positive and negative cells".into(),
        ));
    }
    let mut order: Vec<&ScoredCell> = cells.iter().collect();
    order.sort_by(|a, b| b.score.total_cmp(&a.score));
    let (p, n) = (positives as f64, negatives as f64);
    let mut points = vec![RocPoint {
        threshold: f64::INFINITY,
        fpr: 0.0,
        tpr: 0.0,
    }];
    // Twice the area in units of one positive-negative pair; exact in integers.
    let mut doubled_area: u128 = 0;
    let (mut tp, mut fp) = (0u128, 0u128);
    let mut i = 0;
    while i < order.len() {
        let score = order[i].score;
        let (prev_tp, prev_fp) = (tp, fp);
        while i < order.len() && order[i].score == score {
            if order[i].label {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        doubled_area += (fp - prev_fp) * (tp + prev_tp);
        points.push(RocPoint {
            threshold: score,
            fpr: fp as f64 / n,
            tpr: tp as f64 / p,
        });
    }
    Ok(RocCurve {
        points,
        auc: doubled_area as f64 / (2.0 * p * n),
        positives,
        negatives,
    })
}

/// Scores `score(t, m)` on the listed cells against `truth[t][m] == positive_state`.
pub fn score_cells(
    cells: &[(usize, usize)],
    truth: &[Vec<usize>],
    positive_state: usize,
    score: impl Fn(usize, usize) -> f64,
) -> Vec<ScoredCell> {
    cells
        .iter()
        .map(|&(t, m)| ScoredCell {
            t,
            m,
            score: score(t, m),
            label: truth[t][m] == positive_state,
        })
        .collect()
}

/// Expected number of individuals in `state` at each step.
pub fn collective_curve(posterior: &IndividualPosterior, state: usize) -> Vec<f64> {
    (0..posterior.horizon)
        .map(|t| {
            (0..posterior.num_individuals)
                .map(|m| posterior.gamma(m, t)[state])
                .sum()
        })
        .collect()
}

/// Hard counts of individuals in `state` at each step.
pub fn truth_curve(states: &[Vec<usize>], state: usize) -> Vec<f64> {
    states
        .iter()
        .map(|row| row.iter().filter(|&&x| x == state).count() as f64)
        .collect()
}

pub fn write_roc_csv(path: &Path, roc: &RocCurve) -> Result<()> {
    let mut text = String::from("threshold,fpr,tpr\n");
    for p in &roc.points {
        writeln!(text, "{},{},{}", p.threshold, p.fpr, p.tpr).expect("string write");
    }
    write_text(path, &text)
}

pub fn write_counts_csv(path: &Path, expected: &[f64], truth: Option<&[f64]>) -> Result<()> {
    let mut text = String::from("t,expected,truth\n");
    for (t, e) in expected.iter().enumerate() {
        let tr = truth.map(|v| v[t].to_string()).unwrap_or_default();
        writeln!(text, "{},{},{}", t + 1, e, tr).expect("string write");
    }
    write_text(path, &text)
}

pub fn write_bench_csv(path: &Path, report: &ScalingReport) -> Result<()> {
    let mut text = String::from("M,seconds\n");
    for r in &report.rows {
        writeln!(text, "{},{}", r.num_individuals, r.seconds).expect("string write");
    }
    write_text(path, &text)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| SkmError::Io {
        path: path.display().to_string(),
        msg: e.to_string(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalingRow {
    pub num_individuals: usize,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingReport {
    pub rows: Vec<ScalingRow>,
    /// Least-squares fit `seconds = intercept + slope * M`; absent for one size.
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
    pub r_squared: Option<f64>,
}

impl ScalingReport {
    /// Time ratio between consecutive sizes.
    pub fn ratios(&self) -> Vec<f64> {
        self.rows
            .windows(2)
            .map(|w| w[1].seconds / w[0].seconds)
            .collect()
    }
}

/// Ordinary least squares of `y` on `x`: `(slope, intercept, r^2)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Option<(f64, f64, f64)> {
    if x.len() < 2 || x.len() != y.len() {
        return None;
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 {
        1.0
    } else {
        sxy * sxy / (sxx * syy)
    };
    Some((slope, my - slope * mx, r2))
}

/// Problem instance for one benchmark size.
pub struct BenchInstance {
    pub system: SkmSystem,
    pub obs_model: ObservationModel,
    pub observations: Observations,
}

/// Times variational inference at each size with a pinned iteration count
/// on one thread. After one discarded warmup per size, sizes are timed in
/// `repeats` interleaved rounds so that machine noise hits every size alike,
/// and the fastest run per size is reported.
pub fn scaling_benchmark(
    sizes: &[usize],
    iterations: usize,
    repeats: usize,
    mut fixture: impl FnMut(usize) -> Result<BenchInstance>,
) -> Result<ScalingReport> {
    if sizes.is_empty() || sizes.windows(2).any(|w| w[1] <= w[0]) {
        return Err(SkmError::Config(
            "sizes must be increasing and non-empty".into(),
        ));
    }
    if repeats == 0 {
        return Err(SkmError::Config("repeats must be positive".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .map_err(|e| SkmError::Config(e.to_string()))?;
    let config = ViConfig::pinned(iterations);
    let instances = sizes
        .iter()
        .map(|&m| fixture(m))
        .collect::<Result<Vec<_>>>()?;
    let run = |inst: &BenchInstance| -> Result<Duration> {
        pool.install(|| {
            let start = Instant::now();
            infer(&inst.system, &inst.obs_model, &inst.observations, &config)?;
            Ok(start.elapsed())
        })
    };
    for inst in &instances {
        run(inst)?;
    }
    let mut best = vec![f64::INFINITY; sizes.len()];
    for _ in 0..repeats {
        for (inst, b) in instances.iter().zip(&mut best) {
            *b = b.min(run(inst)?.as_secs_f64());
        }
    }
    let rows: Vec<ScalingRow> = sizes
        .iter()
        .zip(best)
        .map(|(&m, seconds)| ScalingRow {
            num_individuals: m,
            seconds,
        })
        .collect();
    let x: Vec<f64> = rows.iter().map(|r| r.num_individuals as f64).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.seconds).collect();
    let fit = linear_fit(&x, &y);
    Ok(ScalingReport {
        rows,
        slope: fit.map(|f| f.0),
        intercept: fit.map(|f| f.1),
        r_squared: fit.map(|f| f.2),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cell(score: f64, label: bool) -> ScoredCell {
        ScoredCell {
            t: 0,
            m: 0,
            score,
            label,
        }
    }

    #[test]
    fn separated_scores_give_unit_auc() {
        let cells = [cell(0.9, true), cell(0.8, true), cell(0.2, false)];
        assert_eq!(roc_curve(&cells).unwrap().auc, 1.0);
    }

    #[test]
    fn all_tied_gives_half() {
        let cells = [cell(0.5, true), cell(0.5, false), cell(0.5, false)];
        let roc = roc_curve(&cells).unwrap();
        assert_eq!(roc.auc, 0.5);
        assert_eq!(roc.points.len(), 2);
    }

    #[test]
    fn single_class_is_an_error() {
        assert!(roc_curve(&[cell(0.1, true), cell(0.3, true)]).is_err());
    }

    #[test]
    fn fit_recovers_line() {
        let (s, i, r2) = linear_fit(&[1.0, 2.0, 3.0], &[3.0, 5.0, 7.0]).unwrap();
        assert!((s - 2.0).abs() < 1e-12 && (i - 1.0).abs() < 1e-12 && (r2 - 1.0).abs() < 1e-12);
        assert!(linear_fit(&[1.0], &[1.0]).is_none());
    }

    #[test]
    fn curves_count_states() {
        assert_eq!(
            truth_curve(&[vec![0, 1, 1], vec![0, 0, 0]], 1),
            vec![2.0, 0.0]
        );
    }
}

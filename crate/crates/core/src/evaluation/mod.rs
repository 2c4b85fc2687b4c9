//! Judging, the abstention confusion taxonomy and its metrics, cutoff sweeps.
//!
//! Decisions are re-derived from stored confidences at every cutoff, so a
//! single inference pass supports any number of sweeps. "Accuracy" in the
//! optimal-cutoff search is the effective accuracy `AC_eff`.

pub mod report;

use futures::stream::{self, StreamExt};
use serde::{Deserialize, Serialize};

use crate::backends::Backends;
use crate::calibration::decide;
use crate::error::{BackendError, EvalError};
use crate::pipeline::ItemResult;
use crate::types::ConfusionCounts;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Judgment {
    pub correct: bool,
    pub similarity: f64,
}

/// Correct iff the embedding cosine of the two answers reaches `threshold`.
/// Verbatim matches are correct without embedding either text.
pub async fn judge(
    model_answer: &str,
    gold_answer: &str,
    threshold: f64,
    backends: &Backends,
) -> Result<Judgment, BackendError> {
    if model_answer == gold_answer {
        return Ok(Judgment {
            correct: true,
            similarity: 1.0,
        });
    }
    let model = backends.embed(model_answer).await?;
    let gold = backends.embed(gold_answer).await?;
    let similarity = model.cosine(&gold).map_err(|e| BackendError::Decode {
        service: "embedding",
        detail: e.to_string(),
    })?;
    Ok(Judgment {
        correct: similarity >= threshold,
        similarity,
    })
}

/// Judges every result in place. Items without an answer are incorrect.
///
/// Returns how many items could not be judged; those keep
/// `judged_correct = None` and a `judge_error`, and are left out of metrics.
pub async fn judge_results(
    results: &mut [ItemResult],
    threshold: f64,
    backends: &Backends,
    concurrency: usize,
) -> Result<usize, BackendError> {
    let judgments: Vec<Option<Result<Judgment, BackendError>>> = stream::iter(results.iter().map(|r| async move {
        let answer = r.outcome.selected_answer.as_deref()?;
        Some(judge(answer, &r.item.gold_answer, threshold, backends).await)
    }))
    .buffered(concurrency.max(1))
    .collect()
    .await;

    let mut skipped = 0;
    for (result, judgment) in results.iter_mut().zip(judgments) {
        match judgment {
            None => result.outcome.judged_correct = Some(false),
            Some(Ok(j)) => {
                result.outcome.judged_correct = Some(j.correct);
                result.judge_similarity = Some(j.similarity);
            }
            Some(Err(e)) if e.is_fatal() => return Err(e),
            Some(Err(e)) => {
                tracing::warn!(item = %result.item.id, error = %e, "judging failed; item excluded from metrics");
                result.outcome.judged_correct = None;
                result.judge_error = Some(e.to_string());
                skipped += 1;
            }
        }
    }
    Ok(skipped)
}

/// Results that carry a judgment, plus how many were dropped for lacking one.
pub fn judged_only(results: &[ItemResult]) -> (Vec<ItemResult>, usize) {
    let judged: Vec<ItemResult> = results
        .iter()
        .filter(|r| r.outcome.judged_correct.is_some())
        .cloned()
        .collect();
    let skipped = results.len() - judged.len();
    (judged, skipped)
}

fn scores(results: &[ItemResult]) -> Result<Vec<(f64, bool)>, EvalError> {
    results
        .iter()
        .map(|r| {
            r.outcome
                .judged_correct
                .map(|c| (r.outcome.confidence, c))
                .ok_or_else(|| EvalError::Unjudged(r.item.id.clone()))
        })
        .collect()
}

pub fn confusion_from_scores(scores: &[(f64, bool)], cutoff: f64) -> ConfusionCounts {
    let mut counts = ConfusionCounts::default();
    for &(confidence, correct) in scores {
        counts.record(decide(confidence, cutoff), correct);
    }
    counts
}

/// Tallies A1..A4 with each decision re-derived at `cutoff`.
pub fn confusion(results: &[ItemResult], cutoff: f64) -> Result<ConfusionCounts, EvalError> {
    Ok(confusion_from_scores(&scores(results)?, cutoff))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    /// `A2 / (A1 + A2)`; absent without abstentions.
    pub ac_abs: Option<f64>,
    /// `A3 / (A3 + A4)`; absent without answers.
    pub ac_ans: Option<f64>,
    /// `(A2 + A3) / total`
    pub ac_comp: f64,
    /// `(A3 + A4) / total`
    pub coverage: f64,
    /// `ac_comp * coverage`
    pub ac_eff: f64,
}

pub fn metrics(counts: &ConfusionCounts) -> Result<MetricSet, EvalError> {
    if counts.total == 0 {
        return Err(EvalError::EmptyCounts);
    }
    let ratio = |num: u64, den: u64| (den > 0).then(|| num as f64 / den as f64);
    let total = counts.total as f64;
    let ac_comp = (counts.a2 + counts.a3) as f64 / total;
    let coverage = counts.answered() as f64 / total;
    Ok(MetricSet {
        ac_abs: ratio(counts.a2, counts.abstained()),
        ac_ans: ratio(counts.a3, counts.answered()),
        ac_comp,
        coverage,
        ac_eff: ac_comp * coverage,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub cutoff: f64,
    pub counts: ConfusionCounts,
    pub metrics: MetricSet,
}

/// `{0.02, 0.04, ..., 1.00}`: fifty cutoffs.
pub fn default_grid() -> Vec<f64> {
    (1..=50).map(|k| k as f64 / 50.0).collect()
}

/// `count` evenly spaced cutoffs ending at 1: `{1/count, 2/count, ..., 1}`.
pub fn uniform_grid(count: usize) -> Vec<f64> {
    (1..=count).map(|k| k as f64 / count as f64).collect()
}

fn check_grid(cutoffs: &[f64]) -> Result<(), EvalError> {
    let in_range = cutoffs.iter().all(|c| (0.0..=1.0).contains(c));
    let increasing = cutoffs.windows(2).all(|w| w[0] < w[1]);
    if in_range && increasing {
        Ok(())
    } else {
        Err(EvalError::BadGrid)
    }
}

pub fn sweep_scores(scores: &[(f64, bool)], cutoffs: &[f64]) -> Result<Vec<SweepRow>, EvalError> {
    if scores.is_empty() {
        return Err(EvalError::EmptyResults);
    }
    check_grid(cutoffs)?;
    cutoffs
        .iter()
        .map(|&cutoff| {
            let counts = confusion_from_scores(scores, cutoff);
            Ok(SweepRow {
                cutoff,
                counts,
                metrics: metrics(&counts)?,
            })
        })
        .collect()
}

pub fn sweep(results: &[ItemResult], cutoffs: &[f64]) -> Result<Vec<SweepRow>, EvalError> {
    sweep_scores(&scores(results)?, cutoffs)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimalCutoff {
    pub cutoff: f64,
    pub mean_accuracy: f64,
}

/// Averages `AC_eff` across runs at each cutoff and returns the best cutoff,
/// preferring the smallest on ties. Every run must use the same grid.
pub fn optimal_cutoff(per_run_sweeps: &[Vec<SweepRow>]) -> Result<OptimalCutoff, EvalError> {
    let first = per_run_sweeps.first().ok_or(EvalError::NoSweeps)?;
    if first.is_empty() {
        return Err(EvalError::BadGrid);
    }
    let same_grid = per_run_sweeps.iter().all(|run| {
        run.len() == first.len() && run.iter().zip(first).all(|(a, b)| a.cutoff.to_bits() == b.cutoff.to_bits())
    });
    if !same_grid {
        return Err(EvalError::GridMismatch);
    }
    let runs = per_run_sweeps.len() as f64;
    let mut best: Option<OptimalCutoff> = None;
    for (i, row) in first.iter().enumerate() {
        let mean = per_run_sweeps.iter().map(|run| run[i].metrics.ac_eff).sum::<f64>() / runs;
        if best.is_none_or(|b| mean > b.mean_accuracy) {
            best = Some(OptimalCutoff {
                cutoff: row.cutoff,
                mean_accuracy: mean,
            });
        }
    }
    Ok(best.expect("grid is non-empty"))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub cutoff: f64,
    pub coverage: f64,
    pub ac_ans: f64,
}

/// `(coverage, AC_ans)` per cutoff; cutoffs where nothing is answered are omitted.
pub fn accuracy_coverage_curve(results: &[ItemResult], cutoffs: &[f64]) -> Result<Vec<CurvePoint>, EvalError> {
    Ok(curve_from_rows(&sweep(results, cutoffs)?))
}

pub fn curve_from_rows(rows: &[SweepRow]) -> Vec<CurvePoint> {
    rows.iter()
        .filter_map(|row| {
            row.metrics.ac_ans.map(|ac_ans| CurvePoint {
                cutoff: row.cutoff,
                coverage: row.metrics.coverage,
                ac_ans,
            })
        })
        .collect()
}

/// Fraction judged correct, for runs without abstention.
pub fn plain_accuracy(results: &[ItemResult]) -> Result<f64, EvalError> {
    let s = scores(results)?;
    if s.is_empty() {
        return Err(EvalError::EmptyResults);
    }
    Ok(s.iter().filter(|(_, c)| *c).count() as f64 / s.len() as f64)
}

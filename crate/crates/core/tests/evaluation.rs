mod common;

use std::sync::Arc;

use proptest::prelude::*;

use mka::backends::mock::{ConstantChat, Failing, IdentityTranslator, SimilarityTableEmbedder};
use mka::backends::Backends;
use mka::error::EvalError;
use mka::evaluation::{
    accuracy_coverage_curve, confusion, default_grid, judge, judge_results, metrics, optimal_cutoff, plain_accuracy,
    sweep, CurvePoint,
};
use mka::{ConfusionCounts, Decision, ItemOutcome, ItemResult, RunMode};

fn scored(id: usize, confidence: f64, correct: bool) -> ItemResult {
    ItemResult {
        item: common::item(&format!("s{id}"), "q", &["a", "b"], "a"),
        mode: RunMode::Mka,
        traces: Vec::new(),
        similarities: Vec::new(),
        outcome: ItemOutcome {
            selected_index: Some(0),
            selected_answer: Some("a".into()),
            confidence_raw: confidence,
            confidence,
            decision: Decision::Answer,
            judged_correct: Some(correct),
            failed: false,
        },
        judge_similarity: None,
        judge_error: None,
    }
}

fn fixture(pairs: &[(f64, bool)]) -> Vec<ItemResult> {
    pairs.iter().enumerate().map(|(i, &(c, k))| scored(i, c, k)).collect()
}

/// Per-item recount, written without the library's tallying code.
fn recount(pairs: &[(f64, bool)], cutoff: f64) -> [u64; 4] {
    let mut a = [0u64; 4];
    for &(conf, correct) in pairs {
        let answered = conf >= cutoff;
        let slot = match (answered, correct) {
            (false, true) => 0,
            (false, false) => 1,
            (true, true) => 2,
            (true, false) => 3,
        };
        a[slot] += 1;
    }
    a
}

fn ratio(n: u64, d: u64) -> Option<f64> {
    (d > 0).then(|| n as f64 / d as f64)
}

fn judged_pairs(max: usize) -> impl Strategy<Value = Vec<(f64, bool)>> {
    let conf = prop_oneof![0.0f64..=1.0, (0u32..=50).prop_map(|k| k as f64 / 50.0)];
    proptest::collection::vec((conf, any::<bool>()), 1..=max)
}

#[test]
fn ten_item_taxonomy() {
    let mut pairs = vec![(0.1, true)];
    pairs.extend([(0.2, false); 2]);
    pairs.extend([(0.9, true); 3]);
    pairs.extend([(0.8, false); 4]);
    let c = confusion(&fixture(&pairs), 0.5).unwrap();
    assert_eq!(c, ConfusionCounts::new(1, 2, 3, 4));
    assert_eq!(c.total, 10);
}

#[test]
fn boundary_cutoffs() {
    let results = fixture(&[(0.0, true), (0.3, false), (1.0, true)]);
    let c = confusion(&results, 0.0).unwrap();
    assert_eq!((c.a1, c.a2), (0, 0));
    let halves = fixture(&[(0.5, true), (0.5, false)]);
    let c = confusion(&halves, 0.6).unwrap();
    assert_eq!((c.a3, c.a4), (0, 0));
}

#[test]
fn unjudged_results_are_rejected() {
    let mut results = fixture(&[(0.5, true)]);
    results[0].outcome.judged_correct = None;
    assert_eq!(confusion(&results, 0.5), Err(EvalError::Unjudged("s0".into())));
    assert_eq!(sweep(&[], &default_grid()), Err(EvalError::EmptyResults));
}

#[test]
fn single_result_step_function() {
    let rows = sweep(&fixture(&[(0.5, true)]), &default_grid()).unwrap();
    for row in rows {
        let expected = if row.cutoff <= 0.5 { 1.0 } else { 0.0 };
        assert_eq!(row.metrics.coverage, expected, "cutoff {}", row.cutoff);
    }
}

#[test]
fn four_item_curve_matches_hand_enumeration() {
    // Confidences 0.2 (wrong), 0.4 (right), 0.6 (right), 0.8 (wrong).
    let results = fixture(&[(0.2, false), (0.4, true), (0.6, true), (0.8, false)]);
    let grid = [0.1, 0.3, 0.5, 0.7, 0.9];
    let curve = accuracy_coverage_curve(&results, &grid).unwrap();
    let expected = [
        CurvePoint { cutoff: 0.1, coverage: 1.0, ac_ans: 0.5 },
        CurvePoint { cutoff: 0.3, coverage: 0.75, ac_ans: 2.0 / 3.0 },
        CurvePoint { cutoff: 0.5, coverage: 0.5, ac_ans: 0.5 },
        CurvePoint { cutoff: 0.7, coverage: 0.25, ac_ans: 0.0 },
    ];
    assert_eq!(curve.len(), expected.len());
    for (got, want) in curve.iter().zip(&expected) {
        assert_eq!(got.cutoff, want.cutoff);
        assert!((got.coverage - want.coverage).abs() < 1e-12);
        assert!((got.ac_ans - want.ac_ans).abs() < 1e-12);
    }
}

#[test]
fn all_confident_and_correct_is_one_point() {
    let results = fixture(&[(1.0, true); 5]);
    let curve = accuracy_coverage_curve(&results, &default_grid()).unwrap();
    assert_eq!(curve.len(), 50);
    assert!(curve.iter().all(|p| p.coverage == 1.0 && p.ac_ans == 1.0));
}

#[test]
fn two_runs_average_rowwise() {
    // Run A peaks at 0.25 with AC_eff 1. Run B = {0.6 wrong, 0.9 wrong, 0.8 right x2}:
    // below 0.6 everything is answered (AC_comp 1/2, coverage 1); at 0.75 the 0.6
    // item becomes a correct abstention (AC_comp 3/4, coverage 3/4), so B peaks
    // at 0.75. Rowwise means: 0.25 -> (1 + 0.5)/2, 0.5 -> (0 + 0.5)/2, 0.75 -> (0 + 0.5625)/2.
    let grid = [0.25, 0.5, 0.75];
    let a = sweep(&fixture(&[(0.3, true), (0.3, true)]), &grid).unwrap();
    assert_eq!(a.iter().map(|r| r.metrics.ac_eff).collect::<Vec<_>>(), [1.0, 0.0, 0.0]);
    let b = fixture(&[(0.6, false), (0.9, false), (0.8, true), (0.8, true)]);
    let b = sweep(&b, &grid).unwrap();
    assert_eq!(b.iter().map(|r| r.metrics.ac_eff).collect::<Vec<_>>(), [0.5, 0.5, 0.5625]);
    let best = optimal_cutoff(&[a.clone(), b.clone()]).unwrap();
    assert_eq!(best.cutoff, 0.25);
    assert!((best.mean_accuracy - 0.75).abs() < 1e-12);

    let single = optimal_cutoff(&[b]).unwrap();
    assert_eq!((single.cutoff, single.mean_accuracy), (0.75, 0.5625));
    let mismatched = sweep(&fixture(&[(0.3, true)]), &[0.25, 0.5]).unwrap();
    assert_eq!(optimal_cutoff(&[a, mismatched]), Err(EvalError::GridMismatch));
}

#[test]
fn flat_sweep_prefers_smallest_cutoff() {
    let rows = sweep(&fixture(&[(1.0, true)]), &default_grid()).unwrap();
    assert_eq!(optimal_cutoff(&[rows]).unwrap().cutoff, 0.02);
}

#[test]
fn plain_accuracy_counts_hand_fixture() {
    // 7 of 12 correct, as in a baseline scored by hand.
    let mut pairs = vec![(1.0, true); 7];
    pairs.extend([(1.0, false); 5]);
    assert!((plain_accuracy(&fixture(&pairs)).unwrap() - 7.0 / 12.0).abs() < 1e-15);
}

#[tokio::test]
async fn judging_examples() {
    let embedder = SimilarityTableEmbedder::new("the cortex", &[("cortex", 0.956), ("the cerebellum", 0.10)]);
    let backends = Backends::new(IdentityTranslator, ConstantChat(String::new()), embedder);
    assert!(judge("cortex", "cortex", 0.85, &backends).await.unwrap().correct);
    let near = judge("the cortex", "cortex", 0.85, &backends).await.unwrap();
    assert!(near.correct);
    assert!((near.similarity - 0.956).abs() < 1e-12);
    assert!(!judge("the cortex", "the cerebellum", 0.85, &backends).await.unwrap().correct);
}

#[tokio::test]
async fn exact_match_needs_no_embedding() {
    let backends = Backends::new(IdentityTranslator, ConstantChat(String::new()), Failing::new("x"));
    assert!(judge("cortex", "cortex", 0.85, &backends).await.unwrap().correct);
}

#[tokio::test]
async fn judge_failures_are_counted_and_excluded() {
    let backends = Arc::new(Backends::new(IdentityTranslator, ConstantChat(String::new()), Failing::new("x")));
    let mut results = fixture(&[(0.9, true), (0.9, true)]);
    results[1].outcome.selected_answer = Some("b".into());
    let skipped = judge_results(&mut results, 0.85, &backends, 2).await.unwrap();
    assert_eq!(skipped, 1);
    assert_eq!(results[0].outcome.judged_correct, Some(true));
    assert_eq!(results[1].outcome.judged_correct, None);
    assert!(results[1].judge_error.is_some());
    let (judged, dropped) = mka::evaluation::judged_only(&results);
    assert_eq!((judged.len(), dropped), (1, 1));
}

proptest! {
    #[test]
    fn metrics_match_recount_oracle(pairs in judged_pairs(50), cutoff in 0.0f64..=1.0) {
        let c = confusion(&fixture(&pairs), cutoff).unwrap();
        let [a1, a2, a3, a4] = recount(&pairs, cutoff);
        prop_assert_eq!((c.a1, c.a2, c.a3, c.a4, c.total), (a1, a2, a3, a4, pairs.len() as u64));
        let m = metrics(&c).unwrap();
        let total = pairs.len() as u64;
        prop_assert_eq!(m.ac_abs, ratio(a2, a1 + a2));
        prop_assert_eq!(m.ac_ans, ratio(a3, a3 + a4));
        prop_assert_eq!(m.ac_comp, (a2 + a3) as f64 / total as f64);
        prop_assert_eq!(m.coverage, (a3 + a4) as f64 / total as f64);
        prop_assert!((m.ac_eff - m.ac_comp * m.coverage).abs() < 1e-15);
    }

    #[test]
    fn metric_orderings(a1 in 0u64..40, a2 in 0u64..40, a3 in 0u64..40, a4 in 0u64..40) {
        prop_assume!(a1 + a2 + a3 + a4 > 0);
        let m = metrics(&ConfusionCounts::new(a1, a2, a3, a4)).unwrap();
        prop_assert!(m.ac_eff <= m.ac_comp + 1e-15 && m.ac_comp <= 1.0);
        prop_assert!(m.ac_eff <= m.coverage + 1e-15);
        for v in [m.ac_abs, m.ac_ans].into_iter().flatten().chain([m.ac_comp, m.coverage, m.ac_eff]) {
            prop_assert!((0.0..=1.0).contains(&v));
        }
        prop_assert_eq!(m.ac_abs.is_none(), a1 + a2 == 0);
        prop_assert_eq!(m.ac_ans.is_none(), a3 + a4 == 0);
    }

    #[test]
    fn sweep_is_monotone(pairs in judged_pairs(50)) {
        let rows = sweep(&fixture(&pairs), &default_grid()).unwrap();
        prop_assert_eq!(rows.len(), 50);
        for w in rows.windows(2) {
            prop_assert!(w[0].cutoff < w[1].cutoff);
            prop_assert!(w[1].metrics.coverage <= w[0].metrics.coverage);
            prop_assert!(w[1].counts.a1 + w[1].counts.a2 >= w[0].counts.a1 + w[0].counts.a2);
        }
    }

    #[test]
    fn low_cutoff_answers_everything(pairs in judged_pairs(30)) {
        let min = pairs.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
        let m = metrics(&confusion(&fixture(&pairs), min).unwrap()).unwrap();
        prop_assert_eq!(m.coverage, 1.0);
        prop_assert_eq!(m.ac_eff, m.ac_comp);
        prop_assert_eq!(Some(m.ac_comp), m.ac_ans);
    }

    #[test]
    fn cutoffs_differ_only_by_items_between(pairs in judged_pairs(40), x in 0.0f64..=1.0, y in 0.0f64..=1.0) {
        let (lo, hi) = if x <= y { (x, y) } else { (y, x) };
        let results = fixture(&pairs);
        let a = confusion(&results, lo).unwrap();
        let b = confusion(&results, hi).unwrap();
        let between: Vec<&(f64, bool)> = pairs.iter().filter(|p| p.0 >= lo && p.0 < hi).collect();
        let moved_correct = between.iter().filter(|p| p.1).count() as u64;
        let moved_wrong = between.len() as u64 - moved_correct;
        prop_assert_eq!(b.a1, a.a1 + moved_correct);
        prop_assert_eq!(b.a2, a.a2 + moved_wrong);
        prop_assert_eq!(a.a3, b.a3 + moved_correct);
        prop_assert_eq!(a.a4, b.a4 + moved_wrong);
    }
}

//! Evaluation harness: per-query precision/recall/F1 for binary retrieval,
//! top-k sweeps for ranked baselines, upper-bound reports for the cluster
//! retrieval stage, and timing tables.
//!
//! Aggregation is macro (unweighted per-query mean); pooled micro numbers
//! are emitted alongside for transparency. Queries without gold labels are
//! excluded from averages and listed, as are queries whose trace failed.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baselines::RankedList;
use crate::corpus::{Corpus, Query};
use crate::tracer::TraceResult;

/// Default top-k grid for ranked baselines.
pub const DEFAULT_TOPK_GRID: &[usize] = &[1, 10, 25];

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("query {query_id:?} has gold id {doc_id:?} not present in the corpus")]
    UnknownGoldId { query_id: String, doc_id: String },
    #[error("result for query {query_id:?} has no matching query record")]
    MissingQuery { query_id: String },
    #[error("nothing to evaluate: {0}")]
    Empty(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryMetrics {
    pub query_id: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub retrieved_count: usize,
    pub gold_count: usize,
}

/// P, R and F1 for one aggregation scheme.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

/// Scores one query's retrieved set against its gold set. The caller
/// guarantees a non-empty gold set; empty-gold queries are excluded
/// upstream.
pub fn score_retrieval(
    query_id: &str,
    retrieved: &[String],
    gold: &HashSet<&str>,
) -> QueryMetrics {
    let retrieved_set: HashSet<&str> = retrieved.iter().map(String::as_str).collect();
    let hits = retrieved_set.intersection(gold).count();
    let precision = if retrieved_set.is_empty() {
        0.0
    } else {
        hits as f64 / retrieved_set.len() as f64
    };
    let recall = if gold.is_empty() {
        0.0
    } else {
        hits as f64 / gold.len() as f64
    };
    QueryMetrics {
        query_id: query_id.to_string(),
        precision,
        recall,
        f1: f1_score(precision, recall),
        retrieved_count: retrieved_set.len(),
        gold_count: gold.len(),
    }
}

fn macro_aggregate(per_query: &[QueryMetrics]) -> Aggregate {
    if per_query.is_empty() {
        return Aggregate::default();
    }
    let n = per_query.len() as f64;
    Aggregate {
        precision: per_query.iter().map(|m| m.precision).sum::<f64>() / n,
        recall: per_query.iter().map(|m| m.recall).sum::<f64>() / n,
        f1: per_query.iter().map(|m| m.f1).sum::<f64>() / n,
    }
}

/// Checks that every gold id resolves against the corpus.
pub fn validate_gold(queries: &[Query], corpus: &Corpus) -> Result<(), EvalError> {
    for q in queries {
        for gold in &q.gold_ids {
            if !corpus.contains_id(gold) {
                return Err(EvalError::UnknownGoldId {
                    query_id: q.id.clone(),
                    doc_id: gold.clone(),
                });
            }
        }
    }
    Ok(())
}

/// One row of a top-k sweep; precision/recall/f1 are macro averages.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub k: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepOutcome {
    pub rows: Vec<SweepRow>,
    /// The row maximizing macro F1; ties go to the smallest k.
    pub best: SweepRow,
    /// Queries excluded for lacking gold labels.
    pub excluded: Vec<String>,
}

/// Truncates each ranking to every k in the grid and macro-averages the
/// per-query metrics. A k beyond a list's length is truncated to the list
/// with a warning.
pub fn sweep_topk(
    ranked: &[RankedList],
    gold: &HashMap<String, HashSet<String>>,
    ks: &[usize],
) -> Result<SweepOutcome, EvalError> {
    if ranked.is_empty() {
        return Err(EvalError::Empty("no ranked lists".into()));
    }
    if ks.is_empty() {
        return Err(EvalError::Empty("no k values".into()));
    }
    let mut excluded = Vec::new();
    let mut usable: Vec<(&RankedList, HashSet<&str>)> = Vec::new();
    for list in ranked {
        match gold.get(&list.query_id) {
            Some(g) if !g.is_empty() => {
                usable.push((list, g.iter().map(String::as_str).collect()));
            }
            _ => excluded.push(list.query_id.clone()),
        }
    }
    if usable.is_empty() {
        return Err(EvalError::Empty("every query lacks gold labels".into()));
    }
    let mut rows = Vec::with_capacity(ks.len());
    for &k in ks {
        let mut per_query = Vec::with_capacity(usable.len());
        for (list, gold_set) in &usable {
            if k > list.ranked.len() {
                log::warn!(
                    "top-{k} exceeds ranking of {} for query {}; truncating",
                    list.ranked.len(),
                    list.query_id
                );
            }
            let top: Vec<String> = list
                .ranked
                .iter()
                .take(k)
                .map(|(id, _)| id.clone())
                .collect();
            per_query.push(score_retrieval(&list.query_id, &top, gold_set));
        }
        let agg = macro_aggregate(&per_query);
        rows.push(SweepRow {
            k,
            precision: agg.precision,
            recall: agg.recall,
            f1: agg.f1,
        });
    }
    let best = *rows
        .iter()
        .max_by(|a, b| {
            a.f1.partial_cmp(&b.f1)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(b.k.cmp(&a.k))
        })
        .expect("at least one row");
    Ok(SweepOutcome {
        rows,
        best,
        excluded,
    })
}

/// Candidate-stage quality under two labeled interpretations.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct UpperBoundReport {
    /// Stage 2 assumed perfect: it would keep exactly candidates
    /// intersected with gold, so per-query precision is 1 when any gold
    /// candidate exists (0 otherwise) and recall is the candidate coverage
    /// of gold. Aggregate precision equals the fraction of queries whose
    /// candidates hit gold at all.
    pub perfect_stage2: Aggregate,
    /// The candidate set scored as if it were the final answer.
    pub candidate_set: Aggregate,
}

/// Scores candidate sets against gold, macro-averaged over the queries with
/// gold labels. Failed queries count as empty candidate sets.
pub fn upper_bound(
    results: &[TraceResult],
    gold: &HashMap<String, HashSet<String>>,
) -> UpperBoundReport {
    let mut perfect = Vec::new();
    let mut naive = Vec::new();
    for result in results {
        let Some(gold_set) = gold.get(&result.query_id).filter(|g| !g.is_empty()) else {
            continue;
        };
        let gold_refs: HashSet<&str> = gold_set.iter().map(String::as_str).collect();
        let candidates: HashSet<&str> =
            result.candidate_ids.iter().map(String::as_str).collect();
        let hits = candidates.intersection(&gold_refs).count();
        let precision = if hits > 0 { 1.0 } else { 0.0 };
        let recall = hits as f64 / gold_refs.len() as f64;
        perfect.push(QueryMetrics {
            query_id: result.query_id.clone(),
            precision,
            recall,
            f1: f1_score(precision, recall),
            retrieved_count: candidates.len(),
            gold_count: gold_refs.len(),
        });
        naive.push(score_retrieval(&result.query_id, &result.candidate_ids, &gold_refs));
    }
    UpperBoundReport {
        perfect_stage2: macro_aggregate(&perfect),
        candidate_set: macro_aggregate(&naive),
    }
}

/// Wall-time totals in microseconds, straight sums over result timings.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimingReport {
    pub queries: usize,
    pub total_us: u64,
    pub mean_per_query_us: u64,
    pub retrieval_us: u64,
    pub scoring_us: u64,
}

pub fn timing_report(results: &[TraceResult]) -> TimingReport {
    if results.is_empty() {
        return TimingReport::default();
    }
    let total: u64 = results.iter().map(|r| r.timings.total_us).sum();
    TimingReport {
        queries: results.len(),
        total_us: total,
        mean_per_query_us: total / results.len() as u64,
        retrieval_us: results.iter().map(|r| r.timings.retrieval_us).sum(),
        scoring_us: results.iter().map(|r| r.timings.scoring_us).sum(),
    }
}

/// Full evaluation of a trace run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_query: Vec<QueryMetrics>,
    /// Unweighted mean over evaluated queries.
    pub macro_avg: Aggregate,
    /// Pooled counts over evaluated queries.
    pub micro_avg: Aggregate,
    /// Queries without gold labels, excluded from the averages.
    pub excluded_queries: Vec<String>,
    /// Queries whose trace failed; scored as empty retrievals.
    pub failed_queries: Vec<String>,
    pub upper_bound: UpperBoundReport,
    pub timings: TimingReport,
    /// Top-k sweep of a ranked baseline evaluated alongside, when one was
    /// supplied; its `best` row is the ranked method's headline number.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ranked_sweep: Option<SweepOutcome>,
}

/// Evaluates trace results against the queries' gold labels.
pub fn evaluate_trace(
    results: &[TraceResult],
    queries: &[Query],
) -> Result<EvalReport, EvalError> {
    if results.is_empty() {
        return Err(EvalError::Empty("no trace results".into()));
    }
    let by_id: HashMap<&str, &Query> = queries.iter().map(|q| (q.id.as_str(), q)).collect();
    let mut per_query = Vec::new();
    let mut excluded = Vec::new();
    let mut failed = Vec::new();
    let mut pooled_hits = 0usize;
    let mut pooled_retrieved = 0usize;
    let mut pooled_gold = 0usize;
    for result in results {
        let query = by_id
            .get(result.query_id.as_str())
            .ok_or_else(|| EvalError::MissingQuery {
                query_id: result.query_id.clone(),
            })?;
        if result.failed() {
            failed.push(result.query_id.clone());
        }
        let gold = query.gold_set();
        if gold.is_empty() {
            excluded.push(result.query_id.clone());
            continue;
        }
        let metrics = score_retrieval(&result.query_id, &result.retrieved_ids, &gold);
        let retrieved_set: HashSet<&str> =
            result.retrieved_ids.iter().map(String::as_str).collect();
        pooled_hits += retrieved_set.intersection(&gold).count();
        pooled_retrieved += retrieved_set.len();
        pooled_gold += gold.len();
        per_query.push(metrics);
    }
    if per_query.is_empty() {
        return Err(EvalError::Empty("every query lacks gold labels".into()));
    }
    let micro_precision = if pooled_retrieved > 0 {
        pooled_hits as f64 / pooled_retrieved as f64
    } else {
        0.0
    };
    let micro_recall = if pooled_gold > 0 {
        pooled_hits as f64 / pooled_gold as f64
    } else {
        0.0
    };
    let gold_map: HashMap<String, HashSet<String>> = queries
        .iter()
        .map(|q| (q.id.clone(), q.gold_ids.iter().cloned().collect()))
        .collect();
    Ok(EvalReport {
        macro_avg: macro_aggregate(&per_query),
        micro_avg: Aggregate {
            precision: micro_precision,
            recall: micro_recall,
            f1: f1_score(micro_precision, micro_recall),
        },
        per_query,
        excluded_queries: excluded,
        failed_queries: failed,
        upper_bound: upper_bound(results, &gold_map),
        timings: timing_report(results),
        ranked_sweep: None,
    })
}

pub fn save_report(report: &EvalReport, path: impl AsRef<Path>) -> std::io::Result<()> {
    std::fs::write(
        path,
        serde_json::to_string_pretty(report).expect("report serializes"),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tracer::StageTimings;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn gold_of(ids: &[&str]) -> HashSet<&'static str> {
        // Leak is fine in tests; keeps signatures simple.
        ids.iter()
            .map(|s| Box::leak(s.to_string().into_boxed_str()) as &'static str)
            .collect()
    }

    #[test]
    fn half_right_retrieval_scores_half() {
        let metrics = score_retrieval(
            "q",
            &["d2".to_string(), "d3".to_string()],
            &gold_of(&["d1", "d2"]),
        );
        assert_abs_diff_eq!(metrics.precision, 0.5);
        assert_abs_diff_eq!(metrics.recall, 0.5);
        assert_abs_diff_eq!(metrics.f1, 0.5);
    }

    #[test]
    fn exact_retrieval_scores_one() {
        let metrics = score_retrieval(
            "q",
            &["d1".to_string(), "d2".to_string()],
            &gold_of(&["d1", "d2"]),
        );
        assert_eq!((metrics.precision, metrics.recall, metrics.f1), (1.0, 1.0, 1.0));
    }

    #[test]
    fn empty_retrieval_scores_zero() {
        let metrics = score_retrieval("q", &[], &gold_of(&["d1"]));
        assert_eq!((metrics.precision, metrics.recall, metrics.f1), (0.0, 0.0, 0.0));
    }

    fn ranking(query_id: &str, ids: &[&str]) -> RankedList {
        RankedList {
            query_id: query_id.to_string(),
            ranked: ids
                .iter()
                .enumerate()
                .map(|(i, id)| (id.to_string(), 1.0 - i as f64 * 0.01))
                .collect(),
        }
    }

    fn gold_map(entries: &[(&str, &[&str])]) -> HashMap<String, HashSet<String>> {
        entries
            .iter()
            .map(|(q, ids)| {
                (
                    q.to_string(),
                    ids.iter().map(|s| s.to_string()).collect::<HashSet<_>>(),
                )
            })
            .collect()
    }

    #[test]
    fn top_hit_at_k1_is_perfect() {
        let ranked = vec![ranking("q", &["d1", "d2", "d3"])];
        let gold = gold_map(&[("q", &["d1"])]);
        let outcome = sweep_topk(&ranked, &gold, &[1]).unwrap();
        assert_eq!(outcome.rows[0].precision, 1.0);
        assert_eq!(outcome.rows[0].recall, 1.0);
    }

    #[test]
    fn k10_with_one_gold_dilutes_precision() {
        let ids: Vec<String> = (0..12).map(|i| format!("d{i}")).collect();
        let refs: Vec<&str> = ids.iter().map(String::as_str).collect();
        let ranked = vec![ranking("q", &refs)];
        let gold = gold_map(&[("q", &["d0"])]);
        let outcome = sweep_topk(&ranked, &gold, &[10]).unwrap();
        assert_abs_diff_eq!(outcome.rows[0].precision, 0.1, epsilon = 1e-12);
        assert_abs_diff_eq!(outcome.rows[0].recall, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn sweep_matches_brute_force_recompute() {
        // 20 synthetic queries over a 30-doc id space with varying gold.
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        let ids: Vec<String> = (0..30).map(|i| format!("d{i}")).collect();
        let mut ranked = Vec::new();
        let mut gold: HashMap<String, HashSet<String>> = HashMap::new();
        for q in 0..20 {
            let mut order: Vec<String> = ids.clone();
            for i in (1..order.len()).rev() {
                let j = rng.random_range(0..=i);
                order.swap(i, j);
            }
            let gold_n = rng.random_range(1..=4);
            gold.insert(
                format!("q{q}"),
                order.iter().take(12).cloned().collect::<Vec<_>>()[..]
                    .iter()
                    .rev()
                    .take(gold_n)
                    .cloned()
                    .collect(),
            );
            let refs: Vec<&str> = order.iter().map(String::as_str).collect();
            ranked.push(ranking(&format!("q{q}"), &refs));
        }
        let ks = [1usize, 5, 10, 25];
        let outcome = sweep_topk(&ranked, &gold, &ks).unwrap();
        for (row, &k) in outcome.rows.iter().zip(ks.iter()) {
            let mut p_sum = 0.0;
            let mut r_sum = 0.0;
            let mut f_sum = 0.0;
            for list in &ranked {
                let g = &gold[&list.query_id];
                let hits = list
                    .ranked
                    .iter()
                    .take(k)
                    .filter(|(id, _)| g.contains(id))
                    .count() as f64;
                let taken = list.ranked.len().min(k) as f64;
                let p = hits / taken;
                let r = hits / g.len() as f64;
                p_sum += p;
                r_sum += r;
                f_sum += f1_score(p, r);
            }
            let n = ranked.len() as f64;
            assert_abs_diff_eq!(row.precision, p_sum / n, epsilon = 1e-12);
            assert_abs_diff_eq!(row.recall, r_sum / n, epsilon = 1e-12);
            assert_abs_diff_eq!(row.f1, f_sum / n, epsilon = 1e-12);
        }
        assert!(outcome.rows.iter().all(|r| r.f1 <= outcome.best.f1));
    }

    fn result_with(query_id: &str, candidates: &[&str], retrieved: &[&str]) -> TraceResult {
        TraceResult {
            query_id: query_id.to_string(),
            candidate_ids: candidates.iter().map(|s| s.to_string()).collect(),
            retrieved_ids: retrieved.iter().map(|s| s.to_string()).collect(),
            per_batch: Vec::new(),
            timings: StageTimings {
                retrieval_us: 10,
                scoring_us: 90,
                total_us: 100,
            },
            truncated: false,
            error: None,
        }
    }

    #[test]
    fn covering_candidates_give_unit_upper_bound_recall() {
        let results = vec![
            result_with("q1", &["d1", "d2", "d9"], &[]),
            result_with("q2", &["d3", "d4"], &[]),
        ];
        let gold = gold_map(&[("q1", &["d1", "d2"]), ("q2", &["d3"])]);
        let ub = upper_bound(&results, &gold);
        assert_eq!(ub.perfect_stage2.recall, 1.0);
        assert_eq!(ub.perfect_stage2.precision, 1.0);
        assert!(ub.candidate_set.precision < 1.0);
    }

    #[test]
    fn disjoint_candidates_give_zero_upper_bound() {
        let results = vec![result_with("q1", &["d8", "d9"], &[])];
        let gold = gold_map(&[("q1", &["d1"])]);
        let ub = upper_bound(&results, &gold);
        assert_eq!(ub.perfect_stage2.recall, 0.0);
        assert_eq!(ub.perfect_stage2.precision, 0.0);
        assert_eq!(ub.candidate_set.f1, 0.0);
    }

    #[test]
    fn timings_sum_and_average() {
        let results: Vec<TraceResult> =
            (0..100).map(|i| result_with(&format!("q{i}"), &[], &[])).collect();
        let report = timing_report(&results);
        assert_eq!(report.queries, 100);
        assert_eq!(report.total_us, 100 * 100);
        assert_eq!(report.mean_per_query_us, 100);
        assert_eq!(report.retrieval_us, 1000);
        assert_eq!(report.scoring_us, 9000);
    }

    #[test]
    fn empty_results_give_empty_timing_table() {
        assert_eq!(timing_report(&[]), TimingReport::default());
    }

    #[test]
    fn evaluate_trace_excludes_unlabeled_and_flags_failed() {
        let results = vec![
            result_with("q1", &["d1"], &["d1"]),
            result_with("q2", &["d9"], &["d9"]),
            TraceResult {
                error: Some("boom".into()),
                ..result_with("q3", &[], &[])
            },
        ];
        let queries = vec![
            Query {
                id: "q1".into(),
                text: "t".into(),
                answer: None,
                gold_ids: vec!["d1".into()],
            },
            Query::new("q2", "unlabeled"),
            Query {
                id: "q3".into(),
                text: "t".into(),
                answer: None,
                gold_ids: vec!["d2".into()],
            },
        ];
        let report = evaluate_trace(&results, &queries).unwrap();
        assert_eq!(report.excluded_queries, vec!["q2"]);
        assert_eq!(report.failed_queries, vec!["q3"]);
        // q1 perfect, q3 failed-empty: macro F1 = (1 + 0) / 2.
        assert_abs_diff_eq!(report.macro_avg.f1, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn gold_validation_names_the_offender() {
        let corpus = Corpus::from_documents(vec![crate::corpus::Document::new("d1", "x")]).unwrap();
        let queries = vec![Query {
            id: "q1".into(),
            text: "t".into(),
            answer: None,
            gold_ids: vec!["d1".into(), "ghost".into()],
        }];
        match validate_gold(&queries, &corpus) {
            Err(EvalError::UnknownGoldId { query_id, doc_id }) => {
                assert_eq!(query_id, "q1");
                assert_eq!(doc_id, "ghost");
            }
            other => panic!("expected unknown gold id, got {other:?}"),
        }
    }

    proptest! {
        #[test]
        fn metrics_stay_in_bounds_and_f1_below_harmonic_cap(
            retrieved in proptest::collection::vec(0usize..20, 0..10),
            gold in proptest::collection::hash_set(0usize..20, 1..8),
        ) {
            let retrieved: Vec<String> = retrieved.iter().map(|i| format!("d{i}")).collect();
            let gold_strings: Vec<String> = gold.iter().map(|i| format!("d{i}")).collect();
            let gold_refs: HashSet<&str> = gold_strings.iter().map(String::as_str).collect();
            let m = score_retrieval("q", &retrieved, &gold_refs);
            prop_assert!((0.0..=1.0).contains(&m.precision));
            prop_assert!((0.0..=1.0).contains(&m.recall));
            prop_assert!((0.0..=1.0).contains(&m.f1));
            prop_assert!(m.f1 <= 2.0 * m.precision.min(m.recall) + 1e-12);
        }

        #[test]
        fn sweep_recall_is_non_decreasing_in_k(seed in 0u64..500) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let ids: Vec<String> = (0..15).map(|i| format!("d{i}")).collect();
            let mut ranked = Vec::new();
            let mut gold: HashMap<String, HashSet<String>> = HashMap::new();
            for q in 0..5 {
                let mut order = ids.clone();
                for i in (1..order.len()).rev() {
                    let j = rng.random_range(0..=i);
                    order.swap(i, j);
                }
                let gold_n = rng.random_range(1..=5);
                gold.insert(format!("q{q}"), order.iter().take(gold_n).cloned().collect());
                let refs: Vec<&str> = order.iter().map(String::as_str).collect();
                ranked.push(ranking(&format!("q{q}"), &refs));
            }
            let outcome = sweep_topk(&ranked, &gold, &[1, 3, 7, 15]).unwrap();
            for pair in outcome.rows.windows(2) {
                prop_assert!(pair[1].recall >= pair[0].recall - 1e-12);
            }
        }

        #[test]
        fn macro_aggregation_is_permutation_invariant(seed in 0u64..200) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut metrics: Vec<QueryMetrics> = (0..8)
                .map(|i| {
                    let p: f64 = rng.random();
                    let r: f64 = rng.random();
                    QueryMetrics {
                        query_id: format!("q{i}"),
                        precision: p,
                        recall: r,
                        f1: f1_score(p, r),
                        retrieved_count: 1,
                        gold_count: 1,
                    }
                })
                .collect();
            let fwd = macro_aggregate(&metrics);
            metrics.reverse();
            let rev = macro_aggregate(&metrics);
            prop_assert!((fwd.precision - rev.precision).abs() < 1e-12);
            prop_assert!((fwd.recall - rev.recall).abs() < 1e-12);
            prop_assert!((fwd.f1 - rev.f1).abs() < 1e-12);
        }
    }

    /// Precision at k is provably non-increasing only when every query's
    /// single gold is ranked first (then macro precision is exactly 1/k).
    /// In general a gold entering at rank r > 1 *raises* precision from 0
    /// to 1/r, so the unrestricted claim is false; this pins the provable
    /// sub-case.
    #[test]
    fn sweep_precision_non_increasing_when_gold_ranks_first() {
        let ids: Vec<String> = (0..20).map(|i| format!("d{i}")).collect();
        let refs: Vec<&str> = ids.iter().map(String::as_str).collect();
        let ranked: Vec<RankedList> =
            (0..6).map(|q| ranking(&format!("q{q}"), &refs)).collect();
        let gold = gold_map(&[
            ("q0", &["d0"]),
            ("q1", &["d0"]),
            ("q2", &["d0"]),
            ("q3", &["d0"]),
            ("q4", &["d0"]),
            ("q5", &["d0"]),
        ]);
        let outcome = sweep_topk(&ranked, &gold, &[1, 2, 5, 10, 20]).unwrap();
        for pair in outcome.rows.windows(2) {
            assert!(pair[1].precision <= pair[0].precision + 1e-12);
        }
        assert_abs_diff_eq!(outcome.rows[0].precision, 1.0, epsilon = 1e-12);
    }
}

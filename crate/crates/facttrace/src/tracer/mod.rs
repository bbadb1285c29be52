//! Online tracing: fuzzy cluster retrieval followed by batched LLM
//! supportiveness scoring.
//!
//! A leaf cluster is selected when any of its keywords reaches the fuzzy
//! threshold against the query text; selected members are unioned across
//! leaves and ensemble members. Candidates are then scored `b` at a time
//! through the evaluation prompt, and documents scored 1 form the trace
//! set. Batches of one query may score concurrently; queries run in input
//! order and shared state is immutable, so scripted-oracle runs are
//! reproducible.

pub mod fuzzy;

pub use fuzzy::{simple_ratio, token_set_ratio, TokenSet};

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, Document, Query};
use crate::index::IndexEnsemble;
use crate::llm::prompt::{render_eval_prompt, PromptTemplate, TemplateError};
use crate::llm::{complete, parse_scores, LlmClient, LlmError};

/// Conventional operating point for token-set scorers.
pub const DEFAULT_FUZZY_THRESHOLD: u8 = 80;
/// Candidates scored per LLM call.
pub const DEFAULT_BATCH_SIZE: usize = 15;
/// Per-query cap keeping a pathological threshold from scoring the corpus.
pub const DEFAULT_CANDIDATE_CAP: usize = 600;

const SCORE_FORMAT_REMINDER: &str = "\n\nReminder: end your reply with a single line \
\"#scores: ...\" listing exactly one 0 or 1 per text, separated by commas.";

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("ensemble covers {index_docs} documents but corpus holds {corpus_docs}")]
    CorpusMismatch { index_docs: usize, corpus_docs: usize },
    #[error("fuzzy threshold {0} is outside 0..=100")]
    BadThreshold(u8),
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error(transparent)]
    Template(#[from] TemplateError),
}

/// Cluster retrieval settings. The scorer is the token-set ratio.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FuzzyConfig {
    /// Minimum token-set ratio, in 0..=100, for a keyword to select its leaf.
    pub threshold: u8,
}

impl Default for FuzzyConfig {
    fn default() -> Self {
        Self {
            threshold: DEFAULT_FUZZY_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TraceOptions {
    pub batch_size: usize,
    pub fuzzy: FuzzyConfig,
    pub candidate_cap: usize,
    pub template: PromptTemplate,
    pub mask_sentinel: String,
}

impl Default for TraceOptions {
    fn default() -> Self {
        Self {
            batch_size: DEFAULT_BATCH_SIZE,
            fuzzy: FuzzyConfig::default(),
            candidate_cap: DEFAULT_CANDIDATE_CAP,
            template: PromptTemplate::eval_claim(),
            mask_sentinel: crate::DEFAULT_MASK_SENTINEL.to_string(),
        }
    }
}

/// One scored batch, kept verbatim for audit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchTrace {
    pub doc_ids: Vec<String>,
    pub scores: Vec<u8>,
    pub analysis: String,
    pub raw_response: String,
    /// Set when the response stayed unparseable after the re-ask and the
    /// whole batch was conservatively scored 0.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub fallback_zeroed: bool,
}

/// Wall-clock microseconds per stage.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageTimings {
    pub retrieval_us: u64,
    pub scoring_us: u64,
    pub total_us: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceResult {
    pub query_id: String,
    /// Documents selected by cluster retrieval, pre scoring, first-seen order.
    pub candidate_ids: Vec<String>,
    /// Candidates the LLM scored 1, in candidate order.
    pub retrieved_ids: Vec<String>,
    pub per_batch: Vec<BatchTrace>,
    pub timings: StageTimings,
    /// Set when the candidate cap truncated the selection.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub truncated: bool,
    /// Populated when this query failed outright (e.g. provider exhaustion);
    /// other queries in the same run are unaffected.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl TraceResult {
    pub fn failed(&self) -> bool {
        self.error.is_some()
    }

    /// Copy with timings zeroed, for reproducibility comparisons: payloads
    /// of two scripted-oracle runs are bit-identical, wall clocks are not.
    pub fn without_timings(&self) -> TraceResult {
        TraceResult {
            timings: StageTimings::default(),
            ..self.clone()
        }
    }
}

/// Selects candidate document positions for a query: a leaf qualifies when
/// the best token-set ratio between the query text and its keywords meets
/// the threshold; member lists are unioned across leaves and ensemble
/// members, deduplicated, first-seen order. Leaves without keywords (e.g.
/// failed labeling) never match. An empty result is valid and yields an
/// empty trace downstream.
pub fn retrieve_clusters(
    query: &Query,
    ensemble: &IndexEnsemble,
    cfg: &FuzzyConfig,
) -> Result<Vec<u32>, TraceError> {
    if cfg.threshold > 100 {
        return Err(TraceError::BadThreshold(cfg.threshold));
    }
    let query_tokens = TokenSet::new(&query.text);
    // The same keyword phrase recurs across leaves and ensemble members;
    // memoize per distinct phrase.
    let mut ratio_memo: HashMap<&str, u8> = HashMap::new();
    let mut seen: HashSet<u32> = HashSet::new();
    let mut out: Vec<u32> = Vec::new();
    for index in ensemble.members() {
        for leaf in index.leaves() {
            let matched = leaf.keywords.iter().any(|kw| {
                if kw.is_empty() {
                    return false;
                }
                let ratio = *ratio_memo
                    .entry(kw.as_str())
                    .or_insert_with(|| query_tokens.ratio(&TokenSet::new(kw)));
                ratio >= cfg.threshold
            });
            if matched {
                for &m in &leaf.members {
                    if seen.insert(m) {
                        out.push(m);
                    }
                }
            }
        }
    }
    Ok(out)
}

fn score_batch(
    llm: &dyn LlmClient,
    opts: &TraceOptions,
    query: &Query,
    batch: &[&Document],
) -> Result<BatchTrace, TraceError> {
    let prompt = render_eval_prompt(
        &opts.template,
        query,
        batch,
        &opts.mask_sentinel,
        opts.batch_size,
    )?;
    let doc_ids: Vec<String> = batch.iter().map(|d| d.id.clone()).collect();
    let response = complete(llm, &prompt)?;
    match parse_scores(&response, batch.len()) {
        Ok(parsed) => Ok(BatchTrace {
            doc_ids,
            scores: parsed.scores,
            analysis: parsed.analysis,
            raw_response: response,
            fallback_zeroed: false,
        }),
        Err(first_err) => {
            let retry_prompt = format!("{prompt}{SCORE_FORMAT_REMINDER}");
            let response = complete(llm, &retry_prompt)?;
            match parse_scores(&response, batch.len()) {
                Ok(parsed) => Ok(BatchTrace {
                    doc_ids,
                    scores: parsed.scores,
                    analysis: parsed.analysis,
                    raw_response: response,
                    fallback_zeroed: false,
                }),
                Err(second_err) => {
                    log::warn!(
                        "query {}: batch of {} scored all-0 after malformed responses ({first_err}; then {second_err})",
                        query.id,
                        batch.len()
                    );
                    Ok(BatchTrace {
                        doc_ids,
                        scores: vec![0; batch.len()],
                        analysis: String::new(),
                        raw_response: response,
                        fallback_zeroed: true,
                    })
                }
            }
        }
    }
}

/// Traces one query: retrieve candidate clusters, score candidates in
/// batches of `opts.batch_size`, and keep the documents scored 1.
pub fn trace(
    query: &Query,
    ensemble: &IndexEnsemble,
    corpus: &Corpus,
    llm: &dyn LlmClient,
    opts: &TraceOptions,
) -> Result<TraceResult, TraceError> {
    use rayon::prelude::*;

    if ensemble.doc_count() != corpus.len() {
        return Err(TraceError::CorpusMismatch {
            index_docs: ensemble.doc_count(),
            corpus_docs: corpus.len(),
        });
    }
    let started = Instant::now();
    let mut positions = retrieve_clusters(query, ensemble, &opts.fuzzy)?;
    let mut truncated = false;
    if positions.len() > opts.candidate_cap {
        log::warn!(
            "query {}: {} candidates exceed cap {}, truncating",
            query.id,
            positions.len(),
            opts.candidate_cap
        );
        positions.truncate(opts.candidate_cap);
        truncated = true;
    }
    let retrieval_us = started.elapsed().as_micros() as u64;

    let candidate_ids: Vec<String> = positions
        .iter()
        .map(|&p| corpus.get(p as usize).expect("position within corpus").id.clone())
        .collect();

    let scoring_started = Instant::now();
    let batches: Vec<Vec<&Document>> = positions
        .chunks(opts.batch_size.max(1))
        .map(|chunk| {
            chunk
                .iter()
                .map(|&p| corpus.get(p as usize).expect("position within corpus"))
                .collect()
        })
        .collect();
    let parallelism = llm.config().parallelism.max(1);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism)
        .build()
        .expect("scoring thread pool");
    let scored: Result<Vec<BatchTrace>, TraceError> = pool.install(|| {
        batches
            .par_iter()
            .map(|batch| score_batch(llm, opts, query, batch))
            .collect()
    });
    let per_batch = scored?;
    let scoring_us = scoring_started.elapsed().as_micros() as u64;

    let mut retrieved_ids = Vec::new();
    for batch in &per_batch {
        for (doc_id, score) in batch.doc_ids.iter().zip(batch.scores.iter()) {
            if *score == 1 {
                retrieved_ids.push(doc_id.clone());
            }
        }
    }

    Ok(TraceResult {
        query_id: query.id.clone(),
        candidate_ids,
        retrieved_ids,
        per_batch,
        timings: StageTimings {
            retrieval_us,
            scoring_us,
            total_us: started.elapsed().as_micros() as u64,
        },
        truncated,
        error: None,
    })
}

/// Traces every query in order. A failing query yields a result flagged
/// with its error instead of aborting the run.
pub fn trace_all(
    queries: &[Query],
    ensemble: &IndexEnsemble,
    corpus: &Corpus,
    llm: &dyn LlmClient,
    opts: &TraceOptions,
) -> Vec<TraceResult> {
    queries
        .iter()
        .map(|query| match trace(query, ensemble, corpus, llm, opts) {
            Ok(result) => result,
            Err(e) => {
                log::warn!("query {} failed: {e}", query.id);
                TraceResult {
                    query_id: query.id.clone(),
                    candidate_ids: Vec::new(),
                    retrieved_ids: Vec::new(),
                    per_batch: Vec::new(),
                    timings: StageTimings::default(),
                    truncated: false,
                    error: Some(e.to_string()),
                }
            }
        })
        .collect()
}

/// Writes one result record per line, raw analyses included.
pub fn save_results(results: &[TraceResult], path: impl AsRef<Path>) -> std::io::Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for r in results {
        writeln!(out, "{}", serde_json::to_string(r).expect("result serializes"))?;
    }
    out.flush()
}

pub fn load_results(path: impl AsRef<Path>) -> std::io::Result<Vec<TraceResult>> {
    let reader = BufReader::new(File::open(path)?);
    let mut results = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let r: TraceResult = serde_json::from_str(&line).map_err(|e| {
            std::io::Error::new(
                std::io::ErrorKind::InvalidData,
                format!("result line {}: {e}", i + 1),
            )
        })?;
        results.push(r);
    }
    Ok(results)
}

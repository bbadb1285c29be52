//! Reference rankers: Okapi BM25 over whitespace tokens and
//! embedding-cosine ranking.
//!
//! BM25 follows the Okapi scoring with the smoothed idf
//! `ln((N - n + 0.5) / (n + 0.5) + 1)` and an epsilon floor for negative
//! idf values at `epsilon * mean(positive idfs)`. With the smoothed idf the
//! floor can never fire (the argument of the log stays above 1); it is kept
//! because the scoring contract names it, and [`apply_idf_floor`] is
//! exercised directly in tests. Defaults are k1 = 1.5, b = 0.75,
//! epsilon = 0.25.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, Query};
use crate::embed::{cosine_slices, EmbeddingMatrix, EmbeddingVector};

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("invalid input: {0}")]
    Input(String),
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
    /// Factor of the mean positive idf used to floor negative idf values.
    pub epsilon: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Self {
            k1: 1.5,
            b: 0.75,
            epsilon: 0.25,
        }
    }
}

impl Bm25Params {
    pub fn validate(&self) -> Result<(), BaselineError> {
        if self.k1 < 0.0 {
            return Err(BaselineError::Input(format!("k1 must be >= 0, got {}", self.k1)));
        }
        if !(0.0..=1.0).contains(&self.b) {
            return Err(BaselineError::Input(format!("b must be in [0, 1], got {}", self.b)));
        }
        Ok(())
    }
}

/// Tokenization knobs. Lowercasing is on by default and can be switched off
/// for strict whitespace-only replication.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TokenizeOptions {
    pub mask_sentinel: String,
    pub lowercase: bool,
}

impl Default for TokenizeOptions {
    fn default() -> Self {
        Self {
            mask_sentinel: crate::DEFAULT_MASK_SENTINEL.to_string(),
            lowercase: true,
        }
    }
}

/// Splits on whitespace, drops tokens equal to the mask sentinel, and
/// lowercases.
pub fn bm25_tokenize(text: &str, mask_sentinel: &str) -> Vec<String> {
    bm25_tokenize_opts(
        text,
        &TokenizeOptions {
            mask_sentinel: mask_sentinel.to_string(),
            lowercase: true,
        },
    )
}

pub fn bm25_tokenize_opts(text: &str, opts: &TokenizeOptions) -> Vec<String> {
    text.split_whitespace()
        .filter(|t| *t != opts.mask_sentinel)
        .map(|t| {
            if opts.lowercase {
                t.to_lowercase()
            } else {
                t.to_string()
            }
        })
        .collect()
}

/// A full ranking of the corpus for one query, scores non-increasing, ties
/// broken by corpus order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedList {
    pub query_id: String,
    pub ranked: Vec<(String, f64)>,
}

impl RankedList {
    pub fn top_ids(&self, k: usize) -> Vec<&str> {
        self.ranked.iter().take(k).map(|(id, _)| id.as_str()).collect()
    }
}

#[derive(Debug, Clone)]
pub struct Bm25Index {
    params: Bm25Params,
    tokenize: TokenizeOptions,
    doc_ids: Vec<String>,
    postings: HashMap<String, Vec<(u32, u32)>>,
    doc_len: Vec<u32>,
    avgdl: f64,
    idf: HashMap<String, f64>,
}

/// Floors negative idf values at `epsilon * mean(positive idfs)` in place,
/// mirroring the classic Okapi implementations. No-op when nothing is
/// negative; the floor is 0 when nothing is positive.
pub fn apply_idf_floor(idf: &mut HashMap<String, f64>, epsilon: f64) {
    let positives: Vec<f64> = idf.values().copied().filter(|v| *v > 0.0).collect();
    let mean_positive = if positives.is_empty() {
        0.0
    } else {
        positives.iter().sum::<f64>() / positives.len() as f64
    };
    let floor = epsilon * mean_positive;
    for value in idf.values_mut() {
        if *value < 0.0 {
            *value = floor;
        }
    }
}

impl Bm25Index {
    /// The smoothed idf for any term, known or not; unknown terms get the
    /// document-frequency-zero value.
    pub fn idf(&self, term: &str) -> f64 {
        match self.idf.get(term) {
            Some(v) => *v,
            None => {
                let n_docs = self.doc_ids.len() as f64;
                ((n_docs + 0.5) / 0.5 + 1.0).ln()
            }
        }
    }

    pub fn avgdl(&self) -> f64 {
        self.avgdl
    }

    pub fn doc_count(&self) -> usize {
        self.doc_ids.len()
    }
}

/// Builds the BM25 statistics over the raw document texts.
pub fn bm25_build(
    corpus: &Corpus,
    params: Bm25Params,
    tokenize: TokenizeOptions,
) -> Result<Bm25Index, BaselineError> {
    params.validate()?;
    if corpus.is_empty() {
        return Err(BaselineError::Input("cannot build BM25 over an empty corpus".into()));
    }
    let n = corpus.len();
    let mut postings: HashMap<String, Vec<(u32, u32)>> = HashMap::new();
    let mut doc_len = Vec::with_capacity(n);
    for (pos, doc) in corpus.documents().iter().enumerate() {
        let tokens = bm25_tokenize_opts(&doc.text, &tokenize);
        doc_len.push(tokens.len() as u32);
        let mut tf: HashMap<String, u32> = HashMap::new();
        for t in tokens {
            *tf.entry(t).or_insert(0) += 1;
        }
        for (term, count) in tf {
            postings.entry(term).or_default().push((pos as u32, count));
        }
    }
    let avgdl = doc_len.iter().map(|l| *l as f64).sum::<f64>() / n as f64;
    let mut idf: HashMap<String, f64> = postings
        .iter()
        .map(|(term, docs)| {
            let n_t = docs.len() as f64;
            let value = ((n as f64 - n_t + 0.5) / (n_t + 0.5) + 1.0).ln();
            (term.clone(), value)
        })
        .collect();
    apply_idf_floor(&mut idf, params.epsilon);
    Ok(Bm25Index {
        params,
        tokenize,
        doc_ids: corpus.documents().iter().map(|d| d.id.clone()).collect(),
        postings,
        doc_len,
        avgdl,
        idf,
    })
}

/// Scores the whole corpus for one query:
/// `sum_t idf(t) * tf * (k1 + 1) / (tf + k1 * (1 - b + b * |d| / avgdl))`
/// over the query's token occurrences. An empty tokenized query scores
/// everything 0, i.e. ranks in corpus order.
pub fn bm25_rank(index: &Bm25Index, query: &Query) -> RankedList {
    let tokens = bm25_tokenize_opts(&query.text, &index.tokenize);
    let mut scores = vec![0.0f64; index.doc_ids.len()];
    let k1 = index.params.k1;
    let b = index.params.b;
    for token in &tokens {
        let Some(docs) = index.postings.get(token) else {
            continue;
        };
        let idf = index.idf[token];
        for &(doc, tf) in docs {
            let tf = tf as f64;
            let len_norm = 1.0 - b + b * index.doc_len[doc as usize] as f64 / index.avgdl;
            scores[doc as usize] += idf * tf * (k1 + 1.0) / (tf + k1 * len_norm);
        }
    }
    rank_scores(&query.id, &index.doc_ids, &scores)
}

/// Ranks the whole corpus by cosine against the query vector, ties broken
/// by corpus order. Documents with zero-norm vectors sink to the bottom
/// with the sentinel score -2 (below any cosine).
pub fn embed_rank(
    matrix: &EmbeddingMatrix,
    query_vec: &EmbeddingVector,
    query_id: &str,
    corpus: &Corpus,
) -> Result<RankedList, BaselineError> {
    if query_vec.dim() != matrix.dim() {
        return Err(BaselineError::Input(format!(
            "query dimension {} does not match matrix dimension {}",
            query_vec.dim(),
            matrix.dim()
        )));
    }
    if query_vec.l2_norm() == 0.0 {
        return Err(BaselineError::DegenerateInput("zero query vector".into()));
    }
    if matrix.rows() != corpus.len() {
        return Err(BaselineError::Input(format!(
            "matrix holds {} rows for a corpus of {}",
            matrix.rows(),
            corpus.len()
        )));
    }
    let scores: Vec<f64> = (0..matrix.rows())
        .map(|i| cosine_slices(matrix.row(i), query_vec.values()).unwrap_or(-2.0))
        .collect();
    let doc_ids: Vec<String> = corpus.documents().iter().map(|d| d.id.clone()).collect();
    Ok(rank_scores(query_id, &doc_ids, &scores))
}

fn rank_scores(query_id: &str, doc_ids: &[String], scores: &[f64]) -> RankedList {
    let mut order: Vec<usize> = (0..doc_ids.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    RankedList {
        query_id: query_id.to_string(),
        ranked: order
            .into_iter()
            .map(|i| (doc_ids[i].clone(), scores[i]))
            .collect(),
    }
}

/// Writes one ranked list per line. `keep_top == 0` keeps the full corpus
/// ranking.
pub fn save_ranked(
    lists: &[RankedList],
    keep_top: usize,
    path: impl AsRef<Path>,
) -> Result<(), BaselineError> {
    let mut out = BufWriter::new(File::create(path)?);
    for list in lists {
        let trimmed = if keep_top > 0 && list.ranked.len() > keep_top {
            RankedList {
                query_id: list.query_id.clone(),
                ranked: list.ranked[..keep_top].to_vec(),
            }
        } else {
            list.clone()
        };
        writeln!(out, "{}", serde_json::to_string(&trimmed).expect("ranked list serializes"))?;
    }
    out.flush()?;
    Ok(())
}

pub fn load_ranked(path: impl AsRef<Path>) -> Result<Vec<RankedList>, BaselineError> {
    let reader = BufReader::new(File::open(path)?);
    let mut lists = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let list: RankedList = serde_json::from_str(&line)
            .map_err(|e| BaselineError::Input(format!("ranked line {}: {e}", i + 1)))?;
        lists.push(list);
    }
    Ok(lists)
}

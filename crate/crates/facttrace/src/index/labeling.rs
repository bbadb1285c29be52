//! Keyword labeling of leaf clusters.
//!
//! Each leaf's member texts are concatenated (sampled down to a character
//! budget when oversized), sent through the keyword prompt, and the parsed
//! phrases become the leaf's semantic label. Leaves are labeled
//! concurrently up to the client's parallelism. A leaf whose response stays
//! unparseable after one re-ask is left without keywords and reported; it
//! simply cannot be retrieved later, which shows up in recall.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::Corpus;
use crate::llm::prompt::{render_keyword_prompt, PromptTemplate};
use crate::llm::{complete, parse_keywords, LlmClient};

use super::SemanticIndex;

pub const DEFAULT_CLUSTER_CHAR_BUDGET: usize = 8000;
pub const MAX_KEYWORDS: usize = 10;
pub const MIN_KEYWORDS: usize = 5;

const FORMAT_REMINDER: &str = "\n\nReminder: answer with a single line of the form \
\"#keywords: keyword one, keyword two, ...\" and nothing else.";

#[derive(Debug, Clone)]
pub struct LabelOptions {
    pub template: PromptTemplate,
    /// Character budget for one cluster's concatenated texts.
    pub char_budget: usize,
    pub mask_sentinel: String,
}

impl Default for LabelOptions {
    fn default() -> Self {
        Self {
            template: PromptTemplate::keyword(),
            char_budget: DEFAULT_CLUSTER_CHAR_BUDGET,
            mask_sentinel: crate::DEFAULT_MASK_SENTINEL.to_string(),
        }
    }
}

/// One leaf that could not be labeled.
#[derive(Debug, Clone)]
pub struct LabelFailure {
    pub leaf_id: u32,
    pub error: String,
}

#[derive(Debug, Clone, Default)]
pub struct LabelingReport {
    pub labeled: usize,
    pub failures: Vec<LabelFailure>,
    /// Leaves whose texts were sampled down to the character budget.
    pub sampled_leaves: usize,
    /// Leaves whose response held more than the keyword cap; extras dropped.
    pub overlong_keyword_lists: usize,
}

impl LabelingReport {
    pub fn merge(&mut self, other: LabelingReport) {
        self.labeled += other.labeled;
        self.failures.extend(other.failures);
        self.sampled_leaves += other.sampled_leaves;
        self.overlong_keyword_lists += other.overlong_keyword_lists;
    }
}

/// Builds the text block for one leaf: member texts joined by newlines,
/// uniformly sampled (seeded by index seed and leaf id) when over budget.
/// Selected texts keep member order.
fn cluster_text(
    corpus: &Corpus,
    members: &[u32],
    budget: usize,
    mask_sentinel: &str,
    seed: u64,
    leaf_id: u32,
) -> (String, bool) {
    let rendered: Vec<String> = members
        .iter()
        .map(|&m| corpus.get(m as usize).expect("member in corpus").rendered_text(mask_sentinel))
        .collect();
    let total: usize = rendered.iter().map(|t| t.len() + 1).sum();
    if total <= budget {
        return (rendered.join("\n"), false);
    }
    let mut order: Vec<usize> = (0..rendered.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(crate::embed::fnv1a64_seeded(
        seed,
        &leaf_id.to_le_bytes(),
    ));
    order.shuffle(&mut rng);
    let mut chosen = Vec::new();
    let mut used = 0usize;
    for idx in order {
        let cost = rendered[idx].len() + 1;
        if used + cost > budget {
            continue;
        }
        used += cost;
        chosen.push(idx);
    }
    if chosen.is_empty() {
        // Every single text exceeds the budget; truncate the first member
        // at a char boundary.
        let first = &rendered[0];
        let cut = first
            .char_indices()
            .take_while(|(i, _)| *i < budget)
            .last()
            .map(|(i, ch)| i + ch.len_utf8())
            .unwrap_or(0);
        return (first[..cut].to_string(), true);
    }
    chosen.sort_unstable();
    let texts: Vec<&str> = chosen.iter().map(|&i| rendered[i].as_str()).collect();
    (texts.join("\n"), true)
}

fn label_one_leaf(
    llm: &dyn LlmClient,
    template: &PromptTemplate,
    text: &str,
) -> Result<Vec<String>, String> {
    let prompt = render_keyword_prompt(template, text).map_err(|e| e.to_string())?;
    let response = complete(llm, &prompt).map_err(|e| e.to_string())?;
    match parse_keywords(&response) {
        Ok(keywords) => Ok(keywords),
        Err(first_err) => {
            let retry_prompt = format!("{prompt}{FORMAT_REMINDER}");
            let response = complete(llm, &retry_prompt).map_err(|e| e.to_string())?;
            parse_keywords(&response).map_err(|second_err| {
                format!("unparseable keywords after re-ask: {first_err}; then: {second_err}")
            })
        }
    }
}

/// Labels every leaf of `index` in place and reports what happened.
pub fn label_clusters(
    index: &mut SemanticIndex,
    corpus: &Corpus,
    llm: &dyn LlmClient,
    opts: &LabelOptions,
) -> LabelingReport {
    use rayon::prelude::*;

    let leaf_ids: Vec<u32> = index.leaf_ids().to_vec();
    let jobs: Vec<(u32, String, bool)> = leaf_ids
        .iter()
        .map(|&leaf_id| {
            let members = &index.node(leaf_id).members;
            let (text, sampled) = cluster_text(
                corpus,
                members,
                opts.char_budget,
                &opts.mask_sentinel,
                index.seed(),
                leaf_id,
            );
            (leaf_id, text, sampled)
        })
        .collect();

    let parallelism = llm.config().parallelism.max(1);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism)
        .build()
        .expect("labeling thread pool");
    let outcomes: Vec<(u32, bool, Result<Vec<String>, String>)> = pool.install(|| {
        jobs.par_iter()
            .map(|(leaf_id, text, sampled)| {
                (*leaf_id, *sampled, label_one_leaf(llm, &opts.template, text))
            })
            .collect()
    });

    let mut report = LabelingReport::default();
    for (leaf_id, sampled, outcome) in outcomes {
        if sampled {
            report.sampled_leaves += 1;
        }
        match outcome {
            Ok(mut keywords) => {
                keywords.dedup();
                if keywords.len() > MAX_KEYWORDS {
                    log::warn!(
                        "leaf {leaf_id}: {} keywords returned, keeping the first {MAX_KEYWORDS}",
                        keywords.len()
                    );
                    keywords.truncate(MAX_KEYWORDS);
                    report.overlong_keyword_lists += 1;
                } else if keywords.len() < MIN_KEYWORDS {
                    log::warn!(
                        "leaf {leaf_id}: only {} keywords returned (contract asks for {MIN_KEYWORDS}-{MAX_KEYWORDS})",
                        keywords.len()
                    );
                }
                index.node_mut(leaf_id).keywords = keywords;
                report.labeled += 1;
            }
            Err(error) => {
                log::warn!("leaf {leaf_id}: labeling failed: {error}");
                index.node_mut(leaf_id).keywords = Vec::new();
                report.failures.push(LabelFailure { leaf_id, error });
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Document;
    use crate::embed::{embed_corpus, HashEmbeddingProvider};
    use crate::index::{build_index, IndexParams};
    use crate::llm::{CannedClient, LlmConfig, LlmError, ScriptedOracle};
    use std::collections::HashMap;

    fn tiny_corpus(n: usize) -> Corpus {
        let docs: Vec<Document> = (0..n)
            .map(|i| {
                Document::new(
                    format!("d{i}"),
                    format!("football striker stadium goal number {i}"),
                )
            })
            .collect();
        Corpus::from_documents(docs).unwrap()
    }

    fn build_tiny_index(corpus: &Corpus) -> SemanticIndex {
        let provider = HashEmbeddingProvider::new(16, 0).unwrap();
        let matrix = embed_corpus(&provider, corpus, crate::DEFAULT_MASK_SENTINEL).unwrap();
        build_index(&matrix, &IndexParams::default()).unwrap()
    }

    #[test]
    fn scripted_oracle_labels_every_leaf() {
        let corpus = tiny_corpus(30);
        let mut index = build_tiny_index(&corpus);
        let oracle = ScriptedOracle::new(&corpus, &Default::default(), crate::DEFAULT_MASK_SENTINEL);
        let report = label_clusters(&mut index, &corpus, &oracle, &LabelOptions::default());
        assert!(report.failures.is_empty());
        assert_eq!(report.labeled, index.leaf_ids().len());
        assert!(index.is_labeled());
        let leaf = index.node(index.leaf_ids()[0]);
        assert!(leaf.keywords.contains(&"football".to_string()));
    }

    /// Client that answers every prompt with one fixed response.
    struct FixedClient {
        config: LlmConfig,
        response: String,
    }

    impl LlmClient for FixedClient {
        fn config(&self) -> &LlmConfig {
            &self.config
        }
        fn complete_once(&self, _prompt: &str) -> Result<String, LlmError> {
            Ok(self.response.clone())
        }
    }

    fn fixed(response: &str) -> FixedClient {
        FixedClient {
            config: LlmConfig {
                backoff_ms: 1,
                ..LlmConfig::default()
            },
            response: response.to_string(),
        }
    }

    #[test]
    fn canned_five_keywords_are_normalized() {
        let corpus = tiny_corpus(10);
        let mut index = build_tiny_index(&corpus);
        let client = fixed("#keywords: taiwan, Executive Yuan, premier, elections, governance");
        let report = label_clusters(&mut index, &corpus, &client, &LabelOptions::default());
        assert!(report.failures.is_empty());
        let leaf = index.node(index.leaf_ids()[0]);
        assert_eq!(
            leaf.keywords,
            vec!["taiwan", "executive yuan", "premier", "elections", "governance"]
        );
    }

    #[test]
    fn twelve_keywords_are_capped_at_ten() {
        let corpus = tiny_corpus(10);
        let mut index = build_tiny_index(&corpus);
        let client = fixed("#keywords: a1, b2, c3, d4, e5, f6, g7, h8, i9, j10, k11, l12");
        let report = label_clusters(&mut index, &corpus, &client, &LabelOptions::default());
        assert_eq!(report.overlong_keyword_lists, 1);
        let leaf = index.node(index.leaf_ids()[0]);
        assert_eq!(leaf.keywords.len(), 10);
        assert_eq!(leaf.keywords[0], "a1");
        assert_eq!(leaf.keywords[9], "j10");
    }

    #[test]
    fn unparseable_response_leaves_empty_keywords_and_reports() {
        let corpus = tiny_corpus(10);
        let mut index = build_tiny_index(&corpus);
        let client = fixed("I refuse to answer in the requested format");
        let report = label_clusters(&mut index, &corpus, &client, &LabelOptions::default());
        assert_eq!(report.labeled, 0);
        assert_eq!(report.failures.len(), index.leaf_ids().len());
        assert!(report.failures[0].error.contains("re-ask"));
        assert!(index.node(index.leaf_ids()[0]).keywords.is_empty());
    }

    #[test]
    fn malformed_then_ok_uses_the_re_ask() {
        let corpus = tiny_corpus(6);
        let mut index = build_tiny_index(&corpus);
        // Build the exact prompts the labeler will send: the plain one maps
        // to garbage, the re-ask (with reminder) to a valid response.
        let members = &index.node(index.leaf_ids()[0]).members;
        let (text, _) = cluster_text(
            &corpus,
            members,
            DEFAULT_CLUSTER_CHAR_BUDGET,
            crate::DEFAULT_MASK_SENTINEL,
            index.seed(),
            index.leaf_ids()[0],
        );
        let prompt = render_keyword_prompt(&PromptTemplate::keyword(), &text).unwrap();
        let retry_prompt = format!("{prompt}{FORMAT_REMINDER}");
        let client = CannedClient::new(HashMap::from([
            (prompt, "no marker".to_string()),
            (retry_prompt, "#keywords: alpha, beta, gamma, delta, epsilon".to_string()),
        ]));
        let report = label_clusters(&mut index, &corpus, &client, &LabelOptions::default());
        assert!(report.failures.is_empty());
        assert_eq!(index.node(index.leaf_ids()[0]).keywords.len(), 5);
    }

    #[test]
    fn oversized_clusters_are_sampled_to_budget() {
        let corpus = tiny_corpus(80);
        let mut index = build_tiny_index(&corpus);
        let oracle = ScriptedOracle::new(&corpus, &Default::default(), crate::DEFAULT_MASK_SENTINEL);
        let opts = LabelOptions {
            char_budget: 200,
            ..LabelOptions::default()
        };
        let report = label_clusters(&mut index, &corpus, &oracle, &opts);
        assert!(report.sampled_leaves >= 1);
        assert!(index.is_labeled());
    }

    #[test]
    fn sampling_is_deterministic() {
        let corpus = tiny_corpus(80);
        let index = build_tiny_index(&corpus);
        let members = &index.node(index.leaf_ids()[0]).members;
        let a = cluster_text(&corpus, members, 300, "<MASK>", index.seed(), 0);
        let b = cluster_text(&corpus, members, 300, "<MASK>", index.seed(), 0);
        assert_eq!(a, b);
        assert!(a.1, "expected sampling to kick in");
        assert!(a.0.len() <= 300);
    }
}

//! Deterministic rule-table client for offline runs.
//!
//! The oracle answers keyword prompts with the top-frequency content tokens
//! of the cluster text it is shown, and evaluation prompts with scores
//! looked up in a fact table mapping query texts to the ids of their
//! supporting documents. Responses are pure functions of the prompt, so
//! whole pipeline runs are reproducible bit for bit.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::llm::parse::normalize_keyword;
use crate::llm::{LlmClient, LlmConfig, LlmError};

/// One synthetic fact: every surface form of the query mapped to the ids of
/// the documents that support it. Documents not listed are unsupportive.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FactRule {
    /// All accepted surface texts for the query (e.g. original and
    /// paraphrased forms).
    pub query_texts: Vec<String>,
    pub supportive_ids: Vec<String>,
}

/// The full supportiveness rule table.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct OracleRules {
    pub facts: Vec<FactRule>,
}

impl OracleRules {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, LlmError> {
        let data = std::fs::read_to_string(path.as_ref()).map_err(|e| LlmError::Provider {
            attempts: 1,
            last: format!("cannot read rules file: {e}"),
        })?;
        serde_json::from_str(&data).map_err(|e| LlmError::Provider {
            attempts: 1,
            last: format!("cannot parse rules file: {e}"),
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), LlmError> {
        let data = serde_json::to_string_pretty(self).expect("rules serialize");
        std::fs::write(path.as_ref(), data).map_err(|e| LlmError::Provider {
            attempts: 1,
            last: format!("cannot write rules file: {e}"),
        })
    }
}

/// Words too generic to serve as cluster keywords.
const STOPWORDS: &[&str] = &[
    "a", "an", "and", "are", "as", "at", "be", "been", "but", "by", "for", "from", "had", "has",
    "have", "he", "her", "his", "if", "in", "is", "it", "its", "no", "not", "of", "on", "or",
    "she", "that", "the", "their", "then", "they", "this", "to", "was", "we", "were", "with",
    "you",
];

fn is_stopword(token: &str) -> bool {
    STOPWORDS.binary_search(&token).is_ok()
}

/// Top-frequency content tokens of `text`: tokens are lowercased
/// alphanumeric runs; stopwords, single characters and pure numerals are
/// dropped (the keyword prompt asks for key entities, and numerals make
/// terrible labels); ties break lexicographically. Up to ten tokens are
/// kept; beyond the first five, only tokens with at least a quarter of the
/// top count (and at least two occurrences) qualify, so rare strays do not
/// dilute the label.
pub fn top_content_tokens(text: &str) -> Vec<String> {
    let mut counts: HashMap<String, usize> = HashMap::new();
    for raw in text.split(|c: char| !c.is_alphanumeric()) {
        if raw.len() < 2 || raw.chars().all(|c| c.is_ascii_digit()) {
            continue;
        }
        let token = raw.to_lowercase();
        if is_stopword(&token) {
            continue;
        }
        *counts.entry(token).or_insert(0) += 1;
    }
    let mut ranked: Vec<(String, usize)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let top = match ranked.first() {
        Some((_, c)) => *c,
        None => return Vec::new(),
    };
    let cutoff = (top / 4).max(2);
    let mut keywords = Vec::new();
    for (token, count) in &ranked {
        if keywords.len() >= 10 {
            break;
        }
        if keywords.len() >= 5 && *count < cutoff {
            break;
        }
        keywords.push(token.clone());
    }
    keywords
}

/// Rule-table chat client. See the module docs for the response scheme.
pub struct ScriptedOracle {
    config: LlmConfig,
    doc_id_by_text: HashMap<String, String>,
    support_by_query: HashMap<String, HashSet<String>>,
}

impl ScriptedOracle {
    /// Builds the oracle over a corpus and a rule table. Document lookup
    /// keys are the rendered texts (masks resolved), matching what prompts
    /// contain.
    pub fn new(corpus: &Corpus, rules: &OracleRules, mask_sentinel: &str) -> Self {
        let mut doc_id_by_text = HashMap::with_capacity(corpus.len());
        for doc in corpus.documents() {
            let key = normalize_keyword(&doc.rendered_text(mask_sentinel));
            if let Some(prev) = doc_id_by_text.insert(key, doc.id.clone()) {
                log::warn!(
                    "scripted oracle: documents {prev:?} and {:?} render to identical text; \
                     scores will follow {prev:?}",
                    doc.id
                );
            }
        }
        let mut support_by_query = HashMap::new();
        for fact in &rules.facts {
            let ids: HashSet<String> = fact.supportive_ids.iter().cloned().collect();
            for text in &fact.query_texts {
                support_by_query.insert(normalize_keyword(text), ids.clone());
            }
        }
        Self {
            config: LlmConfig {
                model_id: "scripted-oracle".to_string(),
                backoff_ms: 1,
                ..LlmConfig::default()
            },
            doc_id_by_text,
            support_by_query,
        }
    }

    fn answer_keywords(&self, prompt: &str) -> String {
        let start = prompt
            .find("Group of sentences:")
            .map(|i| i + "Group of sentences:".len())
            .unwrap_or(0);
        let rest = &prompt[start..];
        let end = rest.find("Output the keywords").unwrap_or(rest.len());
        let cluster_text = &rest[..end];
        let keywords = top_content_tokens(cluster_text);
        if keywords.is_empty() {
            return "#keywords: misc".to_string();
        }
        format!("#keywords: {}", keywords.join(", "))
    }

    fn answer_eval(&self, prompt: &str) -> String {
        let fact_at = prompt.rfind("Fact: ").map(|i| i + "Fact: ".len());
        let query_text = match fact_at {
            Some(at) => prompt[at..].lines().next().unwrap_or("").trim(),
            None => "",
        };
        let support = self.support_by_query.get(&normalize_keyword(query_text));
        if support.is_none() {
            log::warn!("scripted oracle: no rule for query text {query_text:?}; scoring all 0");
        }
        let tail = fact_at.map(|at| &prompt[at..]).unwrap_or(prompt);
        let mut scores = Vec::new();
        let mut analysis = String::new();
        for line in tail.lines() {
            let Some(rest) = line.strip_prefix("Text ") else {
                continue;
            };
            let Some((_, text)) = rest.split_once(": ") else {
                continue;
            };
            let idx = scores.len() + 1;
            let doc_id = self.doc_id_by_text.get(&normalize_keyword(text.trim()));
            let supported = match (doc_id, support) {
                (Some(id), Some(ids)) => ids.contains(id),
                _ => false,
            };
            scores.push(if supported { 1u8 } else { 0u8 });
            analysis.push_str(&format!(
                "Text {idx}: {} the rule table for this fact. ",
                if supported { "listed in" } else { "absent from" }
            ));
        }
        let rendered: Vec<String> = scores.iter().map(|s| s.to_string()).collect();
        format!("#analysis: {}\n#scores: {}", analysis.trim(), rendered.join(", "))
    }
}

impl LlmClient for ScriptedOracle {
    fn config(&self) -> &LlmConfig {
        &self.config
    }

    fn complete_once(&self, prompt: &str) -> Result<String, LlmError> {
        if prompt.contains("#keywords:") {
            Ok(self.answer_keywords(prompt))
        } else if prompt.contains("#scores:") {
            Ok(self.answer_eval(prompt))
        } else {
            Err(LlmError::NoCannedResponse)
        }
    }
}

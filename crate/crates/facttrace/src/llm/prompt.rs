//! Prompt templates for keyword labeling and batch supportiveness
//! evaluation.
//!
//! The three built-in templates are shipped as text assets and used
//! unmodified, including their few-shot blocks. Placeholders are literal
//! bracket markers:
//!
//! * `[cluster texts]` - the concatenated member texts of one leaf cluster
//! * `[query]` - the query text under evaluation
//! * `[indexed candidate training data]` - the numbered `Text i:` batch
//!
//! The built-in evaluation templates end with a `Fact:` line even for the
//! claim-style dataset whose few-shot opens with `Claim:`; that wording is
//! kept as-is rather than smoothed over.

use thiserror::Error;

use crate::corpus::{Document, Query};

pub const CLUSTER_TEXTS_PLACEHOLDER: &str = "[cluster texts]";
pub const QUERY_PLACEHOLDER: &str = "[query]";
pub const BATCH_PLACEHOLDER: &str = "[indexed candidate training data]";

const KEYWORD_TEMPLATE: &str = include_str!("../../assets/keyword_prompt.txt");
const EVAL_CLOZE_TEMPLATE: &str = include_str!("../../assets/eval_cloze_prompt.txt");
const EVAL_CLAIM_TEMPLATE: &str = include_str!("../../assets/eval_claim_prompt.txt");

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TemplateError {
    #[error("template {name:?} is missing placeholder {placeholder:?}")]
    MissingPlaceholder {
        name: &'static str,
        placeholder: &'static str,
    },
    #[error("cannot render an empty batch")]
    EmptyBatch,
    #[error("batch of {got} exceeds the configured batch size {limit}")]
    BatchTooLarge { got: usize, limit: usize },
}

/// Which of the shipped prompt contracts a template follows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TemplateKind {
    /// Keyword assignment over one cluster's texts.
    Keyword,
    /// Supportiveness evaluation, cloze-style few-shot.
    EvalCloze,
    /// Supportiveness evaluation, claim-style few-shot.
    EvalClaim,
}

impl TemplateKind {
    pub fn name(self) -> &'static str {
        match self {
            TemplateKind::Keyword => "keyword",
            TemplateKind::EvalCloze => "eval_cloze",
            TemplateKind::EvalClaim => "eval_claim",
        }
    }
}

#[derive(Debug, Clone)]
pub struct PromptTemplate {
    kind: TemplateKind,
    body: String,
}

impl PromptTemplate {
    pub fn keyword() -> Self {
        Self {
            kind: TemplateKind::Keyword,
            body: KEYWORD_TEMPLATE.to_string(),
        }
    }

    pub fn eval_cloze() -> Self {
        Self {
            kind: TemplateKind::EvalCloze,
            body: EVAL_CLOZE_TEMPLATE.to_string(),
        }
    }

    pub fn eval_claim() -> Self {
        Self {
            kind: TemplateKind::EvalClaim,
            body: EVAL_CLAIM_TEMPLATE.to_string(),
        }
    }

    /// A custom template body following one of the shipped contracts.
    pub fn custom(kind: TemplateKind, body: impl Into<String>) -> Self {
        Self {
            kind,
            body: body.into(),
        }
    }

    pub fn kind(&self) -> TemplateKind {
        self.kind
    }

    pub fn body(&self) -> &str {
        &self.body
    }

    fn substitute(
        &self,
        placeholder: &'static str,
        value: &str,
    ) -> Result<String, TemplateError> {
        if !self.body.contains(placeholder) {
            return Err(TemplateError::MissingPlaceholder {
                name: self.kind.name(),
                placeholder,
            });
        }
        Ok(self.body.replacen(placeholder, value, 1))
    }
}

/// Renders the keyword-assignment prompt for one cluster's text block.
pub fn render_keyword_prompt(
    template: &PromptTemplate,
    cluster_texts: &str,
) -> Result<String, TemplateError> {
    template.substitute(CLUSTER_TEXTS_PLACEHOLDER, cluster_texts)
}

/// The numbered `Text i:` block for one batch, in batch order. Cloze masks
/// are resolved via [`Document::rendered_text`].
pub fn render_batch_block(batch: &[&Document], mask_sentinel: &str) -> String {
    let mut block = String::new();
    for (i, doc) in batch.iter().enumerate() {
        block.push('\n');
        block.push_str(&format!(
            "Text {}: {}",
            i + 1,
            doc.rendered_text(mask_sentinel)
        ));
    }
    block
}

/// Renders the supportiveness-evaluation prompt for one query and one batch
/// of candidate documents.
///
/// `batch_limit` is the configured batch size `b`; rendering refuses larger
/// batches so a partitioning bug cannot silently produce oversized prompts.
pub fn render_eval_prompt(
    template: &PromptTemplate,
    query: &Query,
    batch: &[&Document],
    mask_sentinel: &str,
    batch_limit: usize,
) -> Result<String, TemplateError> {
    if batch.is_empty() {
        return Err(TemplateError::EmptyBatch);
    }
    if batch.len() > batch_limit {
        return Err(TemplateError::BatchTooLarge {
            got: batch.len(),
            limit: batch_limit,
        });
    }
    let with_query = template.substitute(QUERY_PLACEHOLDER, &query.rendered_text(mask_sentinel))?;
    let holder = PromptTemplate {
        kind: template.kind,
        body: with_query,
    };
    holder.substitute(BATCH_PLACEHOLDER, &render_batch_block(batch, mask_sentinel))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::DEFAULT_MASK_SENTINEL;

    fn doc(id: &str, text: &str) -> Document {
        Document::new(id, text)
    }

    #[test]
    fn claim_template_carries_worked_example_verbatim() {
        let t = PromptTemplate::eval_claim();
        assert!(t
            .body()
            .contains("Claim: Black Mass earned less than $ 43.6 million in North America"));
        assert!(t.body().contains("#scores: 1, 0, 0"));
        assert!(t.body().contains("Fact: [query]"));
    }

    #[test]
    fn cloze_template_carries_worked_example_verbatim() {
        let t = PromptTemplate::eval_cloze();
        assert!(t
            .body()
            .contains("Fact: Member of the Scottish Parliament is a legal term in Scotland."));
        assert!(t.body().contains("#scores: 1, 0"));
    }

    #[test]
    fn keyword_template_has_format_instruction() {
        let t = PromptTemplate::keyword();
        assert!(t.body().contains("#keywords: your keywords here."));
        assert!(t.body().contains(CLUSTER_TEXTS_PLACEHOLDER));
    }

    #[test]
    fn batch_block_numbers_each_document_once() {
        let docs = [doc("a", "first"), doc("b", "second"), doc("c", "third")];
        let refs: Vec<&Document> = docs.iter().collect();
        let block = render_batch_block(&refs, DEFAULT_MASK_SENTINEL);
        for (needle, text) in [("Text 1:", "first"), ("Text 2:", "second"), ("Text 3:", "third")] {
            assert_eq!(block.matches(needle).count(), 1, "{needle}");
            assert!(block.contains(&format!("{needle} {text}")));
        }
        assert!(!block.contains("Text 4:"));
    }

    #[test]
    fn rendered_prompt_without_few_shot_has_unique_markers() {
        let t = PromptTemplate::custom(
            TemplateKind::EvalClaim,
            "Evaluate.\nFact: [query]\nGroup of Texts: [indexed candidate training data]\n",
        );
        let q = Query::new("q", "some claim");
        let docs = [doc("a", "one"), doc("b", "two"), doc("c", "three")];
        let refs: Vec<&Document> = docs.iter().collect();
        let prompt = render_eval_prompt(&t, &q, &refs, DEFAULT_MASK_SENTINEL, 15).unwrap();
        for needle in ["Text 1:", "Text 2:", "Text 3:"] {
            assert_eq!(prompt.matches(needle).count(), 1, "{needle}");
        }
        assert!(prompt.contains("Fact: some claim"));
    }

    #[test]
    fn permuting_the_batch_permutes_the_blocks() {
        let a = doc("a", "alpha text");
        let b = doc("b", "beta text");
        let fwd = render_batch_block(&[&a, &b], DEFAULT_MASK_SENTINEL);
        let rev = render_batch_block(&[&b, &a], DEFAULT_MASK_SENTINEL);
        assert!(fwd.contains("Text 1: alpha text") && fwd.contains("Text 2: beta text"));
        assert!(rev.contains("Text 1: beta text") && rev.contains("Text 2: alpha text"));
    }

    #[test]
    fn cloze_documents_are_unmasked_in_prompts() {
        let mut d = doc("a", "the parliament of <MASK> is old");
        d.masked_answer = Some("Scotland".into());
        let q = Query::new("q", "claim");
        let prompt = render_eval_prompt(
            &PromptTemplate::eval_cloze(),
            &q,
            &[&d],
            DEFAULT_MASK_SENTINEL,
            15,
        )
        .unwrap();
        assert!(prompt.contains("the parliament of Scotland is old"));
        assert!(!prompt.contains("<MASK>"));
    }

    #[test]
    fn empty_batch_is_rejected() {
        let q = Query::new("q", "claim");
        assert_eq!(
            render_eval_prompt(&PromptTemplate::eval_claim(), &q, &[], DEFAULT_MASK_SENTINEL, 15),
            Err(TemplateError::EmptyBatch)
        );
    }

    #[test]
    fn missing_placeholder_fails_rendering() {
        let t = PromptTemplate::custom(TemplateKind::EvalClaim, "no placeholders at all");
        let q = Query::new("q", "claim");
        let d = doc("a", "text");
        assert!(matches!(
            render_eval_prompt(&t, &q, &[&d], DEFAULT_MASK_SENTINEL, 15),
            Err(TemplateError::MissingPlaceholder { .. })
        ));
    }

    #[test]
    fn oversized_batch_is_rejected() {
        let q = Query::new("q", "claim");
        let docs: Vec<Document> = (0..16).map(|i| doc(&format!("d{i}"), "t")).collect();
        let refs: Vec<&Document> = docs.iter().collect();
        assert_eq!(
            render_eval_prompt(&PromptTemplate::eval_claim(), &q, &refs, DEFAULT_MASK_SENTINEL, 15),
            Err(TemplateError::BatchTooLarge { got: 16, limit: 15 })
        );
    }
}

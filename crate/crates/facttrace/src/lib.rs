//! Fact tracing engine.
//!
//! Given a query and a training corpus, this crate retrieves the training
//! examples that factually *support* the query, as opposed to examples that
//! are merely similar. The engine is split into an offline and an online
//! stage:
//!
//! 1. **Offline indexing** ([`index`]): document embeddings are clustered
//!    with recursive k-means until every leaf cluster is below a size
//!    threshold, then each leaf is labeled with a small set of keywords
//!    produced by a language model.
//! 2. **Online tracing** ([`tracer`]): a query is fuzzily matched against
//!    the leaf keywords to select candidate clusters, and the candidate
//!    documents are scored for supportiveness in batches by a language
//!    model; documents scored 1 form the trace set.
//!
//! [`baselines`] provides the reference rankers (Okapi BM25 and
//! embedding-cosine), [`eval`] the precision/recall/F1 harness, and
//! [`synth`] a deterministic synthetic-world generator used by the
//! acceptance suite and for offline demos.
//!
//! Everything is runnable fully offline: [`embed`] ships a deterministic
//! hashing embedding provider and [`llm`] a scripted rule-table client, so
//! the whole pipeline is reproducible bit-for-bit without network access.

pub mod baselines;
pub mod corpus;
pub mod embed;
pub mod eval;
pub mod index;
pub mod llm;
pub mod synth;
pub mod tracer;

pub use corpus::{Corpus, Document, Query};
pub use embed::{EmbeddingMatrix, EmbeddingProvider, EmbeddingVector};
pub use index::{IndexEnsemble, SemanticIndex};
pub use llm::LlmClient;
pub use tracer::{FuzzyConfig, TraceResult};

/// Mask placeholder used by cloze-style datasets unless configured otherwise.
pub const DEFAULT_MASK_SENTINEL: &str = "<MASK>";

//! Dense embeddings for documents and queries behind a pluggable provider
//! interface.
//!
//! Providers must be deterministic (same text, same vector, within one
//! configuration) and safely callable from multiple threads. Two providers
//! ship with the crate: [`HashEmbeddingProvider`], a seeded token n-gram
//! hasher that needs no network and anchors every offline test, and
//! [`remote::HttpEmbeddingProvider`] for embedding services speaking the
//! `{model, inputs} -> {vectors}` wire contract.

pub mod cache;
pub mod remote;

pub use cache::CachedProvider;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("provider transport failure after {attempts} attempt(s): {last}")]
    Provider { attempts: u32, last: String },
    #[error("provider protocol violation: {0}")]
    Protocol(String),
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("embedding cache: {0}")]
    Cache(String),
}

/// A fixed-length dense vector with finite entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    values: Vec<f64>,
}

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Result<Self, EmbedError> {
        if values.is_empty() {
            return Err(EmbedError::InvalidInput("zero-dimensional vector".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(EmbedError::Protocol("non-finite vector entry".into()));
        }
        Ok(Self { values })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn l2_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Cosine similarity, accumulated in f64 and clamped to [-1, 1].
///
/// Errors on dimension mismatch and on zero-norm inputs.
pub fn cosine(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64, EmbedError> {
    cosine_slices(a.values(), b.values())
}

pub(crate) fn cosine_slices(a: &[f64], b: &[f64]) -> Result<f64, EmbedError> {
    if a.len() != b.len() {
        return Err(EmbedError::InvalidInput(format!(
            "dimension mismatch: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let mut dot = 0.0f64;
    let mut na = 0.0f64;
    let mut nb = 0.0f64;
    for (&x, &y) in a.iter().zip(b.iter()) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return Err(EmbedError::DegenerateInput("zero-norm vector".into()));
    }
    Ok((dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0))
}

/// One vector per corpus document, aligned to corpus order, stored as a
/// single flat buffer for cache-friendly clustering.
#[derive(Debug, Clone)]
pub struct EmbeddingMatrix {
    data: Vec<f64>,
    dim: usize,
    provider_id: String,
}

impl EmbeddingMatrix {
    pub fn from_vectors(
        provider_id: impl Into<String>,
        vectors: Vec<EmbeddingVector>,
    ) -> Result<Self, EmbedError> {
        if vectors.is_empty() {
            return Err(EmbedError::InvalidInput("empty embedding matrix".into()));
        }
        let dim = vectors[0].dim();
        let mut data = Vec::with_capacity(vectors.len() * dim);
        for v in &vectors {
            if v.dim() != dim {
                return Err(EmbedError::Protocol(format!(
                    "row dimension {} differs from matrix dimension {dim}",
                    v.dim()
                )));
            }
            data.extend_from_slice(v.values());
        }
        Ok(Self {
            data,
            dim,
            provider_id: provider_id.into(),
        })
    }

    pub fn rows(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn provider_id(&self) -> &str {
        &self.provider_id
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

/// Retry schedule for transport failures: `attempts` total tries with
/// exponential backoff starting at `backoff_ms`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub backoff_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            attempts: 3,
            backoff_ms: 1000,
        }
    }
}

impl RetryPolicy {
    pub fn delay_for(&self, failed_attempts: u32) -> std::time::Duration {
        let factor = 1u64 << failed_attempts.saturating_sub(1).min(16);
        std::time::Duration::from_millis(self.backoff_ms.saturating_mul(factor))
    }
}

/// A source of embedding vectors. Implementations must be deterministic and
/// thread-safe.
pub trait EmbeddingProvider: Send + Sync {
    fn provider_id(&self) -> &str;
    fn dim(&self) -> usize;
    /// Largest batch a single `embed_batch` call may receive.
    fn batch_limit(&self) -> usize;
    fn retry(&self) -> RetryPolicy {
        RetryPolicy::default()
    }
    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbedError>;
}

impl<P: EmbeddingProvider + ?Sized> EmbeddingProvider for Box<P> {
    fn provider_id(&self) -> &str {
        (**self).provider_id()
    }
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn batch_limit(&self) -> usize {
        (**self).batch_limit()
    }
    fn retry(&self) -> RetryPolicy {
        (**self).retry()
    }
    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        (**self).embed_batch(texts)
    }
}

/// Embeds `texts` in order, chunking requests to the provider's batch limit
/// and retrying each chunk on transport failure per the provider's retry
/// policy. Every returned vector is checked against the provider's declared
/// dimension.
pub fn embed_texts(
    provider: &dyn EmbeddingProvider,
    texts: &[&str],
) -> Result<Vec<EmbeddingVector>, EmbedError> {
    if texts.is_empty() {
        return Err(EmbedError::InvalidInput("no texts to embed".into()));
    }
    if let Some(i) = texts.iter().position(|t| t.trim().is_empty()) {
        return Err(EmbedError::InvalidInput(format!("text {i} is empty")));
    }
    let limit = provider.batch_limit().max(1);
    let policy = provider.retry();
    let mut out = Vec::with_capacity(texts.len());
    for chunk in texts.chunks(limit) {
        let vectors = call_with_retry(provider, chunk, policy)?;
        if vectors.len() != chunk.len() {
            return Err(EmbedError::Protocol(format!(
                "provider returned {} vectors for {} texts",
                vectors.len(),
                chunk.len()
            )));
        }
        for v in &vectors {
            if v.dim() != provider.dim() {
                return Err(EmbedError::Protocol(format!(
                    "provider returned dimension {} but is configured for {}",
                    v.dim(),
                    provider.dim()
                )));
            }
        }
        out.extend(vectors);
    }
    Ok(out)
}

fn call_with_retry(
    provider: &dyn EmbeddingProvider,
    chunk: &[&str],
    policy: RetryPolicy,
) -> Result<Vec<EmbeddingVector>, EmbedError> {
    let attempts = policy.attempts.max(1);
    let mut last = String::new();
    for attempt in 1..=attempts {
        match provider.embed_batch(chunk) {
            Ok(v) => return Ok(v),
            Err(EmbedError::Provider { last: msg, .. }) => {
                last = msg;
                if attempt < attempts {
                    std::thread::sleep(policy.delay_for(attempt));
                }
            }
            Err(other) => return Err(other),
        }
    }
    Err(EmbedError::Provider { attempts, last })
}

/// Convenience: embed all corpus documents (rendered with the mask sentinel)
/// into a matrix aligned to corpus order.
pub fn embed_corpus(
    provider: &dyn EmbeddingProvider,
    corpus: &crate::corpus::Corpus,
    mask_sentinel: &str,
) -> Result<EmbeddingMatrix, EmbedError> {
    let rendered: Vec<String> = corpus
        .documents()
        .iter()
        .map(|d| d.rendered_text(mask_sentinel))
        .collect();
    let refs: Vec<&str> = rendered.iter().map(String::as_str).collect();
    let vectors = embed_texts(provider, &refs)?;
    EmbeddingMatrix::from_vectors(provider.provider_id(), vectors)
}

/// Stable 64-bit FNV-1a. Used for embedding buckets and cache keys, so it
/// must not change across builds.
pub(crate) fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in bytes {
        h ^= *b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

pub(crate) fn fnv1a64_seeded(seed: u64, bytes: &[u8]) -> u64 {
    let mut h = fnv1a64(&seed.to_le_bytes());
    for b in bytes {
        h ^= *b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// Deterministic offline provider: token unigrams and bigrams are hashed
/// into `dim` signed buckets and the result is L2-normalized. Texts sharing
/// more tokens land closer in cosine, which is all the clustering stage
/// needs.
#[derive(Debug, Clone)]
pub struct HashEmbeddingProvider {
    id: String,
    dim: usize,
    seed: u64,
}

impl HashEmbeddingProvider {
    /// `dim` must be at least 8; below that bucket collisions dominate.
    pub fn new(dim: usize, seed: u64) -> Result<Self, EmbedError> {
        if dim < 8 {
            return Err(EmbedError::InvalidInput(format!(
                "hash provider needs dim >= 8, got {dim}"
            )));
        }
        Ok(Self {
            id: format!("hash-v1-d{dim}-s{seed}"),
            dim,
            seed,
        })
    }

    fn embed_one(&self, text: &str) -> EmbeddingVector {
        let tokens: Vec<String> = text
            .split(|c: char| !c.is_alphanumeric())
            .filter(|t| !t.is_empty())
            .map(|t| t.to_lowercase())
            .collect();
        let mut acc = vec![0.0f64; self.dim];
        let mut add = |gram: &str| {
            let h = fnv1a64_seeded(self.seed, gram.as_bytes());
            let bucket = (h % self.dim as u64) as usize;
            let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
            acc[bucket] += sign;
        };
        if tokens.is_empty() {
            // No alphanumeric content: hash the raw text so the vector is
            // still nonzero and deterministic.
            add(text);
        } else {
            for t in &tokens {
                add(t);
            }
            for pair in tokens.windows(2) {
                add(&format!("{} {}", pair[0], pair[1]));
            }
        }
        let norm = acc.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            for v in &mut acc {
                *v /= norm;
            }
        } else {
            acc[0] = 1.0;
        }
        EmbeddingVector { values: acc }
    }
}

impl EmbeddingProvider for HashEmbeddingProvider {
    fn provider_id(&self) -> &str {
        &self.id
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn batch_limit(&self) -> usize {
        4096
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        Ok(texts.iter().map(|t| self.embed_one(t)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::sync::atomic::{AtomicUsize, Ordering};

    fn vec_of(values: &[f64]) -> EmbeddingVector {
        EmbeddingVector::new(values.to_vec()).unwrap()
    }

    #[test]
    fn cosine_identity_and_orthogonal() {
        let a = vec_of(&[0.3, -1.2, 4.0]);
        assert_abs_diff_eq!(cosine(&a, &a).unwrap(), 1.0, epsilon = 1e-12);
        let e1 = vec_of(&[1.0, 0.0]);
        let e2 = vec_of(&[0.0, 1.0]);
        assert_abs_diff_eq!(cosine(&e1, &e2).unwrap(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn cosine_matches_hand_computed_value() {
        // dot = 32, |a| = sqrt(14), |b| = sqrt(77): 32 / sqrt(1078)
        let a = vec_of(&[1.0, 2.0, 3.0]);
        let b = vec_of(&[4.0, 5.0, 6.0]);
        assert_abs_diff_eq!(cosine(&a, &b).unwrap(), 0.974631846, epsilon = 1e-6);
    }

    #[test]
    fn cosine_rejects_zero_norm_and_mismatch() {
        let z = EmbeddingVector {
            values: vec![0.0, 0.0],
        };
        let a = vec_of(&[1.0, 2.0]);
        assert!(matches!(cosine(&z, &a), Err(EmbedError::DegenerateInput(_))));
        let b = vec_of(&[1.0, 2.0, 3.0]);
        assert!(matches!(cosine(&a, &b), Err(EmbedError::InvalidInput(_))));
    }

    #[test]
    fn hash_provider_is_deterministic() {
        let p = HashEmbeddingProvider::new(64, 7).unwrap();
        let out = embed_texts(&p, &["a cat", "a cat"]).unwrap();
        assert_eq!(out[0], out[1]);
        let again = embed_texts(&p, &["a cat"]).unwrap();
        assert_eq!(out[0], again[0]);
    }

    #[test]
    fn hash_provider_output_is_unit_norm() {
        let p = HashEmbeddingProvider::new(32, 1).unwrap();
        let out = embed_texts(&p, &["some text with tokens", "???"]).unwrap();
        for v in out {
            assert_abs_diff_eq!(v.l2_norm(), 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn shared_tokens_raise_cosine() {
        let p = HashEmbeddingProvider::new(64, 7).unwrap();
        let out = embed_texts(&p, &["red cat", "red cat sits", "blue dog"]).unwrap();
        let close = cosine(&out[0], &out[1]).unwrap();
        let far = cosine(&out[0], &out[2]).unwrap();
        assert!(
            close > far,
            "expected shared-token cosine {close} > disjoint cosine {far}"
        );
    }

    #[test]
    fn hash_provider_requires_min_dim() {
        assert!(HashEmbeddingProvider::new(4, 0).is_err());
    }

    struct CountingProvider {
        inner: HashEmbeddingProvider,
        limit: usize,
        calls: AtomicUsize,
    }

    impl EmbeddingProvider for CountingProvider {
        fn provider_id(&self) -> &str {
            "counting"
        }
        fn dim(&self) -> usize {
            self.inner.dim()
        }
        fn batch_limit(&self) -> usize {
            self.limit
        }
        fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbedError> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            self.inner.embed_batch(texts)
        }
    }

    #[test]
    fn embed_texts_chunks_to_batch_limit() {
        let p = CountingProvider {
            inner: HashEmbeddingProvider::new(16, 0).unwrap(),
            limit: 100,
            calls: AtomicUsize::new(0),
        };
        let texts: Vec<String> = (0..250).map(|i| format!("text {i}")).collect();
        let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
        let out = embed_texts(&p, &refs).unwrap();
        assert_eq!(out.len(), 250);
        assert_eq!(p.calls.load(Ordering::SeqCst), 3);
    }

    struct WrongDimProvider;

    impl EmbeddingProvider for WrongDimProvider {
        fn provider_id(&self) -> &str {
            "wrong-dim"
        }
        fn dim(&self) -> usize {
            384
        }
        fn batch_limit(&self) -> usize {
            8
        }
        fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbedError> {
            Ok(texts
                .iter()
                .map(|_| EmbeddingVector::new(vec![0.5; 512]).unwrap())
                .collect())
        }
    }

    #[test]
    fn dimension_mismatch_is_protocol_error() {
        assert!(matches!(
            embed_texts(&WrongDimProvider, &["x"]),
            Err(EmbedError::Protocol(_))
        ));
    }

    struct FlakyProvider {
        inner: HashEmbeddingProvider,
        fail_first: usize,
        calls: AtomicUsize,
    }

    impl EmbeddingProvider for FlakyProvider {
        fn provider_id(&self) -> &str {
            "flaky"
        }
        fn dim(&self) -> usize {
            self.inner.dim()
        }
        fn batch_limit(&self) -> usize {
            64
        }
        fn retry(&self) -> RetryPolicy {
            RetryPolicy {
                attempts: 3,
                backoff_ms: 1,
            }
        }
        fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbedError> {
            let n = self.calls.fetch_add(1, Ordering::SeqCst);
            if n < self.fail_first {
                Err(EmbedError::Provider {
                    attempts: 1,
                    last: "503 service unavailable".into(),
                })
            } else {
                self.inner.embed_batch(texts)
            }
        }
    }

    #[test]
    fn transport_failures_are_retried_within_budget() {
        let p = FlakyProvider {
            inner: HashEmbeddingProvider::new(16, 0).unwrap(),
            fail_first: 2,
            calls: AtomicUsize::new(0),
        };
        assert!(embed_texts(&p, &["x"]).is_ok());

        let exhausted = FlakyProvider {
            inner: HashEmbeddingProvider::new(16, 0).unwrap(),
            fail_first: 3,
            calls: AtomicUsize::new(0),
        };
        match embed_texts(&exhausted, &["x"]) {
            Err(EmbedError::Provider { attempts, last }) => {
                assert_eq!(attempts, 3);
                assert!(last.contains("503"));
            }
            other => panic!("expected exhausted provider error, got {other:?}"),
        }
    }

    #[test]
    fn empty_inputs_rejected() {
        let p = HashEmbeddingProvider::new(16, 0).unwrap();
        assert!(matches!(
            embed_texts(&p, &[]),
            Err(EmbedError::InvalidInput(_))
        ));
        assert!(matches!(
            embed_texts(&p, &["ok", "  "]),
            Err(EmbedError::InvalidInput(_))
        ));
    }

    proptest! {
        #[test]
        fn cosine_is_symmetric(
            a in proptest::collection::vec(-100.0f64..100.0, 2..16),
            b in proptest::collection::vec(-100.0f64..100.0, 2..16),
        ) {
            let n = a.len().min(b.len());
            let va = vec_of(&a[..n]);
            let vb = vec_of(&b[..n]);
            if let (Ok(ab), Ok(ba)) = (cosine(&va, &vb), cosine(&vb, &va)) {
                prop_assert!((ab - ba).abs() <= 1e-12);
            }
        }

        #[test]
        fn cosine_is_scale_invariant(
            a in proptest::collection::vec(-100.0f64..100.0, 3..12),
            b in proptest::collection::vec(-100.0f64..100.0, 3..12),
            lambda in 0.01f64..100.0,
        ) {
            let n = a.len().min(b.len());
            let va = vec_of(&a[..n]);
            let vb = vec_of(&b[..n]);
            let scaled: Vec<f64> = a[..n].iter().map(|v| v * lambda).collect();
            if let Ok(vs) = EmbeddingVector::new(scaled) {
                if let (Ok(base), Ok(scaled)) = (cosine(&va, &vb), cosine(&vs, &vb)) {
                    prop_assert!((base - scaled).abs() <= 1e-9);
                }
            }
        }
    }
}

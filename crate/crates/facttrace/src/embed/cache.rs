//! Persistent embedding cache.
//!
//! Vectors are keyed by the FNV-1a hash of the exact input text and scoped
//! to one provider id, so the offline indexing stage only ever pays for a
//! given text once. File format: one JSON record per line, first line is a
//! header `{"format":"facttrace-embed-cache","version":1,"provider_id":...,
//! "dim":...}`, every following line is `{"h":"<16 hex digits>","v":[...]}`.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{fnv1a64, EmbedError, EmbeddingProvider, EmbeddingVector, RetryPolicy};

const CACHE_FORMAT: &str = "facttrace-embed-cache";
const CACHE_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct CacheHeader {
    format: String,
    version: u32,
    provider_id: String,
    dim: usize,
}

#[derive(Serialize, Deserialize)]
struct CacheRecord {
    h: String,
    v: Vec<f64>,
}

/// Wraps a provider with an in-memory map that can be loaded from and
/// persisted to disk. Thread-safe; lookups and inserts go through a mutex.
pub struct CachedProvider<P> {
    inner: P,
    entries: Mutex<HashMap<u64, EmbeddingVector>>,
}

impl<P: EmbeddingProvider> CachedProvider<P> {
    pub fn new(inner: P) -> Self {
        Self {
            inner,
            entries: Mutex::new(HashMap::new()),
        }
    }

    /// Loads cached vectors for this provider. A cache written for a
    /// different provider id or dimension is rejected rather than silently
    /// mixed in.
    pub fn with_cache_file(inner: P, path: impl AsRef<Path>) -> Result<Self, EmbedError> {
        let path = path.as_ref();
        let file =
            File::open(path).map_err(|e| EmbedError::Cache(format!("{}: {e}", path.display())))?;
        let mut lines = BufReader::new(file).lines();
        let header_line = lines
            .next()
            .ok_or_else(|| EmbedError::Cache("empty cache file".into()))?
            .map_err(|e| EmbedError::Cache(e.to_string()))?;
        let header: CacheHeader = serde_json::from_str(&header_line)
            .map_err(|e| EmbedError::Cache(format!("bad cache header: {e}")))?;
        if header.format != CACHE_FORMAT || header.version != CACHE_VERSION {
            return Err(EmbedError::Cache(format!(
                "unsupported cache format {}/{}",
                header.format, header.version
            )));
        }
        if header.provider_id != inner.provider_id() {
            return Err(EmbedError::Cache(format!(
                "cache was built with provider {:?}, current provider is {:?}",
                header.provider_id,
                inner.provider_id()
            )));
        }
        if header.dim != inner.dim() {
            return Err(EmbedError::Cache(format!(
                "cache dimension {} differs from provider dimension {}",
                header.dim,
                inner.dim()
            )));
        }
        let mut entries = HashMap::new();
        for (i, line) in lines.enumerate() {
            let line = line.map_err(|e| EmbedError::Cache(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: CacheRecord = serde_json::from_str(&line)
                .map_err(|e| EmbedError::Cache(format!("cache record {}: {e}", i + 2)))?;
            let key = u64::from_str_radix(&rec.h, 16)
                .map_err(|e| EmbedError::Cache(format!("cache record {}: bad key: {e}", i + 2)))?;
            entries.insert(key, EmbeddingVector::new(rec.v)?);
        }
        Ok(Self {
            inner,
            entries: Mutex::new(entries),
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), EmbedError> {
        let path = path.as_ref();
        let to_err = |e: std::io::Error| EmbedError::Cache(format!("{}: {e}", path.display()));
        let mut out = BufWriter::new(File::create(path).map_err(to_err)?);
        let header = CacheHeader {
            format: CACHE_FORMAT.to_string(),
            version: CACHE_VERSION,
            provider_id: self.inner.provider_id().to_string(),
            dim: self.inner.dim(),
        };
        writeln!(out, "{}", serde_json::to_string(&header).unwrap()).map_err(to_err)?;
        let entries = self.entries.lock().unwrap();
        let mut keys: Vec<&u64> = entries.keys().collect();
        keys.sort_unstable();
        for key in keys {
            let rec = CacheRecord {
                h: format!("{key:016x}"),
                v: entries[key].values().to_vec(),
            };
            writeln!(out, "{}", serde_json::to_string(&rec).unwrap()).map_err(to_err)?;
        }
        out.flush().map_err(to_err)
    }

    pub fn cached_count(&self) -> usize {
        self.entries.lock().unwrap().len()
    }

    pub fn inner(&self) -> &P {
        &self.inner
    }
}

impl<P: EmbeddingProvider> EmbeddingProvider for CachedProvider<P> {
    fn provider_id(&self) -> &str {
        self.inner.provider_id()
    }

    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn batch_limit(&self) -> usize {
        self.inner.batch_limit()
    }

    fn retry(&self) -> RetryPolicy {
        self.inner.retry()
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        let keys: Vec<u64> = texts.iter().map(|t| fnv1a64(t.as_bytes())).collect();
        let mut out: Vec<Option<EmbeddingVector>> = vec![None; texts.len()];
        let mut miss_idx = Vec::new();
        {
            let entries = self.entries.lock().unwrap();
            for (i, key) in keys.iter().enumerate() {
                match entries.get(key) {
                    Some(v) => out[i] = Some(v.clone()),
                    None => miss_idx.push(i),
                }
            }
        }
        if !miss_idx.is_empty() {
            let miss_texts: Vec<&str> = miss_idx.iter().map(|&i| texts[i]).collect();
            let fresh = self.inner.embed_batch(&miss_texts)?;
            if fresh.len() != miss_texts.len() {
                return Err(EmbedError::Protocol(format!(
                    "provider returned {} vectors for {} texts",
                    fresh.len(),
                    miss_texts.len()
                )));
            }
            let mut entries = self.entries.lock().unwrap();
            for (slot, vector) in miss_idx.into_iter().zip(fresh) {
                entries.insert(keys[slot], vector.clone());
                out[slot] = Some(vector);
            }
        }
        Ok(out.into_iter().map(|v| v.expect("all slots filled")).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::{embed_texts, HashEmbeddingProvider};
    use std::sync::atomic::{AtomicUsize, Ordering};

    struct Counting {
        inner: HashEmbeddingProvider,
        embedded: AtomicUsize,
    }

    impl EmbeddingProvider for Counting {
        fn provider_id(&self) -> &str {
            self.inner.provider_id()
        }
        fn dim(&self) -> usize {
            self.inner.dim()
        }
        fn batch_limit(&self) -> usize {
            self.inner.batch_limit()
        }
        fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbedError> {
            self.embedded.fetch_add(texts.len(), Ordering::SeqCst);
            self.inner.embed_batch(texts)
        }
    }

    #[test]
    fn cache_round_trip_and_hit_behavior() {
        let dir = tempfile::tempdir().unwrap();
        let cache_path = dir.path().join("cache.jsonl");

        let counting = Counting {
            inner: HashEmbeddingProvider::new(16, 3).unwrap(),
            embedded: AtomicUsize::new(0),
        };
        let cached = CachedProvider::new(counting);
        let first = embed_texts(&cached, &["one", "two"]).unwrap();
        assert_eq!(cached.inner().embedded.load(Ordering::SeqCst), 2);
        let second = embed_texts(&cached, &["one", "three"]).unwrap();
        assert_eq!(cached.inner().embedded.load(Ordering::SeqCst), 3);
        assert_eq!(first[0], second[0]);
        cached.save(&cache_path).unwrap();

        let reopened = CachedProvider::with_cache_file(
            Counting {
                inner: HashEmbeddingProvider::new(16, 3).unwrap(),
                embedded: AtomicUsize::new(0),
            },
            &cache_path,
        )
        .unwrap();
        assert_eq!(reopened.cached_count(), 3);
        let third = embed_texts(&reopened, &["one", "two", "three"]).unwrap();
        assert_eq!(reopened.inner().embedded.load(Ordering::SeqCst), 0);
        assert_eq!(third[0], first[0]);
    }

    #[test]
    fn cache_rejects_other_provider() {
        let dir = tempfile::tempdir().unwrap();
        let cache_path = dir.path().join("cache.jsonl");
        let cached = CachedProvider::new(HashEmbeddingProvider::new(16, 3).unwrap());
        embed_texts(&cached, &["one"]).unwrap();
        cached.save(&cache_path).unwrap();

        let other = HashEmbeddingProvider::new(16, 4).unwrap();
        assert!(matches!(
            CachedProvider::with_cache_file(other, &cache_path),
            Err(EmbedError::Cache(_))
        ));
    }
}

//! Data model for documents, queries and gold labels, plus line-delimited
//! JSON ingestion and persistence.
//!
//! A corpus file holds one JSON record per line with fields
//! `{id, text, masked_answer?, meta?}`; a query file holds
//! `{id, text, answer?, gold_ids?}`. Both are UTF-8. Loaded values are
//! immutable and safe to share across threads.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A single training example.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub text: String,
    /// Token hidden by the cloze mask, when the dataset is cloze-style.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub masked_answer: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub meta: BTreeMap<String, String>,
}

impl Document {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            text: text.into(),
            masked_answer: None,
            meta: BTreeMap::new(),
        }
    }

    /// Text with the mask sentinel resolved: replaced by the masked answer
    /// when known, dropped otherwise. Doubled spaces left by a dropped mask
    /// are collapsed.
    pub fn rendered_text(&self, mask_sentinel: &str) -> String {
        render_masked(&self.text, mask_sentinel, self.masked_answer.as_deref())
    }
}

/// A trace target, optionally carrying gold support links.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Query {
    pub id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer: Option<String>,
    /// Ids of documents that express the query's fact. Kept in file order;
    /// treated as a set everywhere it is consumed. May be empty when the
    /// query is unlabeled; referential checks are deferred to evaluation.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub gold_ids: Vec<String>,
}

impl Query {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            text: text.into(),
            answer: None,
            gold_ids: Vec::new(),
        }
    }

    pub fn gold_set(&self) -> HashSet<&str> {
        self.gold_ids.iter().map(String::as_str).collect()
    }

    /// Query text with the mask sentinel resolved, mirroring
    /// [`Document::rendered_text`].
    pub fn rendered_text(&self, mask_sentinel: &str) -> String {
        render_masked(&self.text, mask_sentinel, self.answer.as_deref())
    }
}

fn render_masked(text: &str, sentinel: &str, answer: Option<&str>) -> String {
    if sentinel.is_empty() || !text.contains(sentinel) {
        return text.to_string();
    }
    let replaced = match answer {
        Some(a) => text.replace(sentinel, a),
        None => text.replace(sentinel, ""),
    };
    let mut out = String::with_capacity(replaced.len());
    let mut prev_space = false;
    for ch in replaced.chars() {
        if ch == ' ' {
            if !prev_space {
                out.push(ch);
            }
            prev_space = true;
        } else {
            out.push(ch);
            prev_space = false;
        }
    }
    out.trim().to_string()
}

/// An ordered document collection with an id -> position lookup.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    documents: Vec<Document>,
    by_id: HashMap<String, usize>,
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("io error reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: malformed record: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: duplicate id {id:?}")]
    DuplicateId { id: String, line: usize },
    #[error("line {line}: document {id:?} has empty text")]
    EmptyText { id: String, line: usize },
    #[error("line {line}: record has empty id")]
    EmptyId { line: usize },
}

impl Corpus {
    /// Builds a corpus from documents, enforcing unique non-empty ids and
    /// non-empty texts. Line numbers in errors are 1-based positions.
    pub fn from_documents(documents: Vec<Document>) -> Result<Self, CorpusError> {
        let mut by_id = HashMap::with_capacity(documents.len());
        for (pos, doc) in documents.iter().enumerate() {
            let line = pos + 1;
            if doc.id.is_empty() {
                return Err(CorpusError::EmptyId { line });
            }
            if doc.text.trim().is_empty() {
                return Err(CorpusError::EmptyText {
                    id: doc.id.clone(),
                    line,
                });
            }
            if by_id.insert(doc.id.clone(), pos).is_some() {
                return Err(CorpusError::DuplicateId {
                    id: doc.id.clone(),
                    line,
                });
            }
        }
        Ok(Self { documents, by_id })
    }

    /// Loads a corpus file, preserving file order. Duplicate ids are
    /// rejected, citing the line of the second occurrence.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, CorpusError> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|source| CorpusError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let reader = BufReader::new(file);
        let mut documents = Vec::new();
        let mut by_id = HashMap::new();
        for (idx, line) in reader.lines().enumerate() {
            let line_no = idx + 1;
            let line = line.map_err(|source| CorpusError::Io {
                path: path.display().to_string(),
                source,
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let doc: Document =
                serde_json::from_str(&line).map_err(|e| CorpusError::Parse {
                    line: line_no,
                    message: e.to_string(),
                })?;
            if doc.id.is_empty() {
                return Err(CorpusError::EmptyId { line: line_no });
            }
            if doc.text.trim().is_empty() {
                return Err(CorpusError::EmptyText {
                    id: doc.id,
                    line: line_no,
                });
            }
            if by_id.insert(doc.id.clone(), documents.len()).is_some() {
                return Err(CorpusError::DuplicateId {
                    id: doc.id,
                    line: line_no,
                });
            }
            documents.push(doc);
        }
        Ok(Self { documents, by_id })
    }

    /// Writes one record per line in corpus order; a reload yields records
    /// equal field-by-field.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), CorpusError> {
        let path = path.as_ref();
        let to_io = |source| CorpusError::Io {
            path: path.display().to_string(),
            source,
        };
        let mut out = BufWriter::new(File::create(path).map_err(to_io)?);
        for doc in &self.documents {
            let rec = serde_json::to_string(doc).expect("document serializes");
            writeln!(out, "{rec}").map_err(to_io)?;
        }
        out.flush().map_err(to_io)
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn get(&self, pos: usize) -> Option<&Document> {
        self.documents.get(pos)
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.by_id.get(id).copied()
    }

    pub fn contains_id(&self, id: &str) -> bool {
        self.by_id.contains_key(id)
    }
}

/// Loads a query file, preserving file order. Gold ids are stored verbatim;
/// whether they resolve is checked at evaluation time.
pub fn load_queries(path: impl AsRef<Path>) -> Result<Vec<Query>, CorpusError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let reader = BufReader::new(file);
    let mut queries = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|source| CorpusError::Io {
            path: path.display().to_string(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let query: Query = serde_json::from_str(&line).map_err(|e| CorpusError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if query.id.is_empty() {
            return Err(CorpusError::EmptyId { line: line_no });
        }
        queries.push(query);
    }
    Ok(queries)
}

/// Writes one query record per line.
pub fn save_queries(queries: &[Query], path: impl AsRef<Path>) -> Result<(), CorpusError> {
    let path = path.as_ref();
    let to_io = |source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut out = BufWriter::new(File::create(path).map_err(to_io)?);
    for q in queries {
        let rec = serde_json::to_string(q).expect("query serializes");
        writeln!(out, "{rec}").map_err(to_io)?;
    }
    out.flush().map_err(to_io)
}

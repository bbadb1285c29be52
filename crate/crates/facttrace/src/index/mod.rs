//! Offline semantic index: recursive k-means over document embeddings plus
//! LLM keyword labels on the leaves.
//!
//! Clusters larger than the size threshold `c` are re-clustered with
//! k-means (`k` ways) until every leaf fits, a split stops making progress,
//! or the depth cap is hit; leaves stopped early are flagged unsplittable.
//! The leaves always partition the corpus. Indexes built from different
//! seeds or embedding providers can be grouped into an [`IndexEnsemble`],
//! whose cluster retrievals are unioned downstream to raise recall.

pub mod kmeans;
pub mod labeling;

pub use kmeans::{kmeans, KmeansOptions, KmeansResult};
pub use labeling::{label_clusters, LabelOptions, LabelingReport};

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embed::EmbeddingMatrix;
use crate::llm::LlmClient;

/// Cluster count per split. Appendix-default for all experiments.
pub const DEFAULT_K: usize = 10;
/// Leaf size threshold. Appendix-default for all experiments.
pub const DEFAULT_C: usize = 100;
/// Recursion cap; duplicate-heavy data would otherwise never terminate.
pub const DEFAULT_DEPTH_CAP: usize = 6;

const INDEX_FORMAT: &str = "facttrace-index";
const INDEX_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed index file: {0}")]
    Malformed(String),
    #[error("index file has format {found_format:?} version {found_version}, expected {INDEX_FORMAT:?} version {INDEX_VERSION}")]
    Version {
        found_format: String,
        found_version: u32,
    },
    #[error("index invariant violated: {0}")]
    Validation(String),
    #[error("invalid input: {0}")]
    Input(String),
}

/// One node of the cluster tree. Only leaves carry members and keywords.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterNode {
    pub node_id: u32,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<u32>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub members: Vec<u32>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub keywords: Vec<String>,
    /// Set when the node kept more than `c` members because a split made no
    /// progress or the depth cap was reached.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub unsplittable: bool,
}

impl ClusterNode {
    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }
}

/// Hyperparameters for one index build.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct IndexParams {
    pub k: usize,
    pub c: usize,
    pub seed: u64,
    pub depth_cap: usize,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for IndexParams {
    fn default() -> Self {
        Self {
            k: DEFAULT_K,
            c: DEFAULT_C,
            seed: 0,
            depth_cap: DEFAULT_DEPTH_CAP,
            max_iter: 100,
            tol: 1e-4,
        }
    }
}

impl IndexParams {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }
}

/// The finished cluster tree. Node ids equal positions in the node table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemanticIndex {
    nodes: Vec<ClusterNode>,
    root_ids: Vec<u32>,
    leaf_ids: Vec<u32>,
    provider_id: String,
    k: usize,
    c: usize,
    seed: u64,
    doc_count: usize,
}

impl SemanticIndex {
    pub fn nodes(&self) -> &[ClusterNode] {
        &self.nodes
    }

    pub fn node(&self, id: u32) -> &ClusterNode {
        &self.nodes[id as usize]
    }

    pub fn root_ids(&self) -> &[u32] {
        &self.root_ids
    }

    pub fn leaf_ids(&self) -> &[u32] {
        &self.leaf_ids
    }

    pub fn leaves(&self) -> impl Iterator<Item = &ClusterNode> {
        self.leaf_ids.iter().map(|id| self.node(*id))
    }

    pub fn provider_id(&self) -> &str {
        &self.provider_id
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn c(&self) -> usize {
        self.c
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn doc_count(&self) -> usize {
        self.doc_count
    }

    /// True when every leaf carries at least one keyword.
    pub fn is_labeled(&self) -> bool {
        self.leaves().all(|l| !l.keywords.is_empty())
    }

    /// Providers only matter at build time; a mismatch at trace time is
    /// worth a warning, not an error.
    pub fn provider_matches(&self, provider_id: &str) -> bool {
        self.provider_id == provider_id
    }

    pub(crate) fn node_mut(&mut self, id: u32) -> &mut ClusterNode {
        &mut self.nodes[id as usize]
    }

    /// Checks the partition and size invariants: every document position in
    /// exactly one leaf, and every non-flagged leaf within `c`.
    pub fn validate(&self) -> Result<(), IndexError> {
        let mut seen = vec![false; self.doc_count];
        for leaf in self.leaves() {
            if leaf.members.is_empty() {
                return Err(IndexError::Validation(format!(
                    "leaf {} has no members",
                    leaf.node_id
                )));
            }
            if !leaf.unsplittable && leaf.members.len() > self.c {
                return Err(IndexError::Validation(format!(
                    "leaf {} holds {} members over threshold {}",
                    leaf.node_id,
                    leaf.members.len(),
                    self.c
                )));
            }
            for &m in &leaf.members {
                let pos = m as usize;
                if pos >= self.doc_count {
                    return Err(IndexError::Validation(format!(
                        "member {pos} outside corpus of {}",
                        self.doc_count
                    )));
                }
                if seen[pos] {
                    return Err(IndexError::Validation(format!(
                        "document position {pos} appears in more than one leaf"
                    )));
                }
                seen[pos] = true;
            }
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(IndexError::Validation(format!(
                "document position {missing} is in no leaf"
            )));
        }
        Ok(())
    }
}

/// Builds the unlabeled cluster tree for one embedding matrix.
pub fn build_index(matrix: &EmbeddingMatrix, params: &IndexParams) -> Result<SemanticIndex, IndexError> {
    if matrix.rows() == 0 {
        return Err(IndexError::Input("cannot index an empty matrix".into()));
    }
    if params.k == 0 || params.c == 0 {
        return Err(IndexError::Input("k and c must be positive".into()));
    }
    let dim = matrix.dim();
    let mut nodes: Vec<ClusterNode> = Vec::new();
    let mut leaf_ids: Vec<u32> = Vec::new();
    let all: Vec<u32> = (0..matrix.rows() as u32).collect();

    // Queue of (node_id, members, depth); ids are assigned breadth-first.
    let mut queue: std::collections::VecDeque<(u32, Vec<u32>, usize)> =
        std::collections::VecDeque::new();
    nodes.push(ClusterNode {
        node_id: 0,
        children: Vec::new(),
        members: Vec::new(),
        keywords: Vec::new(),
        unsplittable: false,
    });
    queue.push_back((0, all, 0));
    let root_ids = vec![0u32];

    while let Some((node_id, members, depth)) = queue.pop_front() {
        if members.len() <= params.c {
            let node = &mut nodes[node_id as usize];
            node.members = members;
            leaf_ids.push(node_id);
            continue;
        }
        if depth >= params.depth_cap {
            let node = &mut nodes[node_id as usize];
            node.members = members;
            node.unsplittable = true;
            leaf_ids.push(node_id);
            continue;
        }
        let mut subset: Vec<f64> = Vec::with_capacity(members.len() * dim);
        for &m in &members {
            subset.extend_from_slice(matrix.row(m as usize));
        }
        let child_seed = crate::embed::fnv1a64_seeded(params.seed, &node_id.to_le_bytes());
        let result = kmeans(
            &subset,
            dim,
            params.k,
            &KmeansOptions {
                seed: child_seed,
                max_iter: params.max_iter,
                tol: params.tol,
            },
        );
        let mut groups: Vec<Vec<u32>> = vec![Vec::new(); params.k];
        for (local, &assignment) in result.assignments.iter().enumerate() {
            groups[assignment].push(members[local]);
        }
        let groups: Vec<Vec<u32>> = groups.into_iter().filter(|g| !g.is_empty()).collect();
        if groups.len() <= 1 {
            // No progress: all members landed in one child.
            let node = &mut nodes[node_id as usize];
            node.members = members;
            node.unsplittable = true;
            leaf_ids.push(node_id);
            continue;
        }
        let mut child_ids = Vec::with_capacity(groups.len());
        for group in groups {
            let child_id = nodes.len() as u32;
            nodes.push(ClusterNode {
                node_id: child_id,
                children: Vec::new(),
                members: Vec::new(),
                keywords: Vec::new(),
                unsplittable: false,
            });
            child_ids.push(child_id);
            queue.push_back((child_id, group, depth + 1));
        }
        nodes[node_id as usize].children = child_ids;
    }

    leaf_ids.sort_unstable();
    let index = SemanticIndex {
        nodes,
        root_ids,
        leaf_ids,
        provider_id: matrix.provider_id().to_string(),
        k: params.k,
        c: params.c,
        seed: params.seed,
        doc_count: matrix.rows(),
    };
    index.validate()?;
    Ok(index)
}

/// A group of indexes over the same corpus, differing by seed and/or
/// embedding provider.
#[derive(Debug, Clone)]
pub struct IndexEnsemble {
    indexes: Vec<SemanticIndex>,
}

impl IndexEnsemble {
    pub fn new(indexes: Vec<SemanticIndex>) -> Result<Self, IndexError> {
        if indexes.is_empty() {
            return Err(IndexError::Input("ensemble needs at least one index".into()));
        }
        let doc_count = indexes[0].doc_count();
        if indexes.iter().any(|i| i.doc_count() != doc_count) {
            return Err(IndexError::Input(
                "ensemble members cover different corpus sizes".into(),
            ));
        }
        Ok(Self { indexes })
    }

    pub fn members(&self) -> &[SemanticIndex] {
        &self.indexes
    }

    pub fn len(&self) -> usize {
        self.indexes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indexes.is_empty()
    }

    pub fn doc_count(&self) -> usize {
        self.indexes[0].doc_count()
    }

    pub fn is_labeled(&self) -> bool {
        self.indexes.iter().all(SemanticIndex::is_labeled)
    }
}

/// Builds and labels one index per (matrix, seed) pair: a single matrix may
/// be paired with many seeds, otherwise the two lists must zip one to one.
pub fn build_ensemble(
    matrices: &[&EmbeddingMatrix],
    base: &IndexParams,
    seeds: &[u64],
    corpus: &crate::corpus::Corpus,
    llm: &dyn LlmClient,
    label_opts: &LabelOptions,
) -> Result<(IndexEnsemble, LabelingReport), IndexError> {
    if matrices.is_empty() || seeds.is_empty() {
        return Err(IndexError::Input("need at least one matrix and one seed".into()));
    }
    if matrices.len() != 1 && matrices.len() != seeds.len() {
        return Err(IndexError::Input(format!(
            "{} matrices cannot pair with {} seeds",
            matrices.len(),
            seeds.len()
        )));
    }
    let mut indexes = Vec::with_capacity(seeds.len());
    let mut report = LabelingReport::default();
    for (i, &seed) in seeds.iter().enumerate() {
        let matrix = if matrices.len() == 1 { matrices[0] } else { matrices[i] };
        let params = IndexParams { seed, ..*base };
        let mut index = build_index(matrix, &params)?;
        report.merge(label_clusters(&mut index, corpus, llm, label_opts));
        indexes.push(index);
    }
    Ok((IndexEnsemble::new(indexes)?, report))
}

#[derive(Serialize, Deserialize)]
struct IndexFile {
    format: String,
    version: u32,
    #[serde(flatten)]
    index: SemanticIndex,
}

/// Writes the index as a single versioned JSON document.
pub fn save_index(index: &SemanticIndex, path: impl AsRef<Path>) -> Result<(), IndexError> {
    let path = path.as_ref();
    let file = IndexFile {
        format: INDEX_FORMAT.to_string(),
        version: INDEX_VERSION,
        index: index.clone(),
    };
    let data = serde_json::to_string(&file).expect("index serializes");
    std::fs::write(path, data).map_err(|source| IndexError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Loads and validates an index file. Truncated or corrupt files fail as a
/// whole; no partial index is ever returned.
pub fn load_index(path: impl AsRef<Path>) -> Result<SemanticIndex, IndexError> {
    let path = path.as_ref();
    let data = std::fs::read_to_string(path).map_err(|source| IndexError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let file: IndexFile =
        serde_json::from_str(&data).map_err(|e| IndexError::Malformed(e.to_string()))?;
    if file.format != INDEX_FORMAT || file.version != INDEX_VERSION {
        return Err(IndexError::Version {
            found_format: file.format,
            found_version: file.version,
        });
    }
    file.index.validate()?;
    Ok(file.index)
}

//! Index structures: an iSAX tree, an EAPCA tree and a VA+file.
//!
//! Both trees expose the same node interface through [`TreeIndex`]; the
//! search module drives them without knowing which summary backs the
//! bounds. The VA+file is a flat array of quantized cells scanned
//! skip-sequentially.

mod eapca_tree;
mod isax;
mod persist;
mod storage;
mod vafile;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::Dataset;

pub use eapca_tree::{build_eapca_tree, EapcaNode, EapcaTreeIndex, SplitRule, SplitStat};
pub use isax::{build_isax, IsaxIndex, IsaxNode};
pub use persist::{IndexMeta, FORMAT_VERSION};
pub use storage::{LeafSpan, LeafStore, QueryStats};
pub use vafile::{build_vafile, VaFile};

pub type NodeId = u32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IndexParams {
    /// Maximum series per leaf before it splits.
    pub leaf_capacity: usize,
    /// PAA segments of the iSAX tree; also the segment cap of the EAPCA tree.
    pub segments: usize,
    /// Bits per symbol of the iSAX root words.
    pub base_bits: u8,
    /// Segments of the EAPCA tree root.
    pub initial_segments: usize,
    /// DFT coefficients kept by the VA+file.
    pub dft_coefficients: usize,
    /// Bits of one VA+ approximation, spread over the coefficients.
    pub total_bits: usize,
    /// Staging budget used while laying out leaf data.
    pub buffer_bytes: usize,
    /// Whether the indexed data (and thus queries) are Z-normalized.
    pub normalize: bool,
    /// Series sampled to fit the VA+ grid; 0 means all.
    pub grid_sample: usize,
    pub seed: u64,
}

impl Default for IndexParams {
    fn default() -> Self {
        Self {
            leaf_capacity: 100,
            segments: 16,
            base_bits: 1,
            initial_segments: 4,
            dft_coefficients: 16,
            total_bits: 64,
            buffer_bytes: 1 << 20,
            normalize: true,
            grid_sample: 0,
            seed: 0,
        }
    }
}

impl IndexParams {
    pub fn validate(&self) -> Result<()> {
        if self.leaf_capacity == 0 {
            return Err(Error::invalid("leaf capacity must be at least 1"));
        }
        if self.segments == 0 || self.initial_segments == 0 || self.dft_coefficients == 0 {
            return Err(Error::invalid("segment and coefficient counts must be at least 1"));
        }
        if !(1..=crate::summarize::MAX_SAX_BITS).contains(&self.base_bits) {
            return Err(Error::invalid("base bits must be in 1..=8"));
        }
        Ok(())
    }

    pub(crate) fn check_dataset(&self, dataset: &Dataset) -> Result<()> {
        self.validate()?;
        if dataset.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if dataset.is_normalized() != self.normalize {
            return Err(Error::invalid(format!(
                "dataset normalized = {}, index expects {}",
                dataset.is_normalized(),
                self.normalize
            )));
        }
        Ok(())
    }
}

/// Node interface shared by the tree indexes.
pub trait TreeIndex: Send + Sync {
    /// Per-query precomputation (PAA, DFT, ...).
    type Query: Send;

    fn prepare(&self, query: &[f32]) -> Result<Self::Query>;
    fn roots(&self) -> &[NodeId];
    fn children(&self, node: NodeId) -> &[NodeId];
    /// Storage span for leaves, `None` for internal nodes.
    fn leaf_span(&self, node: NodeId) -> Option<LeafSpan>;
    /// Number of series below `node`.
    fn subtree_size(&self, node: NodeId) -> u32;
    /// Lower bound on the distance from the query to any series below `node`.
    fn min_dist(&self, query: &Self::Query, node: NodeId) -> f64;
    fn store(&self) -> &LeafStore;
    fn node_count(&self) -> usize;

    /// Number of non-empty leaves.
    fn leaf_count(&self) -> usize {
        (0..self.node_count() as NodeId)
            .filter(|&n| self.leaf_span(n).is_some_and(|s| s.count > 0))
            .count()
    }

    /// Series ids of every non-empty leaf in storage order.
    fn leaves(&self) -> Vec<Vec<crate::SeriesId>> {
        let mut spans: Vec<LeafSpan> = (0..self.node_count() as NodeId)
            .filter_map(|n| self.leaf_span(n))
            .filter(|s| s.count > 0)
            .collect();
        spans.sort_by_key(|s| s.start);
        let ids = self.store().ids();
        spans
            .iter()
            .map(|s| ids[s.start as usize..(s.start + s.count) as usize].to_vec())
            .collect()
    }
}

pub(crate) fn check_query_len(expected: usize, query: &[f32]) -> Result<()> {
    if query.len() != expected {
        return Err(Error::LengthMismatch {
            expected,
            actual: query.len(),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IndexKind {
    Isax,
    EapcaTree,
    Vafile,
}

impl IndexKind {
    pub const ALL: [IndexKind; 3] = [IndexKind::Isax, IndexKind::EapcaTree, IndexKind::Vafile];

    pub fn as_str(self) -> &'static str {
        match self {
            IndexKind::Isax => "isax",
            IndexKind::EapcaTree => "eapca-tree",
            IndexKind::Vafile => "vafile",
        }
    }
}

impl fmt::Display for IndexKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for IndexKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        IndexKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown index kind {s:?}")))
    }
}

/// Any of the three indexes.
#[derive(Debug, Clone, PartialEq)]
pub enum Index {
    Isax(IsaxIndex),
    EapcaTree(EapcaTreeIndex),
    Vafile(VaFile),
}

impl Index {
    pub fn build(kind: IndexKind, dataset: &Dataset, params: &IndexParams) -> Result<Self> {
        Ok(match kind {
            IndexKind::Isax => Index::Isax(build_isax(dataset, params)?),
            IndexKind::EapcaTree => Index::EapcaTree(build_eapca_tree(dataset, params)?),
            IndexKind::Vafile => Index::Vafile(build_vafile(dataset, params)?),
        })
    }

    pub fn kind(&self) -> IndexKind {
        match self {
            Index::Isax(_) => IndexKind::Isax,
            Index::EapcaTree(_) => IndexKind::EapcaTree,
            Index::Vafile(_) => IndexKind::Vafile,
        }
    }

    pub fn params(&self) -> &IndexParams {
        match self {
            Index::Isax(i) => i.params(),
            Index::EapcaTree(i) => i.params(),
            Index::Vafile(i) => i.params(),
        }
    }

    pub fn store(&self) -> &LeafStore {
        match self {
            Index::Isax(i) => i.store(),
            Index::EapcaTree(i) => i.store(),
            Index::Vafile(i) => i.store(),
        }
    }

    pub fn len(&self) -> usize {
        self.store().len()
    }

    pub fn is_empty(&self) -> bool {
        self.store().is_empty()
    }

    pub fn series_len(&self) -> usize {
        self.store().series_len()
    }

    /// Leaves for the trees; one per series for the VA+file.
    pub fn leaf_count(&self) -> usize {
        match self {
            Index::Isax(i) => i.leaf_count(),
            Index::EapcaTree(i) => i.leaf_count(),
            Index::Vafile(i) => i.len(),
        }
    }

    pub fn is_normalized(&self) -> bool {
        self.params().normalize
    }

    /// The indexed data in id order.
    pub fn dataset(&self) -> Result<Dataset> {
        self.store().to_dataset(self.is_normalized())
    }

    pub fn persist(&self, dir: &Path) -> Result<IndexMeta> {
        persist::persist(self, dir)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        persist::load(dir)
    }
}

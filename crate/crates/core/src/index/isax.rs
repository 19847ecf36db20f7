//! iSAX tree: root children keyed by base-cardinality words, binary splits
//! that promote one segment by one bit.

use std::collections::BTreeMap;

use crate::error::Result;
use crate::index::storage::{LeafSpan, LeafStore, LeafStoreBuilder};
use crate::index::{check_query_len, IndexParams, NodeId, TreeIndex};
use crate::series::{Dataset, SeriesId};
use crate::summarize::paa::{paa_with_ends, segment_ends};
use crate::summarize::sax::{mindist_sq, sax_from_paa, SaxWord, MAX_SAX_BITS};

#[derive(Debug, Clone, PartialEq)]
pub struct IsaxNode {
    pub word: SaxWord,
    /// Segment promoted to create the two children.
    pub split_segment: Option<u8>,
    pub children: Vec<NodeId>,
    pub ids: Vec<SeriesId>,
    pub span: Option<LeafSpan>,
    /// Leaf above capacity because every segment is at full cardinality.
    pub overflow: bool,
}

impl IsaxNode {
    fn leaf(word: SaxWord) -> Self {
        Self {
            word,
            split_segment: None,
            children: Vec::new(),
            ids: Vec::new(),
            span: None,
            overflow: false,
        }
    }

    pub fn is_leaf(&self) -> bool {
        self.split_segment.is_none()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IsaxIndex {
    pub(crate) params: IndexParams,
    pub(crate) seg_ends: Vec<usize>,
    pub(crate) nodes: Vec<IsaxNode>,
    pub(crate) roots: Vec<NodeId>,
    pub(crate) sizes: Vec<u32>,
    pub(crate) store: LeafStore,
}

pub struct IsaxQuery {
    means: Vec<f64>,
    lens: Vec<f64>,
}

impl IsaxIndex {
    pub fn params(&self) -> &IndexParams {
        &self.params
    }

    pub fn nodes(&self) -> &[IsaxNode] {
        &self.nodes
    }

    pub fn segments(&self) -> usize {
        self.seg_ends.len()
    }

    pub fn overflow_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| n.overflow).count()
    }

    pub(crate) fn from_parts(
        params: IndexParams,
        seg_ends: Vec<usize>,
        nodes: Vec<IsaxNode>,
        roots: Vec<NodeId>,
        store: LeafStore,
    ) -> Self {
        let sizes = subtree_sizes(&nodes, &roots);
        Self {
            params,
            seg_ends,
            nodes,
            roots,
            sizes,
            store,
        }
    }
}

fn subtree_sizes(nodes: &[IsaxNode], roots: &[NodeId]) -> Vec<u32> {
    let mut sizes = vec![0u32; nodes.len()];
    // children always have larger ids than their parent
    for id in (0..nodes.len()).rev() {
        let n = &nodes[id];
        sizes[id] = if n.is_leaf() {
            n.ids.len() as u32
        } else {
            n.children.iter().map(|&c| sizes[c as usize]).sum()
        };
    }
    debug_assert!(roots.iter().all(|&r| (r as usize) < nodes.len()));
    sizes
}

struct Builder<'a> {
    dataset: &'a Dataset,
    params: &'a IndexParams,
    w: usize,
    /// Full-cardinality symbols of every series, row-major.
    words: Vec<u8>,
    nodes: Vec<IsaxNode>,
    root_map: BTreeMap<Vec<u8>, NodeId>,
}

impl Builder<'_> {
    fn symbol(&self, id: SeriesId, seg: usize, bits: u8) -> u8 {
        self.words[id as usize * self.w + seg] >> (MAX_SAX_BITS - bits)
    }

    fn insert(&mut self, id: SeriesId) {
        let base = self.params.base_bits;
        let key: Vec<u8> = (0..self.w).map(|s| self.symbol(id, s, base)).collect();
        let next_id = self.nodes.len() as NodeId;
        let mut node = *self.root_map.entry(key.clone()).or_insert(next_id);
        if node == next_id {
            self.nodes.push(IsaxNode::leaf(SaxWord {
                symbols: key,
                bits: vec![base; self.w],
            }));
        }
        while let Some(seg) = self.nodes[node as usize].split_segment {
            let children = &self.nodes[node as usize].children;
            let bits = self.nodes[children[0] as usize].word.bits[seg as usize];
            let bit = self.symbol(id, seg as usize, bits) & 1;
            node = children[bit as usize];
        }
        let leaf = &mut self.nodes[node as usize];
        leaf.ids.push(id);
        if leaf.ids.len() > self.params.leaf_capacity && !leaf.overflow {
            self.split(node);
        }
    }

    /// Splits `start` and, recursively, any child still above capacity.
    fn split(&mut self, start: NodeId) {
        let mut pending = vec![start];
        while let Some(node) = pending.pop() {
            let (word, ids) = {
                let n = &self.nodes[node as usize];
                (n.word.clone(), n.ids.clone())
            };
            let mut best: Option<(usize, usize)> = None;
            for seg in 0..self.w {
                if word.bits[seg] >= MAX_SAX_BITS {
                    continue;
                }
                let bits = word.bits[seg] + 1;
                let ones = ids.iter().filter(|&&id| self.symbol(id, seg, bits) & 1 == 1).count();
                let imbalance = ones.abs_diff(ids.len() - ones);
                if best.is_none_or(|(_, b)| imbalance < b) {
                    best = Some((seg, imbalance));
                }
            }
            let Some((seg, _)) = best else {
                self.nodes[node as usize].overflow = true;
                continue;
            };
            let bits = word.bits[seg] + 1;
            let mut halves = [Vec::new(), Vec::new()];
            for &id in &ids {
                halves[(self.symbol(id, seg, bits) & 1) as usize].push(id);
            }
            let mut children = Vec::with_capacity(2);
            for (bit, half) in halves.into_iter().enumerate() {
                let mut child_word = word.clone();
                child_word.symbols[seg] = (child_word.symbols[seg] << 1) | bit as u8;
                child_word.bits[seg] = bits;
                let mut child = IsaxNode::leaf(child_word);
                child.ids = half;
                let child_id = self.nodes.len() as NodeId;
                if child.ids.len() > self.params.leaf_capacity {
                    pending.push(child_id);
                }
                self.nodes.push(child);
                children.push(child_id);
            }
            let n = &mut self.nodes[node as usize];
            n.split_segment = Some(seg as u8);
            n.children = children;
            n.ids = Vec::new();
        }
    }
}

pub fn build_isax(dataset: &Dataset, params: &IndexParams) -> Result<IsaxIndex> {
    params.check_dataset(dataset)?;
    let n = dataset.series_len();
    let w = params.segments.min(n);
    let seg_ends = segment_ends(n, w)?;
    let full_bits = vec![MAX_SAX_BITS; w];

    let mut words = Vec::with_capacity(dataset.len() * w);
    for s in dataset.iter() {
        let p = paa_with_ends(s, seg_ends.clone());
        words.extend(sax_from_paa(&p, &full_bits)?.symbols);
    }

    let mut b = Builder {
        dataset,
        params,
        w,
        words,
        nodes: Vec::new(),
        root_map: BTreeMap::new(),
    };
    for id in 0..dataset.len() as SeriesId {
        b.insert(id);
    }

    let roots: Vec<NodeId> = b.root_map.values().copied().collect();
    let mut nodes = b.nodes;
    let mut store = LeafStoreBuilder::new(b.dataset, params.buffer_bytes);
    let mut stack: Vec<NodeId> = roots.iter().rev().copied().collect();
    while let Some(id) = stack.pop() {
        let node = &mut nodes[id as usize];
        if node.is_leaf() {
            node.span = Some(store.push_leaf(&node.ids));
        } else {
            stack.extend(node.children.iter().rev());
        }
    }
    let (store, _) = store.finish();
    Ok(IsaxIndex::from_parts(params.clone(), seg_ends, nodes, roots, store))
}

impl TreeIndex for IsaxIndex {
    type Query = IsaxQuery;

    fn prepare(&self, query: &[f32]) -> Result<IsaxQuery> {
        check_query_len(self.store.series_len(), query)?;
        let p = paa_with_ends(query, self.seg_ends.clone());
        let lens = (0..p.width()).map(|i| p.segment_len(i) as f64).collect();
        Ok(IsaxQuery {
            means: p.means,
            lens,
        })
    }

    fn roots(&self) -> &[NodeId] {
        &self.roots
    }

    fn children(&self, node: NodeId) -> &[NodeId] {
        &self.nodes[node as usize].children
    }

    fn leaf_span(&self, node: NodeId) -> Option<LeafSpan> {
        self.nodes[node as usize].span
    }

    fn subtree_size(&self, node: NodeId) -> u32 {
        self.sizes[node as usize]
    }

    fn min_dist(&self, query: &IsaxQuery, node: NodeId) -> f64 {
        let word = &self.nodes[node as usize].word;
        mindist_sq(&query.means, &query.lens, &word.symbols, &word.bits).sqrt()
    }

    fn store(&self) -> &LeafStore {
        &self.store
    }

    fn node_count(&self) -> usize {
        self.nodes.len()
    }
}

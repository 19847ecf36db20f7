//! EAPCA tree: a binary tree whose nodes bound the per-segment mean and
//! standard deviation of their series. Leaves split horizontally (on one
//! segment statistic at the midpoint of its range) or vertically (after
//! halving one segment to refine the segmentation).
//!
//! The split choice minimises the sum over both children of
//! `count * weighted box diagonal^2`. This is a stand-in for a quality
//! measure; it is not the canonical DSTree policy.

use crate::error::Result;
use crate::index::storage::{LeafSpan, LeafStore, LeafStoreBuilder};
use crate::index::{check_query_len, IndexParams, NodeId, TreeIndex};
use crate::series::{Dataset, SeriesId};
use crate::summarize::eapca::{segment_stats, EapcaSynopsis, SegmentStats};
use crate::summarize::paa::segment_ends;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitStat {
    Mean,
    Std,
}

impl SplitStat {
    fn of(self, s: SegmentStats) -> f64 {
        match self {
            SplitStat::Mean => s.mean,
            SplitStat::Std => s.std,
        }
    }
}

/// Routes a series to child 0 when its statistic on `segment` of the
/// children's segmentation is below `threshold`, to child 1 otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitRule {
    pub child_ends: Vec<usize>,
    pub segment: usize,
    pub stat: SplitStat,
    pub threshold: f64,
}

impl SplitRule {
    fn route(&self, s: &[f32]) -> usize {
        let start = if self.segment == 0 {
            0
        } else {
            self.child_ends[self.segment - 1]
        };
        let end = self.child_ends[self.segment];
        let st = segment_stats(&s[start..end], &[end - start])[0];
        usize::from(self.stat.of(st) >= self.threshold)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EapcaNode {
    pub synopsis: EapcaSynopsis,
    pub split: Option<SplitRule>,
    pub children: Vec<NodeId>,
    pub ids: Vec<SeriesId>,
    pub span: Option<LeafSpan>,
    pub overflow: bool,
}

impl EapcaNode {
    fn leaf(ends: Vec<usize>) -> Self {
        Self {
            synopsis: EapcaSynopsis::empty(ends),
            split: None,
            children: Vec::new(),
            ids: Vec::new(),
            span: None,
            overflow: false,
        }
    }

    pub fn is_leaf(&self) -> bool {
        self.split.is_none()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EapcaTreeIndex {
    pub(crate) params: IndexParams,
    pub(crate) nodes: Vec<EapcaNode>,
    pub(crate) roots: Vec<NodeId>,
    pub(crate) sizes: Vec<u32>,
    pub(crate) store: LeafStore,
}

impl EapcaTreeIndex {
    pub fn params(&self) -> &IndexParams {
        &self.params
    }

    pub fn nodes(&self) -> &[EapcaNode] {
        &self.nodes
    }

    pub fn overflow_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| n.overflow).count()
    }

    pub(crate) fn from_parts(params: IndexParams, nodes: Vec<EapcaNode>, store: LeafStore) -> Self {
        let mut sizes = vec![0u32; nodes.len()];
        for id in (0..nodes.len()).rev() {
            let n = &nodes[id];
            sizes[id] = if n.is_leaf() {
                n.ids.len() as u32
            } else {
                n.children.iter().map(|&c| sizes[c as usize]).sum()
            };
        }
        Self {
            params,
            nodes,
            roots: vec![0],
            sizes,
            store,
        }
    }
}

struct Candidate {
    rule: SplitRule,
    cost: f64,
}

struct Builder<'a> {
    dataset: &'a Dataset,
    params: &'a IndexParams,
    max_segments: usize,
    nodes: Vec<EapcaNode>,
}

impl Builder<'_> {
    fn insert(&mut self, id: SeriesId) {
        let s = self.dataset.series(id);
        let mut node = 0usize;
        loop {
            let n = &mut self.nodes[node];
            let stats = segment_stats(s, &n.synopsis.ends);
            n.synopsis.include(&stats);
            match &n.split {
                Some(rule) => node = n.children[rule.route(s)] as usize,
                None => break,
            }
        }
        let leaf = &mut self.nodes[node];
        leaf.ids.push(id);
        if leaf.ids.len() > self.params.leaf_capacity && !leaf.overflow {
            self.split(node);
        }
    }

    fn child_synopses(&self, ids: &[SeriesId], rule: &SplitRule) -> [(EapcaSynopsis, usize); 2] {
        let mut out = [
            (EapcaSynopsis::empty(rule.child_ends.clone()), 0),
            (EapcaSynopsis::empty(rule.child_ends.clone()), 0),
        ];
        for &id in ids {
            let s = self.dataset.series(id);
            let side = rule.route(s);
            out[side].0.include(&segment_stats(s, &rule.child_ends));
            out[side].1 += 1;
        }
        out
    }

    /// Candidates on one segmentation: midpoint split of each listed
    /// segment's mean and std range.
    fn candidates_on(&self, ids: &[SeriesId], ends: &[usize], segments: &[usize], out: &mut Vec<Candidate>) {
        let stats: Vec<Vec<SegmentStats>> = ids
            .iter()
            .map(|&id| segment_stats(self.dataset.series(id), ends))
            .collect();
        for &seg in segments {
            for stat in [SplitStat::Mean, SplitStat::Std] {
                let (lo, hi) = stats.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), st| {
                    let v = stat.of(st[seg]);
                    (lo.min(v), hi.max(v))
                });
                if hi <= lo {
                    continue;
                }
                let threshold = 0.5 * (lo + hi);
                if threshold <= lo || threshold > hi {
                    continue;
                }
                let rule = SplitRule {
                    child_ends: ends.to_vec(),
                    segment: seg,
                    stat,
                    threshold,
                };
                let children = self.child_synopses(ids, &rule);
                if children.iter().any(|(_, count)| *count == 0) {
                    continue;
                }
                let cost = children
                    .iter()
                    .map(|(syn, count)| *count as f64 * syn.weighted_diagonal_sq())
                    .sum();
                out.push(Candidate { rule, cost });
            }
        }
    }

    fn best_split(&self, node: usize) -> Option<SplitRule> {
        let n = &self.nodes[node];
        let ends = &n.synopsis.ends;
        let mut candidates = Vec::new();
        let all: Vec<usize> = (0..ends.len()).collect();
        self.candidates_on(&n.ids, ends, &all, &mut candidates);

        if ends.len() < self.max_segments {
            for seg in 0..ends.len() {
                let start = if seg == 0 { 0 } else { ends[seg - 1] };
                let len = ends[seg] - start;
                if len < 2 {
                    continue;
                }
                let mut refined = ends.clone();
                refined.insert(seg, start + len / 2);
                self.candidates_on(&n.ids, &refined, &[seg, seg + 1], &mut candidates);
            }
        }

        let mut best: Option<Candidate> = None;
        for c in candidates {
            if best.as_ref().is_none_or(|b| c.cost < b.cost) {
                best = Some(c);
            }
        }
        best.map(|c| c.rule)
    }

    fn split(&mut self, start: usize) {
        let mut pending = vec![start];
        while let Some(node) = pending.pop() {
            let Some(rule) = self.best_split(node) else {
                self.nodes[node].overflow = true;
                continue;
            };
            let ids = std::mem::take(&mut self.nodes[node].ids);
            let [(syn0, _), (syn1, _)] = self.child_synopses(&ids, &rule);
            let mut children = Vec::with_capacity(2);
            for (side, syn) in [(0, syn0), (1, syn1)] {
                let mut child = EapcaNode::leaf(rule.child_ends.clone());
                child.synopsis = syn;
                child.ids = ids
                    .iter()
                    .copied()
                    .filter(|&id| rule.route(self.dataset.series(id)) == side)
                    .collect();
                let child_id = self.nodes.len();
                if child.ids.len() > self.params.leaf_capacity {
                    pending.push(child_id);
                }
                self.nodes.push(child);
                children.push(child_id as NodeId);
            }
            let n = &mut self.nodes[node];
            n.children = children;
            n.split = Some(rule);
        }
    }
}

pub fn build_eapca_tree(dataset: &Dataset, params: &IndexParams) -> Result<EapcaTreeIndex> {
    params.check_dataset(dataset)?;
    let n = dataset.series_len();
    let max_segments = params.segments.min(n).max(1);
    let initial = segment_ends(n, params.initial_segments.min(max_segments))?;

    let mut b = Builder {
        dataset,
        params,
        max_segments,
        nodes: vec![EapcaNode::leaf(initial)],
    };
    for id in 0..dataset.len() as SeriesId {
        b.insert(id);
    }

    let mut nodes = b.nodes;
    let mut store = LeafStoreBuilder::new(dataset, params.buffer_bytes);
    let mut stack = vec![0 as NodeId];
    while let Some(id) = stack.pop() {
        let node = &mut nodes[id as usize];
        if node.is_leaf() {
            node.span = Some(store.push_leaf(&node.ids));
        } else {
            stack.extend(node.children.iter().rev());
        }
    }
    let (store, _) = store.finish();
    Ok(EapcaTreeIndex::from_parts(params.clone(), nodes, store))
}

impl TreeIndex for EapcaTreeIndex {
    type Query = Vec<f32>;

    fn prepare(&self, query: &[f32]) -> Result<Vec<f32>> {
        check_query_len(self.store.series_len(), query)?;
        Ok(query.to_vec())
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

    fn min_dist(&self, query: &Vec<f32>, node: NodeId) -> f64 {
        let syn = &self.nodes[node as usize].synopsis;
        syn.lb_sq(segment_stats(query, &syn.ends).into_iter()).sqrt()
    }

    fn store(&self) -> &LeafStore {
        &self.store
    }

    fn node_count(&self) -> usize {
        self.nodes.len()
    }
}

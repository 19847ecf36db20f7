use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::Result;
use crate::index::{LeafSpan, NodeId, QueryStats, TreeIndex, VaFile};
use crate::search::heap::KnnHeap;
use crate::search::ExitReason;
use crate::series::squared_l2_bounded;

/// Knobs shared by every query mode.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Plan {
    pub k: usize,
    pub epsilon: f64,
    /// Early-exit radius; only used when positive.
    pub r_delta: f64,
    /// Leaves (trees) or refinements (VA+) allowed; `None` is unbounded.
    pub budget: Option<usize>,
}

impl Plan {
    fn threshold(&self, heap: &KnnHeap) -> f64 {
        heap.kth() / (1.0 + self.epsilon)
    }

    fn radius_exit(&self, heap: &KnnHeap) -> bool {
        self.r_delta > 0.0 && heap.is_full() && heap.kth() <= (1.0 + self.epsilon) * self.r_delta
    }

    fn budget_spent(&self, used: usize) -> bool {
        self.budget.is_some_and(|b| used >= b)
    }
}

pub(crate) struct Run {
    pub heap: KnnHeap,
    pub stats: QueryStats,
    pub exit: ExitReason,
}

/// Queue entry; the sentinel carries the seed's k-th distance.
#[derive(Debug, Clone, Copy)]
struct Entry {
    bound: f64,
    node: Option<NodeId>,
}

impl Entry {
    fn key(&self) -> (f64, u64) {
        (self.bound, self.node.map_or(u64::MAX, u64::from))
    }
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    // reversed: BinaryHeap pops the smallest (bound, node id)
    fn cmp(&self, other: &Self) -> Ordering {
        let (a, ai) = self.key();
        let (b, bi) = other.key();
        b.total_cmp(&a).then(bi.cmp(&ai))
    }
}

fn refine_leaf<T: TreeIndex>(
    index: &T,
    query: &[f32],
    span: LeafSpan,
    heap: &mut KnnHeap,
    stats: &mut QueryStats,
) -> bool {
    stats.leaves_visited += 1;
    let mut improved = false;
    let mut threshold = heap.abandon_threshold();
    for (id, s) in index.store().read(span, stats) {
        stats.raw_compared += 1;
        if let Some(sq) = squared_l2_bounded(s, query, threshold) {
            if heap.push(id, sq.sqrt()) {
                improved = true;
                threshold = heap.abandon_threshold();
            }
        }
    }
    improved
}

/// Greedy descent to a first leaf through the child with the smallest
/// bound, skipping empty subtrees.
fn seed_leaf<T: TreeIndex>(index: &T, q: &T::Query, stats: &mut QueryStats) -> Option<NodeId> {
    let best = |nodes: &[NodeId], stats: &mut QueryStats| {
        nodes
            .iter()
            .copied()
            .filter(|&n| index.subtree_size(n) > 0)
            .map(|n| {
                stats.lower_bounds += 1;
                (index.min_dist(q, n), n)
            })
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
            .map(|(_, n)| n)
    };
    let mut node = best(index.roots(), stats)?;
    while index.leaf_span(node).is_none() {
        node = best(index.children(node), stats)?;
    }
    Some(node)
}

/// Best-first k-NN over a tree index. With `epsilon = 0`, no radius and no
/// budget this is exact; the other settings give the approximate modes.
pub(crate) fn tree_knn<T: TreeIndex>(index: &T, query: &[f32], plan: Plan) -> Result<Run> {
    let q = index.prepare(query)?;
    let mut heap = KnnHeap::new(plan.k);
    let mut stats = QueryStats::new();

    let mut queue = BinaryHeap::new();
    for &root in index.roots() {
        if index.subtree_size(root) > 0 {
            stats.lower_bounds += 1;
            queue.push(Entry {
                bound: index.min_dist(&q, root),
                node: Some(root),
            });
        }
    }

    let seed = seed_leaf(index, &q, &mut stats);
    let mut leaves = 0usize;
    if let Some(leaf) = seed {
        refine_leaf(index, query, index.leaf_span(leaf).unwrap(), &mut heap, &mut stats);
        leaves += 1;
        if plan.radius_exit(&heap) {
            return Ok(Run {
                heap,
                stats,
                exit: ExitReason::DeltaRadiusAfterSeed,
            });
        }
        if plan.budget_spent(leaves) {
            return Ok(Run {
                heap,
                stats,
                exit: ExitReason::Budget,
            });
        }
    }
    queue.push(Entry {
        bound: heap.kth(),
        node: None,
    });

    let mut exit = ExitReason::Exhausted;
    while let Some(entry) = queue.pop() {
        if entry.bound > plan.threshold(&heap) {
            exit = ExitReason::Pruned;
            break;
        }
        let Some(node) = entry.node else { continue };
        if let Some(span) = index.leaf_span(node) {
            if Some(node) == seed {
                continue;
            }
            let improved = refine_leaf(index, query, span, &mut heap, &mut stats);
            leaves += 1;
            if improved && plan.radius_exit(&heap) {
                exit = ExitReason::DeltaRadius;
                break;
            }
            if plan.budget_spent(leaves) {
                exit = ExitReason::Budget;
                break;
            }
        } else {
            for &child in index.children(node) {
                if index.subtree_size(child) == 0 {
                    continue;
                }
                stats.lower_bounds += 1;
                let bound = index.min_dist(&q, child);
                if bound <= plan.threshold(&heap) {
                    queue.push(Entry {
                        bound,
                        node: Some(child),
                    });
                }
            }
        }
    }
    Ok(Run { heap, stats, exit })
}

/// Skip-sequential scan of a VA+file in storage order.
pub(crate) fn va_knn(index: &VaFile, query: &[f32], plan: Plan) -> Result<Run> {
    let q = index.prepare(query)?;
    let mut heap = KnnHeap::new(plan.k);
    let mut stats = QueryStats::new();
    let mut refined = 0usize;
    let mut exit = ExitReason::Exhausted;
    for pos in 0..index.len() {
        let (id, _) = index.store().get(pos);
        stats.lower_bounds += 1;
        if index.lower_bound(&q, id) > plan.threshold(&heap) {
            continue;
        }
        let span = LeafSpan {
            start: pos as u32,
            count: 1,
        };
        let threshold = heap.abandon_threshold();
        let mut improved = false;
        for (id, s) in index.store().read(span, &mut stats) {
            stats.raw_compared += 1;
            if let Some(sq) = squared_l2_bounded(s, query, threshold) {
                improved = heap.push(id, sq.sqrt());
            }
        }
        refined += 1;
        stats.leaves_visited += 1;
        if improved && plan.radius_exit(&heap) {
            exit = ExitReason::DeltaRadius;
            break;
        }
        if plan.budget_spent(refined) {
            exit = ExitReason::Budget;
            break;
        }
    }
    Ok(Run { heap, stats, exit })
}

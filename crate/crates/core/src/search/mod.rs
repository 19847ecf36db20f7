//! k-NN query answering over the indexes: exact, ng-approximate (a budget
//! of leaves), ε-approximate and δ-ε-approximate, plus range queries.
//!
//! Queries are compared against the stored series as given. When the index
//! holds Z-normalized data the caller normalizes queries the same way.

mod distribution;
mod engine;
mod heap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::index::{check_query_len, Index, LeafSpan, QueryStats, TreeIndex, VaFile};
use crate::series::{squared_l2_bounded, KnnResult, SeriesId};

pub use distribution::{
    calc_delta_radius, estimate_distance_distribution, DeltaRadius, DistanceDistribution,
    DISTRIBUTION_BINS,
};
pub use heap::KnnHeap;

use engine::{tree_knn, va_knn, Plan, Run};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum SearchMode {
    Exact,
    Ng { nprobe: usize },
    Guaranteed { epsilon: f64, delta: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchParams {
    pub k: usize,
    pub mode: SearchMode,
}

impl SearchParams {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::invalid("k must be at least 1"));
        }
        match self.mode {
            SearchMode::Exact => Ok(()),
            SearchMode::Ng { nprobe: 0 } => Err(Error::invalid("nprobe must be at least 1")),
            SearchMode::Ng { .. } => Ok(()),
            SearchMode::Guaranteed { epsilon, delta } => {
                if !(epsilon >= 0.0 && epsilon.is_finite()) {
                    return Err(Error::invalid(format!("epsilon must be finite and >= 0, got {epsilon}")));
                }
                if !(delta > 0.0 && delta <= 1.0) {
                    return Err(Error::invalid(format!("delta must be in (0, 1], got {delta}")));
                }
                Ok(())
            }
        }
    }
}

/// Why a query stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExitReason {
    /// Every candidate was examined.
    Exhausted,
    /// The smallest remaining bound exceeded the pruning threshold.
    Pruned,
    /// The leaf or refinement budget ran out.
    Budget,
    /// The k-th answer fell inside `(1+ε)·r_δ` right after the first leaf.
    DeltaRadiusAfterSeed,
    /// The k-th answer fell inside `(1+ε)·r_δ` after a later improvement.
    DeltaRadius,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GuaranteeRecord {
    pub epsilon: f64,
    pub delta: f64,
    pub radius: DeltaRadius,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchOutput {
    pub result: KnnResult,
    pub stats: QueryStats,
    pub exit: ExitReason,
    /// Present for ε/δ queries.
    pub guarantee: Option<GuaranteeRecord>,
}

fn run(index: &Index, query: &[f32], plan: Plan) -> Result<Run> {
    if plan.k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    check_query_len(index.series_len(), query)?;
    match index {
        Index::Isax(t) => tree_knn(t, query, plan),
        Index::EapcaTree(t) => tree_knn(t, query, plan),
        Index::Vafile(v) => va_knn(v, query, plan),
    }
}

fn output(r: Run, guarantee: Option<GuaranteeRecord>) -> SearchOutput {
    SearchOutput {
        result: r.heap.into_result(),
        stats: r.stats,
        exit: r.exit,
        guarantee,
    }
}

/// Visits at most `nprobe` leaves (VA+: refines at most `nprobe` series).
pub fn ng_approx_knn(index: &Index, query: &[f32], k: usize, nprobe: usize) -> Result<SearchOutput> {
    if nprobe == 0 {
        return Err(Error::invalid("nprobe must be at least 1"));
    }
    let plan = Plan {
        k,
        epsilon: 0.0,
        r_delta: 0.0,
        budget: Some(nprobe),
    };
    Ok(output(run(index, query, plan)?, None))
}

pub fn exact_knn(index: &Index, query: &[f32], k: usize) -> Result<SearchOutput> {
    let mut out = delta_epsilon_knn(index, query, k, 0.0, 1.0, None)?;
    out.guarantee = None;
    Ok(out)
}

/// Answers whose distances are within `(1+epsilon)` of the exact ones, with
/// probability at least `delta`. `f` is required when `delta < 1`.
pub fn delta_epsilon_knn(
    index: &Index,
    query: &[f32],
    k: usize,
    epsilon: f64,
    delta: f64,
    f: Option<&DistanceDistribution>,
) -> Result<SearchOutput> {
    SearchParams {
        k,
        mode: SearchMode::Guaranteed { epsilon, delta },
    }
    .validate()?;
    let radius = match f {
        Some(f) => calc_delta_radius(f, delta, index.len())?,
        None if delta < 1.0 => {
            return Err(Error::invalid("delta < 1 needs a distance distribution"));
        }
        None => DeltaRadius {
            r_delta: 0.0,
            delta,
            n: index.len(),
            resolution_limited: false,
        },
    };
    let plan = Plan {
        k,
        epsilon,
        r_delta: radius.r_delta,
        budget: None,
    };
    let record = GuaranteeRecord {
        epsilon,
        delta,
        radius,
    };
    Ok(output(run(index, query, plan)?, Some(record)))
}

pub fn search(
    index: &Index,
    query: &[f32],
    params: &SearchParams,
    f: Option<&DistanceDistribution>,
) -> Result<SearchOutput> {
    params.validate()?;
    match params.mode {
        SearchMode::Exact => exact_knn(index, query, params.k),
        SearchMode::Ng { nprobe } => ng_approx_knn(index, query, params.k, nprobe),
        SearchMode::Guaranteed { epsilon, delta } => {
            delta_epsilon_knn(index, query, params.k, epsilon, delta, f)
        }
    }
}

fn within(s: &[f32], query: &[f32], r: f64) -> bool {
    // widened abandon threshold, final test on the distance itself
    squared_l2_bounded(s, query, r * r * (1.0 + 1e-9)).is_some_and(|sq| sq.sqrt() <= r)
}

fn tree_range<T: TreeIndex>(index: &T, query: &[f32], r: f64) -> Result<(Vec<SeriesId>, QueryStats)> {
    let q = index.prepare(query)?;
    let mut stats = QueryStats::new();
    let mut hits = Vec::new();
    let mut stack: Vec<_> = index.roots().iter().rev().copied().collect();
    while let Some(node) = stack.pop() {
        if index.subtree_size(node) == 0 {
            continue;
        }
        stats.lower_bounds += 1;
        if index.min_dist(&q, node) > r {
            continue;
        }
        match index.leaf_span(node) {
            Some(span) => {
                stats.leaves_visited += 1;
                for (id, s) in index.store().read(span, &mut stats) {
                    stats.raw_compared += 1;
                    if within(s, query, r) {
                        hits.push(id);
                    }
                }
            }
            None => stack.extend(index.children(node).iter().rev()),
        }
    }
    Ok((hits, stats))
}

fn va_range(index: &VaFile, query: &[f32], r: f64) -> Result<(Vec<SeriesId>, QueryStats)> {
    let q = index.prepare(query)?;
    let mut stats = QueryStats::new();
    let mut hits = Vec::new();
    for pos in 0..index.len() {
        let (id, _) = index.store().get(pos);
        stats.lower_bounds += 1;
        if index.lower_bound(&q, id) > r {
            continue;
        }
        stats.leaves_visited += 1;
        let span = LeafSpan {
            start: pos as u32,
            count: 1,
        };
        for (id, s) in index.store().read(span, &mut stats) {
            stats.raw_compared += 1;
            if within(s, query, r) {
                hits.push(id);
            }
        }
    }
    Ok((hits, stats))
}

/// Ids of every series within distance `r` of the query, ascending.
pub fn range_query(index: &Index, query: &[f32], r: f64) -> Result<(Vec<SeriesId>, QueryStats)> {
    if r.is_nan() || r < 0.0 {
        return Err(Error::invalid(format!("radius must be >= 0, got {r}")));
    }
    check_query_len(index.series_len(), query)?;
    let (mut ids, stats) = match index {
        Index::Isax(t) => tree_range(t, query, r)?,
        Index::EapcaTree(t) => tree_range(t, query, r)?,
        Index::Vafile(v) => va_range(v, query, r)?,
    };
    ids.sort_unstable();
    Ok((ids, stats))
}

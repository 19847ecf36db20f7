//! Answer quality (recall, average precision, relative error) and workload
//! aggregates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::index::QueryStats;
use crate::series::SeriesId;

/// Fraction of the true neighbors that were returned.
pub fn recall(returned: &[SeriesId], truth: &[SeriesId]) -> f64 {
    if truth.is_empty() {
        return 0.0;
    }
    let hits = returned.iter().filter(|id| truth.contains(id)).count();
    hits as f64 / truth.len() as f64
}

/// Mean of precision@r over the ranks holding a true neighbor, divided by
/// `k = truth.len()`. `returned` must be ordered by ascending distance.
pub fn average_precision(returned: &[SeriesId], truth: &[SeriesId]) -> f64 {
    let k = truth.len();
    if k == 0 {
        return 0.0;
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (r, id) in returned.iter().take(k).enumerate() {
        if truth.contains(id) {
            hits += 1;
            sum += hits as f64 / (r + 1) as f64;
        }
    }
    sum / k as f64
}

/// Which exact distance divides the error at rank r.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReDenominator {
    /// The r-th exact neighbor, so an exact answer scores 0.
    #[default]
    RthNeighbor,
    /// The first exact neighbor at every rank.
    FirstNeighbor,
}

/// Mean relative distance error over the ranks. `None` when a denominator
/// is zero; such queries are left out of MRE.
pub fn relative_error(returned: &[f64], exact: &[f64], denominator: ReDenominator) -> Option<f64> {
    let k = exact.len();
    if k == 0 || returned.len() < k {
        return None;
    }
    let mut sum = 0.0;
    for r in 0..k {
        let denom = match denominator {
            ReDenominator::RthNeighbor => exact[r],
            ReDenominator::FirstNeighbor => exact[0],
        };
        if denom <= 0.0 {
            return None;
        }
        sum += (returned[r] - exact[r]) / denom;
    }
    Some(sum / k as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryRecord {
    pub recall: f64,
    pub average_precision: f64,
    /// `None` when the query has a zero exact distance.
    pub relative_error: Option<f64>,
    pub raw_compared: u64,
    pub leaves_visited: u64,
    pub bytes_read: u64,
    pub random_seeks: u64,
    pub elapsed_ns: u64,
}

impl QueryRecord {
    pub fn new(
        returned_ids: &[SeriesId],
        returned_distances: &[f64],
        truth_ids: &[SeriesId],
        truth_distances: &[f64],
        denominator: ReDenominator,
        stats: &QueryStats,
        elapsed_ns: u64,
    ) -> Self {
        Self {
            recall: recall(returned_ids, truth_ids),
            average_precision: average_precision(returned_ids, truth_ids),
            relative_error: relative_error(returned_distances, truth_distances, denominator),
            raw_compared: stats.raw_compared,
            leaves_visited: stats.leaves_visited,
            bytes_read: stats.bytes_read,
            random_seeks: stats.random_seeks,
            elapsed_ns,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkloadReport {
    pub queries: usize,
    pub avg_recall: f64,
    pub map: f64,
    /// Mean over the queries with a relative error; 0 if there are none.
    pub mre: f64,
    pub re_excluded: usize,
    /// Queries per minute of summed query time.
    pub throughput: f64,
    /// Mean share of the raw data read, in percent.
    pub pct_data_accessed: f64,
    pub mean_seeks: f64,
    pub mean_raw_compared: f64,
    pub mean_leaves_visited: f64,
}

pub fn aggregate(records: &[QueryRecord], dataset_bytes: u64) -> Result<WorkloadReport> {
    if records.is_empty() {
        return Err(Error::invalid("cannot aggregate an empty workload"));
    }
    if dataset_bytes == 0 {
        return Err(Error::invalid("dataset size must be positive"));
    }
    let n = records.len() as f64;
    let mean = |f: &dyn Fn(&QueryRecord) -> f64| records.iter().map(f).sum::<f64>() / n;
    let res: Vec<f64> = records.iter().filter_map(|r| r.relative_error).collect();
    let total_ns: u64 = records.iter().map(|r| r.elapsed_ns).sum();
    let throughput = if total_ns == 0 {
        f64::INFINITY
    } else {
        n * 60e9 / total_ns as f64
    };
    Ok(WorkloadReport {
        queries: records.len(),
        avg_recall: mean(&|r| r.recall),
        map: mean(&|r| r.average_precision),
        mre: if res.is_empty() {
            0.0
        } else {
            res.iter().sum::<f64>() / res.len() as f64
        },
        re_excluded: records.len() - res.len(),
        throughput,
        pct_data_accessed: mean(&|r| r.bytes_read as f64 / dataset_bytes as f64 * 100.0),
        mean_seeks: mean(&|r| r.random_seeks as f64),
        mean_raw_compared: mean(&|r| r.raw_compared as f64),
        mean_leaves_visited: mean(&|r| r.leaves_visited as f64),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recall_examples() {
        assert_eq!(recall(&[1, 2, 3], &[1, 2, 3]), 1.0);
        assert!((recall(&[1, 2, 3], &[1, 2, 4]) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(recall(&[5, 6], &[1, 2]), 0.0);
    }

    #[test]
    fn average_precision_examples() {
        assert_eq!(average_precision(&[1, 2, 3], &[1, 2, 3]), 1.0);
        // relevance 1, 0, 1: (1 + 2/3) / 3
        let ap = average_precision(&[1, 9, 3], &[1, 2, 3]);
        assert!((ap - 5.0 / 9.0).abs() < 1e-15);
        assert_eq!(average_precision(&[7, 8, 9], &[1, 2, 3]), 0.0);
    }

    #[test]
    fn relative_error_examples() {
        assert_eq!(relative_error(&[1.0, 2.0], &[1.0, 2.0], ReDenominator::RthNeighbor), Some(0.0));
        assert_eq!(relative_error(&[3.0], &[2.0], ReDenominator::RthNeighbor), Some(0.5));
        assert_eq!(relative_error(&[1.0], &[0.0], ReDenominator::RthNeighbor), None);
        // first-neighbor reading: (0/1 + 1/1) / 2
        assert_eq!(relative_error(&[1.0, 3.0], &[1.0, 2.0], ReDenominator::FirstNeighbor), Some(0.5));
    }

    fn record(recall: f64, re: Option<f64>) -> QueryRecord {
        QueryRecord {
            recall,
            average_precision: recall,
            relative_error: re,
            raw_compared: 10,
            leaves_visited: 2,
            bytes_read: 50,
            random_seeks: 3,
            elapsed_ns: 1_000_000,
        }
    }

    #[test]
    fn aggregate_examples() {
        let one = aggregate(&[record(0.8, Some(0.1))], 100).unwrap();
        assert_eq!(one.avg_recall, 0.8);
        assert_eq!(one.mre, 0.1);
        assert_eq!(one.pct_data_accessed, 50.0);
        assert_eq!(one.mean_seeks, 3.0);
        assert!((one.throughput - 60_000.0).abs() < 1e-9);

        let two = aggregate(&[record(1.0, None), record(0.0, Some(0.2))], 100).unwrap();
        assert_eq!(two.avg_recall, 0.5);
        assert_eq!(two.mre, 0.2);
        assert_eq!(two.re_excluded, 1);
        assert!(aggregate(&[], 100).is_err());
    }
}

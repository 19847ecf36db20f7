//! EAPCA: per-segment mean and standard deviation over an explicit
//! segmentation, plus the node-level box synopsis used by the EAPCA tree.

use crate::error::{Error, Result};
use crate::series::mean_std;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentStats {
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EapcaSummary {
    pub ends: Vec<usize>,
    pub stats: Vec<SegmentStats>,
}

pub(crate) fn validate_ends(ends: &[usize], n: usize) -> Result<()> {
    if ends.is_empty() {
        return Err(Error::invalid("segmentation has no segments"));
    }
    let mut start = 0;
    for &end in ends {
        if end <= start {
            return Err(Error::invalid(format!(
                "empty or unordered segment ending at {end}"
            )));
        }
        start = end;
    }
    if start != n {
        return Err(Error::invalid(format!(
            "segmentation covers {start} points, series has {n}"
        )));
    }
    Ok(())
}

pub(crate) fn segment_stats(s: &[f32], ends: &[usize]) -> Vec<SegmentStats> {
    let mut start = 0;
    ends.iter()
        .map(|&end| {
            let (mean, std) = mean_std(&s[start..end]);
            start = end;
            SegmentStats { mean, std }
        })
        .collect()
}

pub fn eapca(s: &[f32], ends: &[usize]) -> Result<EapcaSummary> {
    validate_ends(ends, s.len())?;
    Ok(EapcaSummary {
        ends: ends.to_vec(),
        stats: segment_stats(s, ends),
    })
}

/// Bounding box of segment statistics over every series of a node.
#[derive(Debug, Clone, PartialEq)]
pub struct EapcaSynopsis {
    pub ends: Vec<usize>,
    pub mean_min: Vec<f64>,
    pub mean_max: Vec<f64>,
    pub std_min: Vec<f64>,
    pub std_max: Vec<f64>,
}

impl EapcaSynopsis {
    /// An empty box (min > max) that `include` grows.
    pub fn empty(ends: Vec<usize>) -> Self {
        let m = ends.len();
        Self {
            ends,
            mean_min: vec![f64::INFINITY; m],
            mean_max: vec![f64::NEG_INFINITY; m],
            std_min: vec![f64::INFINITY; m],
            std_max: vec![f64::NEG_INFINITY; m],
        }
    }

    pub fn segments(&self) -> usize {
        self.ends.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean_min.first().is_none_or(|&lo| lo > self.mean_max[0])
    }

    pub fn include(&mut self, stats: &[SegmentStats]) {
        debug_assert_eq!(stats.len(), self.segments());
        for (i, st) in stats.iter().enumerate() {
            self.mean_min[i] = self.mean_min[i].min(st.mean);
            self.mean_max[i] = self.mean_max[i].max(st.mean);
            self.std_min[i] = self.std_min[i].min(st.std);
            self.std_max[i] = self.std_max[i].max(st.std);
        }
    }

    pub fn contains(&self, stats: &[SegmentStats]) -> bool {
        stats.len() == self.segments()
            && stats.iter().enumerate().all(|(i, st)| {
                st.mean >= self.mean_min[i]
                    && st.mean <= self.mean_max[i]
                    && st.std >= self.std_min[i]
                    && st.std <= self.std_max[i]
            })
    }

    pub fn segment_len(&self, i: usize) -> usize {
        let start = if i == 0 { 0 } else { self.ends[i - 1] };
        self.ends[i] - start
    }

    /// Squared lower bound from per-segment query statistics.
    pub(crate) fn lb_sq(&self, query: impl Iterator<Item = SegmentStats>) -> f64 {
        let mut sum = 0.0;
        for (i, q) in query.enumerate() {
            let dm = interval_gap(q.mean, self.mean_min[i], self.mean_max[i]);
            let ds = interval_gap(q.std, self.std_min[i], self.std_max[i]);
            sum += self.segment_len(i) as f64 * (dm * dm + ds * ds);
        }
        sum
    }

    /// Squared diagonal of the box, each segment weighted by its length.
    pub(crate) fn weighted_diagonal_sq(&self) -> f64 {
        (0..self.segments())
            .map(|i| {
                let dm = self.mean_max[i] - self.mean_min[i];
                let ds = self.std_max[i] - self.std_min[i];
                self.segment_len(i) as f64 * (dm * dm + ds * ds)
            })
            .sum()
    }
}

#[inline]
fn interval_gap(v: f64, lo: f64, hi: f64) -> f64 {
    if v < lo {
        lo - v
    } else if v > hi {
        v - hi
    } else {
        0.0
    }
}

/// Lower bound on the distance from `query` to every series inside the
/// synopsis box: `sqrt(sum_i len_i * (gap_mean_i^2 + gap_std_i^2))`.
///
/// Per segment, `sum (q-x)^2 = len*((mq-mx)^2 + sq^2 + sx^2 - 2cov)` and
/// `cov <= sq*sx`, so each term is at least `len*((mq-mx)^2 + (sq-sx)^2)`.
pub fn eapca_node_lb(query: &[f32], synopsis: &EapcaSynopsis) -> Result<f64> {
    validate_ends(&synopsis.ends, query.len()).map_err(|_| Error::LengthMismatch {
        expected: synopsis.ends.last().copied().unwrap_or(0),
        actual: query.len(),
    })?;
    let stats = segment_stats(query, &synopsis.ends);
    Ok(synopsis.lb_sq(stats.into_iter()).sqrt())
}

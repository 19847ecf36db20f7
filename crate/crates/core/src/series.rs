//! Series storage, Euclidean distance, Z-normalization and the brute-force
//! k-NN oracle.
//!
//! Series are stored as `f32`; every distance is accumulated in `f64`.

use std::cmp::Ordering;

use crate::error::{Error, Result};

/// Identifier of a series: its position in the dataset.
pub type SeriesId = u32;

/// Population standard deviation below which a series counts as constant.
pub const CONSTANT_STD: f64 = 1e-12;

/// A collection of equal-length series stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    length: usize,
    values: Vec<f32>,
    normalized: bool,
}

impl Dataset {
    /// Builds a dataset from a flat row-major buffer.
    pub fn from_flat(length: usize, values: Vec<f32>) -> Result<Self> {
        if length == 0 {
            return Err(Error::invalid("series length must be at least 1"));
        }
        if values.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if !values.len().is_multiple_of(length) {
            return Err(Error::LengthMismatch {
                expected: length * (values.len() / length + 1),
                actual: values.len(),
            });
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                series: pos / length,
                position: pos % length,
            });
        }
        if values.len() / length > SeriesId::MAX as usize {
            return Err(Error::invalid("too many series"));
        }
        Ok(Self {
            length,
            values,
            normalized: false,
        })
    }

    pub fn from_rows<R: AsRef<[f32]>>(rows: &[R]) -> Result<Self> {
        let first = rows.first().ok_or(Error::EmptyDataset)?.as_ref().len();
        let mut values = Vec::with_capacity(first * rows.len());
        for row in rows {
            let row = row.as_ref();
            if row.len() != first {
                return Err(Error::LengthMismatch {
                    expected: first,
                    actual: row.len(),
                });
            }
            values.extend_from_slice(row);
        }
        Self::from_flat(first, values)
    }

    /// Number of series.
    pub fn len(&self) -> usize {
        self.values.len() / self.length
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Length `n` shared by every series.
    pub fn series_len(&self) -> usize {
        self.length
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn series(&self, id: SeriesId) -> &[f32] {
        let start = id as usize * self.length;
        &self.values[start..start + self.length]
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &[f32]> + '_ {
        self.values.chunks_exact(self.length)
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    /// Size of the raw data in bytes (`f32` per value).
    pub fn byte_size(&self) -> u64 {
        self.values.len() as u64 * 4
    }

    /// Returns a copy with every series Z-normalized. Already normalized
    /// datasets are returned unchanged.
    pub fn normalized(&self) -> Dataset {
        if self.normalized {
            return self.clone();
        }
        let mut values = Vec::with_capacity(self.values.len());
        for s in self.iter() {
            values.extend(z_normalize(s));
        }
        Dataset {
            length: self.length,
            values,
            normalized: true,
        }
    }

    /// Marks the dataset as normalized without touching values. Used when
    /// reloading data that was normalized before it was stored.
    pub fn assume_normalized(mut self, normalized: bool) -> Self {
        self.normalized = normalized;
        self
    }
}

fn check_len(a: &[f32], b: &[f32]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    Ok(())
}

#[inline]
pub(crate) fn squared_l2(a: &[f32], b: &[f32]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut sum = 0.0f64;
    for (x, y) in a.iter().zip(b) {
        let d = *x as f64 - *y as f64;
        sum += d * d;
    }
    sum
}

/// Squared distance with early abandoning; `None` once the running sum
/// exceeds `threshold`.
#[inline]
pub(crate) fn squared_l2_bounded(a: &[f32], b: &[f32], threshold: f64) -> Option<f64> {
    debug_assert_eq!(a.len(), b.len());
    let mut sum = 0.0f64;
    for (x, y) in a.iter().zip(b) {
        let d = *x as f64 - *y as f64;
        sum += d * d;
        if sum > threshold {
            return None;
        }
    }
    Some(sum)
}

pub fn euclidean_distance(a: &[f32], b: &[f32]) -> Result<f64> {
    check_len(a, b)?;
    Ok(squared_l2(a, b).sqrt())
}

/// Exact squared distance if it is at most `threshold` (itself a squared
/// distance), `None` (abandoned) otherwise.
pub fn squared_distance_early_abandon(a: &[f32], b: &[f32], threshold: f64) -> Result<Option<f64>> {
    check_len(a, b)?;
    Ok(squared_l2_bounded(a, b, threshold))
}

/// Population mean and standard deviation, two-pass.
pub(crate) fn mean_std(s: &[f32]) -> (f64, f64) {
    let n = s.len() as f64;
    let mean = s.iter().map(|&v| v as f64).sum::<f64>() / n;
    let var = s
        .iter()
        .map(|&v| {
            let d = v as f64 - mean;
            d * d
        })
        .sum::<f64>()
        / n;
    (mean, var.sqrt())
}

/// Z-normalizes a series (population std). Constant series map to zeros.
pub fn z_normalize(s: &[f32]) -> Vec<f32> {
    let (mean, std) = mean_std(s);
    if std < CONSTANT_STD {
        return vec![0.0; s.len()];
    }
    s.iter().map(|&v| ((v as f64 - mean) / std) as f32).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub id: SeriesId,
    pub distance: f64,
}

impl Neighbor {
    pub fn new(id: SeriesId, distance: f64) -> Self {
        Self { id, distance }
    }
}

/// Ascending by distance, then by id.
pub(crate) fn neighbor_order(a: &Neighbor, b: &Neighbor) -> Ordering {
    a.distance
        .total_cmp(&b.distance)
        .then_with(|| a.id.cmp(&b.id))
}

/// Answer of a k-NN query, sorted ascending by (distance, id).
#[derive(Debug, Clone, PartialEq)]
pub struct KnnResult {
    pub neighbors: Vec<Neighbor>,
    pub k: usize,
    /// Set when fewer than `k` series exist.
    pub truncated: bool,
}

impl KnnResult {
    pub fn ids(&self) -> Vec<SeriesId> {
        self.neighbors.iter().map(|n| n.id).collect()
    }

    pub fn distances(&self) -> Vec<f64> {
        self.neighbors.iter().map(|n| n.distance).collect()
    }

    /// Distance of the last returned neighbor.
    pub fn kth_distance(&self) -> Option<f64> {
        self.neighbors.last().map(|n| n.distance)
    }
}

/// Exact k-NN by scanning and fully sorting every distance. This is the
/// ground truth every index is checked against.
pub fn knn_bruteforce(dataset: &Dataset, query: &[f32], k: usize) -> Result<KnnResult> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    check_len(dataset.series(0), query)?;
    let mut all: Vec<Neighbor> = dataset
        .iter()
        .enumerate()
        .map(|(id, s)| Neighbor::new(id as SeriesId, squared_l2(s, query).sqrt()))
        .collect();
    all.sort_by(neighbor_order);
    let truncated = k > all.len();
    all.truncate(k);
    Ok(KnnResult {
        neighbors: all,
        k,
        truncated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn distance_examples() {
        assert_eq!(euclidean_distance(&[0., 0., 0.], &[0., 0., 0.]).unwrap(), 0.0);
        assert_eq!(euclidean_distance(&[3., 4.], &[0., 0.]).unwrap(), 5.0);
        assert_eq!(euclidean_distance(&[1., 2., 3.], &[1., 2., 4.]).unwrap(), 1.0);
        assert!(matches!(
            euclidean_distance(&[1.0], &[1.0, 2.0]),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn early_abandon_examples() {
        assert_eq!(squared_distance_early_abandon(&[3., 4.], &[0., 0.], 25.0).unwrap(), Some(25.0));
        assert_eq!(squared_distance_early_abandon(&[3., 4.], &[0., 0.], 8.9).unwrap(), None);
        assert_eq!(squared_distance_early_abandon(&[0., 0.], &[0., 0.], 0.0).unwrap(), Some(0.0));
        assert!(squared_distance_early_abandon(&[0.], &[0., 0.], 1.0).is_err());
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(z_normalize(&[0., 2.]), vec![-1.0, 1.0]);
        assert_eq!(z_normalize(&[5., 5., 5., 5.]), vec![0.0; 4]);
        let z = z_normalize(&[1., 2., 3.]);
        let expected = [-1.224745, 0.0, 1.224745];
        for (a, b) in z.iter().zip(expected) {
            assert!(close(*a as f64, b, 1e-6), "{a} vs {b}");
        }
    }

    #[test]
    fn bruteforce_examples() {
        let ds = Dataset::from_rows(&[[0.0f32, 0.0], [1.0, 1.0], [3.0, 3.0]]).unwrap();
        let q = [0.1f32, 0.0];
        let r = knn_bruteforce(&ds, &q, 1).unwrap();
        assert_eq!(r.ids(), vec![0]);
        assert!(close(r.neighbors[0].distance, 0.1, 1e-7));

        let r = knn_bruteforce(&ds, &q, 3).unwrap();
        assert_eq!(r.ids(), vec![0, 1, 2]);
        let expected = [0.1, (0.81f64 + 1.0).sqrt(), (8.41f64 + 9.0).sqrt()];
        for (d, e) in r.distances().iter().zip(expected) {
            assert!(close(*d, e, 1e-6), "{d} vs {e}");
        }

        let r = knn_bruteforce(&ds, &[3.0, 3.0], 1).unwrap();
        assert_eq!(r.neighbors, vec![Neighbor::new(2, 0.0)]);

        let r = knn_bruteforce(&ds, &q, 5).unwrap();
        assert!(r.truncated);
        assert_eq!(r.neighbors.len(), 3);
    }

    #[test]
    fn bruteforce_tie_break_by_id() {
        let ds = Dataset::from_rows(&[[1.0f32], [-1.0], [1.0]]).unwrap();
        let r = knn_bruteforce(&ds, &[0.0], 3).unwrap();
        assert_eq!(r.ids(), vec![0, 1, 2]);
    }

    #[test]
    fn dataset_validation() {
        assert!(matches!(Dataset::from_flat(2, vec![]), Err(Error::EmptyDataset)));
        assert!(matches!(
            Dataset::from_flat(2, vec![1.0, f32::NAN]),
            Err(Error::NonFinite { series: 0, position: 1 })
        ));
        assert!(Dataset::from_flat(2, vec![1.0, 2.0, 3.0]).is_err());
        let ds = Dataset::from_rows(&[[0.0f32, 2.0], [5.0, 5.0]]).unwrap().normalized();
        assert!(ds.is_normalized());
        assert_eq!(ds.series(0), &[-1.0, 1.0]);
        assert_eq!(ds.series(1), &[0.0, 0.0]);
    }
}

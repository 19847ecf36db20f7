use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{squared_l2, Dataset};

/// Histogram bins used by [`estimate_distance_distribution`].
pub const DISTRIBUTION_BINS: usize = 1000;

/// Histogram of pairwise distances over `[0, d_max]`, read as a piecewise
/// linear CDF.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceDistribution {
    counts: Vec<u64>,
    d_max: f64,
    sample_size: usize,
    total: u64,
}

impl DistanceDistribution {
    pub fn from_histogram(counts: Vec<u64>, d_max: f64, sample_size: usize) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::invalid("histogram needs at least one bin"));
        }
        if !d_max.is_finite() || d_max < 0.0 {
            return Err(Error::invalid("d_max must be finite and non-negative"));
        }
        let total: u64 = counts.iter().sum();
        if total == 0 {
            return Err(Error::invalid("histogram is empty"));
        }
        Ok(Self {
            counts,
            d_max,
            sample_size,
            total,
        })
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    pub fn d_max(&self) -> f64 {
        self.d_max
    }

    pub fn sample_size(&self) -> usize {
        self.sample_size
    }

    /// Number of sampled pairs.
    pub fn pairs(&self) -> u64 {
        self.total
    }

    fn bin_width(&self) -> f64 {
        self.d_max / self.counts.len() as f64
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        if x >= self.d_max {
            return 1.0;
        }
        let w = self.bin_width();
        let b = ((x / w) as usize).min(self.counts.len() - 1);
        let before: u64 = self.counts[..b].iter().sum();
        let frac = (x - b as f64 * w) / w;
        (before as f64 + self.counts[b] as f64 * frac) / self.total as f64
    }

    /// Smallest x with `cdf(x) >= p`, interpolating inside the bin.
    pub fn quantile(&self, p: f64) -> f64 {
        if p <= 0.0 {
            return 0.0;
        }
        let target = p.min(1.0) * self.total as f64;
        let w = self.bin_width();
        let mut cum = 0.0;
        for (b, &c) in self.counts.iter().enumerate() {
            let next = cum + c as f64;
            if c > 0 && next >= target {
                return (b as f64 * w + w * (target - cum) / c as f64).min(self.d_max);
            }
            cum = next;
        }
        self.d_max
    }
}

/// Samples `sample_size` series, then `pairs` random distinct pairs among
/// them, and histograms their distances into [`DISTRIBUTION_BINS`] bins.
pub fn estimate_distance_distribution(
    dataset: &Dataset,
    sample_size: usize,
    pairs: usize,
    seed: u64,
) -> Result<DistanceDistribution> {
    if dataset.len() < 2 {
        return Err(Error::invalid("distance distribution needs at least two series"));
    }
    if sample_size < 2 || sample_size > dataset.len() {
        return Err(Error::invalid(format!(
            "sample size must be in 2..={}, got {sample_size}",
            dataset.len()
        )));
    }
    if pairs == 0 {
        return Err(Error::invalid("pair count must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut members = sample(&mut rng, dataset.len(), sample_size).into_vec();
    members.sort_unstable();

    let distances: Vec<f64> = (0..pairs)
        .map(|_| {
            let i = rng.random_range(0..sample_size);
            let mut j = rng.random_range(0..sample_size - 1);
            if j >= i {
                j += 1;
            }
            let a = dataset.series(members[i] as u32);
            let b = dataset.series(members[j] as u32);
            squared_l2(a, b).sqrt()
        })
        .collect();

    let d_max = distances.iter().copied().fold(0.0, f64::max);
    let mut counts = vec![0u64; DISTRIBUTION_BINS];
    for d in distances {
        let b = if d_max > 0.0 {
            ((d / d_max * DISTRIBUTION_BINS as f64) as usize).min(DISTRIBUTION_BINS - 1)
        } else {
            0
        };
        counts[b] += 1;
    }
    DistanceDistribution::from_histogram(counts, d_max, sample_size)
}

/// Radius around a query that holds no series with probability `delta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaRadius {
    pub r_delta: f64,
    pub delta: f64,
    pub n: usize,
    /// The target quantile fell below what the histogram can resolve.
    pub resolution_limited: bool,
}

/// `r = F^-1(1 - delta^(1/n))`.
pub fn calc_delta_radius(f: &DistanceDistribution, delta: f64, n: usize) -> Result<DeltaRadius> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::invalid(format!("delta must be in (0, 1], got {delta}")));
    }
    if n == 0 {
        return Err(Error::invalid("dataset size must be at least 1"));
    }
    let mut out = DeltaRadius {
        r_delta: 0.0,
        delta,
        n,
        resolution_limited: false,
    };
    if delta == 1.0 {
        return Ok(out);
    }
    // 1 - delta^(1/n) without cancellation for large n
    let p = -(delta.ln() / n as f64).exp_m1();
    if p < 1.0 / f.pairs() as f64 {
        out.resolution_limited = true;
        return Ok(out);
    }
    out.r_delta = f.quantile(p);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_pair_all_in_bin_zero() {
        let ds = Dataset::from_rows(&[[1.0f32, 2.0], [1.0, 2.0]]).unwrap();
        let f = estimate_distance_distribution(&ds, 2, 50, 1).unwrap();
        assert_eq!(f.d_max(), 0.0);
        assert_eq!(f.counts()[0], 50);
        assert_eq!(f.cdf(1e-9), 1.0);
    }

    #[test]
    fn single_distance_sets_dmax() {
        let ds = Dataset::from_rows(&[[0.0f32, 0.0], [3.0, 4.0]]).unwrap();
        let f = estimate_distance_distribution(&ds, 2, 10, 7).unwrap();
        assert_eq!(f.d_max(), 5.0);
        assert_eq!(f.counts()[DISTRIBUTION_BINS - 1], 10);
        assert_eq!(f.cdf(5.0), 1.0);
    }

    #[test]
    fn rejects_tiny_dataset() {
        let ds = Dataset::from_rows(&[[0.0f32, 0.0]]).unwrap();
        assert!(estimate_distance_distribution(&ds, 1, 10, 0).is_err());
    }

    fn uniform() -> DistanceDistribution {
        DistanceDistribution::from_histogram(vec![100; 1000], 1.0, 0).unwrap()
    }

    #[test]
    fn uniform_radius_matches_closed_form() {
        let r = calc_delta_radius(&uniform(), 0.5, 100).unwrap();
        let expected = 1.0 - 0.5f64.powf(0.01);
        assert!((r.r_delta - expected).abs() < 1e-9, "{}", r.r_delta);
        assert!((r.r_delta - 0.0069).abs() < 1e-4);
        assert!(!r.resolution_limited);
    }

    #[test]
    fn delta_one_is_zero() {
        let r = calc_delta_radius(&uniform(), 1.0, 12345).unwrap();
        assert_eq!(r.r_delta, 0.0);
        assert!(!r.resolution_limited);
    }

    #[test]
    fn resolution_limit_flagged() {
        let f = DistanceDistribution::from_histogram(vec![1; 10], 1.0, 0).unwrap();
        let r = calc_delta_radius(&f, 0.99, 1_000_000).unwrap();
        assert_eq!(r.r_delta, 0.0);
        assert!(r.resolution_limited);
    }

    #[test]
    fn cdf_and_quantile_are_inverse() {
        let f = DistanceDistribution::from_histogram(vec![3, 0, 5, 2], 4.0, 0).unwrap();
        for p in [0.05, 0.3, 0.31, 0.6, 0.99] {
            assert!((f.cdf(f.quantile(p)) - p).abs() < 1e-12);
        }
        assert_eq!(f.cdf(4.0), 1.0);
    }
}

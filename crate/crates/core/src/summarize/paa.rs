use crate::error::{Error, Result};

/// End offsets (exclusive) of `w` near-equal segments over `n` points. When
/// `w` does not divide `n`, the leading `n % w` segments get one extra point.
pub fn segment_ends(n: usize, w: usize) -> Result<Vec<usize>> {
    if w == 0 || w > n {
        return Err(Error::invalid(format!(
            "segment count {w} must be in 1..={n}"
        )));
    }
    let base = n / w;
    let rem = n % w;
    let mut ends = Vec::with_capacity(w);
    let mut end = 0;
    for i in 0..w {
        end += base + usize::from(i < rem);
        ends.push(end);
    }
    Ok(ends)
}

/// Piecewise aggregate approximation: per-segment means.
#[derive(Debug, Clone, PartialEq)]
pub struct PaaSummary {
    pub means: Vec<f64>,
    pub ends: Vec<usize>,
}

impl PaaSummary {
    pub fn width(&self) -> usize {
        self.means.len()
    }

    pub fn series_len(&self) -> usize {
        self.ends.last().copied().unwrap_or(0)
    }

    pub fn segment_len(&self, i: usize) -> usize {
        let start = if i == 0 { 0 } else { self.ends[i - 1] };
        self.ends[i] - start
    }
}

pub fn paa(s: &[f32], w: usize) -> Result<PaaSummary> {
    let ends = segment_ends(s.len(), w)?;
    Ok(paa_with_ends(s, ends))
}

pub(crate) fn paa_with_ends(s: &[f32], ends: Vec<usize>) -> PaaSummary {
    let mut means = Vec::with_capacity(ends.len());
    let mut start = 0;
    for &end in &ends {
        let sum: f64 = s[start..end].iter().map(|&v| v as f64).sum();
        means.push(sum / (end - start) as f64);
        start = end;
    }
    PaaSummary { means, ends }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        let s = [1.0f32, 2.0, 3.0, 4.0];
        assert_eq!(paa(&s, 2).unwrap().means, vec![1.5, 3.5]);
        assert_eq!(paa(&s, 4).unwrap().means, vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(paa(&s, 1).unwrap().means, vec![2.5]);
        assert!(paa(&s, 5).is_err());
        assert!(paa(&s, 0).is_err());
    }

    #[test]
    fn remainder_goes_to_leading_segments() {
        assert_eq!(segment_ends(10, 4).unwrap(), vec![3, 6, 8, 10]);
        assert_eq!(segment_ends(7, 7).unwrap(), (1..=7).collect::<Vec<_>>());
        let p = paa(&[1.0, 2.0, 3.0, 4.0, 5.0], 2).unwrap();
        assert_eq!(p.means, vec![2.0, 4.5]);
        assert_eq!((p.segment_len(0), p.segment_len(1)), (3, 2));
    }

    #[test]
    fn weighted_mean_matches_series_mean() {
        let s: Vec<f32> = (0..37).map(|i| ((i * 7919) % 23) as f32 - 11.0).collect();
        let mean = s.iter().map(|&v| v as f64).sum::<f64>() / s.len() as f64;
        for w in 1..=s.len() {
            let p = paa(&s, w).unwrap();
            let weighted: f64 = (0..w).map(|i| p.means[i] * p.segment_len(i) as f64).sum::<f64>()
                / s.len() as f64;
            assert!((weighted - mean).abs() < 1e-6);
        }
    }
}

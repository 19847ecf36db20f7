use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Leading coefficients of a series in the orthonormal real Fourier basis:
/// DC first, then (cos, sin) pairs by increasing frequency, with the lone
/// Nyquist cosine last for even lengths.
#[derive(Debug, Clone, PartialEq)]
pub struct DftSummary {
    pub coefficients: Vec<f64>,
}

impl DftSummary {
    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }

    pub fn distance(&self, other: &DftSummary) -> f64 {
        self.coefficients
            .iter()
            .zip(&other.coefficients)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

/// A planned transform for one series length, reusable across series.
#[derive(Clone)]
pub struct DftTransform {
    n: usize,
    l: usize,
    fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for DftTransform {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DftTransform")
            .field("n", &self.n)
            .field("l", &self.l)
            .finish()
    }
}

impl DftTransform {
    pub fn new(n: usize, l: usize) -> Result<Self> {
        if l == 0 || l > n {
            return Err(Error::invalid(format!(
                "coefficient count {l} must be in 1..={n}"
            )));
        }
        let fft = FftPlanner::new().plan_fft_forward(n);
        Ok(Self { n, l, fft })
    }

    pub fn coefficients(&self) -> usize {
        self.l
    }

    pub fn series_len(&self) -> usize {
        self.n
    }

    pub fn apply(&self, s: &[f32]) -> Result<DftSummary> {
        if s.len() != self.n {
            return Err(Error::LengthMismatch {
                expected: self.n,
                actual: s.len(),
            });
        }
        let mut buf: Vec<Complex<f64>> = s.iter().map(|&v| Complex::new(v as f64, 0.0)).collect();
        self.fft.process(&mut buf);

        let n = self.n as f64;
        let dc_scale = 1.0 / n.sqrt();
        let pair_scale = (2.0 / n).sqrt();
        let mut coefficients = Vec::with_capacity(self.l);
        coefficients.push(buf[0].re * dc_scale);
        for j in 1..self.l {
            let freq = j.div_ceil(2);
            let x = buf[freq];
            let c = if 2 * freq == self.n {
                x.re * dc_scale
            } else if j % 2 == 1 {
                x.re * pair_scale
            } else {
                -x.im * pair_scale
            };
            coefficients.push(c);
        }
        Ok(DftSummary { coefficients })
    }
}

pub fn dft(s: &[f32], l: usize) -> Result<DftSummary> {
    DftTransform::new(s.len(), l)?.apply(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::euclidean_distance;
    use std::f64::consts::PI;

    /// Direct evaluation against explicit basis vectors.
    fn basis_oracle(s: &[f32], l: usize) -> Vec<f64> {
        let n = s.len();
        (0..l)
            .map(|j| {
                let f = j.div_ceil(2) as f64;
                (0..n)
                    .map(|t| {
                        let angle = 2.0 * PI * f * t as f64 / n as f64;
                        let b = if j == 0 || (n.is_multiple_of(2) && j == n - 1) {
                            1.0 / (n as f64).sqrt() * if j == 0 { 1.0 } else { angle.cos() }
                        } else if j % 2 == 1 {
                            (2.0 / n as f64).sqrt() * angle.cos()
                        } else {
                            (2.0 / n as f64).sqrt() * angle.sin()
                        };
                        b * s[t] as f64
                    })
                    .sum()
            })
            .collect()
    }

    fn pseudo_series(seed: u64, n: usize) -> Vec<f32> {
        let mut state = seed | 1;
        (0..n)
            .map(|_| {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                ((state >> 33) as f64 / (1u64 << 31) as f64 * 2.0 - 1.0) as f32
            })
            .collect()
    }

    #[test]
    fn matches_direct_basis_projection() {
        for n in [1usize, 2, 5, 8, 17, 64] {
            let s = pseudo_series(n as u64, n);
            let got = dft(&s, n).unwrap().coefficients;
            for (a, b) in got.iter().zip(basis_oracle(&s, n)) {
                assert!((a - b).abs() < 1e-9, "n={n}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn constant_series_is_dc_only() {
        let s = [2.5f32; 16];
        let d = dft(&s, 6).unwrap();
        assert!((d.coefficients[0] - 2.5 * 4.0).abs() < 1e-12);
        assert!(d.coefficients[1..].iter().all(|c| c.abs() < 1e-12));
    }

    #[test]
    fn parseval_and_truncation() {
        for seed in 0..50u64 {
            let a = pseudo_series(seed * 2 + 1, 64);
            let b = pseudo_series(seed * 2 + 2, 64);
            let raw = euclidean_distance(&a, &b).unwrap();
            let full = dft(&a, 64).unwrap().distance(&dft(&b, 64).unwrap());
            assert!((full - raw).abs() <= 1e-4 * raw);
            let trunc = dft(&a, 16).unwrap().distance(&dft(&b, 16).unwrap());
            assert!(trunc <= raw + 1e-9);
        }
    }

    #[test]
    fn rejects_bad_lengths() {
        assert!(dft(&[1.0, 2.0], 3).is_err());
        assert!(dft(&[1.0, 2.0], 0).is_err());
        let t = DftTransform::new(4, 2).unwrap();
        assert!(t.apply(&[1.0]).is_err());
    }
}

//! SAX words with per-segment cardinalities (iSAX) and the MINDIST lower
//! bound between a query PAA and a word.

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::normal::standard_normal_quantile;
use crate::summarize::paa::PaaSummary;

/// Largest number of bits per SAX symbol (cardinality 256).
pub const MAX_SAX_BITS: u8 = 8;

/// Standard-normal equiprobable cut points for one alphabet size.
#[derive(Debug, Clone, PartialEq)]
pub struct Breakpoints {
    cardinality: usize,
    cuts: Vec<f64>,
}

impl Breakpoints {
    pub fn cardinality(&self) -> usize {
        self.cardinality
    }

    pub fn cuts(&self) -> &[f64] {
        &self.cuts
    }

    /// Symbol of the region containing `value`. Regions are closed on the
    /// left, so a value equal to a cut belongs to the region above it.
    pub fn symbol(&self, value: f64) -> usize {
        self.cuts.partition_point(|&c| c <= value)
    }

    /// `[lo, hi)` bounds of a symbol's region, with infinite outer bounds.
    pub fn region(&self, symbol: usize) -> (f64, f64) {
        let lo = if symbol == 0 {
            f64::NEG_INFINITY
        } else {
            self.cuts[symbol - 1]
        };
        let hi = self.cuts.get(symbol).copied().unwrap_or(f64::INFINITY);
        (lo, hi)
    }
}

fn compute_breakpoints(bits: u8) -> Breakpoints {
    let a = 1usize << bits;
    let cuts = (1..a)
        .map(|i| standard_normal_quantile(i as f64 / a as f64))
        .collect();
    Breakpoints { cardinality: a, cuts }
}

fn table() -> &'static [Breakpoints] {
    static TABLE: OnceLock<Vec<Breakpoints>> = OnceLock::new();
    TABLE.get_or_init(|| (1..=MAX_SAX_BITS).map(compute_breakpoints).collect())
}

/// Cached breakpoints for `bits` in `1..=MAX_SAX_BITS`.
pub(crate) fn breakpoints_for_bits(bits: u8) -> &'static Breakpoints {
    &table()[bits as usize - 1]
}

/// Breakpoints for alphabet size `a`, which must be a power of two.
pub fn gaussian_breakpoints(a: usize) -> Result<Breakpoints> {
    if a < 2 || !a.is_power_of_two() {
        return Err(Error::invalid(format!(
            "alphabet size {a} must be a power of two >= 2"
        )));
    }
    let bits = a.trailing_zeros() as u8;
    if bits <= MAX_SAX_BITS {
        Ok(breakpoints_for_bits(bits).clone())
    } else {
        Ok(compute_breakpoints(bits))
    }
}

/// A SAX word where each segment carries its own cardinality (in bits).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SaxWord {
    pub symbols: Vec<u8>,
    pub bits: Vec<u8>,
}

impl SaxWord {
    pub fn width(&self) -> usize {
        self.symbols.len()
    }

    /// Lowers segment `i` to `bits` by dropping low-order symbol bits.
    pub fn demote_segment(&mut self, i: usize, bits: u8) {
        assert!(bits >= 1 && bits <= self.bits[i]);
        self.symbols[i] >>= self.bits[i] - bits;
        self.bits[i] = bits;
    }

    /// Word aligned to the per-segment minimum of both cardinalities.
    pub fn demoted_to(&self, bits: &[u8]) -> SaxWord {
        let mut w = self.clone();
        for (i, &b) in bits.iter().enumerate() {
            w.demote_segment(i, b.min(self.bits[i]));
        }
        w
    }

    /// True when both words agree once aligned to the lower cardinality.
    pub fn matches(&self, other: &SaxWord) -> bool {
        self.width() == other.width()
            && (0..self.width()).all(|i| {
                let b = self.bits[i].min(other.bits[i]);
                self.symbols[i] >> (self.bits[i] - b) == other.symbols[i] >> (other.bits[i] - b)
            })
    }
}

pub fn sax_from_paa(p: &PaaSummary, bits: &[u8]) -> Result<SaxWord> {
    if bits.len() != p.width() {
        return Err(Error::LengthMismatch {
            expected: p.width(),
            actual: bits.len(),
        });
    }
    if let Some(&b) = bits.iter().find(|&&b| b == 0 || b > MAX_SAX_BITS) {
        return Err(Error::invalid(format!(
            "symbol bits {b} outside 1..={MAX_SAX_BITS}"
        )));
    }
    let symbols = p
        .means
        .iter()
        .zip(bits)
        .map(|(&m, &b)| breakpoints_for_bits(b).symbol(m) as u8)
        .collect();
    Ok(SaxWord {
        symbols,
        bits: bits.to_vec(),
    })
}

#[inline]
pub(crate) fn region_gap(value: f64, bits: u8, symbol: u8) -> f64 {
    let (lo, hi) = breakpoints_for_bits(bits).region(symbol as usize);
    if value < lo {
        lo - value
    } else if value > hi {
        value - hi
    } else {
        0.0
    }
}

/// Squared MINDIST, weighting each segment gap by its length.
pub(crate) fn mindist_sq(means: &[f64], seg_lens: &[f64], symbols: &[u8], bits: &[u8]) -> f64 {
    let mut sum = 0.0;
    for i in 0..means.len() {
        let g = region_gap(means[i], bits[i], symbols[i]);
        sum += seg_lens[i] * g * g;
    }
    sum
}

/// Lower bound on the distance between the series summarized by
/// `query_paa` and any series whose SAX word is `word`.
///
/// For equal-length segments this is `sqrt(n/w * sum(gap_i^2))`; with
/// uneven segments each gap is weighted by its own segment length.
pub fn mindist_paa_isax(query_paa: &PaaSummary, word: &SaxWord, n: usize) -> Result<f64> {
    if word.width() != query_paa.width() {
        return Err(Error::LengthMismatch {
            expected: query_paa.width(),
            actual: word.width(),
        });
    }
    if n != query_paa.series_len() {
        return Err(Error::LengthMismatch {
            expected: query_paa.series_len(),
            actual: n,
        });
    }
    let lens: Vec<f64> = (0..query_paa.width())
        .map(|i| query_paa.segment_len(i) as f64)
        .collect();
    Ok(mindist_sq(&query_paa.means, &lens, &word.symbols, &word.bits).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::summarize::paa::paa;

    /// Normal CDF by composite Simpson quadrature of the density.
    fn normal_cdf_quadrature(x: f64) -> f64 {
        let pdf = |t: f64| (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let steps = 20_000;
        let (a, b) = (0.0, x);
        let h = (b - a) / steps as f64;
        let mut s = pdf(a) + pdf(b);
        for i in 1..steps {
            let t = a + i as f64 * h;
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * pdf(t);
        }
        0.5 + s * h / 3.0
    }

    fn quantile_oracle(p: f64) -> f64 {
        let (mut lo, mut hi) = (-10.0, 10.0);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if normal_cdf_quadrature(mid) < p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn breakpoint_examples() {
        assert_eq!(gaussian_breakpoints(2).unwrap().cuts(), &[0.0]);
        let b4 = gaussian_breakpoints(4).unwrap();
        for (c, p) in b4.cuts().iter().zip([0.25, 0.5, 0.75]) {
            assert!((c - quantile_oracle(p)).abs() < 1e-9);
        }
        assert!((b4.cuts()[2] - 0.67449).abs() < 1e-5);
        let b8 = gaussian_breakpoints(8).unwrap();
        assert_eq!(b8.cuts().len(), 7);
        assert!(b8.cuts().windows(2).all(|w| w[0] < w[1]));
        for i in 0..7 {
            assert!((b8.cuts()[i] + b8.cuts()[6 - i]).abs() < 1e-12);
            assert!((b8.cuts()[i] - quantile_oracle((i + 1) as f64 / 8.0)).abs() < 1e-9);
        }
        assert!(gaussian_breakpoints(3).is_err());
        assert!(gaussian_breakpoints(1).is_err());
    }

    #[test]
    fn all_cached_tables_are_strictly_increasing() {
        for bits in 1..=MAX_SAX_BITS {
            let b = breakpoints_for_bits(bits);
            assert_eq!(b.cuts().len(), (1 << bits) - 1);
            assert!(b.cuts().windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn sax_examples() {
        let p = PaaSummary {
            means: vec![-1.0, 0.1],
            ends: vec![1, 2],
        };
        assert_eq!(sax_from_paa(&p, &[2, 2]).unwrap().symbols, vec![0, 2]);
        let p = PaaSummary {
            means: vec![0.0, 0.0],
            ends: vec![1, 2],
        };
        assert_eq!(sax_from_paa(&p, &[1, 1]).unwrap().symbols, vec![1, 1]);

        let mut w = SaxWord {
            symbols: vec![3],
            bits: vec![2],
        };
        w.demote_segment(0, 1);
        assert_eq!(w.symbols, vec![1]);
        assert!(sax_from_paa(&p, &[1]).is_err());
        assert!(sax_from_paa(&p, &[1, 9]).is_err());
    }

    #[test]
    fn mindist_examples() {
        let q = paa(&[0.0f32, 0.0, 0.0, 0.0], 1).unwrap();
        let w = SaxWord {
            symbols: vec![3],
            bits: vec![2],
        };
        let d = mindist_paa_isax(&q, &w, 4).unwrap();
        assert!((d - (4.0f64 * 0.67449f64.powi(2)).sqrt()).abs() < 1e-4);
        assert!((d - 1.34898).abs() < 1e-4);

        let inside = SaxWord {
            symbols: vec![1],
            bits: vec![2],
        };
        assert_eq!(mindist_paa_isax(&q, &inside, 4).unwrap(), 0.0);

        let s = [0.3f32, -1.2, 2.0, 0.5, -0.7, 0.1, 1.1, -1.9];
        let p = paa(&s, 4).unwrap();
        let own = sax_from_paa(&p, &[8; 4]).unwrap();
        assert_eq!(mindist_paa_isax(&p, &own, 8).unwrap(), 0.0);
        assert!(mindist_paa_isax(&p, &w, 8).is_err());
    }

    #[test]
    fn matches_aligns_cardinalities() {
        let fine = SaxWord {
            symbols: vec![0b1011, 0b01],
            bits: vec![4, 2],
        };
        let coarse = SaxWord {
            symbols: vec![0b10, 0],
            bits: vec![2, 1],
        };
        assert!(fine.matches(&coarse));
        assert_eq!(fine.demoted_to(&[2, 1]), coarse);
        let other = SaxWord {
            symbols: vec![0b11, 0],
            bits: vec![2, 1],
        };
        assert!(!fine.matches(&other));
    }
}

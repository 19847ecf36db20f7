//! Scalar quantization of DFT coefficients for the VA+file.

use crate::error::{Error, Result};
use crate::summarize::dft::DftSummary;

/// Upper limit on bits for a single dimension.
pub const MAX_VA_BITS: u8 = 8;

/// Per-dimension quantization intervals. `boundaries[d]` holds
/// `2^bits[d] + 1` sorted edges whose first and last entries are the
/// infinite sentinels.
#[derive(Debug, Clone, PartialEq)]
pub struct VaGrid {
    pub bits: Vec<u8>,
    pub boundaries: Vec<Vec<f64>>,
}

/// Cell indices of one series, one per dimension.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct VaCell {
    pub cells: Vec<u8>,
}

impl VaGrid {
    pub fn dims(&self) -> usize {
        self.bits.len()
    }

    pub fn cell_count(&self, d: usize) -> usize {
        1 << self.bits[d]
    }

    fn cell_index(&self, d: usize, value: f64) -> u8 {
        let edges = &self.boundaries[d];
        // interior edges only; left-closed cells
        let interior = &edges[1..edges.len() - 1];
        interior.partition_point(|&c| c <= value) as u8
    }

    pub fn cell_of(&self, summary: &DftSummary) -> Result<VaCell> {
        if summary.len() != self.dims() {
            return Err(Error::LengthMismatch {
                expected: self.dims(),
                actual: summary.len(),
            });
        }
        Ok(VaCell {
            cells: summary
                .coefficients
                .iter()
                .enumerate()
                .map(|(d, &v)| self.cell_index(d, v))
                .collect(),
        })
    }

    /// Squared gap from `value` to cell `c` of dimension `d`.
    #[inline]
    pub(crate) fn gap_sq(&self, d: usize, c: usize, value: f64) -> f64 {
        let lo = self.boundaries[d][c];
        let hi = self.boundaries[d][c + 1];
        let g = if value < lo {
            lo - value
        } else if value > hi {
            value - hi
        } else {
            0.0
        };
        g * g
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.bits.len() != self.boundaries.len() {
            return Err(Error::Malformed {
                what: "va grid",
                detail: "bits and boundaries disagree".into(),
            });
        }
        for (d, (&b, edges)) in self.bits.iter().zip(&self.boundaries).enumerate() {
            let ok = (1..=MAX_VA_BITS).contains(&b)
                && edges.len() == (1usize << b) + 1
                && edges[0] == f64::NEG_INFINITY
                && edges[edges.len() - 1] == f64::INFINITY
                && edges.windows(2).all(|w| w[0] < w[1]);
            if !ok {
                return Err(Error::Malformed {
                    what: "va grid",
                    detail: format!("dimension {d} has invalid boundaries"),
                });
            }
        }
        Ok(())
    }
}

fn sample_variance(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n
}

/// Greedy bit allocation: every dimension starts at one bit, and each
/// further bit goes to the dimension with the largest remaining
/// quantization variance `var / 4^bits` (ties to the lowest index). The
/// result tracks `log4(var)` up to a common offset.
pub(crate) fn allocate_bits(variances: &[f64], total_bits: usize) -> Vec<u8> {
    let mut bits = vec![1u8; variances.len()];
    let mut remaining = total_bits - variances.len();
    while remaining > 0 {
        let mut best: Option<(usize, f64)> = None;
        for (d, &var) in variances.iter().enumerate() {
            if bits[d] >= MAX_VA_BITS {
                continue;
            }
            let residual = var / 4f64.powi(bits[d] as i32);
            if residual > 0.0 && best.is_none_or(|(_, r)| residual > r) {
                best = Some((d, residual));
            }
        }
        let Some((d, _)) = best else { break };
        bits[d] += 1;
        remaining -= 1;
    }
    bits
}

fn tiny_above(v: f64) -> f64 {
    v + v.abs().max(1.0) * 1e-9
}

/// Equi-depth edges for `cells` cells over a sorted sample; interior cuts
/// fall midway between neighbouring order statistics.
fn equi_depth_edges(sorted: &[f64], cells: usize) -> Vec<f64> {
    let m = sorted.len();
    let mut edges = Vec::with_capacity(cells + 1);
    edges.push(f64::NEG_INFINITY);
    let mut prev = f64::NEG_INFINITY;
    for j in 1..cells {
        let idx = ((j * m + cells / 2) / cells).clamp(1, m - 1);
        let mut cut = 0.5 * (sorted[idx - 1] + sorted[idx]);
        if cut <= prev {
            cut = prev.next_up();
        }
        edges.push(cut);
        prev = cut;
    }
    edges.push(f64::INFINITY);
    edges
}

/// Builds the quantization grid from a sample of summaries.
pub fn build_va_grid(summaries: &[DftSummary], total_bits: usize) -> Result<VaGrid> {
    if summaries.len() < 2 {
        return Err(Error::invalid("a VA grid needs at least 2 sample summaries"));
    }
    let dims = summaries[0].len();
    if dims == 0 {
        return Err(Error::invalid("summaries have no coefficients"));
    }
    if let Some(bad) = summaries.iter().find(|s| s.len() != dims) {
        return Err(Error::LengthMismatch {
            expected: dims,
            actual: bad.len(),
        });
    }
    if total_bits < dims {
        return Err(Error::invalid(format!(
            "total bits {total_bits} below dimension count {dims}"
        )));
    }

    let columns: Vec<Vec<f64>> = (0..dims)
        .map(|d| summaries.iter().map(|s| s.coefficients[d]).collect())
        .collect();
    let variances: Vec<f64> = columns.iter().map(|c| sample_variance(c)).collect();
    let bits = allocate_bits(&variances, total_bits);

    let boundaries = columns
        .into_iter()
        .zip(&bits)
        .zip(&variances)
        .map(|((mut col, &b), &var)| {
            if var == 0.0 {
                vec![f64::NEG_INFINITY, tiny_above(col[0]), f64::INFINITY]
            } else {
                col.sort_by(f64::total_cmp);
                equi_depth_edges(&col, 1 << b)
            }
        })
        .collect();
    let grid = VaGrid { bits, boundaries };
    debug_assert!(grid.validate().is_ok());
    Ok(grid)
}

/// Lower bound between a query's coefficients and a cell.
pub fn va_cell_lb(query: &DftSummary, cell: &VaCell, grid: &VaGrid) -> Result<f64> {
    if query.len() != grid.dims() || cell.cells.len() != grid.dims() {
        return Err(Error::LengthMismatch {
            expected: grid.dims(),
            actual: query.len().min(cell.cells.len()),
        });
    }
    let sum: f64 = (0..grid.dims())
        .map(|d| grid.gap_sq(d, cell.cells[d] as usize, query.coefficients[d]))
        .sum();
    Ok(sum.sqrt())
}

//! Synthetic random walks, noisy query workloads, the binary dataset format
//! and ground-truth tables.
//!
//! Generation uses ChaCha8 seeded through `seed_from_u64`. Each normal
//! variate consumes one `u64` word `x`, mapped to `u = ((x >> 11) + 0.5) / 2^53`
//! and then through the inverse normal CDF. Random walks draw their steps
//! row by row; a query draws its source index (one word, `floor(u * count)`)
//! followed by one noise variate per point.

use std::fs;
use std::io::Write;
use std::path::Path;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::codec::read_file;
use crate::error::{Error, Result};
use crate::normal::standard_normal_quantile;
use crate::series::{knn_bruteforce, Dataset, Neighbor, SeriesId};

pub const DATASET_MAGIC: &[u8; 8] = b"DSBIN1\0\0";
pub const GROUND_TRUTH_MAGIC: &[u8; 8] = b"DSGT1\0\0\0";

/// Noise standard deviations used when none are configured.
pub const DEFAULT_NOISE_LEVELS: [f64; 4] = [0.0, 0.01, 0.1, 1.0];

/// Deterministic stream of uniform and standard normal variates.
pub struct VariateStream {
    rng: ChaCha8Rng,
}

impl VariateStream {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Uniform in the open interval (0, 1).
    pub fn uniform(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) as f64 + 0.5) / (1u64 << 53) as f64
    }

    pub fn normal(&mut self) -> f64 {
        standard_normal_quantile(self.uniform())
    }

    /// Uniform index in `0..n`.
    pub fn index(&mut self, n: usize) -> usize {
        ((self.uniform() * n as f64) as usize).min(n - 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeneratorKind {
    RandomWalk,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub count: usize,
    pub length: usize,
    pub seed: u64,
    pub kind: GeneratorKind,
}

impl GeneratorSpec {
    pub fn random_walk(count: usize, length: usize, seed: u64) -> Self {
        Self {
            count,
            length,
            seed,
            kind: GeneratorKind::RandomWalk,
        }
    }
}

/// Cumulative sums of standard normal steps.
pub fn gen_random_walk(spec: &GeneratorSpec) -> Result<Dataset> {
    if spec.count == 0 || spec.length == 0 {
        return Err(Error::invalid("count and length must be at least 1"));
    }
    let mut stream = VariateStream::new(spec.seed);
    let mut values = Vec::with_capacity(spec.count * spec.length);
    for _ in 0..spec.count {
        let mut acc = 0.0f64;
        for _ in 0..spec.length {
            acc += stream.normal();
            values.push(acc as f32);
        }
    }
    Dataset::from_flat(spec.length, values)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryWorkloadSpec {
    pub count: usize,
    /// Standard deviation of the additive noise of each level, ascending.
    pub noise_levels: Vec<f64>,
    pub seed: u64,
}

impl QueryWorkloadSpec {
    pub fn validate(&self) -> Result<()> {
        if self.count == 0 {
            return Err(Error::invalid("query count must be at least 1"));
        }
        if self.noise_levels.is_empty() {
            return Err(Error::invalid("at least one noise level is required"));
        }
        if self.noise_levels.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
            return Err(Error::invalid("noise levels must be finite and non-negative"));
        }
        if self.noise_levels.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::invalid("noise levels must be sorted ascending"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryWorkload {
    pub queries: Dataset,
    /// Source series of each query.
    pub sources: Vec<SeriesId>,
    /// Noise level of each query.
    pub levels: Vec<f64>,
}

/// Each query is a uniformly drawn source series plus Gaussian noise; the
/// noise levels are assigned round-robin.
pub fn gen_queries(source: &Dataset, spec: &QueryWorkloadSpec) -> Result<QueryWorkload> {
    spec.validate()?;
    if source.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let n = source.series_len();
    let mut stream = VariateStream::new(spec.seed);
    let mut values = Vec::with_capacity(spec.count * n);
    let mut sources = Vec::with_capacity(spec.count);
    let mut levels = Vec::with_capacity(spec.count);
    for i in 0..spec.count {
        let level = spec.noise_levels[i % spec.noise_levels.len()];
        let id = stream.index(source.len()) as SeriesId;
        for &v in source.series(id) {
            let noise = stream.normal();
            values.push(if level == 0.0 { v } else { (v as f64 + level * noise) as f32 });
        }
        sources.push(id);
        levels.push(level);
    }
    Ok(QueryWorkload {
        queries: Dataset::from_flat(n, values)?.assume_normalized(source.is_normalized()),
        sources,
        levels,
    })
}

pub fn encode_dataset(dataset: &Dataset) -> Result<Vec<u8>> {
    let count = u32::try_from(dataset.len()).map_err(|_| Error::invalid("too many series for the file format"))?;
    let length =
        u32::try_from(dataset.series_len()).map_err(|_| Error::invalid("series too long for the file format"))?;
    let mut buf = Vec::with_capacity(20 + dataset.values().len() * 4);
    buf.extend_from_slice(DATASET_MAGIC);
    buf.extend_from_slice(&count.to_le_bytes());
    buf.extend_from_slice(&length.to_le_bytes());
    for v in dataset.values() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    let crc = crc32fast::hash(&buf);
    buf.extend_from_slice(&crc.to_le_bytes());
    Ok(buf)
}

pub fn decode_dataset(bytes: &[u8]) -> Result<Dataset> {
    const WHAT: &str = "dataset";
    if bytes.len() < 8 {
        return Err(Error::Truncated {
            what: WHAT,
            needed: 8,
            available: bytes.len(),
        });
    }
    if &bytes[..8] != DATASET_MAGIC {
        return Err(Error::BadMagic {
            what: WHAT,
            expected: DATASET_MAGIC.to_vec(),
            found: bytes[..8].to_vec(),
        });
    }
    if bytes.len() < 16 {
        return Err(Error::Truncated {
            what: WHAT,
            needed: 16,
            available: bytes.len(),
        });
    }
    let count = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let length = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    if count == 0 || length == 0 {
        return Err(Error::Malformed {
            what: WHAT,
            detail: format!("header declares {count} series of length {length}"),
        });
    }
    let needed = count
        .checked_mul(length)
        .and_then(|v| v.checked_mul(4))
        .and_then(|v| v.checked_add(20))
        .ok_or_else(|| Error::Malformed {
            what: WHAT,
            detail: format!("{count} x {length} values overflow"),
        })?;
    if bytes.len() < needed {
        return Err(Error::Truncated {
            what: WHAT,
            needed,
            available: bytes.len(),
        });
    }
    if bytes.len() > needed {
        return Err(Error::Malformed {
            what: WHAT,
            detail: format!("{} trailing bytes", bytes.len() - needed),
        });
    }
    let (body, trailer) = bytes.split_at(needed - 4);
    let stored = u32::from_le_bytes(trailer.try_into().unwrap());
    let computed = crc32fast::hash(body);
    if stored != computed {
        return Err(Error::ChecksumMismatch {
            what: WHAT,
            stored,
            computed,
        });
    }
    let values = body[16..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Dataset::from_flat(length, values)
}

pub fn write_dataset(path: &Path, dataset: &Dataset) -> Result<()> {
    let bytes = encode_dataset(dataset)?;
    let mut f = fs::File::create(path)?;
    f.write_all(&bytes)?;
    f.sync_all()?;
    Ok(())
}

/// Reads a dataset file; values come back exactly as stored, unflagged.
pub fn read_dataset(path: &Path) -> Result<Dataset> {
    decode_dataset(&read_file(path)?)
}

/// Exact k nearest neighbors of every query.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub k: usize,
    pub rows: Vec<Vec<Neighbor>>,
}

impl GroundTruth {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn ids(&self, query: usize) -> Vec<SeriesId> {
        self.rows[query].iter().map(|n| n.id).collect()
    }

    pub fn distances(&self, query: usize) -> Vec<f64> {
        self.rows[query].iter().map(|n| n.distance).collect()
    }
}

pub fn gen_ground_truth(dataset: &Dataset, queries: &Dataset, k: usize) -> Result<GroundTruth> {
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    if k > dataset.len() {
        return Err(Error::invalid(format!(
            "k = {k} exceeds the {} indexed series",
            dataset.len()
        )));
    }
    if queries.series_len() != dataset.series_len() {
        return Err(Error::LengthMismatch {
            expected: dataset.series_len(),
            actual: queries.series_len(),
        });
    }
    let rows = queries
        .iter()
        .map(|q| {
            // stored distances are f32; keep the table self-consistent
            knn_bruteforce(dataset, q, k).map(|r| {
                r.neighbors
                    .into_iter()
                    .map(|n| Neighbor::new(n.id, n.distance as f32 as f64))
                    .collect()
            })
        })
        .collect::<Result<_>>()?;
    Ok(GroundTruth { k, rows })
}

pub fn encode_ground_truth(gt: &GroundTruth) -> Result<Vec<u8>> {
    let q = u32::try_from(gt.rows.len()).map_err(|_| Error::invalid("too many queries"))?;
    let k = u32::try_from(gt.k).map_err(|_| Error::invalid("k too large"))?;
    let mut buf = Vec::with_capacity(16 + gt.rows.len() * gt.k * 8);
    buf.extend_from_slice(GROUND_TRUTH_MAGIC);
    buf.extend_from_slice(&q.to_le_bytes());
    buf.extend_from_slice(&k.to_le_bytes());
    for row in &gt.rows {
        if row.len() != gt.k {
            return Err(Error::invalid("ground-truth row does not hold k neighbors"));
        }
        for n in row {
            buf.extend_from_slice(&n.id.to_le_bytes());
            buf.extend_from_slice(&(n.distance as f32).to_le_bytes());
        }
    }
    Ok(buf)
}

pub fn decode_ground_truth(bytes: &[u8]) -> Result<GroundTruth> {
    const WHAT: &str = "ground truth";
    if bytes.len() < 8 {
        return Err(Error::Truncated {
            what: WHAT,
            needed: 8,
            available: bytes.len(),
        });
    }
    if &bytes[..8] != GROUND_TRUTH_MAGIC {
        return Err(Error::BadMagic {
            what: WHAT,
            expected: GROUND_TRUTH_MAGIC.to_vec(),
            found: bytes[..8].to_vec(),
        });
    }
    if bytes.len() < 16 {
        return Err(Error::Truncated {
            what: WHAT,
            needed: 16,
            available: bytes.len(),
        });
    }
    let q = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let k = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    if k == 0 {
        return Err(Error::Malformed {
            what: WHAT,
            detail: "k is zero".into(),
        });
    }
    let needed = q
        .checked_mul(k)
        .and_then(|v| v.checked_mul(8))
        .and_then(|v| v.checked_add(16))
        .ok_or_else(|| Error::Malformed {
            what: WHAT,
            detail: format!("{q} x {k} entries overflow"),
        })?;
    if bytes.len() < needed {
        return Err(Error::Truncated {
            what: WHAT,
            needed,
            available: bytes.len(),
        });
    }
    if bytes.len() > needed {
        return Err(Error::Malformed {
            what: WHAT,
            detail: format!("{} trailing bytes", bytes.len() - needed),
        });
    }
    let rows = bytes[16..]
        .chunks_exact(8 * k)
        .map(|row| {
            row.chunks_exact(8)
                .map(|e| {
                    let id = u32::from_le_bytes(e[..4].try_into().unwrap());
                    let d = f32::from_le_bytes(e[4..].try_into().unwrap());
                    Neighbor::new(id, d as f64)
                })
                .collect()
        })
        .collect();
    Ok(GroundTruth { k, rows })
}

pub fn write_ground_truth(path: &Path, gt: &GroundTruth) -> Result<()> {
    fs::write(path, encode_ground_truth(gt)?)?;
    Ok(())
}

pub fn read_ground_truth(path: &Path) -> Result<GroundTruth> {
    decode_ground_truth(&read_file(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_walk_is_deterministic() {
        let spec = GeneratorSpec::random_walk(20, 16, 42);
        let a = encode_dataset(&gen_random_walk(&spec).unwrap()).unwrap();
        let b = encode_dataset(&gen_random_walk(&spec).unwrap()).unwrap();
        assert_eq!(a, b);
        let other = encode_dataset(&gen_random_walk(&GeneratorSpec::random_walk(20, 16, 43)).unwrap()).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn length_one_is_single_step() {
        let ds = gen_random_walk(&GeneratorSpec::random_walk(3, 1, 9)).unwrap();
        let mut s = VariateStream::new(9);
        for id in 0..3 {
            assert_eq!(ds.series(id)[0], s.normal() as f32);
        }
    }

    #[test]
    fn walk_is_cumulative() {
        let ds = gen_random_walk(&GeneratorSpec::random_walk(1, 5, 3)).unwrap();
        let mut s = VariateStream::new(3);
        let mut acc = 0.0f64;
        for &v in ds.series(0) {
            acc += s.normal();
            assert_eq!(v, acc as f32);
        }
    }

    #[test]
    fn zero_noise_queries_copy_sources() {
        let ds = gen_random_walk(&GeneratorSpec::random_walk(50, 8, 1)).unwrap();
        let spec = QueryWorkloadSpec {
            count: 10,
            noise_levels: vec![0.0],
            seed: 5,
        };
        let w = gen_queries(&ds, &spec).unwrap();
        for (i, q) in w.queries.iter().enumerate() {
            assert_eq!(q, ds.series(w.sources[i]));
        }
        let other = gen_queries(&ds, &QueryWorkloadSpec { seed: 6, ..spec.clone() }).unwrap();
        assert_ne!(w.sources, other.sources);
    }

    #[test]
    fn levels_are_round_robin_and_validated() {
        let ds = gen_random_walk(&GeneratorSpec::random_walk(5, 4, 1)).unwrap();
        let spec = QueryWorkloadSpec {
            count: 5,
            noise_levels: vec![0.0, 0.5],
            seed: 0,
        };
        assert_eq!(gen_queries(&ds, &spec).unwrap().levels, vec![0.0, 0.5, 0.0, 0.5, 0.0]);
        let unsorted = QueryWorkloadSpec {
            noise_levels: vec![1.0, 0.5],
            ..spec
        };
        assert!(gen_queries(&ds, &unsorted).is_err());
    }

    #[test]
    fn dataset_file_errors() {
        let ds = gen_random_walk(&GeneratorSpec::random_walk(3, 4, 1)).unwrap();
        let bytes = encode_dataset(&ds).unwrap();
        assert_eq!(bytes.len(), 8 + 8 + 3 * 4 * 4 + 4);
        assert_eq!(decode_dataset(&bytes).unwrap(), ds);

        let err = decode_dataset(&bytes[..bytes.len() - 1]).unwrap_err();
        assert_eq!(err.kind(), "truncated");
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert_eq!(decode_dataset(&bad).unwrap_err().kind(), "bad_magic");
        let mut zero = bytes.clone();
        zero[8..12].copy_from_slice(&0u32.to_le_bytes());
        assert_eq!(decode_dataset(&zero).unwrap_err().kind(), "malformed");
        let mut huge = bytes.clone();
        huge[8..16].copy_from_slice(&[0xff; 8]);
        assert!(decode_dataset(&huge).is_err());
        let mut flipped = bytes.clone();
        flipped[20] ^= 0x40;
        assert_eq!(decode_dataset(&flipped).unwrap_err().kind(), "checksum_mismatch");
    }

    #[test]
    fn ground_truth_roundtrip() {
        let ds = gen_random_walk(&GeneratorSpec::random_walk(30, 8, 2)).unwrap();
        let spec = QueryWorkloadSpec {
            count: 4,
            noise_levels: vec![0.0],
            seed: 1,
        };
        let w = gen_queries(&ds, &spec).unwrap();
        let gt = gen_ground_truth(&ds, &w.queries, 1).unwrap();
        assert_eq!(gt.len(), 4);
        for (i, row) in gt.rows.iter().enumerate() {
            assert_eq!(row[0].distance, 0.0);
            assert_eq!(ds.series(row[0].id), ds.series(w.sources[i]));
        }
        let bytes = encode_ground_truth(&gt).unwrap();
        assert_eq!(bytes.len(), 16 + 4 * 8);
        assert_eq!(decode_ground_truth(&bytes).unwrap(), gt);
        assert_eq!(decode_ground_truth(&bytes[..20]).unwrap_err().kind(), "truncated");
        assert!(gen_ground_truth(&ds, &w.queries, 31).is_err());
    }
}

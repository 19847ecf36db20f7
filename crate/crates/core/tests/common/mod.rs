#![allow(dead_code)]

use dsidx::datagen::{gen_queries, gen_random_walk, GeneratorSpec, QueryWorkloadSpec, DEFAULT_NOISE_LEVELS};
use dsidx::index::{Index, IndexKind, IndexParams};
use dsidx::Dataset;

/// Z-normalized random walks.
pub fn walks(count: usize, len: usize, seed: u64) -> Dataset {
    gen_random_walk(&GeneratorSpec::random_walk(count, len, seed))
        .unwrap()
        .normalized()
}

/// Normalized noisy queries drawn from the raw walks behind `walks(count, len, seed)`.
pub fn queries(count: usize, len: usize, seed: u64, n_queries: usize) -> Dataset {
    let raw = gen_random_walk(&GeneratorSpec::random_walk(count, len, seed)).unwrap();
    let spec = QueryWorkloadSpec {
        count: n_queries,
        noise_levels: DEFAULT_NOISE_LEVELS.to_vec(),
        seed: seed ^ 0x5eed,
    };
    gen_queries(&raw, &spec).unwrap().queries.normalized()
}

pub fn small_params() -> IndexParams {
    IndexParams {
        leaf_capacity: 20,
        segments: 8,
        dft_coefficients: 8,
        total_bits: 32,
        ..IndexParams::default()
    }
}

pub fn build_all(ds: &Dataset, params: &IndexParams) -> Vec<Index> {
    IndexKind::ALL
        .iter()
        .map(|&k| Index::build(k, ds, params).unwrap())
        .collect()
}

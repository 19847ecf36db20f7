//! Data-series similarity search.
//!
//! Three disk-style indexes over fixed-length series (an iSAX tree, an
//! EAPCA tree and a VA+file) answer k-NN queries exactly, with no
//! guarantee (`nprobe`-bounded), with a `(1+ε)` distance guarantee, or with
//! that guarantee holding at probability `δ`.

mod codec;
pub mod datagen;
pub mod error;
pub mod index;
pub mod metrics;
mod normal;
pub mod search;
pub mod series;
pub mod summarize;

pub use error::{Error, Result};
pub use series::{
    euclidean_distance, knn_bruteforce, squared_distance_early_abandon, z_normalize, Dataset,
    KnnResult, Neighbor, SeriesId,
};

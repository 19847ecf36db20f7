//! Dimensionality-reduction summaries and their lower-bounding distances.

pub mod dft;
pub mod eapca;
pub mod paa;
pub mod sax;
pub mod va;

pub use dft::{dft, DftSummary, DftTransform};
pub use eapca::{eapca, eapca_node_lb, EapcaSummary, EapcaSynopsis, SegmentStats};
pub use paa::{paa, segment_ends, PaaSummary};
pub use sax::{gaussian_breakpoints, mindist_paa_isax, sax_from_paa, Breakpoints, SaxWord, MAX_SAX_BITS};
pub use va::{build_va_grid, va_cell_lb, VaCell, VaGrid, MAX_VA_BITS};

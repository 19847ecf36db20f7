use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::index::storage::{LeafStore, LeafStoreBuilder};
use crate::index::{check_query_len, IndexParams};
use crate::series::{Dataset, SeriesId};
use crate::summarize::dft::{DftSummary, DftTransform};
use crate::summarize::va::{build_va_grid, VaGrid};

/// VA+file: DFT approximations quantized on a per-dimension grid, stored
/// densely in id order next to the raw series.
#[derive(Debug, Clone)]
pub struct VaFile {
    pub(crate) params: IndexParams,
    pub(crate) transform: DftTransform,
    pub(crate) grid: VaGrid,
    /// Row-major cell indices, `grid.dims()` per series.
    pub(crate) cells: Vec<u8>,
    pub(crate) store: LeafStore,
}

impl PartialEq for VaFile {
    fn eq(&self, other: &Self) -> bool {
        self.params == other.params
            && self.grid == other.grid
            && self.cells == other.cells
            && self.store == other.store
    }
}

/// Per-query table of squared gaps to every cell of every dimension.
pub struct VaQuery {
    pub(crate) gaps: Vec<Vec<f64>>,
}

impl VaFile {
    pub fn params(&self) -> &IndexParams {
        &self.params
    }

    pub fn grid(&self) -> &VaGrid {
        &self.grid
    }

    pub fn store(&self) -> &LeafStore {
        &self.store
    }

    pub fn len(&self) -> usize {
        self.store.len()
    }

    pub fn is_empty(&self) -> bool {
        self.store.is_empty()
    }

    pub fn cell(&self, id: SeriesId) -> &[u8] {
        let d = self.grid.dims();
        &self.cells[id as usize * d..(id as usize + 1) * d]
    }

    pub fn prepare(&self, query: &[f32]) -> Result<VaQuery> {
        check_query_len(self.store.series_len(), query)?;
        let q = self.transform.apply(query)?;
        let gaps = (0..self.grid.dims())
            .map(|d| {
                (0..self.grid.cell_count(d))
                    .map(|c| self.grid.gap_sq(d, c, q.coefficients[d]))
                    .collect()
            })
            .collect();
        Ok(VaQuery { gaps })
    }

    /// Lower bound on the distance from the prepared query to series `id`.
    pub fn lower_bound(&self, query: &VaQuery, id: SeriesId) -> f64 {
        self.cell(id)
            .iter()
            .zip(&query.gaps)
            .map(|(&c, g)| g[c as usize])
            .sum::<f64>()
            .sqrt()
    }
}

pub fn build_vafile(dataset: &Dataset, params: &IndexParams) -> Result<VaFile> {
    params.check_dataset(dataset)?;
    let n = dataset.series_len();
    let l = params.dft_coefficients.min(n);
    let transform = DftTransform::new(n, l)?;
    let summaries: Vec<DftSummary> = dataset
        .iter()
        .map(|s| transform.apply(s))
        .collect::<Result<_>>()?;

    let mut sample_set: Vec<DftSummary> = if params.grid_sample == 0 || params.grid_sample >= summaries.len() {
        summaries.clone()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let mut picked = sample(&mut rng, summaries.len(), params.grid_sample).into_vec();
        picked.sort_unstable();
        picked.into_iter().map(|i| summaries[i].clone()).collect()
    };
    if sample_set.len() == 1 {
        sample_set.push(sample_set[0].clone());
    }
    let grid = build_va_grid(&sample_set, params.total_bits.max(l))?;

    let mut cells = Vec::with_capacity(summaries.len() * l);
    for s in &summaries {
        cells.extend(grid.cell_of(s)?.cells);
    }

    let mut store = LeafStoreBuilder::new(dataset, params.buffer_bytes);
    let ids: Vec<SeriesId> = (0..dataset.len() as SeriesId).collect();
    store.push_leaf(&ids);
    let (store, _) = store.finish();

    Ok(VaFile {
        params: params.clone(),
        transform,
        grid,
        cells,
        store,
    })
}

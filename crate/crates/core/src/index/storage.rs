//! Leaf-grouped raw series storage and per-query I/O accounting.

use crate::series::{Dataset, SeriesId};

/// Counters describing the work done by a single query. They model a
/// disk-resident layout: every leaf (or VA+ candidate) read is charged its
/// raw bytes, and a read that does not start where the previous one ended
/// counts as a random seek.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct QueryStats {
    pub raw_compared: u64,
    pub leaves_visited: u64,
    pub bytes_read: u64,
    pub random_seeks: u64,
    pub lower_bounds: u64,
    cursor: Option<u64>,
}

impl QueryStats {
    pub fn new() -> Self {
        Self::default()
    }

    pub(crate) fn record_read(&mut self, offset: u64, len: u64) {
        if self.cursor != Some(offset) {
            self.random_seeks += 1;
        }
        self.cursor = Some(offset + len);
        self.bytes_read += len;
    }
}

/// Contiguous run of series inside the leaf store.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LeafSpan {
    pub start: u32,
    pub count: u32,
}

/// Raw series laid out leaf after leaf, with the id of each stored series.
#[derive(Debug, Clone, PartialEq)]
pub struct LeafStore {
    series_len: usize,
    ids: Vec<SeriesId>,
    values: Vec<f32>,
}

impl LeafStore {
    pub(crate) fn from_parts(series_len: usize, ids: Vec<SeriesId>, values: Vec<f32>) -> Self {
        debug_assert_eq!(ids.len() * series_len, values.len());
        Self {
            series_len,
            ids,
            values,
        }
    }

    pub fn series_len(&self) -> usize {
        self.series_len
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[SeriesId] {
        &self.ids
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn byte_size(&self) -> u64 {
        self.values.len() as u64 * 4
    }

    fn series_bytes(&self) -> u64 {
        self.series_len as u64 * 4
    }

    /// Reads a span, charging it to `stats`.
    pub(crate) fn read<'a>(
        &'a self,
        span: LeafSpan,
        stats: &mut QueryStats,
    ) -> impl Iterator<Item = (SeriesId, &'a [f32])> + 'a {
        stats.record_read(
            span.start as u64 * self.series_bytes(),
            span.count as u64 * self.series_bytes(),
        );
        let start = span.start as usize;
        let end = start + span.count as usize;
        self.ids[start..end].iter().copied().zip(
            self.values[start * self.series_len..end * self.series_len].chunks_exact(self.series_len),
        )
    }

    /// Series at a store position without I/O accounting.
    pub(crate) fn get(&self, pos: usize) -> (SeriesId, &[f32]) {
        (
            self.ids[pos],
            &self.values[pos * self.series_len..(pos + 1) * self.series_len],
        )
    }

    /// Rebuilds a dataset in id order from the stored series.
    pub fn to_dataset(&self, normalized: bool) -> crate::Result<Dataset> {
        let mut values = vec![0.0f32; self.values.len()];
        for pos in 0..self.len() {
            let (id, s) = self.get(pos);
            let at = id as usize * self.series_len;
            values[at..at + self.series_len].copy_from_slice(s);
        }
        Ok(Dataset::from_flat(self.series_len, values)?.assume_normalized(normalized))
    }
}

/// Assembles a leaf store leaf by leaf through a bounded staging buffer,
/// the in-memory analog of flushing buffered leaves to the data file.
pub(crate) struct LeafStoreBuilder<'a> {
    dataset: &'a Dataset,
    budget_values: usize,
    staging: Vec<f32>,
    ids: Vec<SeriesId>,
    values: Vec<f32>,
    flushes: usize,
}

impl<'a> LeafStoreBuilder<'a> {
    pub(crate) fn new(dataset: &'a Dataset, buffer_bytes: usize) -> Self {
        let budget_values = (buffer_bytes / 4).max(dataset.series_len());
        Self {
            dataset,
            budget_values,
            staging: Vec::with_capacity(budget_values.min(dataset.values().len())),
            ids: Vec::with_capacity(dataset.len()),
            values: Vec::with_capacity(dataset.values().len()),
            flushes: 0,
        }
    }

    pub(crate) fn push_leaf(&mut self, leaf_ids: &[SeriesId]) -> LeafSpan {
        let span = LeafSpan {
            start: self.ids.len() as u32,
            count: leaf_ids.len() as u32,
        };
        for &id in leaf_ids {
            if self.staging.len() + self.dataset.series_len() > self.budget_values {
                self.flush();
            }
            self.staging.extend_from_slice(self.dataset.series(id));
            self.ids.push(id);
        }
        span
    }

    fn flush(&mut self) {
        if !self.staging.is_empty() {
            self.values.append(&mut self.staging);
            self.flushes += 1;
        }
    }

    pub(crate) fn finish(mut self) -> (LeafStore, usize) {
        self.flush();
        (
            LeafStore::from_parts(self.dataset.series_len(), self.ids, self.values),
            self.flushes,
        )
    }
}

use crate::series::{neighbor_order, KnnResult, Neighbor, SeriesId};

/// The k best answers seen so far, kept sorted by (distance, id).
#[derive(Debug, Clone)]
pub struct KnnHeap {
    k: usize,
    items: Vec<Neighbor>,
}

impl KnnHeap {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            items: Vec::with_capacity(k + 1),
        }
    }

    pub fn capacity(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.items.len() >= self.k
    }

    /// Distance of the k-th answer, infinite until the heap is full.
    pub fn kth(&self) -> f64 {
        if self.is_full() {
            self.items[self.k - 1].distance
        } else {
            f64::INFINITY
        }
    }

    /// Squared threshold for early abandoning: candidates above it cannot
    /// enter. Widened slightly so ties at the k-th distance are still
    /// computed in full and settled by id.
    pub(crate) fn abandon_threshold(&self) -> f64 {
        let kth = self.kth();
        kth * kth * (1.0 + 1e-9)
    }

    /// Offers a candidate; returns true if it entered the heap.
    pub fn push(&mut self, id: SeriesId, distance: f64) -> bool {
        let cand = Neighbor::new(id, distance);
        if self.is_full() && neighbor_order(&cand, &self.items[self.k - 1]).is_ge() {
            return false;
        }
        if self.items.iter().any(|n| n.id == id) {
            return false;
        }
        let at = self
            .items
            .partition_point(|n| neighbor_order(n, &cand).is_lt());
        self.items.insert(at, cand);
        self.items.truncate(self.k);
        true
    }

    pub fn neighbors(&self) -> &[Neighbor] {
        &self.items
    }

    pub fn into_result(self) -> KnnResult {
        KnnResult {
            truncated: self.items.len() < self.k,
            k: self.k,
            neighbors: self.items,
        }
    }
}

//! CSV report rows. Every row carries its parameter point; query rows fill
//! the per-query columns and aggregate rows the workload columns.

use std::io::{Read, Write};

use anyhow::{bail, Result};
use dsidx::metrics::{aggregate, QueryRecord, WorkloadReport};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RowType {
    Query,
    Aggregate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub index: String,
    pub mode: String,
    pub k: usize,
    pub epsilon: Option<f64>,
    pub delta: Option<f64>,
    pub nprobe: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub row_type: RowType,
    pub index: String,
    pub mode: String,
    pub k: usize,
    pub epsilon: Option<f64>,
    pub delta: Option<f64>,
    pub nprobe: Option<usize>,
    pub query_id: Option<usize>,
    pub recall: Option<f64>,
    pub ap: Option<f64>,
    pub re: Option<f64>,
    pub raw_compared: Option<u64>,
    pub leaves_visited: Option<u64>,
    pub bytes_read: Option<u64>,
    pub seeks: Option<u64>,
    pub elapsed_ns: Option<u64>,
    pub exit: Option<String>,
    pub queries: Option<usize>,
    pub avg_recall: Option<f64>,
    pub map: Option<f64>,
    pub mre: Option<f64>,
    pub re_excluded: Option<usize>,
    pub throughput_qpm: Option<f64>,
    pub pct_data: Option<f64>,
    pub mean_seeks: Option<f64>,
    pub mean_raw_compared: Option<f64>,
    pub mean_leaves_visited: Option<f64>,
    /// Total raw bytes of the indexed data; lets aggregates be recomputed.
    pub dataset_bytes: u64,
}

impl Row {
    fn empty(row_type: RowType, p: &Point, dataset_bytes: u64) -> Self {
        Self {
            row_type,
            index: p.index.clone(),
            mode: p.mode.clone(),
            k: p.k,
            epsilon: p.epsilon,
            delta: p.delta,
            nprobe: p.nprobe,
            query_id: None,
            recall: None,
            ap: None,
            re: None,
            raw_compared: None,
            leaves_visited: None,
            bytes_read: None,
            seeks: None,
            elapsed_ns: None,
            exit: None,
            queries: None,
            avg_recall: None,
            map: None,
            mre: None,
            re_excluded: None,
            throughput_qpm: None,
            pct_data: None,
            mean_seeks: None,
            mean_raw_compared: None,
            mean_leaves_visited: None,
            dataset_bytes,
        }
    }

    pub fn query(p: &Point, id: usize, r: &QueryRecord, exit: &str, dataset_bytes: u64) -> Self {
        Self {
            query_id: Some(id),
            recall: Some(r.recall),
            ap: Some(r.average_precision),
            re: r.relative_error,
            raw_compared: Some(r.raw_compared),
            leaves_visited: Some(r.leaves_visited),
            bytes_read: Some(r.bytes_read),
            seeks: Some(r.random_seeks),
            elapsed_ns: Some(r.elapsed_ns),
            exit: Some(exit.to_string()),
            ..Self::empty(RowType::Query, p, dataset_bytes)
        }
    }

    pub fn aggregate(p: &Point, w: &WorkloadReport, dataset_bytes: u64) -> Self {
        Self {
            queries: Some(w.queries),
            avg_recall: Some(w.avg_recall),
            map: Some(w.map),
            mre: Some(w.mre),
            re_excluded: Some(w.re_excluded),
            throughput_qpm: Some(w.throughput),
            pct_data: Some(w.pct_data_accessed),
            mean_seeks: Some(w.mean_seeks),
            mean_raw_compared: Some(w.mean_raw_compared),
            mean_leaves_visited: Some(w.mean_leaves_visited),
            ..Self::empty(RowType::Aggregate, p, dataset_bytes)
        }
    }

    pub fn point(&self) -> Point {
        Point {
            index: self.index.clone(),
            mode: self.mode.clone(),
            k: self.k,
            epsilon: self.epsilon,
            delta: self.delta,
            nprobe: self.nprobe,
        }
    }

    fn record(&self) -> Result<QueryRecord> {
        let need = |v: Option<u64>, name: &str| match v {
            Some(v) => Ok(v),
            None => bail!("query row without {name}"),
        };
        Ok(QueryRecord {
            recall: self.recall.unwrap_or_default(),
            average_precision: self.ap.unwrap_or_default(),
            relative_error: self.re,
            raw_compared: need(self.raw_compared, "raw_compared")?,
            leaves_visited: need(self.leaves_visited, "leaves_visited")?,
            bytes_read: need(self.bytes_read, "bytes_read")?,
            random_seeks: need(self.seeks, "seeks")?,
            elapsed_ns: need(self.elapsed_ns, "elapsed_ns")?,
        })
    }
}

pub fn write_rows(out: impl Write, rows: &[Row]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows(input: impl Read) -> Result<Vec<Row>> {
    let mut r = csv::Reader::from_reader(input);
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

/// Aggregate rows rebuilt from the query rows, one per parameter point in
/// first-seen order.
pub fn recompute(rows: &[Row]) -> Result<Vec<Row>> {
    let mut points: Vec<(Point, u64, Vec<QueryRecord>)> = Vec::new();
    for row in rows.iter().filter(|r| r.row_type == RowType::Query) {
        let p = row.point();
        let rec = row.record()?;
        match points.iter_mut().find(|(q, _, _)| *q == p) {
            Some((_, _, recs)) => recs.push(rec),
            None => points.push((p, row.dataset_bytes, vec![rec])),
        }
    }
    if points.is_empty() {
        bail!("report has no query rows");
    }
    points
        .iter()
        .map(|(p, bytes, recs)| Ok(Row::aggregate(p, &aggregate(recs, *bytes)?, *bytes)))
        .collect()
}

//! On-disk index directories.
//!
//! ```text
//! meta.json    format version, kind, params, dataset digest, timestamp
//! tree.bin     node structure (iSAX and EAPCA trees)
//! grid.bin     quantization grid (VA+file)
//! cells.bin    per-series cells (VA+file)
//! leaves.bin   raw f32 series grouped by leaf
//! ```
//!
//! Binary files share the framing in `codec`: magic, total length,
//! little-endian payload, CRC32.

use std::fs;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::codec::{read_file, Decoder, Encoder};
use crate::error::{Error, Result};
use crate::index::eapca_tree::{EapcaNode, EapcaTreeIndex, SplitRule, SplitStat};
use crate::index::isax::{IsaxIndex, IsaxNode};
use crate::index::storage::{LeafSpan, LeafStore};
use crate::index::vafile::VaFile;
use crate::index::{Index, IndexKind, IndexParams, NodeId};
use crate::summarize::dft::DftTransform;
use crate::summarize::eapca::EapcaSynopsis;
use crate::summarize::sax::SaxWord;
use crate::summarize::va::VaGrid;

pub const FORMAT_VERSION: u32 = 1;

const META_FILE: &str = "meta.json";
const TREE_FILE: &str = "tree.bin";
const LEAVES_FILE: &str = "leaves.bin";
const GRID_FILE: &str = "grid.bin";
const CELLS_FILE: &str = "cells.bin";

const ISAX_MAGIC: &[u8; 8] = b"DSISAX1\0";
const EAPCA_MAGIC: &[u8; 8] = b"DSEAPC1\0";
const LEAVES_MAGIC: &[u8; 8] = b"DSLEAF1\0";
const GRID_MAGIC: &[u8; 8] = b"DSGRID1\0";
const CELLS_MAGIC: &[u8; 8] = b"DSCELL1\0";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexMeta {
    pub format_version: u32,
    pub kind: IndexKind,
    pub params: IndexParams,
    pub series_count: u64,
    pub series_len: u32,
    /// SHA-256 of the indexed values (f32 LE, id order).
    pub dataset_digest: String,
    pub created_unix: u64,
}

fn digest(store: &LeafStore) -> Result<String> {
    let ds = store.to_dataset(false)?;
    let mut h = Sha256::new();
    for v in ds.values() {
        h.update(v.to_le_bytes());
    }
    Ok(h.finalize().iter().map(|b| format!("{b:02x}")).collect())
}

pub(crate) fn persist(index: &Index, dir: &Path) -> Result<IndexMeta> {
    fs::create_dir_all(dir)?;
    let store = index.store();
    match index {
        Index::Isax(i) => fs::write(dir.join(TREE_FILE), encode_isax(i))?,
        Index::EapcaTree(i) => fs::write(dir.join(TREE_FILE), encode_eapca(i))?,
        Index::Vafile(v) => {
            fs::write(dir.join(GRID_FILE), encode_grid(v))?;
            fs::write(dir.join(CELLS_FILE), encode_cells(v))?;
        }
    }
    fs::write(dir.join(LEAVES_FILE), encode_leaves(store))?;

    let meta = IndexMeta {
        format_version: FORMAT_VERSION,
        kind: index.kind(),
        params: index.params().clone(),
        series_count: store.len() as u64,
        series_len: store.series_len() as u32,
        dataset_digest: digest(store)?,
        created_unix: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
    };
    let mut json = serde_json::to_string_pretty(&meta)?;
    json.push('\n');
    fs::write(dir.join(META_FILE), json)?;
    Ok(meta)
}

pub(crate) fn load(dir: &Path) -> Result<Index> {
    let meta_bytes = read_file(&dir.join(META_FILE))?;
    let meta: IndexMeta = serde_json::from_slice(&meta_bytes)?;
    if meta.format_version != FORMAT_VERSION {
        return Err(Error::VersionMismatch {
            expected: FORMAT_VERSION,
            found: meta.format_version,
        });
    }
    meta.params.validate()?;
    let n = meta.series_len as usize;
    let values = decode_leaves(&read_file(&dir.join(LEAVES_FILE))?, n, meta.series_count)?;

    let index = match meta.kind {
        IndexKind::Isax => {
            let bytes = read_file(&dir.join(TREE_FILE))?;
            Index::Isax(decode_isax(&bytes, meta.params, n, values)?)
        }
        IndexKind::EapcaTree => {
            let bytes = read_file(&dir.join(TREE_FILE))?;
            Index::EapcaTree(decode_eapca(&bytes, meta.params, n, values)?)
        }
        IndexKind::Vafile => {
            let grid = decode_grid(&read_file(&dir.join(GRID_FILE))?)?;
            let cells = decode_cells(&read_file(&dir.join(CELLS_FILE))?, meta.series_count, &grid)?;
            let ids = (0..meta.series_count as u32).collect();
            let transform = DftTransform::new(n, grid.dims())?;
            Index::Vafile(VaFile {
                params: meta.params,
                transform,
                grid,
                cells,
                store: LeafStore::from_parts(n, ids, values),
            })
        }
    };
    if digest(index.store())? != meta.dataset_digest {
        return Err(Error::Malformed {
            what: "index directory",
            detail: "dataset digest does not match stored series".into(),
        });
    }
    Ok(index)
}

fn encode_leaves(store: &LeafStore) -> Vec<u8> {
    let mut e = Encoder::new(LEAVES_MAGIC);
    e.u32(store.series_len() as u32);
    e.u64(store.len() as u64);
    e.f32s(store.values());
    e.finish()
}

fn decode_leaves(bytes: &[u8], n: usize, count: u64) -> Result<Vec<f32>> {
    let mut d = Decoder::new("leaves.bin", LEAVES_MAGIC, bytes)?;
    let len = d.u32()? as usize;
    let stored = d.u64()?;
    if len != n || stored != count {
        return Err(d.malformed(format!(
            "leaf file holds {stored} x {len}, metadata says {count} x {n}"
        )));
    }
    let total = (count as usize)
        .checked_mul(n)
        .ok_or_else(|| d.malformed("size overflow"))?;
    let values = d.f32s(total)?;
    d.expect_end()?;
    Ok(values)
}

fn put_leaf(e: &mut Encoder, ids: &[u32], span: Option<LeafSpan>, overflow: bool) {
    let span = span.unwrap_or_default();
    e.u8(overflow as u8);
    e.u32(span.start);
    e.u32(span.count);
    for &id in ids {
        e.u32(id);
    }
}

fn get_leaf(d: &mut Decoder) -> Result<(Vec<u32>, LeafSpan, bool)> {
    let overflow = d.u8()? != 0;
    let span = LeafSpan {
        start: d.u32()?,
        count: d.u32()?,
    };
    let ids = (0..span.count).map(|_| d.u32()).collect::<Result<Vec<_>>>()?;
    Ok((ids, span, overflow))
}

/// Rebuilds the store id column from leaf spans and checks that the spans
/// tile the store exactly once.
fn leaf_ids_by_span<'a>(
    d: &Decoder,
    leaves: impl Iterator<Item = (&'a [u32], LeafSpan)>,
    count: usize,
) -> Result<Vec<u32>> {
    let mut ids = vec![u32::MAX; count];
    let mut covered = 0usize;
    for (leaf_ids, span) in leaves {
        let start = span.start as usize;
        let end = start + span.count as usize;
        if end > count {
            return Err(d.malformed("leaf span outside leaf file"));
        }
        for (slot, &id) in ids[start..end].iter_mut().zip(leaf_ids) {
            if *slot != u32::MAX || id as usize >= count {
                return Err(d.malformed("overlapping leaf spans or bad id"));
            }
            *slot = id;
        }
        covered += span.count as usize;
    }
    if covered != count {
        return Err(d.malformed("leaf spans do not cover the leaf file"));
    }
    Ok(ids)
}

fn check_children(d: &Decoder, children: &[NodeId], node: usize, total: usize) -> Result<()> {
    if children.iter().any(|&c| c as usize <= node || c as usize >= total) {
        return Err(d.malformed(format!("node {node} has invalid children")));
    }
    Ok(())
}

fn encode_isax(index: &IsaxIndex) -> Vec<u8> {
    let mut e = Encoder::new(ISAX_MAGIC);
    let w = index.seg_ends.len();
    e.u32(w as u32);
    for &end in &index.seg_ends {
        e.u32(end as u32);
    }
    e.u32(index.roots.len() as u32);
    for &r in &index.roots {
        e.u32(r);
    }
    e.u32(index.nodes.len() as u32);
    for node in &index.nodes {
        for i in 0..w {
            e.u8(node.word.symbols[i]);
            e.u8(node.word.bits[i]);
        }
        match node.split_segment {
            Some(seg) => {
                e.u8(1);
                e.u8(seg);
                e.u32(node.children[0]);
                e.u32(node.children[1]);
            }
            None => {
                e.u8(0);
                put_leaf(&mut e, &node.ids, node.span, node.overflow);
            }
        }
    }
    e.finish()
}

fn decode_isax(bytes: &[u8], params: IndexParams, n: usize, values: Vec<f32>) -> Result<IsaxIndex> {
    let mut d = Decoder::new("tree.bin", ISAX_MAGIC, bytes)?;
    let w = d.u32()? as usize;
    let seg_ends = (0..w).map(|_| Ok(d.u32()? as usize)).collect::<Result<Vec<_>>>()?;
    crate::summarize::eapca::validate_ends(&seg_ends, n).map_err(|e| d.malformed(e.to_string()))?;
    let root_count = d.u32()? as usize;
    let roots = (0..root_count).map(|_| d.u32()).collect::<Result<Vec<_>>>()?;
    let node_count = d.u32()? as usize;
    let mut nodes = Vec::with_capacity(node_count.min(bytes.len()));
    for id in 0..node_count {
        let mut word = SaxWord {
            symbols: Vec::with_capacity(w),
            bits: Vec::with_capacity(w),
        };
        for _ in 0..w {
            word.symbols.push(d.u8()?);
            word.bits.push(d.u8()?);
        }
        if word.bits.iter().any(|&b| b == 0 || b > crate::summarize::MAX_SAX_BITS) {
            return Err(d.malformed(format!("node {id} has invalid cardinality")));
        }
        let node = match d.u8()? {
            1 => {
                let seg = d.u8()?;
                let children = vec![d.u32()?, d.u32()?];
                check_children(&d, &children, id, node_count)?;
                if seg as usize >= w {
                    return Err(d.malformed(format!("node {id} splits a missing segment")));
                }
                IsaxNode {
                    word,
                    split_segment: Some(seg),
                    children,
                    ids: Vec::new(),
                    span: None,
                    overflow: false,
                }
            }
            0 => {
                let (ids, span, overflow) = get_leaf(&mut d)?;
                IsaxNode {
                    word,
                    split_segment: None,
                    children: Vec::new(),
                    ids,
                    span: Some(span),
                    overflow,
                }
            }
            t => return Err(d.malformed(format!("unknown node tag {t}"))),
        };
        nodes.push(node);
    }
    d.expect_end()?;
    if roots.iter().any(|&r| r as usize >= node_count) {
        return Err(d.malformed("root outside node table"));
    }
    let count = values.len() / n;
    let ids = leaf_ids_by_span(
        &d,
        nodes
            .iter()
            .filter_map(|nd| nd.span.map(|s| (nd.ids.as_slice(), s))),
        count,
    )?;
    let store = LeafStore::from_parts(n, ids, values);
    Ok(IsaxIndex::from_parts(params, seg_ends, nodes, roots, store))
}

fn put_f64s(e: &mut Encoder, v: &[f64]) {
    for &x in v {
        e.f64(x);
    }
}

fn get_f64s(d: &mut Decoder, m: usize) -> Result<Vec<f64>> {
    (0..m).map(|_| d.f64()).collect()
}

fn put_ends(e: &mut Encoder, ends: &[usize]) {
    e.u32(ends.len() as u32);
    for &x in ends {
        e.u32(x as u32);
    }
}

fn get_ends(d: &mut Decoder, n: usize) -> Result<Vec<usize>> {
    let m = d.u32()? as usize;
    if m > n {
        return Err(d.malformed("more segments than points"));
    }
    let ends = (0..m).map(|_| Ok(d.u32()? as usize)).collect::<Result<Vec<_>>>()?;
    crate::summarize::eapca::validate_ends(&ends, n).map_err(|e| d.malformed(e.to_string()))?;
    Ok(ends)
}

fn encode_eapca(index: &EapcaTreeIndex) -> Vec<u8> {
    let mut e = Encoder::new(EAPCA_MAGIC);
    e.u32(index.nodes.len() as u32);
    for node in &index.nodes {
        let syn = &node.synopsis;
        put_ends(&mut e, &syn.ends);
        put_f64s(&mut e, &syn.mean_min);
        put_f64s(&mut e, &syn.mean_max);
        put_f64s(&mut e, &syn.std_min);
        put_f64s(&mut e, &syn.std_max);
        match &node.split {
            Some(rule) => {
                e.u8(1);
                put_ends(&mut e, &rule.child_ends);
                e.u32(rule.segment as u32);
                e.u8(match rule.stat {
                    SplitStat::Mean => 0,
                    SplitStat::Std => 1,
                });
                e.f64(rule.threshold);
                e.u32(node.children[0]);
                e.u32(node.children[1]);
            }
            None => {
                e.u8(0);
                put_leaf(&mut e, &node.ids, node.span, node.overflow);
            }
        }
    }
    e.finish()
}

fn decode_eapca(bytes: &[u8], params: IndexParams, n: usize, values: Vec<f32>) -> Result<EapcaTreeIndex> {
    let mut d = Decoder::new("tree.bin", EAPCA_MAGIC, bytes)?;
    let node_count = d.u32()? as usize;
    if node_count == 0 {
        return Err(d.malformed("tree has no nodes"));
    }
    let mut nodes = Vec::with_capacity(node_count.min(bytes.len()));
    for id in 0..node_count {
        let ends = get_ends(&mut d, n)?;
        let m = ends.len();
        let synopsis = EapcaSynopsis {
            ends,
            mean_min: get_f64s(&mut d, m)?,
            mean_max: get_f64s(&mut d, m)?,
            std_min: get_f64s(&mut d, m)?,
            std_max: get_f64s(&mut d, m)?,
        };
        let node = match d.u8()? {
            1 => {
                let child_ends = get_ends(&mut d, n)?;
                let segment = d.u32()? as usize;
                let stat = match d.u8()? {
                    0 => SplitStat::Mean,
                    1 => SplitStat::Std,
                    t => return Err(d.malformed(format!("unknown split statistic {t}"))),
                };
                let threshold = d.f64()?;
                if segment >= child_ends.len() {
                    return Err(d.malformed(format!("node {id} splits a missing segment")));
                }
                let children = vec![d.u32()?, d.u32()?];
                check_children(&d, &children, id, node_count)?;
                EapcaNode {
                    synopsis,
                    split: Some(SplitRule {
                        child_ends,
                        segment,
                        stat,
                        threshold,
                    }),
                    children,
                    ids: Vec::new(),
                    span: None,
                    overflow: false,
                }
            }
            0 => {
                let (ids, span, overflow) = get_leaf(&mut d)?;
                EapcaNode {
                    synopsis,
                    split: None,
                    children: Vec::new(),
                    ids,
                    span: Some(span),
                    overflow,
                }
            }
            t => return Err(d.malformed(format!("unknown node tag {t}"))),
        };
        nodes.push(node);
    }
    d.expect_end()?;
    let count = values.len() / n;
    let ids = leaf_ids_by_span(
        &d,
        nodes
            .iter()
            .filter_map(|nd| nd.span.map(|s| (nd.ids.as_slice(), s))),
        count,
    )?;
    let store = LeafStore::from_parts(n, ids, values);
    Ok(EapcaTreeIndex::from_parts(params, nodes, store))
}

fn encode_grid(va: &VaFile) -> Vec<u8> {
    let mut e = Encoder::new(GRID_MAGIC);
    e.u32(va.grid.dims() as u32);
    for (d, &b) in va.grid.bits.iter().enumerate() {
        e.u8(b);
        put_f64s(&mut e, &va.grid.boundaries[d]);
    }
    e.finish()
}

fn decode_grid(bytes: &[u8]) -> Result<VaGrid> {
    let mut d = Decoder::new("grid.bin", GRID_MAGIC, bytes)?;
    let dims = d.u32()? as usize;
    let mut bits = Vec::with_capacity(dims.min(bytes.len()));
    let mut boundaries = Vec::with_capacity(dims.min(bytes.len()));
    for _ in 0..dims {
        let b = d.u8()?;
        if b == 0 || b > crate::summarize::MAX_VA_BITS {
            return Err(d.malformed(format!("invalid bit count {b}")));
        }
        bits.push(b);
        boundaries.push(get_f64s(&mut d, (1usize << b) + 1)?);
    }
    d.expect_end()?;
    let grid = VaGrid { bits, boundaries };
    grid.validate()?;
    Ok(grid)
}

fn encode_cells(va: &VaFile) -> Vec<u8> {
    let mut e = Encoder::new(CELLS_MAGIC);
    e.u64(va.len() as u64);
    e.u32(va.grid.dims() as u32);
    e.len_prefixed_u8(&va.cells);
    e.finish()
}

fn decode_cells(bytes: &[u8], count: u64, grid: &VaGrid) -> Result<Vec<u8>> {
    let mut d = Decoder::new("cells.bin", CELLS_MAGIC, bytes)?;
    let stored = d.u64()?;
    let dims = d.u32()? as usize;
    if stored != count || dims != grid.dims() {
        return Err(d.malformed("cell table shape disagrees with metadata"));
    }
    let cells = d.len_prefixed_u8()?;
    d.expect_end()?;
    if cells.len() as u64 != count * dims as u64 {
        return Err(d.malformed("cell table has the wrong size"));
    }
    for row in cells.chunks_exact(dims.max(1)) {
        if row.iter().enumerate().any(|(i, &c)| c as usize >= grid.cell_count(i)) {
            return Err(d.malformed("cell index outside grid"));
        }
    }
    Ok(cells)
}

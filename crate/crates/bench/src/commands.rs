use std::fs;
use std::io::{self, BufWriter};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use dsidx::datagen::{
    gen_ground_truth, gen_queries, gen_random_walk, read_dataset, read_ground_truth, write_dataset,
    write_ground_truth, GeneratorSpec, GroundTruth, QueryWorkloadSpec,
};
use dsidx::index::{Index, IndexKind, IndexParams};
use dsidx::metrics::{aggregate, QueryRecord, ReDenominator};
use dsidx::search::{estimate_distance_distribution, search, DistanceDistribution, SearchMode, SearchParams};
use dsidx::Dataset;
use rayon::prelude::*;
use serde_json::json;

use crate::cli::{resolve, BuildArgs, GenDataArgs, GenQueriesArgs, GroundTruthArgs, ModeArg, ReportArgs, RunArgs};
use crate::report::{read_rows, recompute, write_rows, Point, Row};

fn print(v: serde_json::Value) {
    println!("{v}");
}

pub fn gen_data(a: GenDataArgs) -> Result<()> {
    let out = resolve(a.out);
    let ds = gen_random_walk(&GeneratorSpec::random_walk(a.count, a.length, a.seed))?;
    write_dataset(&out, &ds)?;
    print(json!({
        "command": "gen-data",
        "out": out,
        "count": ds.len(),
        "length": ds.series_len(),
        "seed": a.seed,
    }));
    Ok(())
}

pub fn gen_queries_cmd(a: GenQueriesArgs) -> Result<()> {
    let source = read_dataset(&resolve(a.data))?;
    let out = resolve(a.out);
    let spec = QueryWorkloadSpec {
        count: a.count,
        noise_levels: a.noise,
        seed: a.seed,
    };
    let w = gen_queries(&source, &spec)?;
    write_dataset(&out, &w.queries)?;
    print(json!({
        "command": "gen-queries",
        "out": out,
        "count": w.queries.len(),
        "noise_levels": spec.noise_levels,
        "sources": w.sources,
    }));
    Ok(())
}

fn prepared(ds: Dataset, normalize: bool) -> Dataset {
    if normalize {
        ds.normalized()
    } else {
        ds
    }
}

pub fn ground_truth(a: GroundTruthArgs) -> Result<()> {
    let normalize = !a.no_normalize;
    let data = prepared(read_dataset(&resolve(a.data))?, normalize);
    let queries = prepared(read_dataset(&resolve(a.queries))?, normalize);
    let out = resolve(a.out);
    let gt = gen_ground_truth(&data, &queries, a.k)?;
    write_ground_truth(&out, &gt)?;
    print(json!({
        "command": "ground-truth",
        "out": out,
        "queries": gt.len(),
        "k": gt.k,
        "normalized": normalize,
    }));
    Ok(())
}

fn dir_bytes(dir: &std::path::Path, names: &[&str]) -> u64 {
    names
        .iter()
        .filter_map(|n| fs::metadata(dir.join(n)).ok())
        .map(|m| m.len())
        .sum()
}

pub fn build(a: BuildArgs) -> Result<()> {
    let d = IndexParams::default();
    let params = IndexParams {
        leaf_capacity: a.leaf_capacity.unwrap_or(d.leaf_capacity),
        segments: a.segments.unwrap_or(d.segments),
        base_bits: a.base_bits.unwrap_or(d.base_bits),
        initial_segments: a.initial_segments.unwrap_or(d.initial_segments),
        dft_coefficients: a.dft_coefficients.unwrap_or(d.dft_coefficients),
        total_bits: a.total_bits.unwrap_or(d.total_bits),
        buffer_bytes: a.buffer_bytes.unwrap_or(d.buffer_bytes),
        normalize: !a.no_normalize,
        grid_sample: a.grid_sample.unwrap_or(d.grid_sample),
        seed: a.seed.unwrap_or(d.seed),
    };
    let kind: IndexKind = a.kind.into();
    let data = prepared(read_dataset(&resolve(a.data))?, params.normalize);
    let out = resolve(a.out);

    let start = Instant::now();
    let index = Index::build(kind, &data, &params)?;
    let build_seconds = start.elapsed().as_secs_f64();
    index.persist(&out)?;
    // summaries are what stays in memory while querying; the raw series live in leaves.bin
    let summary_bytes = dir_bytes(&out, &["tree.bin", "grid.bin", "cells.bin"]);
    print(json!({
        "command": "build",
        "out": out,
        "kind": kind.as_str(),
        "series": index.len(),
        "leaves": index.leaf_count(),
        "build_seconds": build_seconds,
        "summary_bytes": summary_bytes,
    }));
    Ok(())
}

fn sweep(a: &RunArgs) -> Result<Vec<(Point, SearchParams)>> {
    let mut out = Vec::new();
    let mut modes = a.modes.clone();
    modes.dedup();
    for &k in &a.k {
        for &mode in &modes {
            let mut push = |m: SearchMode, eps, delta, nprobe, name: &str| {
                out.push((
                    Point {
                        index: String::new(),
                        mode: name.to_string(),
                        k,
                        epsilon: eps,
                        delta,
                        nprobe,
                    },
                    SearchParams { k, mode: m },
                ))
            };
            match mode {
                ModeArg::Exact => push(SearchMode::Exact, None, None, None, "exact"),
                ModeArg::Ng => {
                    for &n in &a.nprobe {
                        push(SearchMode::Ng { nprobe: n }, None, None, Some(n), "ng");
                    }
                }
                ModeArg::Guaranteed => {
                    for &e in &a.epsilon {
                        for &d in &a.delta {
                            push(
                                SearchMode::Guaranteed { epsilon: e, delta: d },
                                Some(e),
                                Some(d),
                                None,
                                "guaranteed",
                            );
                        }
                    }
                }
            }
        }
    }
    if out.is_empty() {
        bail!("the parameter sweep is empty");
    }
    for (_, p) in &out {
        p.validate()?;
    }
    Ok(out)
}

fn check_truth(gt: &GroundTruth, queries: &Dataset, ks: &[usize]) -> Result<()> {
    if gt.len() != queries.len() {
        bail!(
            "ground truth has {} rows but the workload has {} queries",
            gt.len(),
            queries.len()
        );
    }
    if let Some(&k) = ks.iter().find(|&&k| k > gt.k) {
        bail!("k = {k} exceeds the ground-truth k = {}", gt.k);
    }
    Ok(())
}

pub fn run(a: RunArgs) -> Result<()> {
    let index = Index::load(&resolve(a.index.clone())).context("loading index")?;
    let queries = prepared(read_dataset(&resolve(a.queries.clone()))?, index.is_normalized());
    let gt = read_ground_truth(&resolve(a.ground_truth.clone()))?;
    check_truth(&gt, &queries, &a.k)?;
    let points = sweep(&a)?;
    let denominator = if a.mre_first_neighbor {
        ReDenominator::FirstNeighbor
    } else {
        ReDenominator::RthNeighbor
    };

    let needs_f = points
        .iter()
        .any(|(_, p)| matches!(p.mode, SearchMode::Guaranteed { delta, .. } if delta < 1.0));
    let f: Option<DistanceDistribution> = if needs_f {
        let data = index.dataset()?;
        let sample = a.distribution_sample.min(data.len());
        Some(estimate_distance_distribution(&data, sample, a.distribution_pairs, a.seed)?)
    } else {
        None
    };

    let dataset_bytes = index.store().byte_size();
    let kind = index.kind().as_str().to_string();
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for (mut point, params) in points {
        point.index = kind.clone();
        let answer = |qi: usize| -> Result<(QueryRecord, String)> {
            let q = queries.series(qi as u32);
            let start = Instant::now();
            let out = search(&index, q, &params, f.as_ref())?;
            let elapsed = start.elapsed().as_nanos() as u64;
            let k = params.k;
            // compare at the precision the ground truth was stored with
            let got: Vec<f64> = out.result.distances().iter().map(|&d| d as f32 as f64).collect();
            let truth = &gt.rows[qi][..k];
            let truth_ids: Vec<u32> = truth.iter().map(|n| n.id).collect();
            let truth_d: Vec<f64> = truth.iter().map(|n| n.distance).collect();
            let rec = QueryRecord::new(&out.result.ids(), &got, &truth_ids, &truth_d, denominator, &out.stats, elapsed);
            let exit = serde_json::to_value(out.exit)?.as_str().unwrap_or_default().to_string();
            Ok((rec, exit))
        };
        let results: Vec<(QueryRecord, String)> = if a.concurrent {
            (0..queries.len()).into_par_iter().map(answer).collect::<Result<_>>()?
        } else {
            (0..queries.len()).map(answer).collect::<Result<_>>()?
        };
        for (qi, (rec, exit)) in results.iter().enumerate() {
            rows.push(Row::query(&point, qi, rec, exit, dataset_bytes));
        }
        let records: Vec<QueryRecord> = results.into_iter().map(|(r, _)| r).collect();
        let report = aggregate(&records, dataset_bytes)?;
        summary.push(json!({
            "mode": point.mode,
            "k": point.k,
            "epsilon": point.epsilon,
            "delta": point.delta,
            "nprobe": point.nprobe,
            "avg_recall": report.avg_recall,
            "map": report.map,
            "mre": report.mre,
            "mean_leaves_visited": report.mean_leaves_visited,
        }));
        rows.push(Row::aggregate(&point, &report, dataset_bytes));
    }

    let out = resolve(a.out);
    let file = fs::File::create(&out).with_context(|| format!("creating {}", out.display()))?;
    write_rows(BufWriter::new(file), &rows)?;
    print(json!({
        "command": "run",
        "out": out,
        "index": kind,
        "queries": queries.len(),
        "points": summary,
    }));
    Ok(())
}

pub fn report(a: ReportArgs) -> Result<()> {
    let input = resolve(a.input);
    let file = fs::File::open(&input).map_err(|e| match e.kind() {
        io::ErrorKind::NotFound => anyhow::Error::new(dsidx::Error::MissingFile(input.clone())),
        _ => e.into(),
    })?;
    let rows = recompute(&read_rows(file)?)?;
    match a.out {
        Some(path) => {
            let path = resolve(path);
            write_rows(BufWriter::new(fs::File::create(&path)?), &rows)
        }
        None => write_rows(io::stdout().lock(), &rows),
    }
}

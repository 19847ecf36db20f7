use std::collections::HashMap;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use dsidx::datagen::{read_dataset, read_ground_truth};

fn dsbench(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dsbench"))
        .current_dir(dir)
        .env_remove("DSBENCH_DATA_DIR")
        .args(args)
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = dsbench(dir, args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

type Rows = Vec<HashMap<String, String>>;

fn read_csv(path: &Path) -> Rows {
    let mut r = csv::Reader::from_path(path).unwrap();
    let headers = r.headers().unwrap().clone();
    r.records()
        .map(|rec| {
            headers
                .iter()
                .zip(rec.unwrap().iter())
                .map(|(h, v)| (h.to_string(), v.to_string()))
                .collect()
        })
        .collect()
}

fn num(row: &HashMap<String, String>, col: &str) -> f64 {
    row[col].parse().unwrap_or_else(|_| panic!("{col} = {:?}", row[col]))
}

fn aggregates(rows: &Rows) -> Vec<&HashMap<String, String>> {
    rows.iter().filter(|r| r["row_type"] == "aggregate").collect()
}

/// Dataset, queries and 10-NN ground truth in `dir`.
fn workload(dir: &Path, count: &str) {
    ok(dir, &["gen-data", "--out", "data.bin", "--count", count, "--length", "32", "--seed", "7"]);
    ok(dir, &["gen-queries", "--data", "data.bin", "--out", "q.bin", "--count", "24", "--seed", "3"]);
    ok(dir, &["ground-truth", "--data", "data.bin", "--queries", "q.bin", "--out", "gt.bin", "--k", "10"]);
}

#[test]
fn gen_data_file_size() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["gen-data", "--out", "d.bin", "--count", "1000", "--length", "64", "--seed", "7"]);
    let len = fs::metadata(dir.path().join("d.bin")).unwrap().len();
    assert_eq!(len, 8 + 8 + 1000 * 64 * 4 + 4);
    let again = dir.path().join("d2.bin");
    ok(dir.path(), &["gen-data", "--out", "d2.bin", "--count", "1000", "--length", "64", "--seed", "7"]);
    assert_eq!(fs::read(dir.path().join("d.bin")).unwrap(), fs::read(again).unwrap());
}

#[test]
fn zero_noise_queries_and_ground_truth_rows() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    ok(p, &["gen-data", "--out", "d.bin", "--count", "300", "--length", "16", "--seed", "1"]);
    let out = ok(p, &["gen-queries", "--data", "d.bin", "--out", "q.bin", "--count", "12", "--noise", "0", "--seed", "4"]);
    let meta: serde_json::Value = serde_json::from_str(out.trim()).unwrap();
    let data = read_dataset(&p.join("d.bin")).unwrap();
    let queries = read_dataset(&p.join("q.bin")).unwrap();
    for (i, q) in queries.iter().enumerate() {
        let src = meta["sources"][i].as_u64().unwrap() as u32;
        assert_eq!(q, data.series(src));
    }
    ok(p, &["ground-truth", "--data", "d.bin", "--queries", "q.bin", "--out", "gt.bin", "--k", "10"]);
    let gt = read_ground_truth(&p.join("gt.bin")).unwrap();
    assert_eq!(gt.len(), 12);
    assert_eq!(gt.k, 10);
    for row in &gt.rows {
        assert_eq!(row[0].distance, 0.0);
        assert!(row.windows(2).all(|w| w[0].distance <= w[1].distance));
    }
}

#[test]
fn build_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    ok(p, &["gen-data", "--out", "d.bin", "--count", "400", "--length", "32", "--seed", "2"]);
    for kind in ["isax", "eapca-tree", "vafile"] {
        ok(p, &["build", "--data", "d.bin", "--out", "a", "--kind", kind, "--leaf-capacity", "20"]);
        ok(p, &["build", "--data", "d.bin", "--out", "b", "--kind", kind, "--leaf-capacity", "20"]);
        for entry in fs::read_dir(p.join("a")).unwrap() {
            let name = entry.unwrap().file_name();
            let a = fs::read(p.join("a").join(&name)).unwrap();
            let b = fs::read(p.join("b").join(&name)).unwrap();
            if name == "meta.json" {
                let strip = |v: &[u8]| {
                    let mut j: serde_json::Value = serde_json::from_slice(v).unwrap();
                    j.as_object_mut().unwrap().remove("created_unix");
                    j
                };
                assert_eq!(strip(&a), strip(&b));
            } else {
                assert_eq!(a, b, "{kind} {name:?}");
            }
        }
        fs::remove_dir_all(p.join("a")).unwrap();
        fs::remove_dir_all(p.join("b")).unwrap();
    }
}

#[test]
fn error_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    ok(p, &["gen-data", "--out", "d.bin", "--count", "10", "--length", "8"]);

    let usage = dsbench(p, &["build", "--data", "d.bin", "--out", "i", "--kind", "kd-tree"]);
    assert_eq!(usage.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&usage.stderr).unwrap();
    assert_eq!(err["error"], "usage");

    let missing = dsbench(p, &["build", "--data", "nope.bin", "--out", "i", "--kind", "isax"]);
    assert_eq!(missing.status.code(), Some(1));
    let err: serde_json::Value = serde_json::from_slice(&missing.stderr).unwrap();
    assert_eq!(err["error"], "missing_file");

    fs::write(p.join("junk.bin"), b"DSBIN1\0\0\x01").unwrap();
    let bad = dsbench(p, &["build", "--data", "junk.bin", "--out", "i", "--kind", "isax"]);
    assert_eq!(bad.status.code(), Some(1));
    let err: serde_json::Value = serde_json::from_slice(&bad.stderr).unwrap();
    assert_eq!(err["error"], "truncated");
}

#[test]
fn exact_and_sweeps() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    workload(p, "1500");
    for kind in ["isax", "eapca-tree", "vafile"] {
        ok(p, &["build", "--data", "data.bin", "--out", kind, "--kind", kind, "--leaf-capacity", "25"]);

        ok(p, &["run", "--index", kind, "--queries", "q.bin", "--ground-truth", "gt.bin", "--out", "exact.csv"]);
        let rows = read_csv(&p.join("exact.csv"));
        assert_eq!(rows.len(), 25);
        let agg = aggregates(&rows);
        assert_eq!(num(agg[0], "map"), 1.0);
        assert_eq!(num(agg[0], "mre"), 0.0);

        ok(
            p,
            &[
                "run", "--index", kind, "--queries", "q.bin", "--ground-truth", "gt.bin", "--out", "eps.csv",
                "--modes", "guaranteed", "--epsilon", "0,1,5", "--delta", "1",
            ],
        );
        let rows = read_csv(&p.join("eps.csv"));
        let leaves: Vec<f64> = aggregates(&rows).iter().map(|r| num(r, "mean_leaves_visited")).collect();
        assert_eq!(leaves.len(), 3);
        assert!(leaves.windows(2).all(|w| w[1] <= w[0]), "{kind} {leaves:?}");

        ok(
            p,
            &[
                "run", "--index", kind, "--queries", "q.bin", "--ground-truth", "gt.bin", "--out", "ng.csv",
                "--modes", "ng", "--nprobe", "1,1000000",
            ],
        );
        let rows = read_csv(&p.join("ng.csv"));
        let agg = aggregates(&rows);
        assert_eq!(num(agg[1], "map"), 1.0, "{kind}");
        for r in rows.iter().filter(|r| r["row_type"] == "query") {
            assert_eq!(num(r, "recall"), num(r, "ap"));
        }
    }
}

#[test]
fn report_recomputes_aggregates() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    workload(p, "600");
    ok(p, &["build", "--data", "data.bin", "--out", "idx", "--kind", "isax", "--leaf-capacity", "30"]);
    ok(
        p,
        &[
            "run", "--index", "idx", "--queries", "q.bin", "--ground-truth", "gt.bin", "--out", "r.csv",
            "--modes", "exact,ng,guaranteed", "--k", "1,10", "--nprobe", "2", "--epsilon", "0.5", "--delta", "1,0.9",
            "--distribution-sample", "200", "--distribution-pairs", "5000",
        ],
    );
    ok(p, &["report", "--input", "r.csv", "--out", "agg.csv"]);
    let original = read_csv(&p.join("r.csv"));
    let recomputed = read_csv(&p.join("agg.csv"));
    let orig = aggregates(&original);
    assert_eq!(orig.len(), 8);
    assert_eq!(recomputed.len(), orig.len());
    for (a, b) in orig.iter().zip(&recomputed) {
        for col in ["avg_recall", "map", "mre", "pct_data", "mean_seeks", "mean_leaves_visited", "throughput_qpm"] {
            let (x, y) = (num(a, col), num(b, col));
            assert!((x - y).abs() <= 1e-9 * x.abs().max(1.0), "{col}: {x} vs {y}");
        }
        assert_eq!(a["mode"], b["mode"]);
        assert_eq!(a["re_excluded"], b["re_excluded"]);
    }

    let bad_k = dsbench(p, &["run", "--index", "idx", "--queries", "q.bin", "--ground-truth", "gt.bin", "--out", "x.csv", "--k", "20"]);
    assert_eq!(bad_k.status.code(), Some(1));
}

#[test]
fn concurrent_matches_sequential() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    workload(p, "500");
    ok(p, &["build", "--data", "data.bin", "--out", "idx", "--kind", "eapca-tree", "--leaf-capacity", "20"]);
    let base = ["run", "--index", "idx", "--queries", "q.bin", "--ground-truth", "gt.bin", "--modes", "ng,exact", "--nprobe", "3"];
    ok(p, &[&base[..], &["--out", "seq.csv"]].concat());
    ok(p, &[&base[..], &["--out", "par.csv", "--concurrent"]].concat());
    let timing = ["elapsed_ns", "throughput_qpm"];
    for (a, b) in read_csv(&p.join("seq.csv")).iter().zip(read_csv(&p.join("par.csv")).iter()) {
        for (col, v) in a {
            if !timing.contains(&col.as_str()) {
                assert_eq!(v, &b[col], "{col}");
            }
        }
    }
}

#[test]
fn config_file_and_data_dir() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    fs::write(
        p.join("bench.toml"),
        "count = 200\nlength = 16\nseed = 5\nkind = \"vafile\"\nk = [1, 3]\nmodes = [\"exact\"]\n",
    )
    .unwrap();
    let data_dir = p.join("data");
    fs::create_dir(&data_dir).unwrap();
    let run = |args: &[&str]| {
        let out = Command::new(env!("CARGO_BIN_EXE_dsbench"))
            .current_dir(p)
            .env("DSBENCH_DATA_DIR", &data_dir)
            .args(args)
            .output()
            .unwrap();
        assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    };
    run(&["gen-data", "--config", "../bench.toml", "--out", "d.bin"]);
    assert_eq!(read_dataset(&data_dir.join("d.bin")).unwrap().len(), 200);
    run(&["gen-queries", "--config", "../bench.toml", "--data", "d.bin", "--out", "q.bin", "--count", "6"]);
    assert_eq!(read_dataset(&data_dir.join("q.bin")).unwrap().len(), 6);
    run(&["ground-truth", "--config", "../bench.toml", "--data", "d.bin", "--queries", "q.bin", "--out", "gt.bin", "--k", "3"]);
    run(&["build", "--config", "../bench.toml", "--data", "d.bin", "--out", "idx"]);
    let meta: serde_json::Value = serde_json::from_slice(&fs::read(data_dir.join("idx/meta.json")).unwrap()).unwrap();
    assert_eq!(meta["kind"], "vafile");
    run(&["run", "--config", "../bench.toml", "--index", "idx", "--queries", "q.bin", "--ground-truth", "gt.bin", "--out", "r.csv"]);
    let rows = read_csv(&data_dir.join("r.csv"));
    assert_eq!(aggregates(&rows).len(), 2);
}

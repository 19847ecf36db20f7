use dsidx::datagen::{decode_dataset, encode_dataset};
use dsidx::index::{Index, IndexKind, IndexParams};
use dsidx::metrics::{average_precision, recall};
use dsidx::search::{calc_delta_radius, delta_epsilon_knn, exact_knn, ng_approx_knn, DistanceDistribution};
use dsidx::summarize::{
    build_va_grid, dft, eapca, eapca_node_lb, mindist_paa_isax, paa, sax_from_paa, segment_ends, va_cell_lb,
    EapcaSynopsis, MAX_SAX_BITS,
};
use dsidx::{euclidean_distance, knn_bruteforce, z_normalize, Dataset};
use proptest::prelude::*;

const SLACK: f64 = 1e-6;

fn series(len: usize) -> impl Strategy<Value = Vec<f32>> {
    prop::collection::vec(-10.0f32..10.0, len)
}

fn pair_with_len() -> impl Strategy<Value = (Vec<f32>, Vec<f32>)> {
    (1usize..80).prop_flat_map(|n| (series(n), series(n)))
}

fn dataset(max_count: usize) -> impl Strategy<Value = (Dataset, Vec<f32>)> {
    (2usize..24, 2usize..max_count).prop_flat_map(|(n, count)| {
        (prop::collection::vec(series(n), count), series(n)).prop_map(|(rows, q)| {
            let rows: Vec<Vec<f32>> = rows.iter().map(|r| z_normalize(r)).collect();
            (
                Dataset::from_rows(&rows).unwrap().assume_normalized(true),
                z_normalize(&q),
            )
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn isax_mindist_lower_bounds((s, q) in pair_with_len(), w in 1usize..20, bits in prop::collection::vec(1u8..=MAX_SAX_BITS, 20)) {
        let w = w.min(s.len());
        let word = sax_from_paa(&paa(&s, w).unwrap(), &bits[..w]).unwrap();
        let lb = mindist_paa_isax(&paa(&q, w).unwrap(), &word, s.len()).unwrap();
        prop_assert!(lb <= euclidean_distance(&s, &q).unwrap() + SLACK);
    }

    #[test]
    fn eapca_box_lower_bounds(rows in prop::collection::vec(series(24), 1..6), q in series(24), w in 1usize..24) {
        let ends = segment_ends(24, w).unwrap();
        let mut syn = EapcaSynopsis::empty(ends.clone());
        for r in &rows {
            syn.include(&eapca(r, &ends).unwrap().stats);
        }
        let lb = eapca_node_lb(&q, &syn).unwrap();
        let nearest = rows.iter().map(|r| euclidean_distance(r, &q).unwrap()).fold(f64::INFINITY, f64::min);
        prop_assert!(lb <= nearest + SLACK);
    }

    #[test]
    fn dft_prefix_lower_bounds((s, q) in pair_with_len(), l in 1usize..40) {
        let l = l.min(s.len());
        let d = dft(&s, l).unwrap().distance(&dft(&q, l).unwrap());
        prop_assert!(d <= euclidean_distance(&s, &q).unwrap() + SLACK);
    }

    #[test]
    fn va_cell_lower_bounds(rows in prop::collection::vec(series(16), 2..30), q in series(16), bits in 6usize..40) {
        let sums: Vec<_> = rows.iter().map(|r| dft(r, 6).unwrap()).collect();
        let grid = build_va_grid(&sums, bits).unwrap();
        let qd = dft(&q, 6).unwrap();
        for (r, s) in rows.iter().zip(&sums) {
            let lb = va_cell_lb(&qd, &grid.cell_of(s).unwrap(), &grid).unwrap();
            prop_assert!(lb <= euclidean_distance(r, &q).unwrap() + SLACK);
        }
    }

    #[test]
    fn z_normalized_moments(s in series(30)) {
        let z = z_normalize(&s);
        let n = z.len() as f64;
        let mean = z.iter().map(|&v| v as f64).sum::<f64>() / n;
        let var = z.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / n;
        prop_assert!(mean.abs() < 1e-5);
        prop_assert!(var.abs() < 1e-9 || (var - 1.0).abs() < 1e-4);
    }

    #[test]
    fn dataset_file_roundtrip(rows in prop::collection::vec(series(7), 1..10)) {
        let ds = Dataset::from_rows(&rows).unwrap();
        let bytes = encode_dataset(&ds).unwrap();
        let back = decode_dataset(&bytes).unwrap();
        prop_assert_eq!(back.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                        ds.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    }

    #[test]
    fn radius_monotone(counts in prop::collection::vec(0u64..50, 1..60), d1 in 0.01f64..1.0, d2 in 0.01f64..1.0, n in 1usize..100_000) {
        prop_assume!(counts.iter().sum::<u64>() > 0);
        let f = DistanceDistribution::from_histogram(counts, 3.0, 0).unwrap();
        let (lo, hi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
        let r_lo = calc_delta_radius(&f, lo, n).unwrap().r_delta;
        let r_hi = calc_delta_radius(&f, hi, n).unwrap().r_delta;
        prop_assert!(r_hi <= r_lo);
        prop_assert!(calc_delta_radius(&f, lo, n * 2).unwrap().r_delta <= r_lo);
        let mut prev = 0.0;
        for i in 0..=30 {
            let c = f.cdf(i as f64 * 0.1);
            prop_assert!(c >= prev);
            prev = c;
        }
        prop_assert_eq!(f.cdf(3.0), 1.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(60))]

    #[test]
    fn indexes_answer_exactly((ds, q) in dataset(120), cap in 1usize..12, k in 1usize..8, seg in 1usize..8) {
        let params = IndexParams {
            leaf_capacity: cap,
            segments: seg,
            initial_segments: seg.min(3),
            dft_coefficients: seg,
            total_bits: 3 * seg,
            ..IndexParams::default()
        };
        let want = knn_bruteforce(&ds, &q, k).unwrap();
        for kind in IndexKind::ALL {
            let index = Index::build(kind, &ds, &params).unwrap();
            let got = exact_knn(&index, &q, k).unwrap();
            prop_assert_eq!(got.result.ids(), want.ids());
            let eq = delta_epsilon_knn(&index, &q, k, 0.0, 1.0, None).unwrap();
            prop_assert_eq!(&eq.result, &got.result);
            for eps in [0.5, 2.0] {
                let r = delta_epsilon_knn(&index, &q, k, eps, 1.0, None).unwrap().result;
                let ids = r.ids();
                let truth = want.ids();
                prop_assert!((recall(&ids, &truth) - average_precision(&ids, &truth)).abs() < 1e-9);
                for (a, b) in r.distances().iter().zip(want.distances()) {
                    prop_assert!(*a <= (1.0 + eps) * b + 1e-9);
                }
            }
            let ng = ng_approx_knn(&index, &q, k, 1).unwrap().result;
            let d = ng.distances();
            prop_assert!(d.windows(2).all(|w| w[0] <= w[1]));
            let ids = ng.ids();
            prop_assert!((recall(&ids, &want.ids()) - average_precision(&ids, &want.ids())).abs() < 1e-9);
        }
    }
}

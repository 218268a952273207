use std::collections::BTreeSet;

use autotwin::data::{
    full_grid, interval_indices, random_grid_indices, read_csv, read_csv_from, split, write_csv,
    write_csv_to, Dataset, Provenance, Sample, SweepSpec,
};
use autotwin::sim::NetworkConfig;
use proptest::prelude::*;

fn sample() -> impl Strategy<Value = Sample> {
    (
        1.0f64..1000.0,
        1u32..10_000,
        1.0f64..1000.0,
        1u32..10_000,
        1e-6f64..1e4,
        1e-6f64..1e4,
    )
        .prop_map(|(b1, q1, b2, q2, l1, l2)| Sample {
            config: NetworkConfig::new(b1, q1, b2, q2),
            latency1_s: l1,
            latency2_s: l2,
        })
}

proptest! {
    #[test]
    fn csv_round_trip_is_bit_exact(rows in prop::collection::vec(sample(), 1..40)) {
        let ds = Dataset::new(rows, Provenance::Simulated);
        let mut buf = Vec::new();
        write_csv_to(&ds, &mut buf).unwrap();
        let back = read_csv_from(buf.as_slice()).unwrap();
        prop_assert_eq!(back.provenance, Provenance::Ingested);
        prop_assert_eq!(back.rows.len(), ds.rows.len());
        for (a, b) in back.rows.iter().zip(&ds.rows) {
            prop_assert_eq!(a.config, b.config);
            prop_assert_eq!(a.latency1_s.to_bits(), b.latency1_s.to_bits());
            prop_assert_eq!(a.latency2_s.to_bits(), b.latency2_s.to_bits());
        }
        prop_assert_eq!(back.fingerprint(), ds.fingerprint());
    }

    #[test]
    fn split_partitions_and_keeps_order(n in 2usize..300, frac in 0.05f64..0.95, seed in any::<u64>()) {
        let rows: Vec<Sample> = (0..n)
            .map(|i| Sample {
                config: NetworkConfig::new(25.0, 50, 25.0, 50 + i as u32),
                latency1_s: 1.0,
                latency2_s: i as f64 + 1.0,
            })
            .collect();
        let ds = Dataset::new(rows, Provenance::Simulated);
        let n_test = (frac * n as f64).ceil() as usize;
        if n_test >= n {
            prop_assert!(split(&ds, frac, seed).is_err());
            return Ok(());
        }
        let (train, test) = split(&ds, frac, seed).unwrap();
        prop_assert_eq!(train.len() + test.len(), n);
        prop_assert_eq!(test.len(), n_test);
        let key = |d: &Dataset| d.rows.iter().map(|r| r.config.path2.queue_pkts).collect::<Vec<_>>();
        let (a, b) = (key(&train), key(&test));
        prop_assert!(a.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(b.windows(2).all(|w| w[0] < w[1]));
        let all: BTreeSet<u32> = a.iter().chain(&b).copied().collect();
        prop_assert_eq!(all.len(), n);
        let (train2, _) = split(&ds, frac, seed).unwrap();
        prop_assert_eq!(train2, train);
    }

    #[test]
    fn interval_indices_are_evenly_spaced(len in 1usize..100_000, n in 1usize..500) {
        prop_assume!(n <= len);
        let idx = interval_indices(len, n).unwrap();
        prop_assert_eq!(idx.len(), n);
        prop_assert_eq!(idx[0], 0);
        let stride = len / n;
        prop_assert!(idx.windows(2).all(|w| w[1] - w[0] == stride));
        prop_assert!(*idx.last().unwrap() < len);
    }
}

#[test]
fn default_grid_has_21_levels_per_axis() {
    let spec = SweepSpec::default();
    assert_eq!(spec.grid_len(), 194_481);
    let grid = full_grid(&spec).unwrap();
    assert_eq!(grid.len(), 194_481);
    assert_eq!(grid[0], NetworkConfig::new(25.0, 50, 25.0, 50));
    assert_eq!(
        grid[grid.len() - 1],
        NetworkConfig::new(125.0, 150, 125.0, 150)
    );
    let distinct: BTreeSet<String> = grid.iter().map(|c| format!("{c:?}")).collect();
    assert_eq!(distinct.len(), grid.len());
}

#[test]
fn held_out_sample_avoids_training_rows() {
    let train: BTreeSet<usize> = interval_indices(194_481, 400)
        .unwrap()
        .into_iter()
        .collect();
    let held = random_grid_indices(194_481, 2000, &train, 9).unwrap();
    assert_eq!(held.len(), 2000);
    assert!(held.iter().all(|i| !train.contains(i)));
    assert_eq!(held, random_grid_indices(194_481, 2000, &train, 9).unwrap());
}

#[test]
fn file_round_trip_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.csv");
    let ds = Dataset::new(
        vec![Sample {
            config: NetworkConfig::new(25.0, 50, 30.5, 60),
            latency1_s: 0.1 + 0.2,
            latency2_s: 1.0 / 3.0,
        }],
        Provenance::Simulated,
    );
    write_csv(&ds, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("bw1_mbps,q1_pkts,bw2_mbps,q2_pkts,lat1_s,lat2_s\n"));
    assert_eq!(read_csv(&path).unwrap().rows, ds.rows);
    assert!(read_csv(dir.path().join("missing.csv")).is_err());
    assert!(read_csv_from("bw1_mbps,q1_pkts\n1,2\n".as_bytes()).is_err());
}

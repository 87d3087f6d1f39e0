mod common;

use std::io::Write;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use scr_dynpredict::dataset::*;
use scr_dynpredict::Error;

fn one_column(label: &str, values: Vec<f64>) -> TimeSeriesTable {
    let schema = Schema::infer(&[label.to_string()], label).unwrap();
    TimeSeriesTable::new(schema, vec![values], DEFAULT_SAMPLE_PERIOD).unwrap()
}

#[test]
fn synthetic_q_peaks_at_its_tones() {
    let cfg = SynthConfig {
        n: 2000,
        ..SynthConfig::default()
    };
    let (table, truth) = generate_synthetic(&cfg, 7).unwrap();
    assert_eq!(truth.tones, vec![0.02, 0.10]);
    let q = table.column("Q").unwrap();
    let m = q.iter().sum::<f64>() / q.len() as f64;
    let centered: Vec<f64> = q.iter().map(|v| v - m).collect();
    let p = common::periodogram(&centered);
    let mut bins: Vec<usize> = (1..p.len()).collect();
    bins.sort_by(|&a, &b| p[b].total_cmp(&p[a]));
    let mut top: Vec<f64> = bins[..2].iter().map(|&k| k as f64 / 2000.0).collect();
    top.sort_by(f64::total_cmp);
    assert_eq!(top, vec![0.02, 0.10]);
}

#[test]
fn synthetic_is_deterministic_and_in_range() {
    let cfg = SynthConfig::default();
    let (a, ta) = generate_synthetic(&cfg, 7).unwrap();
    let (b, tb) = generate_synthetic(&cfg, 7).unwrap();
    assert_eq!(a, b);
    assert_eq!(ta, tb);
    let (c, _) = generate_synthetic(&cfg, 8).unwrap();
    assert_ne!(a, c);
    assert_eq!((a.n_rows(), a.n_cols()), (4000, 16));
    assert_eq!(ta.delays["Q"], 44);
    assert_eq!(ta.dominant, "Q");
    for var in a.schema().variables() {
        let (lo, hi) = column_bounds(a.column(&var.label).unwrap());
        assert!(lo >= var.expected_range.0 - 1e-9 && hi <= var.expected_range.1 + 1e-9, "{}", var.label);
    }
}

#[test]
fn synthetic_rejects_short_series() {
    let cfg = SynthConfig {
        n: 50,
        ..SynthConfig::default()
    };
    assert!(generate_synthetic(&cfg, 0).is_err());
}

fn write_table1_csv(rows: usize, shuffle_header: bool) -> tempfile::NamedTempFile {
    let schema = Schema::table1();
    let mut labels: Vec<&str> = schema.labels().collect();
    if shuffle_header {
        labels.reverse();
    }
    let mut f = tempfile::NamedTempFile::new().unwrap();
    writeln!(f, "{}", labels.join(",")).unwrap();
    for t in 0..rows {
        let row: Vec<String> = labels
            .iter()
            .map(|l| {
                let (lo, hi) = schema.get(l).unwrap().expected_range;
                format!("{}", lo + (hi - lo) * ((t * 7 + l.len()) % 100) as f64 / 100.0)
            })
            .collect();
        writeln!(f, "{}", row.join(",")).unwrap();
    }
    f.flush().unwrap();
    f
}

#[test]
fn loads_full_size_plant_layout() {
    let f = write_table1_csv(9210, true);
    let table = load_table(f.path(), &Schema::table1()).unwrap();
    assert_eq!((table.n_rows(), table.n_cols()), (9210, 16));
    assert_eq!(table.schema().labels().next(), Some("Y"));
    let (train, test) = split(&table, 7500).unwrap();
    assert_eq!((train.n_rows(), test.n_rows()), (7500, 1710));
    assert_eq!(train.row(7499), table.row(7499));
    assert_eq!(test.row(0), table.row(7500));
}

#[test]
fn load_errors_are_specific() {
    let mut empty = tempfile::NamedTempFile::new().unwrap();
    writeln!(empty, "{}", Schema::table1().labels().collect::<Vec<_>>().join(",")).unwrap();
    assert!(matches!(load_table(empty.path(), &Schema::table1()), Err(Error::NoRows)));

    let mut missing = tempfile::NamedTempFile::new().unwrap();
    let schema1 = Schema::table1();
    let labels: Vec<&str> = schema1.labels().filter(|l| *l != "Q").collect();
    writeln!(missing, "{}", labels.join(",")).unwrap();
    writeln!(missing, "{}", vec!["1"; labels.len()].join(",")).unwrap();
    match load_table(missing.path(), &Schema::table1()) {
        Err(Error::MissingColumn(l)) => assert_eq!(l, "Q"),
        other => panic!("unexpected {other:?}"),
    }

    let mut bad = tempfile::NamedTempFile::new().unwrap();
    writeln!(bad, "A,Y").unwrap();
    writeln!(bad, "1,2").unwrap();
    writeln!(bad, "1,oops").unwrap();
    let schema = Schema::infer(&["A".into(), "Y".into()], "Y").unwrap();
    match load_table(bad.path(), &schema) {
        Err(Error::Parse { row, column, .. }) => assert_eq!((row, column.as_str()), (2, "Y")),
        other => panic!("unexpected {other:?}"),
    }

    let err = load_table("/nonexistent/plant.csv", &schema).unwrap_err();
    assert!(err.to_string().contains("/nonexistent/plant.csv"));
}

#[test]
fn csv_round_trip_is_exact() {
    let (table, _) = generate_synthetic(&SynthConfig { n: 300, ..SynthConfig::default() }, 3).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.csv");
    table.save_csv(&path).unwrap();
    assert_eq!(load_table(&path, &Schema::table1()).unwrap(), table);
}

#[test]
fn split_bounds() {
    let t = one_column("Y", vec![1.0, 2.0]);
    let (a, b) = split(&t, 1).unwrap();
    assert_eq!((a.n_rows(), b.n_rows()), (1, 1));
    assert!(split(&t, 2).is_err());
    assert!(split(&t, 0).is_err());
}

#[test]
fn cleaning_hand_cases() {
    let mut v = vec![1.0; 40];
    v[20] = 100.0;
    let out = clean_column(&v, 3.0, 5);
    assert_eq!(out, vec![1.0; 40]);

    // Outlier at index 3 has only three predecessors.
    let mut w: Vec<f64> = (0..60).map(|i| (i % 4) as f64).collect();
    w[3] = 500.0;
    let out = clean_column(&w, 3.0, 5);
    assert_eq!(out[3], (0.0 + 1.0 + 2.0) / 3.0);
    assert_eq!(out[..3], w[..3]);
    assert_eq!(out[4..], w[4..]);

    let calm: Vec<f64> = (0..50).map(|i| (i as f64 * 0.3).sin()).collect();
    assert_eq!(clean_column(&calm, 3.0, 5), calm);
    assert_eq!(clean_column(&[2.0; 10], 3.0, 5), vec![2.0; 10]);
}

#[test]
fn cleaning_a_single_spike_is_idempotent() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..20 {
        let mut v: Vec<f64> = (0..500).map(|_| rng.random_range(-1.0..1.0)).collect();
        let at = rng.random_range(10..490);
        v[at] = 50.0;
        let once = clean_column(&v, 3.0, 5);
        assert!(once[at].abs() <= 1.0);
        assert_eq!(clean_column(&once, 3.0, 5), once);
    }
}

#[test]
fn plant_bounds_normalize_to_unit() {
    let t = one_column("Y", vec![21.378, 37.241]);
    let (n, p) = normalize(&t).unwrap();
    assert_eq!(n.column("Y").unwrap(), &[0.0, 1.0]);
    let mid = denormalize(&[0.5], &p, "Y").unwrap()[0];
    assert!((mid - 29.3095).abs() < 1e-12);
    assert!(denormalize(&[0.5], &p, "NOx").is_err());
    assert!(matches!(normalize(&one_column("Y", vec![3.0; 4])), Err(Error::ConstantColumn(_))));
}

proptest! {
    #[test]
    fn normalization_contract(v in prop::collection::vec(-1e6..1e6f64, 2..200)) {
        let (lo, hi) = column_bounds(&v);
        prop_assume!(hi > lo);
        let (n, p) = normalize(&one_column("Y", v.clone())).unwrap();
        let col = n.column("Y").unwrap();
        prop_assert!(col.iter().all(|x| (0.0..=1.0).contains(x)));
        prop_assert!(col.contains(&0.0) && col.contains(&1.0));
        let back = denormalize(col, &p, "Y").unwrap();
        for (a, b) in back.iter().zip(&v) {
            prop_assert!(common::rel_close(*a, *b, 1e-12) || (a - b).abs() < 1e-12 * (hi - lo));
        }
    }

    #[test]
    fn cleaning_keeps_shape_and_inliers(v in prop::collection::vec(-100.0..100.0f64, 1..300), k in 1.0..4.0f64) {
        let out = clean_column(&v, k, 5);
        prop_assert_eq!(out.len(), v.len());
        let n = v.len() as f64;
        let m = v.iter().sum::<f64>() / n;
        let sd = (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n).sqrt();
        for (o, x) in out.iter().zip(&v) {
            if (x - m).abs() <= k * sd {
                prop_assert_eq!(o, x);
            }
        }
    }
}

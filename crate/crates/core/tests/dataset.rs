mod common;

use common::{small, small_config};
use proptest::prelude::*;
use sths_core::dataset::{
    generate_synthetic, load_dataset, save_dataset, validate_dataset, zipf_counts, ClassId, FeatureFormat, Imbalance,
};
use sths_core::eval::Oracle;

#[test]
fn generator_is_a_pure_function_of_its_config() {
    assert_eq!(small(11), small(11));
    assert_ne!(small(11).test_unseen.features, small(12).test_unseen.features);
}

#[test]
fn zipf_pool_follows_the_law() {
    let mut c = small_config(3);
    c.n_unseen = 10;
    c.unseen = Imbalance::Zipf {
        exponent: 1.0,
        total: 1000,
    };
    let ds = generate_synthetic(&c).unwrap();
    let counts = Oracle::new(&ds).true_unseen_counts().unwrap();
    let want = zipf_counts(1.0, 1000, 10);
    let got: Vec<usize> = ds.split.unseen.iter().map(|u| counts[u.index()]).collect();
    assert_eq!(got, want);
    assert_eq!(want.iter().sum::<usize>(), 1000);
    assert!(want.windows(2).all(|w| w[0] >= w[1]));
    assert!(validate_dataset(&ds).is_valid());
}

#[test]
fn zero_count_class_is_rejected() {
    let mut c = small_config(3);
    c.unseen = Imbalance::Zipf {
        exponent: 3.0,
        total: 5,
    };
    assert!(generate_synthetic(&c).is_err());
}

#[test]
fn save_and_load_round_trip() {
    let ds = small(21);
    for format in [FeatureFormat::Csv, FeatureFormat::F32] {
        let dir = tempfile::tempdir().unwrap();
        save_dataset(&ds, dir.path(), format).unwrap();
        assert_eq!(load_dataset(dir.path()).unwrap(), ds);
    }
}

#[test]
fn missing_directory_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    assert!(load_dataset(dir.path().join("absent")).is_err());
}

#[test]
fn split_is_disjoint_and_complete() {
    let ds = small(4);
    let mut all = ds.split.all();
    all.sort_unstable();
    assert_eq!(all, (0..ds.n_classes()).map(ClassId).collect::<Vec<_>>());
    assert!(ds.train_seen.labels.as_ref().unwrap().iter().all(|c| ds.split.is_seen(*c)));
    assert!(Oracle::new(&ds).unseen_labels().iter().all(|c| ds.split.is_unseen(*c)));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn generated_datasets_validate(seed in any::<u64>(), exponent in 0.0f64..1.5, n_unseen in 1usize..6) {
        let mut c = small_config(seed);
        c.n_unseen = n_unseen;
        c.unseen = Imbalance::Zipf { exponent, total: 20 * n_unseen };
        let ds = generate_synthetic(&c).unwrap();
        prop_assert!(validate_dataset(&ds).is_valid());
        prop_assert_eq!(ds.test_unseen.len(), 20 * n_unseen);
    }
}

mod common;

use common::{check_split, random_binary_matrix, rng};
use mtp::dataset::{InteractionData, ScoreType, Triplet};
use mtp::splitter::{
    make_split, predictable_pairs, Partition, SplitConfig, SplitError, ValidationSetting,
};
use proptest::prelude::*;
use rand::Rng;

const SETTINGS: [ValidationSetting; 4] = [
    ValidationSetting::A,
    ValidationSetting::B,
    ValidationSetting::C,
    ValidationSetting::D,
];

fn full(n: usize, m: usize) -> InteractionData {
    let t = (0..n)
        .flat_map(|i| (0..m).map(move |j| Triplet::new(i, j, ((i + j) % 2) as f64)))
        .collect();
    InteractionData::new(n, m, t, ScoreType::Binary).unwrap()
}

#[test]
fn invariants_hold_on_random_sparse_matrices() {
    let mut r = rng(2024);
    let mut checked = 0;
    for trial in 0..150u64 {
        let n = r.random_range(2..30);
        let m = r.random_range(2..30);
        let density = r.random_range(0.1..1.0);
        let data = random_binary_matrix(&mut r, n, m, density);
        for setting in SETTINGS {
            let cfg = SplitConfig::new(setting, 0.25, 0.1, trial);
            match make_split(&data, &cfg) {
                Ok(split) => {
                    check_split(&data, &split)
                        .unwrap_or_else(|e| panic!("trial {trial} {setting}: {e}"));
                    assert_eq!(make_split(&data, &cfg).unwrap(), split);
                    checked += 1;
                }
                Err(SplitError::EmptyPartition(_)) => {}
                Err(e) => panic!("trial {trial} {setting}: unexpected {e}"),
            }
        }
    }
    assert!(checked >= 400, "only {checked} splits checked");
}

#[test]
fn fully_observed_b_and_c_cover_other_axis() {
    let data = full(12, 9);
    for (setting, seed) in [(ValidationSetting::B, 1), (ValidationSetting::C, 2)] {
        let split = make_split(&data, &SplitConfig::new(setting, 0.25, 0.1, seed)).unwrap();
        check_split(&data, &split).unwrap();
        let t = data.triplets();
        let train_targets: std::collections::HashSet<_> =
            split.train.iter().map(|&k| t[k].target).collect();
        let train_instances: std::collections::HashSet<_> =
            split.train.iter().map(|&k| t[k].instance).collect();
        for &k in &split.test {
            if setting == ValidationSetting::B {
                assert!(train_targets.contains(&t[k].target));
            } else {
                assert!(train_instances.contains(&t[k].instance));
            }
        }
    }
}

#[test]
fn counting_examples() {
    let b = make_split(
        &full(4, 3),
        &SplitConfig::new(ValidationSetting::B, 0.25, 0.0, 7),
    )
    .unwrap();
    assert_eq!((b.test.len(), b.train.len()), (3, 9));
    let t = full(4, 3);
    let held: std::collections::HashSet<_> =
        b.test.iter().map(|&k| t.triplets()[k].instance).collect();
    assert_eq!(held.len(), 1);
    assert_eq!(predictable_pairs(&t, &b).unwrap().len(), 3);

    let eight = full(2, 4);
    let a = make_split(
        &eight,
        &SplitConfig::new(ValidationSetting::A, 0.25, 0.0, 7),
    )
    .unwrap();
    assert_eq!((a.test.len(), a.train.len()), (2, 6));
    assert_eq!(predictable_pairs(&eight, &a).unwrap().len(), 2);

    let d = make_split(
        &full(4, 4),
        &SplitConfig::new(ValidationSetting::D, 0.25, 0.0, 7),
    )
    .unwrap();
    assert_eq!((d.test.len(), d.discarded.len(), d.train.len()), (1, 6, 9));
    assert_eq!(d.partition(Partition::Validation).len(), 0);
}

#[test]
fn different_seeds_give_different_splits() {
    let mut r = rng(99);
    let data = random_binary_matrix(&mut r, 20, 15, 0.5);
    for setting in SETTINGS {
        let base = make_split(&data, &SplitConfig::new(setting, 0.25, 0.1, 0)).unwrap();
        let differing = (1..=100)
            .filter(|&s| {
                make_split(&data, &SplitConfig::new(setting, 0.25, 0.1, s)).unwrap() != base
            })
            .count();
        assert!(
            differing >= 95,
            "{setting}: only {differing}/100 seeds changed the split"
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn any_successful_split_satisfies_invariants(
        seed in any::<u64>(),
        n in 2usize..20,
        m in 2usize..20,
        density in 0.2f64..1.0,
        test_fraction in 0.05f64..0.5,
        val_fraction in 0.0f64..0.3,
        which in 0usize..4,
    ) {
        let mut r = rng(seed);
        let data = random_binary_matrix(&mut r, n, m, density);
        let cfg = SplitConfig::new(SETTINGS[which], test_fraction, val_fraction, seed);
        match make_split(&data, &cfg) {
            Ok(split) => prop_assert_eq!(check_split(&data, &split), Ok(())),
            Err(SplitError::EmptyPartition(_)) => {}
            Err(e) => prop_assert!(false, "unexpected error {}", e),
        }
    }
}

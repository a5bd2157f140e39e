use pareto_rl::pareto::{dominates, dominates_slice, nd_fraction, nd_set, nd_set_sorted, RewardVector};
use proptest::prelude::*;

/// Pairwise scan written independently of the library.
fn oracle(batch: &[Vec<f64>]) -> Vec<usize> {
    let beats = |a: &[f64], b: &[f64]| {
        let mut strict = false;
        for (x, y) in a.iter().zip(b) {
            if x < y {
                return false;
            }
            if x > y {
                strict = true;
            }
        }
        strict
    };
    (0..batch.len())
        .filter(|&i| !(0..batch.len()).any(|j| beats(&batch[j], &batch[i])))
        .collect()
}

fn to_rv(batch: &[Vec<f64>]) -> Vec<RewardVector> {
    batch.iter().map(|v| RewardVector::new(v.clone()).unwrap()).collect()
}

/// Batches drawn from a small grid so ties and duplicates are common.
fn batch_strategy() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (2usize..=5).prop_flat_map(|k| {
        prop::collection::vec(prop::collection::vec((0u8..5).prop_map(|v| v as f64 / 4.0), k), 1..=40)
    })
}

fn triple_strategy() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>)> {
    (1usize..=4).prop_flat_map(|k| {
        let v = || prop::collection::vec((0u8..4).prop_map(f64::from), k);
        (v(), v(), v())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn nd_set_matches_pairwise_oracle(batch in batch_strategy()) {
        let mask = nd_set(&to_rv(&batch)).unwrap();
        prop_assert_eq!(mask.selected(), &oracle(&batch)[..]);
    }

    #[test]
    fn sorted_variant_agrees(batch in batch_strategy()) {
        let rv = to_rv(&batch);
        prop_assert_eq!(nd_set(&rv).unwrap(), nd_set_sorted(&rv).unwrap());
    }

    #[test]
    fn dominance_is_a_strict_partial_order((a, b, c) in triple_strategy()) {
        prop_assert!(!dominates_slice(&a, &a).unwrap());
        let ab = dominates_slice(&a, &b).unwrap();
        let ba = dominates_slice(&b, &a).unwrap();
        prop_assert!(!(ab && ba));
        if ab && dominates_slice(&b, &c).unwrap() {
            prop_assert!(dominates_slice(&a, &c).unwrap());
        }
    }

    #[test]
    fn nd_set_invariant_under_monotone_maps_and_permutation(
        batch in batch_strategy(),
        seed in any::<u64>(),
    ) {
        let base = nd_set(&to_rv(&batch)).unwrap();
        // strictly increasing per-objective transform
        let mapped: Vec<Vec<f64>> = batch
            .iter()
            .map(|v| v.iter().enumerate().map(|(k, x)| (x * (k as f64 + 1.0)).exp() - 3.0).collect())
            .collect();
        prop_assert_eq!(&nd_set(&to_rv(&mapped)).unwrap(), &base);

        let mut order: Vec<usize> = (0..batch.len()).collect();
        let mut s = seed;
        for i in (1..order.len()).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            order.swap(i, (s >> 33) as usize % (i + 1));
        }
        let permuted: Vec<Vec<f64>> = order.iter().map(|&i| batch[i].clone()).collect();
        let mut back: Vec<usize> = nd_set(&to_rv(&permuted))
            .unwrap()
            .selected()
            .iter()
            .map(|&p| order[p])
            .collect();
        back.sort_unstable();
        prop_assert_eq!(&back[..], base.selected());
    }

    #[test]
    fn nd_fraction_is_positive_and_bounded(batch in batch_strategy()) {
        let f = nd_fraction(&to_rv(&batch)).unwrap();
        prop_assert!(f > 0.0 && f <= 1.0);
    }
}

#[test]
fn duplicates_are_all_kept() {
    let batch = vec![vec![0.5, 0.5]; 6];
    assert_eq!(nd_set(&to_rv(&batch)).unwrap().count(), 6);
}

#[test]
fn mixed_lengths_rejected() {
    let a = RewardVector::new(vec![1.0, 2.0]).unwrap();
    let b = RewardVector::new(vec![1.0]).unwrap();
    assert!(dominates(&a, &b).is_err());
    assert!(nd_set(&[a, b]).is_err());
}

#[test]
fn empty_batch_rejected() {
    assert!(nd_set(&[]).is_err());
}

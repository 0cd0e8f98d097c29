//! Exact randomization identities checked by full enumeration.

mod common;

use neyfact::exact;
use neyfact::sim::{enumerate_randomizations, PotentialOutcomesTable};
use neyfact::{ContrastMatrix, FactorialDesign};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn four_unit_example() {
    let d = FactorialDesign::with_factors(1).unwrap();
    let t = PotentialOutcomesTable::from_columns(d, vec![vec![1, 1, 0, 0], vec![1, 0, 1, 0]]).unwrap();
    let dist = enumerate_randomizations(&t, &[2, 2], &Default::default()).unwrap();
    assert_eq!(dist.assignments(), 6);
    assert_eq!(dist.mean_effects()[1], exact::int(0));
    common::check_identities(&t, &[2, 2]).unwrap();
}

#[test]
fn constant_effects_close_the_gap() {
    // Y(2) = Y(1) for every unit, so unit effects are all zero.
    let d = FactorialDesign::with_factors(1).unwrap();
    let col = vec![1, 0, 1, 1, 0, 0];
    let t = PotentialOutcomesTable::from_columns(d, vec![col.clone(), col]).unwrap();
    let l = ContrastMatrix::new(t.design());
    let dist = enumerate_randomizations(&t, &[3, 3], &Default::default()).unwrap();
    assert_eq!(dist.mean_neyman_variance().unwrap(), dist.effect_covariance()[1][1]);
    assert!(exact::is_zero(&t.heterogeneity_exact(&l)[1]));
    common::check_identities(&t, &[3, 3]).unwrap();
}

#[test]
fn permuted_tables_stay_unbiased() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let base = common::random_table(&mut rng, 2, 8);
    let l = ContrastMatrix::new(base.design());
    for seed in 0..5 {
        let t = neyfact::sim::permute_population(&base, seed);
        let dist = enumerate_randomizations(&t, &[2, 2, 2, 2], &Default::default()).unwrap();
        assert_eq!(dist.mean_effects(), base.tau_fp_exact(&l));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn identities_hold(seed in any::<u64>(), k in 1usize..=2, extra in 0usize..=4, floor_two in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let j = 1usize << k;
        let min = if floor_two { 2 } else { 1 };
        let n = (min as usize * j + extra).min(8).max(min as usize * j);
        let table = common::random_table(&mut rng, k, n);
        let arms = common::random_arms(&mut rng, j, n, min);
        prop_assert_eq!(common::check_identities(&table, &arms), Ok(()));
    }
}

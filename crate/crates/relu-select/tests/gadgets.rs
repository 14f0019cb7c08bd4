mod common;

use common::{check_gadget, comparison_closed_form, GADGETS};
use proptest::prelude::*;
use relu_select::primitives::{self, Delta};

const TRIALS: usize = 10_000;

macro_rules! gadget_test {
    ($($name:ident),* $(,)?) => {
        $(
            #[test]
            fn $name() {
                let seed = GADGETS.iter().position(|g| *g == stringify!($name)).unwrap() as u64;
                assert_eq!(check_gadget(stringify!($name), TRIALS, 100 + seed), Ok(TRIALS));
            }
        )*
    };
}

gadget_test!(
    max,
    comparison,
    nonzero_counter,
    masking,
    filtering,
    indicator_product,
    rank_selection,
    nonzero_shortlist,
    rank_computing,
    rank_scaling,
    ceiling,
    hashing,
    block_extraction,
);

#[test]
fn every_gadget_has_a_check() {
    assert_eq!(GADGETS.len(), 13);
    for g in GADGETS {
        assert_eq!(check_gadget(g, 10, 7), Ok(10), "{g}");
    }
}

#[test]
fn builders_reject_zero_sizes() {
    let delta = Delta::new(0.125).unwrap();
    assert!(primitives::build_nonzero_counter(delta, 0).is_err());
    assert!(primitives::build_rank_selection(delta, 3, &[4]).is_err());
    assert!(primitives::build_rank_selection(delta, 3, &[0]).is_err());
    assert!(primitives::build_rank_selection(delta, 3, &[]).is_err());
    assert!(primitives::build_hashing(&[0, 2], 2).is_err());
    assert!(primitives::build_block_extraction(delta, 0, 2).is_err());
    assert!(Delta::new(0.0).is_err());
    assert!(Delta::new(-1.0).is_err());
}

#[test]
fn delta_rounds_up_to_a_power_of_two() {
    assert_eq!(Delta::power_of_two_at_least(0.3).unwrap().value(), 0.5);
    assert_eq!(Delta::power_of_two_at_least(0.25).unwrap().value(), 0.25);
    assert_eq!(Delta::power_of_two_at_least(1e-6).unwrap().value(), 2f64.powi(-19));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn comparison_stays_in_unit_interval(a in -5.0f64..5.0, b in -5.0f64..5.0, k in 1i32..12) {
        let delta = 2f64.powi(-k);
        let g = primitives::build_comparison(Delta::new(delta).unwrap()).unwrap();
        let v = g.evaluate(&[a, b])[0];
        prop_assert!((0.0..=1.0).contains(&v));
        prop_assert!((v - comparison_closed_form(a, b, delta)).abs() <= 1e-9);
    }

    #[test]
    fn indicator_product_is_bounded_by_its_input(x in -3.0f64..3.0, s in -4.0f64..4.0) {
        let g = primitives::build_indicator_product().unwrap();
        let v = g.evaluate(&[x, s])[0];
        prop_assert!(v.abs() <= x.abs() + 1e-12);
    }

    #[test]
    fn rank_selection_is_bounded_for_any_input(
        x in prop::collection::vec(-2.0f64..2.0, 1..8),
        r in 0.0f64..9.0,
    ) {
        let n = x.len();
        let g = primitives::build_rank_selection_runtime(Delta::new(1.0 / 64.0).unwrap(), n, 1).unwrap();
        let mut input = x.clone();
        input.push(r);
        let v = g.evaluate(&input)[0];
        let norm = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        prop_assert!(v.abs() <= n as f64 * norm + 1e-9);
    }
}

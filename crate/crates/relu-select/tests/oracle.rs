mod common;

use common::{brute_rank, rng, separated, uniform};
use rand::seq::SliceRandom;
use relu_select::oracle::{
    self, is_delta_separated, median, rank_k, run_algorithm1_2_max, run_algorithm3, run_algorithm4,
    separation_probability_check, Halt, OracleError,
};
use relu_select::params::{MaxSchedule, SparsifierSchedule};
use relu_select::primitives::{build_rank_selection, Delta};

#[test]
fn order_statistic_examples() {
    let x = [0.9, 0.1, 0.6, 0.3];
    assert_eq!(rank_k(&x, 2), Ok(0.3));
    assert_eq!(rank_k(&x, 1), Ok(0.1));
    assert_eq!(rank_k(&x, 4), Ok(0.9));
    assert_eq!(rank_k(&[0.5], 1), Ok(0.5));
    assert_eq!(rank_k(&x, 0), Err(OracleError::RankOutOfRange { k: 0, len: 4 }));
    assert_eq!(median(&[0.1, 0.2, 0.3, 0.4]), Ok(0.2));
    assert_eq!(median(&[0.7]), Ok(0.7));
    assert_eq!(oracle::max(&x), Ok(0.9));
    assert!(is_delta_separated(&[0.1, 0.5, 0.9], 0.1));
    assert!(!is_delta_separated(&[0.05, 0.5], 0.1));
    assert!(is_delta_separated(&[0.0; 5], 0.4));
}

#[test]
fn rank_oracle_agrees_with_sorting_network() {
    let mut r = rng(31);
    let delta = Delta::new(2f64.powi(-10)).unwrap();
    let mut nets = Vec::new();
    for d in 1..=10 {
        let ranks: Vec<usize> = (1..=d).collect();
        nets.push(build_rank_selection(delta, d, &ranks).unwrap());
    }
    for t in 0..10_000 {
        let d = t % 10 + 1;
        let x = separated(&mut r, d, delta.value());
        let out = nets[d - 1].evaluate(&x);
        for k in 1..=d {
            assert_eq!(out[k - 1], rank_k(&x, k).unwrap());
            assert_eq!(out[k - 1], brute_rank(&x, k));
        }
    }
}

#[test]
fn separation_failure_rate_is_below_the_bound() {
    let mut r = rng(32);
    let trials = 100_000;
    for (d, delta) in [(10, 1e-6), (2, 0.3), (5, 0.01)] {
        let rate = separation_probability_check(d, delta, trials, &mut r);
        let bound = 3.0 * (d * d) as f64 * delta;
        let slack = 3.0 * (bound.min(1.0) * (1.0 - bound.min(1.0)) / trials as f64).sqrt() + 1.0 / trials as f64;
        assert!(rate <= bound + slack, "d = {d}, δ = {delta}: {rate} > {bound}");
    }
    assert_eq!(separation_probability_check(10, 0.0, 1000, &mut r), 0.0);
}

#[test]
fn algorithm3_succeeds_with_high_probability() {
    let mut r = rng(33);
    let d = 1000;
    let base = uniform(&mut r, d);
    let trials = 300;
    let mut ok = 0;
    for _ in 0..trials {
        let mut x = base.clone();
        x.shuffle(&mut r);
        let run = run_algorithm3(&x, 0.25).unwrap();
        if run.success {
            ok += 1;
            assert_eq!(run.result, Some(median(&x).unwrap()));
        }
    }
    assert!(ok as f64 / trials as f64 >= 0.99);
}

#[test]
fn algorithm3_at_tiny_d_is_never_wrong() {
    let mut r = rng(34);
    for _ in 0..2000 {
        let x = uniform(&mut r, 8);
        let run = run_algorithm3(&x, 0.05).unwrap();
        if run.success {
            assert_eq!(run.result, Some(median(&x).unwrap()));
        } else {
            assert_eq!(run.result, None);
        }
    }
}

#[test]
fn algorithm4_trace_invariants() {
    let mut r = rng(35);
    for d in [64, 256, 1024] {
        let schedule = SparsifierSchedule::new(d).unwrap();
        for _ in 0..20 {
            let x = uniform(&mut r, d);
            let record = run_algorithm4(&x, &schedule);
            let med = median(&x).unwrap();
            assert_eq!(record.median, med);
            for (i, it) in record.iterations.iter().enumerate() {
                let [contiguous, keeps, bounded] = record.clauses[i];
                assert!(contiguous);
                assert_eq!(keeps, it.e_minus <= med && med <= it.e_plus);
                if record.success() {
                    assert!(keeps && bounded);
                }
            }
            match record.halt {
                Some(Halt::MedianLost { iteration }) => assert!(!record.clauses[iteration - 1][1]),
                Some(Halt::Fail { iteration, .. }) => assert_eq!(record.iterations.len(), iteration - 1),
                None => assert_eq!(record.iterations.len(), 4),
            }
        }
    }
}

#[test]
fn algorithm4_fails_on_starved_blocks() {
    let d = 256;
    let schedule = SparsifierSchedule::new(d).unwrap();
    let x: Vec<f64> = (1..=d).map(|i| i as f64 / (d + 1) as f64).collect();
    let record = run_algorithm4(&x, &schedule);
    assert!(record.halt.is_some());
    assert!(record.output().is_none());
}

#[test]
fn max_reference_succeeds_and_is_sparse() {
    let mut r = rng(36);
    let d = 10_000;
    let schedule = MaxSchedule::new(d).unwrap();
    let trials = 100;
    let mut ok = 0;
    for _ in 0..trials {
        let x = uniform(&mut r, d);
        let run = run_algorithm1_2_max(&x, 1e-12, &schedule);
        let target = (d as f64).powf(0.1);
        let s = run.sparsity() as f64;
        assert!(s >= 1.0 && s <= 20.0 * target, "sparsity {s}");
        if run.success {
            ok += 1;
            assert_eq!(run.result, Some(oracle::max(&x).unwrap()));
        }
    }
    assert!(ok as f64 / trials as f64 >= 0.95);
}

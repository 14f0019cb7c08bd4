#![allow(dead_code)]

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use relu_select::primitives::{self, Delta, Gadget};

pub const TOL: f64 = 1e-9;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(rng: &mut impl Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.gen::<f64>()).collect()
}

/// `n` distinct values of `[δ, 1 − δ]`, pairwise at least `δ` apart, in
/// random order.
pub fn separated(rng: &mut impl Rng, n: usize, delta: f64) -> Vec<f64> {
    let slots = ((1.0 - 2.0 * delta) / (2.0 * delta)).floor() as usize;
    assert!(slots >= n, "not enough room for {n} values at δ = {delta}");
    let mut ks: Vec<usize> = rand::seq::index::sample(rng, slots, n).into_vec();
    ks.shuffle(rng);
    ks.into_iter().map(|k| (k + 1) as f64 * 2.0 * delta + rng.gen_range(0.0..delta)).collect()
}

/// A separated vector of length `n` with roughly a `zeros` fraction of zeros.
pub fn sparse_separated(rng: &mut impl Rng, n: usize, delta: f64, zeros: f64) -> Vec<f64> {
    let mut x = separated(rng, n, delta);
    for v in x.iter_mut() {
        if rng.gen_bool(zeros) {
            *v = 0.0;
        }
    }
    x
}

pub fn sorted(x: &[f64]) -> Vec<f64> {
    let mut v = x.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

pub fn brute_rank(x: &[f64], k: usize) -> f64 {
    sorted(x)[k - 1]
}

pub fn brute_median(x: &[f64]) -> f64 {
    brute_rank(x, x.len().div_ceil(2))
}

pub fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= TOL
}

pub fn all_close(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(u, v)| close(*u, *v))
}

pub fn comparison_closed_form(a: f64, b: f64, delta: f64) -> f64 {
    if a <= b {
        0.0
    } else if a - b >= delta {
        1.0
    } else {
        (a - b) / delta
    }
}

/// The thirteen elementary networks, in the order they are introduced.
pub const GADGETS: [&str; 13] = [
    "max",
    "comparison",
    "nonzero_counter",
    "masking",
    "filtering",
    "indicator_product",
    "rank_selection",
    "nonzero_shortlist",
    "rank_computing",
    "rank_scaling",
    "ceiling",
    "hashing",
    "block_extraction",
];

/// Lemma-level bounds, `(width, hidden layers, max |weight|)`, for a gadget
/// instance.
fn check_stats(g: &Gadget, width: usize, hidden: usize, weight: f64) -> Result<(), String> {
    let s = g.net.stats();
    g.contract.check(&s)?;
    if s.width > width || s.hidden_layers() != hidden || s.max_abs_weight > weight * (1.0 + 1e-12) {
        return Err(format!(
            "stats (width {}, hidden {}, |w| {:e}) exceed ({width}, {hidden}, {weight:e})",
            s.width,
            s.hidden_layers(),
            s.max_abs_weight
        ));
    }
    Ok(())
}

fn mismatch(name: &str, input: &[f64], got: &[f64], want: &[f64]) -> String {
    format!("{name}: input {input:?} gave {got:?}, expected {want:?}")
}

struct Cache<K, V>(HashMap<K, V>);

impl<K: std::hash::Hash + Eq + Clone, V> Cache<K, V> {
    fn new() -> Self {
        Cache(HashMap::new())
    }

    fn get(&mut self, k: &K, make: impl FnOnce() -> V) -> &V {
        self.0.entry(k.clone()).or_insert_with(make)
    }
}

fn delta_of(rng: &mut impl Rng) -> Delta {
    Delta::new(2f64.powi(-rng.gen_range(5..=9))).unwrap()
}

/// Runs `trials` random precondition-respecting trials of one gadget
/// against its closed form and checks its size bounds. Returns the number
/// of trials run.
pub fn check_gadget(name: &str, trials: usize, seed: u64) -> Result<usize, String> {
    let mut rng = rng(seed);
    match name {
        "max" => {
            let g = primitives::build_max().unwrap();
            check_stats(&g, 3, 1, 1.0)?;
            for _ in 0..trials {
                let x = [rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0)];
                let got = g.evaluate(&x);
                let want = [x[0].max(x[1])];
                if !all_close(&got, &want) {
                    return Err(mismatch(name, &x, &got, &want));
                }
            }
        }
        "comparison" => {
            let mut cache = Cache::new();
            for _ in 0..trials {
                let k = rng.gen_range(5..=9);
                let delta = 2f64.powi(-k);
                let g = cache.get(&k, || primitives::build_comparison(Delta::new(delta).unwrap()).unwrap());
                let a = rng.gen_range(-1.0..1.0);
                let b = match rng.gen_range(0..3) {
                    0 => a - rng.gen_range(0.0..delta),
                    1 => a,
                    _ => rng.gen_range(-1.0..1.0),
                };
                let got = g.evaluate(&[a, b]);
                let want = [comparison_closed_form(a, b, delta)];
                if !all_close(&got, &want) {
                    return Err(mismatch(name, &[a, b], &got, &want));
                }
            }
            for (_, g) in cache.0.iter() {
                check_stats(g, 2, 1, g.contract.declared_weight_bound)?;
            }
        }
        "nonzero_counter" => {
            let mut cache = Cache::new();
            for _ in 0..trials {
                let delta = delta_of(&mut rng);
                let n = rng.gen_range(1..=12);
                let g = cache.get(&(n, delta.value().to_bits()), || {
                    let g = primitives::build_nonzero_counter(delta, n).unwrap();
                    check_stats(&g, 2 * n, 1, delta.inv()).map(|_| g)
                });
                let g = g.as_ref().map_err(|e| e.clone())?;
                let x: Vec<f64> = (0..n)
                    .map(|_| if rng.gen_bool(0.4) { 0.0 } else { rng.gen_range(delta.value()..3.0) })
                    .collect();
                let got = g.evaluate(&x);
                let want = [x.iter().filter(|v| **v > 0.0).count() as f64];
                if !all_close(&got, &want) {
                    return Err(mismatch(name, &x, &got, &want));
                }
            }
        }
        "masking" | "filtering" => {
            let filtering = name == "filtering";
            let mut cache = Cache::new();
            for _ in 0..trials {
                let delta = delta_of(&mut rng);
                let dv = delta.value();
                let n = rng.gen_range(1..=12);
                let g = cache.get(&(n, dv.to_bits()), || {
                    let g = if filtering {
                        primitives::build_filtering(delta, n).unwrap()
                    } else {
                        primitives::build_masking(delta, n).unwrap()
                    };
                    let bound = if filtering { delta.inv() + 1.0 } else { delta.inv() };
                    check_stats(&g, 4 * n, 1, bound).map(|_| g)
                });
                let g = g.as_ref().map_err(|e| e.clone())?;
                let (l, u) = loop {
                    let a = rng.gen_range(0.0..1.0);
                    let b = rng.gen_range(0.0..1.0);
                    if a < b {
                        break (a, b);
                    }
                };
                let admissible = |v: f64| !((l - dv < v && v < l) || (u < v && v < u + dv));
                let mut x = Vec::with_capacity(n);
                while x.len() < n {
                    let v = match rng.gen_range(0..4) {
                        0 => l,
                        1 => u,
                        _ => rng.gen_range(0.0..1.0),
                    };
                    if admissible(v) {
                        x.push(v);
                    }
                }
                let mut input = x.clone();
                input.extend([u, l]);
                let got = g.evaluate(&input);
                let want: Vec<f64> = x
                    .iter()
                    .map(|&v| {
                        let inside = l <= v && v <= u;
                        match (filtering, inside) {
                            (_, false) => 0.0,
                            (true, true) => v,
                            (false, true) => 1.0,
                        }
                    })
                    .collect();
                if !all_close(&got, &want) {
                    return Err(mismatch(name, &input, &got, &want));
                }
            }
        }
        "indicator_product" => {
            let g = primitives::build_indicator_product().unwrap();
            check_stats(&g, 4, 1, 1.0)?;
            for _ in 0..trials {
                let x = rng.gen_range(0.0..=1.0);
                let s = rng.gen_range(-3i32..=3) as f64;
                let got = g.evaluate(&[x, s]);
                let want = [if s == 0.0 { x } else { 0.0 }];
                if !all_close(&got, &want) {
                    return Err(mismatch(name, &[x, s], &got, &want));
                }
            }
        }
        "rank_selection" => {
            let mut runtime = Cache::new();
            let mut baked = Cache::new();
            for t in 0..trials {
                let delta = delta_of(&mut rng);
                let n = rng.gen_range(1..=10);
                let p = rng.gen_range(1..=3);
                let x = sparse_separated(&mut rng, n, delta.value(), 0.25);
                let ranks: Vec<usize> = (0..p).map(|_| rng.gen_range(1..=n)).collect();
                let want: Vec<f64> = ranks.iter().map(|&r| brute_rank(&x, r)).collect();
                let got = if t % 4 == 0 {
                    let g = baked.get(&(ranks.clone(), n, delta.value().to_bits()), || {
                        let g = primitives::build_rank_selection(delta, n, &ranks).unwrap();
                        let w = (2 * n * n + 2 * n + 2 * p).max(4 * p * n);
                        check_stats(&g, w, 2, delta.inv().max(n as f64)).map(|_| g)
                    });
                    g.as_ref().map_err(|e| e.clone())?.evaluate(&x)
                } else {
                    let g = runtime.get(&(n, p, delta.value().to_bits()), || {
                        let g = primitives::build_rank_selection_runtime(delta, n, p).unwrap();
                        let w = (2 * n * n + 2 * n + 2 * p).max(4 * p * n);
                        check_stats(&g, w, 2, delta.inv().max(2.0)).map(|_| g)
                    });
                    let mut input = x.clone();
                    input.extend(ranks.iter().map(|&r| r as f64));
                    g.as_ref().map_err(|e| e.clone())?.evaluate(&input)
                };
                if !all_close(&got, &want) {
                    return Err(format!("{} (ranks {ranks:?})", mismatch(name, &x, &got, &want)));
                }
            }
        }
        "nonzero_shortlist" => {
            let mut cache = Cache::new();
            for _ in 0..trials {
                let delta = delta_of(&mut rng);
                let n = rng.gen_range(1..=12);
                let p = rng.gen_range(1..=4);
                let g = cache.get(&(n, p, delta.value().to_bits()), || {
                    let g = primitives::build_nonzero_shortlist(delta, n, p).unwrap();
                    check_stats(&g, 4 * (p + 2) * n + 8, 3, (2.0 * delta.inv()).max(p as f64)).map(|_| g)
                });
                let g = g.as_ref().map_err(|e| e.clone())?;
                let x = sparse_separated(&mut rng, n, delta.value(), 0.3);
                let mut ends: Vec<f64> = x.iter().copied().chain([0.0, 1.0]).collect();
                ends.sort_by(f64::total_cmp);
                ends.dedup();
                let i = rng.gen_range(0..ends.len() - 1);
                let j = rng.gen_range(i + 1..ends.len());
                let (l, u) = (ends[i], ends[j]);
                let chosen: Vec<f64> = x.iter().copied().filter(|&v| v != 0.0 && l <= v && v <= u).collect();
                let want: Vec<f64> = (0..p).map(|k| chosen.get(k).copied().unwrap_or(0.0)).collect();
                let mut input = x.clone();
                input.extend([u, l]);
                let got = g.evaluate(&input);
                if !all_close(&got, &want) {
                    return Err(mismatch(name, &input, &got, &want));
                }
            }
        }
        "rank_computing" => {
            let mut cache = Cache::new();
            for _ in 0..trials {
                let delta = delta_of(&mut rng);
                let n: usize = rng.gen_range(1..=12);
                let m = rng.gen_range(1..=12);
                let target = n.div_ceil(2);
                let g = cache.get(&(n, m, delta.value().to_bits()), || {
                    let g = primitives::build_rank_computing(delta, n, m, target).unwrap();
                    let bias = (target as f64 - m as f64).abs();
                    check_stats(&g, 2 * n + 4 * m, 1, delta.inv().max(bias)).map(|_| g)
                });
                let g = g.as_ref().map_err(|e| e.clone())?;
                let x = separated(&mut rng, n, delta.value());
                let order = sorted(&x);
                let med_pos = target - 1;
                let len = rng.gen_range(1..=m.min(n));
                let lo = rng.gen_range(med_pos.saturating_sub(len - 1)..=med_pos.min(n - len));
                let block = &order[lo..lo + len];
                let mut y = vec![0.0; m];
                let slots = rand::seq::index::sample(&mut rng, m, len).into_vec();
                for (s, &v) in slots.iter().zip(block) {
                    y[*s] = v;
                }
                let e = block[rng.gen_range(0..len)];
                let want = [(med_pos - lo + 1) as f64];
                let mut input = x.clone();
                input.extend(&y);
                input.push(e);
                let got = g.evaluate(&input);
                if !all_close(&got, &want) {
                    return Err(mismatch(name, &input, &got, &want));
                }
            }
        }
        "rank_scaling" => {
            let mut cache = Cache::new();
            for _ in 0..trials {
                let delta = delta_of(&mut rng);
                let n = rng.gen_range(1..=12);
                let b = rng.gen_range(1..=12);
                let g = cache.get(&(n, b, delta.value().to_bits()), || {
                    let g = primitives::build_rank_scaling(delta, n, b).unwrap();
                    let bound = delta.inv().max((n * b).max(n + 1) as f64);
                    check_stats(&g, 4 * n, 2, bound).map(|_| g)
                });
                let g = g.as_ref().map_err(|e| e.clone())?;
                let mut x = sparse_separated(&mut rng, n, delta.value(), 0.4);
                if x.iter().all(|v| *v == 0.0) {
                    x[0] = 0.5;
                }
                let r = if rng.gen_bool(0.5) { rng.gen_range(0..=n) as f64 } else { rng.gen_range(0.0..=n as f64) };
                let nz = x.iter().filter(|v| **v != 0.0).count() as f64;
                let want = [r * b as f64 / nz];
                let mut input = x.clone();
                input.push(r);
                let got = g.evaluate(&input);
                if !all_close(&got, &want) {
                    return Err(mismatch(name, &input, &got, &want));
                }
            }
        }
        "ceiling" => {
            let mut cache = Cache::new();
            for _ in 0..trials {
                let n = rng.gen_range(1..=20);
                let g = cache.get(&n, || {
                    let g = primitives::build_ceiling(n).unwrap();
                    check_stats(&g, 4 * (n + 1), 1, (n * (n + 1)) as f64).map(|_| g)
                });
                let g = g.as_ref().map_err(|e| e.clone())?;
                let den = rng.gen_range(1..=n) as i64;
                let range = n as i64 * den;
                let num = rng.gen_range(-range..=range);
                let x = num as f64 / den as f64;
                let want = [num.div_euclid(den) as f64 + if num.rem_euclid(den) == 0 { 0.0 } else { 1.0 }];
                let got = g.evaluate(&[x]);
                if !all_close(&got, &want) {
                    return Err(mismatch(name, &[x], &got, &want));
                }
            }
        }
        "hashing" => {
            for _ in 0..trials / 10 {
                let n = rng.gen_range(1..=20);
                let buckets = rng.gen_range(1..=8);
                let h: Vec<usize> = (0..n).map(|_| rng.gen_range(0..buckets)).collect();
                let g = primitives::build_hashing(&h, buckets).unwrap();
                check_stats(&g, buckets, 1, 1.0)?;
                for _ in 0..10 {
                    let x: Vec<f64> = (0..n).map(|_| if rng.gen_bool(0.3) { 0.0 } else { rng.gen::<f64>() }).collect();
                    let mut want = vec![0.0; buckets];
                    for (v, &b) in x.iter().zip(&h) {
                        want[b] += v;
                    }
                    let got = g.evaluate(&x);
                    if !all_close(&got, &want) {
                        return Err(mismatch(name, &x, &got, &want));
                    }
                }
            }
        }
        "block_extraction" => {
            let mut cache = Cache::new();
            for _ in 0..trials {
                let delta = delta_of(&mut rng);
                let p = rng.gen_range(1..=6);
                let q = rng.gen_range(1..=6);
                let g = cache.get(&(p, q, delta.value().to_bits()), || {
                    let g = primitives::build_block_extraction(delta, p, q).unwrap();
                    check_stats(&g, 4 * p * q + 4 * q + 4, 3, delta.inv()).map(|_| g)
                });
                let g = g.as_ref().map_err(|e| e.clone())?;
                let x: Vec<f64> = (0..p * q)
                    .map(|_| if rng.gen_bool(0.5) { 0.0 } else { rng.gen_range(delta.value()..=1.0) })
                    .collect();
                let s = rng.gen_range(0..=p);
                let want = x
                    .chunks(p)
                    .find(|b| b.iter().filter(|v| **v != 0.0).count() == s)
                    .map(|b| b.to_vec())
                    .unwrap_or_else(|| vec![0.0; p]);
                let mut input = x.clone();
                input.push(s as f64);
                let got = g.evaluate(&input);
                if !all_close(&got, &want) {
                    return Err(mismatch(name, &input, &got, &want));
                }
            }
        }
        other => return Err(format!("unknown gadget {other}")),
    }
    Ok(trials)
}

//! Gadgets written against the circuit builder. Every function places its
//! first hidden layer on `level` (or on one above its inputs when it takes
//! no level) and returns wires living on its last hidden layer.

use crate::circuit::{Circuit, Wire};

fn c0(v: f64) -> Wire {
    Wire::constant(v)
}

/// `max(a, b) = [b]₊ − [−b]₊ + [a − b]₊`.
pub fn max_at(c: &mut Circuit, level: usize, a: &Wire, b: &Wire) -> Wire {
    let p = c.relu(b, level);
    let n = c.relu(&b.scaled(-1.0), level);
    let d = c.sub(a, b);
    let m = c.relu(&d, level);
    c.sum(&[(1.0, &p), (-1.0, &n), (1.0, &m)], 0.0)
}

/// `min(a, b) = −max(−a, −b)`.
pub fn min_at(c: &mut Circuit, level: usize, a: &Wire, b: &Wire) -> Wire {
    max_at(c, level, &a.scaled(-1.0), &b.scaled(-1.0)).scaled(-1.0)
}

/// `[t]₊ − [t − 1]₊` with `t = inv·(a − b) + shift`.
pub fn cmp_at(c: &mut Circuit, level: usize, a: &Wire, b: &Wire, inv: f64, shift: f64) -> Wire {
    let d = c.sub(a, b);
    let t = d.scaled(inv).plus(shift);
    let hi = c.relu(&t, level);
    let lo = c.relu(&t.plus(-1.0), level);
    c.sub(&hi, &lo)
}

/// `x·1{s = 0}` for `x ∈ [0, 1]`, `s ∈ ℤ`.
pub fn ifp_at(c: &mut Circuit, level: usize, x: &Wire, s: &Wire) -> Wire {
    if x.const_value() == Some(0.0) {
        return c0(0.0);
    }
    let xs = c.add(x, s);
    let a = c.relu(&xs, level);
    let b = c.relu(&xs.plus(-1.0), level);
    let e = c.relu(s, level);
    let f = c.relu(&s.plus(-1.0), level);
    c.sum(&[(1.0, &a), (-1.0, &b), (-1.0, &e), (1.0, &f)], 0.0)
}

pub fn nzc_at(c: &mut Circuit, level: usize, xs: &[Wire], inv: f64) -> Wire {
    let parts: Vec<Wire> = xs.iter().map(|x| cmp_at(c, level, x, &c0(0.0), inv, 0.0)).collect();
    let refs: Vec<(f64, &Wire)> = parts.iter().map(|w| (1.0, w)).collect();
    let s = c.sum(&refs, 0.0);
    c.share(&s)
}

/// `1{ℓ ≤ xᵢ ≤ u}`.
pub fn mask_at(c: &mut Circuit, level: usize, xs: &[Wire], u: &Wire, l: &Wire, inv: f64) -> Vec<Wire> {
    xs.iter()
        .map(|x| {
            let lo = cmp_at(c, level, x, l, inv, 1.0);
            let hi = cmp_at(c, level, x, u, inv, 0.0);
            c.sub(&lo, &hi)
        })
        .collect()
}

/// `xᵢ·1{ℓ ≤ xᵢ ≤ u}` for `xᵢ ∈ [0, 1]`.
pub fn filter_at(c: &mut Circuit, level: usize, xs: &[Wire], u: &Wire, l: &Wire, inv: f64) -> Vec<Wire> {
    xs.iter()
        .map(|x| {
            let a = c.sum(&[(inv + 1.0, x), (-inv, l)], 0.0);
            let b = c.sum(&[(inv, x), (-inv, l)], 0.0);
            let e = c.sum(&[(inv, x), (-inv, u)], 0.0);
            let f = c.sum(&[(inv - 1.0, x), (-inv, u)], 0.0);
            let a = c.relu(&a, level);
            let b = c.relu(&b, level);
            let e = c.relu(&e, level);
            let f = c.relu(&f, level);
            c.sum(&[(1.0, &a), (-1.0, &b), (-1.0, &e), (1.0, &f)], 0.0)
        })
        .collect()
}

/// Rank of each entry among `xs` counted as `1 + #{j ≠ k : x_k > x_j}`,
/// computed on `level`.
pub fn ranks_at(c: &mut Circuit, level: usize, xs: &[Wire], inv: f64) -> Vec<Wire> {
    let xs: Vec<Wire> = xs.iter().map(|x| c.share(x)).collect();
    (0..xs.len())
        .map(|k| {
            let mut parts = Vec::with_capacity(xs.len());
            for j in 0..xs.len() {
                if j != k {
                    parts.push(cmp_at(c, level, &xs[k], &xs[j], inv, 0.0));
                }
            }
            let refs: Vec<(f64, &Wire)> = parts.iter().map(|w| (1.0, w)).collect();
            let s = c.sum(&refs, 1.0);
            c.share(&s)
        })
        .collect()
}

/// Sum of indicator products selecting the entry whose count equals the rank.
pub fn select_at(c: &mut Circuit, level: usize, xs: &[Wire], counts: &[Wire], rank: &Wire) -> Wire {
    let mut parts = Vec::with_capacity(xs.len());
    for (x, n) in xs.iter().zip(counts) {
        let s = c.sub(rank, n);
        parts.push(ifp_at(c, level, x, &s));
    }
    let refs: Vec<(f64, &Wire)> = parts.iter().map(|w| (1.0, w)).collect();
    c.sum(&refs, 0.0)
}

/// Rank selection: two hidden layers above the inputs.
pub fn rank_select(c: &mut Circuit, xs: &[Wire], ranks: &[Wire], inv: f64) -> Vec<Wire> {
    let all: Vec<&Wire> = xs.iter().chain(ranks).collect();
    let base = c.base(&all);
    let counts = ranks_at(c, base + 1, xs, inv);
    ranks.iter().map(|r| select_at(c, base + 2, xs, &counts, r)).collect()
}

/// Shortlisting of the first `p` non-zero entries lying in `[ℓ, u]`: three
/// hidden layers above the inputs.
pub fn shortlist(c: &mut Circuit, xs: &[Wire], u: &Wire, l: &Wire, p: usize, delta: f64) -> Vec<Wire> {
    let inv = 1.0 / delta;
    let mut all: Vec<&Wire> = xs.iter().collect();
    all.push(u);
    all.push(l);
    let base = c.base(&all);
    let l2 = max_at(c, base + 1, l, &c0(delta / 2.0));
    let marks = mask_at(c, base + 2, xs, u, &l2, 2.0 * inv);
    let kept = filter_at(c, base + 2, xs, u, l, inv);
    let mut prefix = Vec::with_capacity(xs.len());
    let mut acc = c0(0.0);
    for m in &marks {
        let s = c.add(&acc, m);
        acc = c.share(&s);
        prefix.push(acc.clone());
    }
    (1..=p)
        .map(|i| {
            let mut parts = Vec::with_capacity(xs.len());
            for (f, s) in kept.iter().zip(&prefix) {
                let t = s.scaled(-1.0).plus(i as f64);
                parts.push(ifp_at(c, base + 3, f, &t));
            }
            let refs: Vec<(f64, &Wire)> = parts.iter().map(|w| (1.0, w)).collect();
            c.sum(&refs, 0.0)
        })
        .collect()
}

/// Rank computing on one hidden layer. Returns `(r, NZC(y))`.
pub fn rank_compute_at(
    c: &mut Circuit,
    level: usize,
    xs: &[Wire],
    ys: &[Wire],
    e: &Wire,
    target: f64,
    inv: f64,
) -> (Wire, Wire) {
    let e = c.share(e);
    let nz = nzc_at(c, level, ys, inv);
    let mut parts = vec![(1.0, nz.clone())];
    for y in ys {
        parts.push((1.0, cmp_at(c, level, &e, y, inv, 0.0)));
    }
    for x in xs {
        parts.push((-1.0, cmp_at(c, level, &e, x, inv, 0.0)));
    }
    let refs: Vec<(f64, &Wire)> = parts.iter().map(|(k, w)| (*k, w)).collect();
    let r = c.sum(&refs, target - ys.len() as f64);
    (c.share(&r), nz)
}

/// `r·b / count` on one hidden layer, given the non-zero count of a
/// length-`dprime` vector.
pub fn rank_scale_at(c: &mut Circuit, level: usize, r: &Wire, count: &Wire, dprime: usize, b: f64) -> Wire {
    let d = dprime as f64;
    let scaled = r.scaled(1.0 / d);
    let mut parts = Vec::with_capacity(dprime);
    for k in 1..=dprime {
        let s = count.plus(-(k as f64));
        let w = ifp_at(c, level, &scaled, &s);
        parts.push((d * b / k as f64, w));
    }
    let refs: Vec<(f64, &Wire)> = parts.iter().map(|(k, w)| (*k, w)).collect();
    c.sum(&refs, 0.0)
}

/// `⌈x⌉` for `x ∈ [lo, hi]` whose fractional part is `0` or at least
/// `1/resolution`, on one hidden layer.
pub fn ceiling_at(c: &mut Circuit, level: usize, x: &Wire, lo: i64, hi: i64, resolution: f64) -> Wire {
    let x = c.share(x);
    let mut parts = Vec::with_capacity(2 * (hi - lo).max(0) as usize);
    for i in lo..hi {
        let t = x.scaled(resolution).plus(-resolution * i as f64);
        let a = c.relu(&t.plus(-0.25), level);
        let b = c.relu(&t.plus(-0.75), level);
        parts.push((2.0, a));
        parts.push((-2.0, b));
    }
    let refs: Vec<(f64, &Wire)> = parts.iter().map(|(k, w)| (*k, w)).collect();
    c.sum(&refs, lo as f64)
}

/// Bucket sums `[Σ_{h(j)=b} x_j]₊` on one hidden layer.
pub fn hashing_at(c: &mut Circuit, level: usize, xs: &[Wire], h: &[usize], buckets: usize) -> Vec<Wire> {
    let mut members: Vec<Vec<(f64, &Wire)>> = vec![Vec::new(); buckets];
    for (x, &b) in xs.iter().zip(h) {
        members[b].push((1.0, x));
    }
    members
        .iter()
        .map(|m| {
            let s = c.sum(m, 0.0);
            c.relu(&s, level)
        })
        .collect()
}

/// Copy of the first length-`p` block of `xs` holding exactly `s` non-zero
/// entries: three hidden layers above the inputs.
pub fn block_extract(c: &mut Circuit, xs: &[Wire], s: &Wire, p: usize, inv: f64) -> Vec<Wire> {
    let mut all: Vec<&Wire> = xs.iter().collect();
    all.push(s);
    let base = c.base(&all);
    let q = xs.len() / p;
    let counts: Vec<Wire> = (0..q).map(|i| nzc_at(c, base + 1, &xs[i * p..(i + 1) * p], inv)).collect();
    let s = c.share(s);
    let hits: Vec<Wire> = counts
        .iter()
        .map(|n| {
            let ge = cmp_at(c, base + 2, n, &s.plus(-1.0), inv, 0.0);
            let gt = cmp_at(c, base + 2, n, &s, inv, 0.0);
            c.sub(&ge, &gt)
        })
        .collect();
    let mut misses = Vec::with_capacity(q);
    let mut acc = c0(0.0);
    for h in &hits {
        let miss = c.sum(&[(-1.0, h), (1.0, &acc)], 1.0);
        misses.push(c.share(&miss));
        let t = c.add(&acc, h);
        acc = c.share(&t);
    }
    (0..p)
        .map(|j| {
            let mut parts = Vec::with_capacity(q);
            for (i, miss) in misses.iter().enumerate() {
                parts.push(ifp_at(c, base + 3, &xs[i * p + j], miss));
            }
            let refs: Vec<(f64, &Wire)> = parts.iter().map(|w| (1.0, w)).collect();
            c.sum(&refs, 0.0)
        })
        .collect()
}

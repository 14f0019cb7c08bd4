use std::collections::BinaryHeap;

use super::dd::Dd;
use super::NetworkError;

#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Csr {
    pub rows: usize,
    pub cols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<u32>,
    pub vals: Vec<f64>,
}

impl Csr {
    pub fn empty(cols: usize) -> Csr {
        Csr { rows: 0, cols, row_ptr: vec![0], col_idx: Vec::new(), vals: Vec::new() }
    }

    pub fn push_row(&mut self, entries: impl IntoIterator<Item = (usize, f64)>) {
        for (c, v) in entries {
            debug_assert!(c < self.cols);
            if v != 0.0 {
                self.col_idx.push(c as u32);
                self.vals.push(v);
            }
        }
        self.row_ptr.push(self.col_idx.len());
        self.rows += 1;
    }

    #[inline]
    pub fn row(&self, r: usize) -> (&[u32], &[f64]) {
        let (a, b) = (self.row_ptr[r], self.row_ptr[r + 1]);
        (&self.col_idx[a..b], &self.vals[a..b])
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Repr {
    Csr(Csr),
    /// Columns `cols..cols + inner.rows` of `outer` refer to auxiliary sums;
    /// auxiliary row `t` may reference inputs and auxiliary rows before `t`.
    Factored { inner: Csr, outer: Csr },
}

/// Sparse weight matrix of an affine layer.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightMatrix {
    rows: usize,
    cols: usize,
    repr: Repr,
}

struct Expander {
    scratch: Vec<f64>,
    touched: Vec<usize>,
    mark: Vec<bool>,
}

impl Expander {
    fn new(width: usize) -> Expander {
        Expander { scratch: vec![0.0; width], touched: Vec::new(), mark: vec![false; width] }
    }

    fn add(&mut self, c: usize, v: f64) {
        if !self.mark[c] {
            self.mark[c] = true;
            self.touched.push(c);
        }
        self.scratch[c] += v;
    }

    fn take(&mut self, out: &mut Vec<(usize, f64)>) {
        out.clear();
        self.touched.sort_unstable();
        for &c in &self.touched {
            let v = self.scratch[c];
            if v != 0.0 {
                out.push((c, v));
            }
            self.scratch[c] = 0.0;
            self.mark[c] = false;
        }
        self.touched.clear();
    }
}

impl WeightMatrix {
    pub(crate) fn from_csr(m: Csr) -> WeightMatrix {
        WeightMatrix { rows: m.rows, cols: m.cols, repr: Repr::Csr(m) }
    }

    pub(crate) fn factored(cols: usize, inner: Csr, outer: Csr) -> WeightMatrix {
        debug_assert_eq!(inner.cols, cols + inner.rows);
        debug_assert_eq!(outer.cols, cols + inner.rows);
        if inner.rows == 0 {
            let mut outer = outer;
            outer.cols = cols;
            return WeightMatrix::from_csr(outer);
        }
        WeightMatrix { rows: outer.rows, cols, repr: Repr::Factored { inner, outer } }
    }

    /// Builds a matrix from `(row, col, value)` triples; duplicates are summed.
    pub fn from_triplets(
        rows: usize,
        cols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<WeightMatrix, NetworkError> {
        let mut sorted: Vec<(usize, usize, f64)> = Vec::with_capacity(triplets.len());
        for &(r, c, v) in triplets {
            if r >= rows || c >= cols {
                return Err(NetworkError::Invalid(format!(
                    "entry ({r}, {c}) outside a {rows}x{cols} matrix"
                )));
            }
            if !v.is_finite() {
                return Err(NetworkError::Invalid(format!("non-finite weight at ({r}, {c})")));
            }
            sorted.push((r, c, v));
        }
        sorted.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut m = Csr::empty(cols);
        let mut i = 0;
        for r in 0..rows {
            let mut row: Vec<(usize, f64)> = Vec::new();
            while i < sorted.len() && sorted[i].0 == r {
                let (_, c, v) = sorted[i];
                match row.last_mut() {
                    Some(last) if last.0 == c => last.1 += v,
                    _ => row.push((c, v)),
                }
                i += 1;
            }
            m.push_row(row);
        }
        Ok(WeightMatrix::from_csr(m))
    }

    pub fn from_dense(rows: &[Vec<f64>], cols: usize) -> Result<WeightMatrix, NetworkError> {
        let mut t = Vec::new();
        for (r, row) in rows.iter().enumerate() {
            if row.len() != cols {
                return Err(NetworkError::Invalid(format!(
                    "row {r} has {} entries, expected {cols}",
                    row.len()
                )));
            }
            for (c, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    t.push((r, c, v));
                }
            }
        }
        WeightMatrix::from_triplets(rows.len(), cols, &t)
    }

    pub fn identity(n: usize) -> WeightMatrix {
        let mut m = Csr::empty(n);
        for i in 0..n {
            m.push_row([(i, 1.0)]);
        }
        WeightMatrix::from_csr(m)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Number of stored coefficients, which for factored matrices is smaller
    /// than the number of non-zero entries.
    pub fn stored_len(&self) -> usize {
        match &self.repr {
            Repr::Csr(m) => m.vals.len(),
            Repr::Factored { inner, outer } => inner.vals.len() + outer.vals.len(),
        }
    }

    /// Calls `f(row, entries)` for every row, with entries sorted by column.
    pub fn for_each_row(&self, mut f: impl FnMut(usize, &[(usize, f64)])) {
        let mut buf: Vec<(usize, f64)> = Vec::new();
        match &self.repr {
            Repr::Csr(m) => {
                for r in 0..m.rows {
                    let (cs, vs) = m.row(r);
                    buf.clear();
                    buf.extend(cs.iter().zip(vs).map(|(&c, &v)| (c as usize, v)));
                    f(r, &buf);
                }
            }
            Repr::Factored { inner, outer } => {
                let n = self.cols;
                let mut ex = Expander::new(n + inner.rows);
                let mut heap: BinaryHeap<usize> = BinaryHeap::new();
                for r in 0..outer.rows {
                    let (cs, vs) = outer.row(r);
                    for (&c, &v) in cs.iter().zip(vs) {
                        let c = c as usize;
                        if c >= n && !ex.mark[c] {
                            heap.push(c - n);
                        }
                        ex.add(c, v);
                    }
                    while let Some(t) = heap.pop() {
                        let coef = ex.scratch[n + t];
                        if coef == 0.0 {
                            continue;
                        }
                        let (ics, ivs) = inner.row(t);
                        for (&c, &v) in ics.iter().zip(ivs) {
                            let c = c as usize;
                            if c >= n && !ex.mark[c] {
                                heap.push(c - n);
                            }
                            ex.add(c, coef * v);
                        }
                        ex.scratch[n + t] = 0.0;
                    }
                    ex.take(&mut buf);
                    buf.retain(|&(c, _)| c < n);
                    f(r, &buf);
                }
            }
        }
    }

    pub fn row(&self, r: usize) -> Vec<(usize, f64)> {
        match &self.repr {
            Repr::Csr(m) => {
                let (cs, vs) = m.row(r);
                cs.iter().zip(vs).map(|(&c, &v)| (c as usize, v)).collect()
            }
            Repr::Factored { .. } => {
                let mut out = Vec::new();
                self.for_each_row(|i, e| {
                    if i == r {
                        out = e.to_vec();
                    }
                });
                out
            }
        }
    }

    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        self.for_each_row(|r, e| out.extend(e.iter().map(|&(c, v)| (r, c, v))));
        out
    }

    pub fn nnz(&self) -> usize {
        match &self.repr {
            Repr::Csr(m) => m.vals.len(),
            Repr::Factored { .. } => {
                let mut n = 0;
                self.for_each_row(|_, e| n += e.len());
                n
            }
        }
    }

    pub fn max_abs(&self) -> f64 {
        let mut best = 0.0f64;
        self.for_each_row(|_, e| {
            for &(_, v) in e {
                best = best.max(v.abs());
            }
        });
        best
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.cols]; self.rows];
        self.for_each_row(|r, e| {
            for &(c, v) in e {
                out[r][c] = v;
            }
        });
        out
    }

    /// Expands a factored matrix into plain sparse rows.
    pub fn materialized(&self) -> WeightMatrix {
        match &self.repr {
            Repr::Csr(_) => self.clone(),
            Repr::Factored { .. } => {
                let mut m = Csr::empty(self.cols);
                self.for_each_row(|_, e| m.push_row(e.iter().copied()));
                WeightMatrix::from_csr(m)
            }
        }
    }

    pub(crate) fn csr(&self) -> Option<&Csr> {
        match &self.repr {
            Repr::Csr(m) => Some(m),
            Repr::Factored { .. } => None,
        }
    }

    /// `self * other`, both expanded; `self.cols` must equal `other.rows`.
    pub fn matmul(&self, other: &WeightMatrix) -> WeightMatrix {
        assert_eq!(self.cols, other.rows);
        let rhs = other.materialized();
        let rhs = rhs.csr().expect("materialized");
        let mut ex = Expander::new(other.cols);
        let mut m = Csr::empty(other.cols);
        let mut buf = Vec::new();
        self.for_each_row(|_, e| {
            for &(k, a) in e {
                let (cs, vs) = rhs.row(k);
                for (&c, &b) in cs.iter().zip(vs) {
                    ex.add(c as usize, a * b);
                }
            }
            ex.take(&mut buf);
            m.push_row(buf.iter().copied());
        });
        WeightMatrix::from_csr(m)
    }

    /// `self * v` in plain `f64`.
    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.rows];
        self.for_each_row(|r, e| {
            out[r] = e.iter().map(|&(c, w)| w * v[c]).sum();
        });
        out
    }

    pub(crate) fn apply(&self, x: &[Dd], biases: &[f64], out: &mut Vec<Dd>) {
        out.clear();
        match &self.repr {
            Repr::Csr(m) => apply_csr(m, x, biases, out),
            Repr::Factored { inner, outer } => {
                let mut z = Vec::with_capacity(x.len() + inner.rows);
                z.extend_from_slice(x);
                for t in 0..inner.rows {
                    let (cs, vs) = inner.row(t);
                    let mut acc = Dd::ZERO;
                    for (&c, &v) in cs.iter().zip(vs) {
                        acc = acc.fma(z[c as usize], v);
                    }
                    z.push(acc);
                }
                apply_csr(outer, &z, biases, out);
            }
        }
    }
}

fn apply_csr(m: &Csr, x: &[Dd], biases: &[f64], out: &mut Vec<Dd>) {
    for r in 0..m.rows {
        let (cs, vs) = m.row(r);
        let mut acc = Dd::from_f64(biases[r]);
        for (&c, &v) in cs.iter().zip(vs) {
            acc = acc.fma(x[c as usize], v);
        }
        out.push(acc);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factored_rows_expand() {
        // aux0 = x0 + x1, aux1 = aux0 + x2; rows: aux1, 2*aux0 - x1
        let mut inner = Csr::empty(5);
        inner.push_row([(0, 1.0), (1, 1.0)]);
        inner.push_row([(3, 1.0), (2, 1.0)]);
        let mut outer = Csr::empty(5);
        outer.push_row([(4, 1.0)]);
        outer.push_row([(3, 2.0), (1, -1.0)]);
        let w = WeightMatrix::factored(3, inner, outer);
        assert_eq!(w.to_dense(), vec![vec![1.0, 1.0, 1.0], vec![2.0, 1.0, 0.0]]);
        let x: Vec<Dd> = [0.5, 0.25, 2.0].iter().map(|&v| Dd::from_f64(v)).collect();
        let mut out = Vec::new();
        w.apply(&x, &[0.0, 1.0], &mut out);
        assert_eq!(out[0].to_f64(), 2.75);
        assert_eq!(out[1].to_f64(), 2.25);
        assert_eq!(w.nnz(), 5);
    }

    #[test]
    fn duplicate_triplets_sum() {
        let w = WeightMatrix::from_triplets(1, 2, &[(0, 1, 1.0), (0, 1, 2.0)]).unwrap();
        assert_eq!(w.to_dense(), vec![vec![0.0, 3.0]]);
    }
}

use std::fmt::Write as _;

use super::{median, sorted};
use crate::params::{padded_window, rank_window, SparsifierSchedule};

/// Snapshot of one sparsification iteration. Counts and ranks are stored as
/// reals so that network read-outs compare directly.
#[derive(Clone, Debug, PartialEq)]
pub struct IterationTrace {
    pub sample: Vec<f64>,
    /// Rank of the overall median among the non-zero entries.
    pub rank: f64,
    pub nonzeros: f64,
    pub floor_l: f64,
    pub ceil_r: f64,
    pub e_minus: f64,
    pub e_plus: f64,
    pub next: Vec<f64>,
}

impl IterationTrace {
    pub const FIELDS: [&'static str; 8] =
        ["sample", "rank", "nonzeros", "floor_l", "ceil_r", "e_minus", "e_plus", "next"];

    pub fn field(&self, name: &str) -> Vec<f64> {
        match name {
            "sample" => self.sample.clone(),
            "rank" => vec![self.rank],
            "nonzeros" => vec![self.nonzeros],
            "floor_l" => vec![self.floor_l],
            "ceil_r" => vec![self.ceil_r],
            "e_minus" => vec![self.e_minus],
            "e_plus" => vec![self.e_plus],
            "next" => self.next.clone(),
            _ => panic!("unknown field {name}"),
        }
    }

    /// Largest absolute difference over all fields, with the name of the
    /// worst one.
    pub fn max_deviation(&self, other: &IterationTrace) -> (f64, &'static str) {
        let mut worst = (0.0, "");
        for name in IterationTrace::FIELDS {
            let (a, b) = (self.field(name), other.field(name));
            let dev = if a.len() != b.len() {
                f64::INFINITY
            } else {
                a.iter().zip(&b).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max)
            };
            if dev > worst.0 || (dev.is_nan() && !worst.0.is_nan()) {
                worst = (dev, name);
            }
        }
        worst
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Halt {
    /// A sampled block of `iteration` held fewer non-zero entries than asked.
    Fail { iteration: usize, block: usize },
    /// The median was zeroed out during `iteration`.
    MedianLost { iteration: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceRecord {
    pub d: usize,
    pub median: f64,
    pub iterations: Vec<IterationTrace>,
    /// Per completed iteration: `[contiguous, keeps median, count in bounds]`.
    pub clauses: Vec<[bool; 3]>,
    pub halt: Option<Halt>,
}

impl TraceRecord {
    pub fn success(&self) -> bool {
        self.halt.is_none() && self.iterations.len() == 4 && self.clauses.iter().all(|c| c.iter().all(|&b| b))
    }

    /// The final vector, when all four iterations ran.
    pub fn output(&self) -> Option<&[f64]> {
        (self.iterations.len() == 4).then(|| self.iterations[3].next.as_slice())
    }

    /// Iterations that ran to completion before any halt.
    pub fn completed(&self) -> &[IterationTrace] {
        &self.iterations
    }

    /// Human-readable dump for debugging mismatches.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "d = {}, median = {}", self.d, self.median);
        for (i, it) in self.iterations.iter().enumerate() {
            let nz = it.next.iter().filter(|v| **v != 0.0).count();
            let _ = writeln!(
                s,
                "iteration {}: z = {}, rank = {}, nonzeros = {}, L = {}, R = {}, window = [{}, {}], kept = {}, clauses = {:?}",
                i + 1,
                it.sample.len(),
                it.rank,
                it.nonzeros,
                it.floor_l,
                it.ceil_r,
                it.e_minus,
                it.e_plus,
                nz,
                self.clauses.get(i)
            );
        }
        if let Some(h) = &self.halt {
            let _ = writeln!(s, "halted: {h:?}");
        }
        s
    }
}

/// Reference run of the four-iteration sparsification on `x`, which should
/// have distinct entries in `(0, 1)`.
pub fn run_algorithm4(x: &[f64], schedule: &SparsifierSchedule) -> TraceRecord {
    let d = x.len();
    assert_eq!(d, schedule.d, "schedule built for another dimension");
    let med = median(x).expect("non-empty input");
    let order = sorted(x);
    let mut record = TraceRecord { d, median: med, iterations: Vec::new(), clauses: Vec::new(), halt: None };
    let mut current = x.to_vec();
    for i in 1..=4 {
        let it = &schedule.iterations[i - 1];
        let sample = if i == 1 {
            current[..it.z].to_vec()
        } else {
            let mut s = Vec::with_capacity(it.z);
            for (b, (range, quota)) in schedule.sample_blocks(i).into_iter().enumerate() {
                let found: Vec<f64> = current[range].iter().copied().filter(|v| *v != 0.0).take(quota).collect();
                if found.len() < quota {
                    record.halt = Some(Halt::Fail { iteration: i, block: b });
                    return record;
                }
                s.extend(found);
            }
            s
        };
        let nonzeros = current.iter().filter(|v| **v != 0.0).count();
        let rank = current.iter().filter(|&&v| v != 0.0 && v <= med).count();
        let (floor_l, ceil_r) = rank_window(rank, nonzeros, it.z, it.w);
        let (lo, hi) = padded_window(floor_l, ceil_r, it.z);
        let mut padded = sample.clone();
        padded.extend([0.0, 1.0]);
        let padded = sorted(&padded);
        let (e_minus, e_plus) = (padded[lo - 1], padded[hi - 1]);
        let next: Vec<f64> = current.iter().map(|&v| if v < e_minus || v > e_plus { 0.0 } else { v }).collect();

        let kept: Vec<f64> = sorted(&next.iter().copied().filter(|v| *v != 0.0).collect::<Vec<_>>());
        let contiguous = kept.is_empty() || {
            let start = order.partition_point(|v| *v < kept[0]);
            order[start..].starts_with(&kept)
        };
        let keeps = kept.contains(&med);
        let count = kept.len() as f64;
        let y = schedule.y(i + 1);
        let bounded = y * 3f64.powi(-(i as i32)) <= count && count <= y * 6f64.powi(i as i32);
        record.clauses.push([contiguous, keeps, bounded]);
        record.iterations.push(IterationTrace {
            sample,
            rank: rank as f64,
            nonzeros: nonzeros as f64,
            floor_l: floor_l as f64,
            ceil_r: ceil_r as f64,
            e_minus,
            e_plus,
            next: next.clone(),
        });
        if !keeps {
            record.halt = Some(Halt::MedianLost { iteration: i });
            return record;
        }
        current = next;
    }
    record
}

use super::is_good_input;
use crate::hash::HashFamily;
use crate::params::MaxSchedule;

#[derive(Clone, Debug, PartialEq)]
pub struct MaxRun {
    pub success: bool,
    pub result: Option<f64>,
    /// Threshold after the first round.
    pub m1: f64,
    /// Threshold after the second round (0 when the sample is empty).
    pub m2: f64,
    pub second_sample: Vec<f64>,
    /// Vector entering the hashing step.
    pub sparse: Vec<f64>,
    /// Least collision-free member for the support of `sparse`.
    pub member: Option<u64>,
}

impl MaxRun {
    pub fn sparsity(&self) -> usize {
        self.sparse.iter().filter(|v| **v != 0.0).count()
    }
}

/// Reference run of the two sparsification rounds and the hashing step for
/// the maximum. Success requires a `δ`-separated entirely non-zero input and
/// a collision-free member for the surviving support.
pub fn run_algorithm1_2_max(x: &[f64], delta: f64, schedule: &MaxSchedule) -> MaxRun {
    assert_eq!(x.len(), schedule.d, "schedule built for another dimension");
    let m1 = x[..schedule.z1].iter().copied().fold(0.0, f64::max);
    let x2: Vec<f64> = x.iter().map(|&v| if v < m1 { 0.0 } else { v }).collect();
    let mut second_sample = Vec::with_capacity(schedule.z2);
    for (b, range) in schedule.blocks.iter().enumerate() {
        let q = schedule.quota(b);
        second_sample.extend(x2[range.clone()].iter().copied().filter(|v| *v != 0.0).take(q));
    }
    let m2 = second_sample.iter().copied().fold(0.0, f64::max);
    let sparse: Vec<f64> = x2.iter().map(|&v| if v < m2 { 0.0 } else { v }).collect();
    let family = HashFamily::new(x.len(), schedule.hash_exponent).expect("valid exponent");
    let support: Vec<u64> = (0..x.len()).filter(|&j| sparse[j] != 0.0).map(|j| j as u64 + 1).collect();
    let member = family.find_collision_free(&support);
    let success = member.is_some() && is_good_input(x, delta);
    let result = member.map(|_| sparse.iter().copied().fold(0.0, f64::max));
    MaxRun { success, result, m1, m2, second_sample, sparse, member }
}

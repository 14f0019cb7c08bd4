//! Double-double accumulator used by the forward pass.
//!
//! Activations are carried as unevaluated sums `hi + lo` with roughly 106
//! bits of precision. Weights stay plain `f64`.

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let e = (a - (s - bb)) + (b - bb);
    (s, e)
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let e = b - (s - a);
    (s, e)
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };

    #[inline]
    pub fn from_f64(v: f64) -> Dd {
        Dd { hi: v, lo: 0.0 }
    }

    #[inline]
    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    #[inline]
    pub fn add(self, o: Dd) -> Dd {
        let (s1, s2) = two_sum(self.hi, o.hi);
        let (t1, t2) = two_sum(self.lo, o.lo);
        let s2 = s2 + t1;
        let (s1, s2) = quick_two_sum(s1, s2);
        let s2 = s2 + t2;
        let (hi, lo) = quick_two_sum(s1, s2);
        Dd { hi, lo }
    }

    #[cfg(test)]
    pub fn add_f64(self, b: f64) -> Dd {
        let (s1, s2) = two_sum(self.hi, b);
        let s2 = s2 + self.lo;
        let (hi, lo) = quick_two_sum(s1, s2);
        Dd { hi, lo }
    }

    #[inline]
    pub fn mul_f64(self, b: f64) -> Dd {
        let p1 = self.hi * b;
        let p2 = self.hi.mul_add(b, -p1) + self.lo * b;
        let (hi, lo) = quick_two_sum(p1, p2);
        Dd { hi, lo }
    }

    /// `self + h * w`.
    #[inline]
    pub fn fma(self, h: Dd, w: f64) -> Dd {
        if h.lo == 0.0 {
            let p1 = h.hi * w;
            let p2 = h.hi.mul_add(w, -p1);
            self.add(Dd { hi: p1, lo: p2 })
        } else {
            self.add(h.mul_f64(w))
        }
    }

    #[inline]
    pub fn relu(self) -> Dd {
        if self.hi > 0.0 || (self.hi == 0.0 && self.lo > 0.0) {
            self
        } else {
            Dd::ZERO
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cancellation_is_exact() {
        let big = 1.0 / 1.0e-12;
        let a = Dd::from_f64(0.3).mul_f64(big);
        let b = Dd::from_f64(0.3).mul_f64(-big);
        assert_eq!(a.add(b).to_f64(), 0.0);
    }

    #[test]
    fn recovers_input_after_scaling_up_and_down() {
        let w = 2f64.powi(40);
        let x = 0.123456789;
        let up = Dd::ZERO.fma(Dd::from_f64(x), w).add_f64(-w * 0.1);
        let back = up.add_f64(w * 0.1).mul_f64(1.0 / w);
        assert_eq!(back.to_f64(), x);
    }

    #[test]
    fn relu_on_negative_tail() {
        assert_eq!(Dd { hi: 0.0, lo: -1e-30 }.relu(), Dd::ZERO);
        assert_eq!(Dd { hi: 0.0, lo: 1e-30 }.relu().lo, 1e-30);
    }
}

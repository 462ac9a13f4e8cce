use serde::{Deserialize, Serialize};

/// A real interval whose endpoints are independently open or closed.
/// Infinite endpoints are always open.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    pub lo_open: bool,
    pub hi_open: bool,
}

impl Interval {
    pub fn new(lo: f64, hi: f64, lo_open: bool, hi_open: bool) -> Self {
        Interval { lo, hi, lo_open: lo_open || lo.is_infinite(), hi_open: hi_open || hi.is_infinite() }
    }

    pub fn closed(lo: f64, hi: f64) -> Self {
        Interval::new(lo, hi, false, false)
    }

    /// `[lo, hi)`
    pub fn right_open(lo: f64, hi: f64) -> Self {
        Interval::new(lo, hi, false, true)
    }

    pub fn point(x: f64) -> Self {
        Interval::closed(x, x)
    }

    pub fn unbounded() -> Self {
        Interval::new(f64::NEG_INFINITY, f64::INFINITY, true, true)
    }

    pub fn at_least(lo: f64, open: bool) -> Self {
        Interval::new(lo, f64::INFINITY, open, true)
    }

    pub fn at_most(hi: f64, open: bool) -> Self {
        Interval::new(f64::NEG_INFINITY, hi, true, open)
    }

    pub fn is_empty(&self) -> bool {
        self.lo > self.hi || (self.lo == self.hi && (self.lo_open || self.hi_open))
    }

    pub fn contains(&self, x: f64) -> bool {
        let above_lo = if self.lo_open { x > self.lo } else { x >= self.lo };
        let below_hi = if self.hi_open { x < self.hi } else { x <= self.hi };
        above_lo && below_hi
    }

    pub fn is_unbounded(&self) -> bool {
        self.lo == f64::NEG_INFINITY && self.hi == f64::INFINITY
    }

    pub fn intersect(&self, other: &Interval) -> Interval {
        let (lo, lo_open) = if self.lo > other.lo {
            (self.lo, self.lo_open)
        } else if self.lo < other.lo {
            (other.lo, other.lo_open)
        } else {
            (self.lo, self.lo_open || other.lo_open)
        };
        let (hi, hi_open) = if self.hi < other.hi {
            (self.hi, self.hi_open)
        } else if self.hi > other.hi {
            (other.hi, other.hi_open)
        } else {
            (self.hi, self.hi_open || other.hi_open)
        };
        Interval { lo, hi, lo_open, hi_open }
    }

    pub fn intersects(&self, other: &Interval) -> bool {
        !self.intersect(other).is_empty()
    }

    /// True when every point of `self` lies in `other`.
    pub fn is_within(&self, other: &Interval) -> bool {
        self.is_empty() || self.intersect(other) == *self
    }

    /// The part of `self` strictly below `other`.
    pub fn below(&self, other: &Interval) -> Interval {
        Interval { lo: self.lo, lo_open: self.lo_open, hi: other.lo, hi_open: !other.lo_open }.intersect(self)
    }

    /// The part of `self` strictly above `other`.
    pub fn above(&self, other: &Interval) -> Interval {
        Interval { lo: other.hi, lo_open: !other.hi_open, hi: self.hi, hi_open: self.hi_open }.intersect(self)
    }

    /// A point inside the interval: a closed endpoint when there is one,
    /// otherwise the midpoint.
    pub fn representative(&self) -> f64 {
        if !self.lo_open {
            self.lo
        } else if !self.hi_open {
            self.hi
        } else {
            self.lo / 2.0 + self.hi / 2.0
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct IntervalJson {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lo: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    hi: Option<f64>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    lo_open: bool,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    hi_open: bool,
}

impl From<IntervalJson> for Interval {
    fn from(j: IntervalJson) -> Self {
        Interval::new(j.lo.unwrap_or(f64::NEG_INFINITY), j.hi.unwrap_or(f64::INFINITY), j.lo_open, j.hi_open)
    }
}

impl From<Interval> for IntervalJson {
    fn from(i: Interval) -> Self {
        IntervalJson {
            lo: i.lo.is_finite().then_some(i.lo),
            hi: i.hi.is_finite().then_some(i.hi),
            lo_open: i.lo_open && i.lo.is_finite(),
            hi_open: i.hi_open && i.hi.is_finite(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn emptiness_respects_open_ends() {
        assert!(!Interval::point(3.0).is_empty());
        assert!(Interval::new(3.0, 3.0, true, false).is_empty());
        assert!(Interval::closed(4.0, 3.0).is_empty());
        assert!(!Interval::new(3.0, 3.5, true, true).is_empty());
    }

    #[test]
    fn intersection_keeps_stricter_endpoint() {
        let a = Interval::right_open(0.0, 10.0);
        let b = Interval::closed(5.0, 10.0);
        let c = a.intersect(&b);
        assert_eq!(c, Interval::new(5.0, 10.0, false, true));
        assert!(Interval::closed(0.0, 4.0).intersect(&Interval::closed(5.0, 20.0)).is_empty());
    }

    #[test]
    fn below_and_above_partition() {
        let base = Interval::closed(0.0, 10.0);
        let cut = Interval::closed(4.0, 6.0);
        let lo = base.below(&cut);
        let hi = base.above(&cut);
        assert_eq!(lo, Interval::new(0.0, 4.0, false, true));
        assert_eq!(hi, Interval::new(6.0, 10.0, true, false));
        for x in [0.0, 3.9, 4.0, 5.0, 6.0, 6.1, 10.0] {
            let n = [lo.contains(x), cut.contains(x), hi.contains(x)].iter().filter(|b| **b).count();
            assert_eq!(n, 1, "x = {x}");
        }
    }

    #[test]
    fn right_open_boundary() {
        let day = Interval::right_open(0.0, 86400.0);
        assert!(day.contains(0.0));
        assert!(!day.contains(86400.0));
    }
}

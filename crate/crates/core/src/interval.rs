use crate::{Error, Result};

/// A proper closed interval `[lower, upper]` with finite bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    lower: f64,
    upper: f64,
}

impl Interval {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if lower.is_finite() && upper.is_finite() && lower < upper {
            Ok(Interval { lower, upper })
        } else {
            Err(Error::InvalidInterval { lower, upper })
        }
    }

    #[inline]
    pub fn lower(&self) -> f64 {
        self.lower
    }

    #[inline]
    pub fn upper(&self) -> f64 {
        self.upper
    }

    #[inline]
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    #[inline]
    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }

    #[inline]
    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }

    /// Membership with an absolute slack on both ends.
    #[inline]
    pub fn contains_within(&self, x: f64, slack: f64) -> bool {
        self.lower - slack <= x && x <= self.upper + slack
    }

    #[inline]
    pub fn contains_interior(&self, x: f64) -> bool {
        self.lower < x && x < self.upper
    }

    pub fn is_subset_of(&self, other: &Interval) -> bool {
        other.lower <= self.lower && self.upper <= other.upper
    }

    /// Proper intersection, `None` if empty or a single point.
    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        Interval::new(self.lower.max(other.lower), self.upper.min(other.upper)).ok()
    }

    /// `n` evenly spaced points including both endpoints (`n >= 2`).
    pub fn linspace(&self, n: usize) -> impl Iterator<Item = f64> + '_ {
        let n = n.max(2);
        let step = self.width() / (n - 1) as f64;
        (0..n).map(move |i| {
            if i == n - 1 {
                self.upper
            } else {
                self.lower + step * i as f64
            }
        })
    }
}

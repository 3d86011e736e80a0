//! Mergeable aggregate state with exact summation.

use std::fmt;

/// Aggregation function for a y term.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AggFn {
    Sum,
    Avg,
    Count,
    Max,
    Min,
}

impl AggFn {
    pub fn parse(s: &str) -> Option<AggFn> {
        match s.to_ascii_lowercase().as_str() {
            "sum" => Some(AggFn::Sum),
            "avg" | "mean" => Some(AggFn::Avg),
            "count" => Some(AggFn::Count),
            "max" => Some(AggFn::Max),
            "min" => Some(AggFn::Min),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            AggFn::Sum => "sum",
            AggFn::Avg => "avg",
            AggFn::Count => "count",
            AggFn::Max => "max",
            AggFn::Min => "min",
        }
    }
}

impl fmt::Display for AggFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Exact floating point accumulator (Shewchuk partials). The rounded result
/// does not depend on the order values were added or on how partial sums were merged.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ExactSum {
    partials: Vec<f64>,
}

impl ExactSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, mut x: f64) {
        let mut i = 0;
        for j in 0..self.partials.len() {
            let mut y = self.partials[j];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                self.partials[i] = lo;
                i += 1;
            }
            x = hi;
        }
        self.partials.truncate(i);
        self.partials.push(x);
    }

    pub fn merge(&mut self, other: &ExactSum) {
        for &p in &other.partials {
            self.add(p);
        }
    }

    /// Correctly rounded value of the accumulated sum.
    pub fn value(&self) -> f64 {
        let p = &self.partials;
        let mut n = p.len();
        if n == 0 {
            return 0.0;
        }
        n -= 1;
        let mut hi = p[n];
        let mut lo = 0.0;
        while n > 0 {
            let x = hi;
            n -= 1;
            let y = p[n];
            hi = x + y;
            let yr = hi - x;
            lo = y - yr;
            if lo != 0.0 {
                break;
            }
        }
        if n > 0 && ((lo < 0.0 && p[n - 1] < 0.0) || (lo > 0.0 && p[n - 1] > 0.0)) {
            let y = lo * 2.0;
            let x = hi + y;
            let yr = x - hi;
            if y == yr {
                hi = x;
            }
        }
        hi
    }
}

/// Per-(group, x, y term) aggregate state.
#[derive(Clone, Debug, PartialEq)]
pub struct AggState {
    pub count: u64,
    pub sum: ExactSum,
    pub min: f64,
    pub max: f64,
}

impl Default for AggState {
    fn default() -> Self {
        AggState {
            count: 0,
            sum: ExactSum::new(),
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
        }
    }
}

impl AggState {
    pub fn push(&mut self, y: f64) {
        self.count += 1;
        self.sum.add(y);
        self.min = self.min.min(y);
        self.max = self.max.max(y);
    }

    pub fn merge(&mut self, other: &AggState) {
        self.count += other.count;
        self.sum.merge(&other.sum);
        self.min = self.min.min(other.min);
        self.max = self.max.max(other.max);
    }

    pub fn finish(&self, f: AggFn) -> f64 {
        match f {
            AggFn::Sum => self.sum.value(),
            AggFn::Avg => self.sum.value() / self.count as f64,
            AggFn::Count => self.count as f64,
            AggFn::Max => self.max,
            AggFn::Min => self.min,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_sum_cancels() {
        let mut s = ExactSum::new();
        for x in [1e100, 1.0, -1e100] {
            s.add(x);
        }
        assert_eq!(s.value(), 1.0);
    }

    #[test]
    fn merge_matches_sequential() {
        let xs = [0.1, 0.2, 0.3, 1e16, -1e16, 0.7];
        let mut all = ExactSum::new();
        xs.iter().for_each(|&x| all.add(x));
        let mut a = ExactSum::new();
        let mut b = ExactSum::new();
        xs[..3].iter().for_each(|&x| a.add(x));
        xs[3..].iter().rev().for_each(|&x| b.add(x));
        b.merge(&a);
        assert_eq!(all.value(), b.value());
    }

    #[test]
    fn state_finishes() {
        let mut s = AggState::default();
        [4.0, 1.0, 7.0].iter().for_each(|&y| s.push(y));
        assert_eq!(s.finish(AggFn::Sum), 12.0);
        assert_eq!(s.finish(AggFn::Avg), 4.0);
        assert_eq!(s.finish(AggFn::Count), 3.0);
        assert_eq!(s.finish(AggFn::Max), 7.0);
        assert_eq!(s.finish(AggFn::Min), 1.0);
    }
}

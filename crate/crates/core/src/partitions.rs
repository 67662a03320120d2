//! Interval arithmetic on counter ranges.
//!
//! Partitions of `[1, B-1]` drive both strategy representations and the
//! compression: compressed chains require every bounded interval to have size
//! `2^beta - 1`, and `refine` rewrites arbitrary partitions into that shape
//! with at most `log2(|I|+1) + 1` pieces per interval. `isolate` makes a
//! chosen counter value an interval upper bound so it survives compression.

use num_integer::Integer;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::model::Bound;
use crate::Counter;

/// A non-empty integer interval `[lo, hi]`, possibly unbounded above.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Interval {
    pub lo: Counter,
    pub hi: Option<Counter>,
}

impl Interval {
    pub fn bounded(lo: u64, hi: u64) -> Interval {
        assert!(lo >= 1 && lo <= hi);
        Interval { lo: Counter::from(lo), hi: Some(Counter::from(hi)) }
    }

    pub fn unbounded(lo: u64) -> Interval {
        assert!(lo >= 1);
        Interval { lo: Counter::from(lo), hi: None }
    }

    pub fn new(lo: Counter, hi: Option<Counter>) -> Result<Interval> {
        if lo.is_zero() {
            return Err(Error::Domain("interval lower bound must be >= 1".to_string()));
        }
        if let Some(h) = &hi {
            if h < &lo {
                return Err(Error::Domain(format!("empty interval [{lo},{h}]")));
            }
        }
        Ok(Interval { lo, hi })
    }

    pub fn is_bounded(&self) -> bool {
        self.hi.is_some()
    }

    /// Number of elements; `None` when unbounded.
    pub fn size(&self) -> Option<Counter> {
        self.hi.as_ref().map(|h| h - &self.lo + 1u32)
    }

    pub fn contains(&self, k: &Counter) -> bool {
        k >= &self.lo && self.hi.as_ref().map_or(true, |h| k <= h)
    }

    /// `beta` such that the size is `2^beta - 1`; `None` if the interval is
    /// unbounded or not of that shape.
    pub fn beta(&self) -> Option<usize> {
        let size = self.size()?;
        let sp1 = size + 1u32;
        if sp1.count_ones() == 1 {
            Some(sp1.bits() as usize - 1)
        } else {
            None
        }
    }
}

impl std::fmt::Display for Interval {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.hi {
            Some(h) => write!(f, "{}-{}", self.lo, h),
            None => write!(f, "{}-inf", self.lo),
        }
    }
}

/// An ordered, contiguous partition of `[1, B-1]` into intervals.
///
/// Empty when `B = 1`. At most the last interval is unbounded.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct IntervalPartition {
    intervals: Vec<Interval>,
}

impl IntervalPartition {
    pub fn new(intervals: Vec<Interval>) -> Result<IntervalPartition> {
        let mut expect = Counter::one();
        for (i, iv) in intervals.iter().enumerate() {
            if iv.lo != expect {
                return Err(Error::Domain(format!(
                    "interval {iv} does not start at {expect}; partition must be contiguous from 1"
                )));
            }
            match &iv.hi {
                Some(h) => expect = h + 1u32,
                None => {
                    if i + 1 != intervals.len() {
                        return Err(Error::Domain(
                            "only the last interval may be unbounded".to_string(),
                        ));
                    }
                }
            }
        }
        Ok(IntervalPartition { intervals })
    }

    /// The trivial one-interval partition of `[1, B-1]`; empty when `B = 1`.
    pub fn full_range(bound: &Bound) -> IntervalPartition {
        match bound {
            Bound::Infinite => IntervalPartition { intervals: vec![Interval::unbounded(1)] },
            Bound::Finite(b) => {
                if b <= &Counter::one() {
                    IntervalPartition { intervals: Vec::new() }
                } else {
                    IntervalPartition {
                        intervals: vec![Interval {
                            lo: Counter::one(),
                            hi: Some(b - 1u32),
                        }],
                    }
                }
            }
        }
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }

    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    /// Index of the interval containing `k`.
    pub fn find(&self, k: &Counter) -> Option<usize> {
        if k.is_zero() {
            return None;
        }
        // Binary search on lower bounds.
        let mut lo = 0usize;
        let mut hi = self.intervals.len();
        while lo < hi {
            let mid = (lo + hi) / 2;
            if &self.intervals[mid].lo <= k {
                lo = mid + 1;
            } else {
                hi = mid;
            }
        }
        if lo == 0 {
            return None;
        }
        let cand = &self.intervals[lo - 1];
        cand.contains(k).then_some(lo - 1)
    }

    /// The bound `B` such that this partition covers `[1, B-1]`.
    pub fn covered_bound(&self) -> Bound {
        match self.intervals.last() {
            None => Bound::Finite(Counter::one()),
            Some(Interval { hi: None, .. }) => Bound::Infinite,
            Some(Interval { hi: Some(h), .. }) => Bound::Finite(h + 1u32),
        }
    }

    /// True when every bounded interval has size `2^beta - 1`.
    pub fn is_refined(&self) -> bool {
        self.intervals.iter().all(|iv| !iv.is_bounded() || iv.beta().is_some())
    }
}

/// A periodic partition, represented by its window over `[1, period]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PeriodicPartition {
    pub period: Counter,
    pub window: IntervalPartition,
}

impl PeriodicPartition {
    pub fn new(period: Counter, window: IntervalPartition) -> Result<PeriodicPartition> {
        if period.is_zero() {
            return Err(Error::Domain("period must be >= 1".to_string()));
        }
        match window.covered_bound() {
            Bound::Finite(b) if b == &period + 1u32 => Ok(PeriodicPartition { period, window }),
            other => Err(Error::Domain(format!(
                "window covers [1,{other}-1] but the period is {period}"
            ))),
        }
    }

    /// Window interval index for a counter value `k >= 1` (period-folded).
    pub fn find(&self, k: &Counter) -> Option<usize> {
        if k.is_zero() {
            return None;
        }
        let folded = (k - 1u32).mod_floor(&self.period) + 1u32;
        self.window.find(&folded)
    }
}

/// Split a bounded interval into pieces of size `2^beta - 1`.
///
/// The split repeatedly carves off the largest such prefix, so the result has
/// at most `log2(|I|+1) + 1` pieces. Unbounded intervals are returned as-is.
pub fn refine(interval: &Interval) -> Vec<Interval> {
    let Some(hi) = interval.hi.clone() else {
        return vec![interval.clone()];
    };
    let mut out = Vec::new();
    let mut lo = interval.lo.clone();
    loop {
        let size = &hi - &lo + 1u32;
        let ell = (&size + 1u32).bits() as usize - 1;
        let piece = (Counter::one() << ell) - 1u32;
        if size == piece {
            out.push(Interval { lo, hi: Some(hi) });
            return out;
        }
        let cut = &lo + &piece - 1u32;
        out.push(Interval { lo: lo.clone(), hi: Some(cut.clone()) });
        lo = cut + 1u32;
    }
}

/// Split every interval containing `k` into `[lo,k]` and `[k+1,hi]`, making
/// `k` an interval upper bound (a no-op when `k` is outside the range).
pub fn isolate(p: &IntervalPartition, k: &Counter) -> IntervalPartition {
    let mut out = Vec::with_capacity(p.len() + 1);
    for iv in p.intervals() {
        if !k.is_zero() && iv.contains(k) && iv.hi.as_ref() != Some(k) {
            out.push(Interval { lo: iv.lo.clone(), hi: Some(k.clone()) });
            out.push(Interval { lo: k + 1u32, hi: iv.hi.clone() });
        } else {
            out.push(iv.clone());
        }
    }
    IntervalPartition { intervals: out }
}

/// Refine every interval of a partition.
pub fn refine_partition(p: &IntervalPartition) -> IntervalPartition {
    let mut out = Vec::new();
    for iv in p.intervals() {
        out.extend(refine(iv));
    }
    IntervalPartition { intervals: out }
}

/// `Refine(Isolate(p, k))`: the preprocessing applied before compression so
/// that the size assumption holds and `k` is retained.
pub fn prepare(p: &IntervalPartition, k: &Counter) -> IntervalPartition {
    refine_partition(&isolate(p, k))
}

/// Tile shifted copies of a periodic window over `[1, upto]`.
pub fn expand_periodic(pp: &PeriodicPartition, upto: &Counter) -> Result<IntervalPartition> {
    if !upto.mod_floor(&pp.period).is_zero() {
        return Err(Error::Precondition(format!(
            "expansion limit {upto} is not a multiple of the period {}",
            pp.period
        )));
    }
    let mut out = Vec::new();
    let mut shift = Counter::zero();
    while &shift < upto {
        for iv in pp.window.intervals() {
            out.push(Interval {
                lo: &iv.lo + &shift,
                hi: iv.hi.as_ref().map(|h| h + &shift),
            });
        }
        shift += &pp.period;
    }
    IntervalPartition::new(out)
}

/// All partitions of `[1, B-1]` with at most `d` intervals, every bounded
/// interval of size at most `n` (the unbounded tail, present when `B` is
/// infinite, is exempt). Ordered by interval count, then lexicographically by
/// the sequence of interval lengths.
pub fn enumerate_partitions(d: usize, n: u64, bound: &Bound) -> PartitionEnum {
    assert!(d >= 1 && n >= 1);
    let total = match bound {
        Bound::Infinite => None,
        Bound::Finite(b) => {
            let want = b - 1u32;
            match u64::try_from(&want) {
                Ok(t) if t <= d as u64 * n => Some(t),
                // Too large for any compatible partition: empty stream.
                _ => {
                    return PartitionEnum { d, n, total: Some(0), count: 0, parts: Vec::new(), done: true }
                }
            }
        }
    };
    let first_count = if total == Some(0) { 0 } else { 1 };
    let mut e = PartitionEnum { d, n, total, count: first_count, parts: Vec::new(), done: false };
    e.reset_count();
    e
}

/// Iterator over parameter-compatible partitions; independently restartable
/// by calling [`enumerate_partitions`] again.
pub struct PartitionEnum {
    d: usize,
    n: u64,
    /// `Some(sum)` for a finite range `[1, sum]`; `None` for an infinite one.
    total: Option<u64>,
    count: usize,
    /// Free part lengths: all parts (finite case, last one dependent) or the
    /// bounded prefix (infinite case).
    parts: Vec<u64>,
    done: bool,
}

impl PartitionEnum {
    fn free_len(&self) -> usize {
        // In both cases the last piece is determined by the others.
        self.count.saturating_sub(1)
    }

    fn reset_count(&mut self) {
        self.parts = vec![1; self.free_len()];
    }

    fn advance(&mut self) {
        // Odometer over the free parts in [1, n].
        let mut i = self.free_len();
        loop {
            if i == 0 {
                self.count += 1;
                if self.count > self.d {
                    self.done = true;
                } else {
                    self.reset_count();
                }
                return;
            }
            i -= 1;
            if self.parts[i] < self.n {
                self.parts[i] += 1;
                for p in self.parts[i + 1..].iter_mut() {
                    *p = 1;
                }
                return;
            }
        }
    }

    fn current(&self) -> Option<IntervalPartition> {
        let free_sum: u64 = self.parts.iter().sum();
        let mut sizes: Vec<Option<u64>> = self.parts.iter().map(|p| Some(*p)).collect();
        match self.total {
            Some(total) => {
                if self.count == 0 {
                    return Some(IntervalPartition { intervals: Vec::new() });
                }
                let last = total.checked_sub(free_sum)?;
                if last < 1 || last > self.n {
                    return None;
                }
                sizes.push(Some(last));
            }
            None => sizes.push(None),
        }
        let mut lo = 1u64;
        let mut intervals = Vec::with_capacity(sizes.len());
        for s in sizes {
            match s {
                Some(s) => {
                    intervals.push(Interval::bounded(lo, lo + s - 1));
                    lo += s;
                }
                None => intervals.push(Interval::unbounded(lo)),
            }
        }
        Some(IntervalPartition { intervals })
    }
}

impl Iterator for PartitionEnum {
    type Item = IntervalPartition;

    fn next(&mut self) -> Option<IntervalPartition> {
        while !self.done {
            let item = self.current();
            let was_empty_case = self.total == Some(0);
            if was_empty_case {
                self.done = true;
                return item;
            }
            self.advance();
            if item.is_some() {
                return item;
            }
        }
        None
    }
}

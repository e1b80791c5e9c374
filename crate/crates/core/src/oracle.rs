//! Exact sliding-window ground truth. Deliberately the slow reference:
//! a ring buffer of the live window plus a full count map, with optional
//! whole-stream history for range queries.

use std::collections::{HashMap, HashSet, VecDeque};

use crate::error::{Error, Result};

/// Exact per-item frequencies over the last `w` items.
#[derive(Debug, Clone)]
pub struct ExactWindow {
    w: u64,
    buf: VecDeque<u64>,
    counts: HashMap<u64, u64>,
    t: u64,
    history: Option<Vec<u64>>,
}

impl ExactWindow {
    pub fn new(w: u64) -> Self {
        assert!(w >= 1, "window size must be at least 1");
        Self {
            w,
            buf: VecDeque::new(),
            counts: HashMap::new(),
            t: 0,
            history: None,
        }
    }

    /// Like [`new`](Self::new) but additionally retains the whole stream so
    /// [`range_frequency`](Self::range_frequency) can answer. Costs O(n)
    /// memory; meant for tests and workload generation.
    pub fn with_history(w: u64) -> Self {
        let mut oracle = Self::new(w);
        oracle.history = Some(Vec::new());
        oracle
    }

    pub fn observe(&mut self, item: u64) {
        self.t += 1;
        self.buf.push_back(item);
        *self.counts.entry(item).or_insert(0) += 1;
        if self.buf.len() as u64 > self.w {
            let evicted = self.buf.pop_front().expect("buffer non-empty");
            match self.counts.get_mut(&evicted) {
                Some(c) if *c > 1 => *c -= 1,
                Some(_) => {
                    self.counts.remove(&evicted);
                }
                None => unreachable!("evicted item must be counted"),
            }
        }
        if let Some(history) = &mut self.history {
            history.push(item);
        }
    }

    /// Exact number of occurrences of `item` among the last `min(t, w)`
    /// items.
    pub fn frequency(&self, item: u64) -> u64 {
        *self.counts.get(&item).unwrap_or(&0)
    }

    /// Exact number of occurrences of `item` at stream positions
    /// `[lo, hi]` (1-based, inclusive). Requires history retention.
    pub fn range_frequency(&self, item: u64, lo: u64, hi: u64) -> Result<u64> {
        let history = self.history.as_ref().ok_or(Error::HistoryDisabled)?;
        if lo < 1 || lo > hi || hi > self.t {
            return Err(Error::InvalidRange { lo, hi, t: self.t });
        }
        let slice = &history[(lo - 1) as usize..hi as usize];
        Ok(slice.iter().filter(|&&s| s == item).count() as u64)
    }

    /// Items whose window frequency reaches `gamma * w` (inclusive).
    pub fn heavy_hitters(&self, gamma: f64) -> HashSet<u64> {
        let threshold = gamma * self.w as f64;
        self.counts
            .iter()
            .filter(|&(_, &f)| f as f64 >= threshold)
            .map(|(&item, _)| item)
            .collect()
    }

    pub fn time(&self) -> u64 {
        self.t
    }

    pub fn window_size(&self) -> u64 {
        self.w
    }

    /// Current number of items in the window, `min(t, w)`.
    pub fn window_len(&self) -> u64 {
        self.buf.len() as u64
    }

    /// Iterates over `(item, window frequency)` pairs, unordered.
    pub fn counts(&self) -> impl Iterator<Item = (u64, u64)> + '_ {
        self.counts.iter().map(|(&item, &f)| (item, f))
    }

    /// 1-based index of the oldest item still in the window.
    pub fn window_start(&self) -> u64 {
        self.t.saturating_sub(self.w - 1).max(1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn basic_eviction() {
        let mut o = ExactWindow::new(2);
        for item in [7, 7, 9] {
            o.observe(item);
        }
        assert_eq!(o.frequency(7), 1);
        assert_eq!(o.frequency(9), 1);
        assert_eq!(o.frequency(1), 0);
        assert_eq!(o.window_len(), 2);
    }

    #[test]
    fn window_larger_than_stream_counts_everything() {
        let mut o = ExactWindow::new(100);
        for item in [1, 2, 2, 3, 3, 3] {
            o.observe(item);
        }
        assert_eq!(o.frequency(3), 3);
        assert_eq!(o.frequency(2), 2);
        let total: u64 = o.counts().map(|(_, f)| f).sum();
        assert_eq!(total, 6);
    }

    #[test]
    fn range_queries() {
        let mut o = ExactWindow::with_history(3);
        for item in [5, 6, 5, 5, 7] {
            o.observe(item);
        }
        assert_eq!(o.range_frequency(5, 1, 5).unwrap(), 3);
        assert_eq!(o.range_frequency(5, 2, 2).unwrap(), 0);
        assert_eq!(o.range_frequency(9, 1, 5).unwrap(), 0);
        assert!(o.range_frequency(5, 0, 2).is_err());
        assert!(o.range_frequency(5, 3, 2).is_err());
        assert!(o.range_frequency(5, 1, 6).is_err());
        assert_eq!(
            o.frequency(5),
            o.range_frequency(5, o.window_start(), o.time()).unwrap()
        );

        let no_history = ExactWindow::new(3);
        assert!(matches!(
            no_history.range_frequency(1, 1, 1),
            Err(Error::HistoryDisabled)
        ));
    }

    #[test]
    fn heavy_hitter_thresholds() {
        let mut o = ExactWindow::new(4);
        for item in [1, 1, 1, 2] {
            o.observe(item);
        }
        // Boundary is inclusive: f = gamma w keeps the item.
        assert!(o.heavy_hitters(0.75).contains(&1));
        assert!(!o.heavy_hitters(0.75).contains(&2));
        // Just above the max frequency ratio the set empties.
        assert!(o.heavy_hitters(0.80).is_empty());
        assert_eq!(o.heavy_hitters(1e-9).len(), 2, "tiny gamma keeps every live item");
    }

    proptest! {
        /// Window counts agree with a brute-force recount, and range counts
        /// add up over a partition of the stream.
        #[test]
        fn counts_match_brute_force(stream in proptest::collection::vec(1u64..20, 1..200),
                                    w in 1u64..50) {
            let mut o = ExactWindow::with_history(w);
            for &item in &stream {
                o.observe(item);
            }
            let n = stream.len();
            let start = n.saturating_sub(w as usize);
            for item in 1..20u64 {
                let expected = stream[start..].iter().filter(|&&s| s == item).count() as u64;
                prop_assert_eq!(o.frequency(item), expected);
            }
            let total: u64 = o.counts().map(|(_, f)| f).sum();
            prop_assert_eq!(total, (n - start) as u64);

            // Partition additivity of range counts.
            let mid = (n as u64).div_ceil(2);
            for item in 1..20u64 {
                let left = o.range_frequency(item, 1, mid).unwrap();
                let right = if mid < n as u64 {
                    o.range_frequency(item, mid + 1, n as u64).unwrap()
                } else {
                    0
                };
                let full = o.range_frequency(item, 1, n as u64).unwrap();
                prop_assert_eq!(left + right, full);
            }
        }
    }
}

use std::ops::AddAssign;

/// Accumulate-operation ledger for one or more layers.
///
/// `dense_total` is the analytic count of the same layers with no skipping,
/// so `shift_adds_done + accumulates_skipped == dense_total` once a layer has
/// completed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct OpCounter {
    pub shift_adds_done: u64,
    pub accumulates_skipped: u64,
    pub dense_total: u64,
}

impl OpCounter {
    pub fn is_balanced(&self) -> bool {
        self.shift_adds_done + self.accumulates_skipped == self.dense_total
    }

    /// Fraction of dense accumulates that were skipped, in `[0, 1]`.
    pub fn savings_fraction(&self) -> f64 {
        if self.dense_total == 0 {
            0.0
        } else {
            self.accumulates_skipped as f64 / self.dense_total as f64
        }
    }
}

impl AddAssign for OpCounter {
    fn add_assign(&mut self, rhs: Self) {
        self.shift_adds_done += rhs.shift_adds_done;
        self.accumulates_skipped += rhs.accumulates_skipped;
        self.dense_total += rhs.dense_total;
    }
}

impl std::iter::Sum for OpCounter {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(OpCounter::default(), |mut acc, c| {
            acc += c;
            acc
        })
    }
}

use super::PrecisionTier;
use serde::{Deserialize, Serialize};
use std::ops::{Add, Sub};
use std::sync::atomic::{AtomicU64, Ordering};

/// Per-tier flop accumulator shared by all kernels of a solve.
///
/// Kernels add their analytic count at entry with relaxed atomic adds, so a
/// counter can be shared by reference across threads and the final count is
/// independent of scheduling.
#[derive(Debug, Default)]
pub struct FlopCounter {
    high: AtomicU64,
    low: AtomicU64,
    conversions: AtomicU64,
}

impl FlopCounter {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&self, tier: PrecisionTier, flops: u64) {
        let slot = match tier {
            PrecisionTier::High => &self.high,
            PrecisionTier::Low => &self.low,
        };
        slot.fetch_add(flops, Ordering::Relaxed);
    }

    #[inline]
    pub fn record_conversion(&self) {
        self.conversions.fetch_add(1, Ordering::Relaxed);
    }

    /// Folds totals gathered elsewhere (e.g. by a worker's private counter).
    pub fn merge(&self, totals: FlopTotals) {
        self.high.fetch_add(totals.high, Ordering::Relaxed);
        self.low.fetch_add(totals.low, Ordering::Relaxed);
        self.conversions
            .fetch_add(totals.conversions, Ordering::Relaxed);
    }

    pub fn snapshot(&self) -> FlopTotals {
        FlopTotals {
            high: self.high.load(Ordering::Relaxed),
            low: self.low.load(Ordering::Relaxed),
            conversions: self.conversions.load(Ordering::Relaxed),
        }
    }

    /// Resets all accumulators. Taking `&mut self` guarantees no kernel holds
    /// the counter while it is cleared.
    pub fn reset(&mut self) {
        *self.high.get_mut() = 0;
        *self.low.get_mut() = 0;
        *self.conversions.get_mut() = 0;
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlopTotals {
    pub high: u64,
    pub low: u64,
    pub conversions: u64,
}

impl FlopTotals {
    pub fn total(&self) -> u64 {
        self.high + self.low
    }

    pub fn get(&self, tier: PrecisionTier) -> u64 {
        match tier {
            PrecisionTier::High => self.high,
            PrecisionTier::Low => self.low,
        }
    }

    /// Fraction of all flops executed at `tier`; zero when nothing ran.
    pub fn fraction(&self, tier: PrecisionTier) -> f64 {
        let total = self.total();
        if total == 0 {
            0.0
        } else {
            self.get(tier) as f64 / total as f64
        }
    }
}

impl Add for FlopTotals {
    type Output = FlopTotals;
    fn add(self, rhs: Self) -> Self {
        FlopTotals {
            high: self.high + rhs.high,
            low: self.low + rhs.low,
            conversions: self.conversions + rhs.conversions,
        }
    }
}

impl Sub for FlopTotals {
    type Output = FlopTotals;
    fn sub(self, rhs: Self) -> Self {
        FlopTotals {
            high: self.high - rhs.high,
            low: self.low - rhs.low,
            conversions: self.conversions - rhs.conversions,
        }
    }
}

//! Time sources for evaluation passes.

use core::sync::atomic::{AtomicU64, Ordering};

/// Monotonic nanosecond timestamps.
pub trait Clock {
    fn now_ns(&self) -> u64;
}

impl<C: Clock + ?Sized> Clock for &C {
    fn now_ns(&self) -> u64 {
        (**self).now_ns()
    }
}

/// Always reads zero, for callers that do not want timing.
#[derive(Debug, Default, Clone, Copy)]
pub struct NullClock;

impl Clock for NullClock {
    fn now_ns(&self) -> u64 {
        0
    }
}

/// Deterministic clock that advances by a fixed step on every reading.
///
/// Durations measured with it count readings rather than wall time, which
/// makes timing columns reproducible byte-for-byte.
#[derive(Debug, Default)]
pub struct StepClock {
    ticks: AtomicU64,
    step_ns: u64,
}

impl StepClock {
    pub fn new(step_ns: u64) -> Self {
        Self { ticks: AtomicU64::new(0), step_ns }
    }

    pub fn readings(&self) -> u64 {
        self.ticks.load(Ordering::Relaxed)
    }
}

impl Clock for StepClock {
    fn now_ns(&self) -> u64 {
        self.ticks.fetch_add(1, Ordering::Relaxed).wrapping_add(1) * self.step_ns
    }
}

pub(crate) fn ns_to_ms(ns: u64) -> f64 {
    ns as f64 / 1e6
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_clock_advances() {
        let c = StepClock::new(1000);
        assert_eq!(c.now_ns(), 1000);
        assert_eq!(c.now_ns(), 2000);
        assert_eq!(c.readings(), 2);
    }
}

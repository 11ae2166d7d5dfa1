//! Work counters used to check the cost of gradient computations.

use std::sync::atomic::{AtomicUsize, Ordering};

/// Thread-safe tallies of the expensive operations a computation performed.
#[derive(Debug, Default)]
pub struct Counters {
    liouvillian_builds: AtomicUsize,
    steady_solves: AtomicUsize,
    adjoint_solves: AtomicUsize,
}

/// Plain copy of [`Counters`] at one instant.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CounterSnapshot {
    pub liouvillian_builds: usize,
    pub steady_solves: usize,
    pub adjoint_solves: usize,
}

impl Counters {
    pub fn record_build(&self) {
        self.liouvillian_builds.fetch_add(1, Ordering::Relaxed);
    }

    pub fn record_steady_solve(&self) {
        self.steady_solves.fetch_add(1, Ordering::Relaxed);
    }

    pub fn record_adjoint_solve(&self) {
        self.adjoint_solves.fetch_add(1, Ordering::Relaxed);
    }

    pub fn snapshot(&self) -> CounterSnapshot {
        CounterSnapshot {
            liouvillian_builds: self.liouvillian_builds.load(Ordering::Relaxed),
            steady_solves: self.steady_solves.load(Ordering::Relaxed),
            adjoint_solves: self.adjoint_solves.load(Ordering::Relaxed),
        }
    }
}

//! Average-cost dynamic programming.
//!
//! Both solvers use synchronous relative value iteration: every sweep applies
//! the Bellman operator `T` to the whole table, then subtracts the updated
//! value at a reference state. Sweeping stops when the span
//! `max(Th - h) - min(Th - h)` drops to the tolerance; the optimal average
//! cost then lies in `[min(Th - h), max(Th - h)]`.

mod brute;
mod joint;
mod single;

pub use brute::{brute_force_policy_search, BruteForceResult, BRUTE_FORCE_POLICY_LIMIT};
pub use joint::{joint_rvi, joint_rvi_with_reference, joint_transition_row, JointSolution, JointSpace};
pub use single::{appendix_f_diagnostic, single_queue_rvi, AppendixDiagnostic, SingleQueueModel, SingleQueueSolution};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RviOptions {
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for RviOptions {
    fn default() -> Self {
        Self { tol: 1e-9, max_sweeps: 1_000_000 }
    }
}

impl RviOptions {
    pub fn new(tol: f64, max_sweeps: usize) -> Self {
        Self { tol, max_sweeps }
    }

    fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::invalid("tol", format!("{} must be positive", self.tol)));
        }
        if self.max_sweeps == 0 {
            return Err(Error::invalid("max_sweeps", "must be positive"));
        }
        Ok(())
    }
}

/// Relative slack under which two action values count as tied.
pub(crate) const TIE_SLACK: f64 = 1e-12;

/// Index of the smallest value; near-ties go to the lowest index.
pub(crate) fn argmin_lowest(values: impl IntoIterator<Item = f64>) -> (usize, f64) {
    let values: Vec<f64> = values.into_iter().collect();
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let slack = TIE_SLACK * (1.0 + min.abs());
    let best = values.iter().position(|v| *v <= min + slack).unwrap_or(0);
    (best, min)
}

fn span(diff: impl Iterator<Item = f64>) -> (f64, f64) {
    diff.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), d| (lo.min(d), hi.max(d)))
}

//! Single-queue chains under threshold policies.
//!
//! A threshold policy with threshold `k` keeps the queue active on
//! `{0, .., k}` and passive above. Starting from an empty queue the chain
//! lives on `{0, .., k+1}`: it can climb from `k` to `k+1` on an arrival with
//! no departure, but `k+1` admits nothing.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::markov;
use crate::model::next_state_pmf;

/// Active exactly on `{0, .., k}`; `k = -1` is passive everywhere.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ThresholdPolicy {
    pub k: i64,
}

impl ThresholdPolicy {
    pub fn new(k: i64) -> Result<Self> {
        if k < -1 {
            return Err(Error::invalid("k", format!("threshold {k} below -1")));
        }
        Ok(Self { k })
    }

    pub fn is_active(&self, x: usize) -> bool {
        (x as i64) <= self.k
    }
}

/// Transition matrix of a threshold policy on its recurrent class `{0, .., k+1}`.
#[derive(Debug, Clone)]
pub struct RecurrentChain {
    pub k: usize,
    pub matrix: DMatrix<f64>,
}

impl RecurrentChain {
    pub fn num_states(&self) -> usize {
        self.matrix.nrows()
    }
}

#[derive(Debug, Clone)]
pub struct StationaryDistribution {
    pub probs: Vec<f64>,
}

impl StationaryDistribution {
    pub fn mean(&self) -> f64 {
        self.probs.iter().enumerate().map(|(j, w)| j as f64 * w).sum()
    }
}

pub fn threshold_chain(k: usize, q: f64, p: f64) -> RecurrentChain {
    let n = k + 2;
    let mut matrix = DMatrix::zeros(n, n);
    for x in 0..n {
        // Buffer k+1 never binds: the only admitting states are <= k.
        let next = next_state_pmf(x, q, p, x <= k, k + 1);
        for (y, w) in next.iter() {
            matrix[(x, y)] = w;
        }
    }
    RecurrentChain { k, matrix }
}

const STATIONARY_TOL: f64 = 1e-10;

pub fn stationary_distribution(chain: &RecurrentChain) -> Result<StationaryDistribution> {
    let probs = markov::stationary_direct(&chain.matrix)?;
    let residual = markov::balance_residual(&chain.matrix, &probs);
    if residual > STATIONARY_TOL {
        return Err(Error::Internal(format!("stationary balance residual {residual:e} on threshold {}", chain.k)));
    }
    Ok(StationaryDistribution { probs })
}

/// `sum_{j<=k} pi^k(j) = 1 - pi^k(k+1)`: long-run fraction of active slots.
pub fn cumulative_active_mass(k: usize, q: f64, p: f64) -> Result<f64> {
    let pi = stationary_distribution(&threshold_chain(k, q, p))?;
    Ok(pi.probs[..=k].iter().sum())
}

/// All-ones lower-triangular matrix: row `i` has ones in columns `0..=i`.
pub fn lower_ones(n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| if j <= i { 1.0 } else { 0.0 })
}

const DOMINANCE_SLACK: f64 = 1e-12;

/// Checks that the threshold-`k+1` chain stochastically dominates the
/// threshold-`k` chain: `P1 U <= P2 U` elementwise.
///
/// Both matrices are indexed by job count, so `(P U)(i, j)` is the
/// probability of moving from `i` jobs to at least `j` jobs. `P1` lives on
/// `{0, .., k+1}` and is padded with a zero row and column for state `k+2`,
/// which the threshold-`k` chain never reaches.
pub fn dominance_check(k: usize, q: f64, p: f64) -> bool {
    let n = k + 3;
    let small = threshold_chain(k, q, p).matrix;
    let mut p1 = DMatrix::zeros(n, n);
    p1.view_mut((0, 0), (n - 1, n - 1)).copy_from(&small);
    let p2 = threshold_chain(k + 1, q, p).matrix;
    let u = lower_ones(n);
    let (lhs, rhs) = (p1 * &u, p2 * &u);
    lhs.iter().zip(rhs.iter()).all(|(a, b)| *a <= *b + DOMINANCE_SLACK)
}

/// Long-run average of `C x + (1 - nu) lambda` under threshold `k`.
///
/// For `k >= 0` this is `C E[X] + lambda pi(k+1)`; the all-passive policy
/// (`k = -1`) sits at the empty queue and pays `lambda` every slot.
pub fn threshold_average_cost(k: i64, lambda: f64, cost_c: f64, q: f64, p: f64) -> Result<f64> {
    let policy = ThresholdPolicy::new(k)?;
    if policy.k < 0 {
        return Ok(lambda);
    }
    let k = policy.k as usize;
    let pi = stationary_distribution(&threshold_chain(k, q, p))?;
    Ok(cost_c * pi.mean() + lambda * pi.probs[k + 1])
}

/// `min_k` of [`threshold_average_cost`] over `k in -1..=k_max`, with the
/// minimising threshold (lowest on ties).
pub fn optimal_threshold_cost(lambda: f64, k_max: usize, cost_c: f64, q: f64, p: f64) -> Result<(i64, f64)> {
    let mut best = (-1, lambda);
    for k in 0..=k_max {
        let cost = threshold_average_cost(k as i64, lambda, cost_c, q, p)?;
        if cost < best.1 {
            best = (k as i64, cost);
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;

    use super::*;

    #[test]
    fn threshold_zero_chain() {
        let chain = threshold_chain(0, 0.5, 0.4);
        let want = [[0.6, 0.4], [0.5, 0.5]];
        for i in 0..2 {
            for j in 0..2 {
                assert_abs_diff_eq!(chain.matrix[(i, j)], want[i][j], epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn chain_rows_are_stochastic() {
        let chain = threshold_chain(2, 0.45, 0.4);
        assert_eq!(chain.num_states(), 4);
        assert!(markov::row_sum_error(&chain.matrix) < 1e-12);
        assert!(chain.matrix.iter().all(|w| (0.0..=1.0).contains(w)));
        // The passive top state only drains.
        assert_eq!(chain.matrix[(3, 3)], crate::model::departure_pmf(3, 0.45).prob(0));
    }

    #[test]
    fn stationary_examples() {
        let pi = stationary_distribution(&threshold_chain(0, 0.5, 0.4)).unwrap();
        assert_abs_diff_eq!(pi.probs[0], 5.0 / 9.0, epsilon = 1e-14);
        assert_abs_diff_eq!(pi.probs[1], 4.0 / 9.0, epsilon = 1e-14);

        let chain = threshold_chain(1, 0.5, 0.4);
        let direct = stationary_distribution(&chain).unwrap();
        let power = markov::stationary_power(&chain.matrix, 1e-15, 100_000).unwrap();
        for (a, b) in direct.probs.iter().zip(&power) {
            assert_abs_diff_eq!(*a, *b, epsilon = 1e-10);
        }
        assert_abs_diff_eq!(direct.probs.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn active_mass_examples() {
        let m0 = cumulative_active_mass(0, 0.5, 0.4).unwrap();
        assert_abs_diff_eq!(m0, 5.0 / 9.0, epsilon = 1e-14);
        assert!(cumulative_active_mass(1, 0.5, 0.4).unwrap() >= m0);
        assert!(1.0 - cumulative_active_mass(40, 0.5, 0.4).unwrap() < 1e-3);
    }

    #[test]
    fn dominance_examples() {
        assert!(dominance_check(0, 0.5, 0.4));
        assert!(dominance_check(5, 0.45, 0.4));
        let u = lower_ones(6);
        for i in 0..6 {
            assert_eq!(u.row(i).sum() as usize, i + 1);
        }
    }

    #[test]
    fn average_cost_examples() {
        assert_abs_diff_eq!(threshold_average_cost(0, 0.0, 1.0, 0.5, 0.4).unwrap(), 4.0 / 9.0, epsilon = 1e-14);
        assert_abs_diff_eq!(threshold_average_cost(0, 1.0, 1.0, 0.5, 0.4).unwrap(), 8.0 / 9.0, epsilon = 1e-14);
        assert_eq!(threshold_average_cost(-1, -3.0, 1.0, 0.5, 0.4).unwrap(), -3.0);
        assert!(threshold_average_cost(-2, 0.0, 1.0, 0.5, 0.4).is_err());
    }

    #[test]
    fn threshold_policy_activity() {
        let pol = ThresholdPolicy::new(2).unwrap();
        assert!(pol.is_active(0) && pol.is_active(2) && !pol.is_active(3));
        assert!(!ThresholdPolicy::new(-1).unwrap().is_active(0));
    }
}

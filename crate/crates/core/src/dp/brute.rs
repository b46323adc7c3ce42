use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};

use super::{argmin_lowest, joint_transition_row, JointSpace};
use crate::error::{Error, Result};
use crate::markov::stationary_direct;
use crate::model::SystemConfig;

/// Most stationary policies the exhaustive search will enumerate.
pub const BRUTE_FORCE_POLICY_LIMIT: usize = 1 << 20;

/// Relative slack under which two policies count as equally good.
const BETA_TIE: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct BruteForceResult {
    /// Server per joint-state index (0-based), in [`JointSpace`] order.
    pub policy: Vec<usize>,
    pub beta: f64,
    /// Number of policies whose average cost ties the optimum.
    pub optimal_count: usize,
    pub evaluated: usize,
}

type Rows = Vec<Vec<Vec<(usize, f64)>>>;

/// Exhaustive search over stationary server-selection maps.
///
/// Each policy is scored by the stationary holding cost of the recurrent
/// class reachable from the empty state. Policies tied with the optimum
/// usually differ only on states that class never visits; among them the
/// first (in enumeration order) whose own relative values make it greedy,
/// with lowest-index tie-breaking, is returned, so the answer is the
/// canonical solution of the average-cost optimality equation.
pub fn brute_force_policy_search(cfg: &SystemConfig) -> Result<BruteForceResult> {
    cfg.validated()?;
    let servers = cfg.num_servers();
    let space = JointSpace::new(servers, cfg.buffer)?;
    let states = space.len();
    let count = (servers as f64).powi(states as i32);
    if count > BRUTE_FORCE_POLICY_LIMIT as f64 {
        return Err(Error::StateSpaceTooLarge { states, policies: count, limit: BRUTE_FORCE_POLICY_LIMIT });
    }
    let holding: Vec<f64> = (0..states)
        .map(|s| space.decode(s).iter().zip(&cfg.servers).map(|(x, srv)| srv.cost_c * *x as f64).sum())
        .collect();
    let rows: Rows = (0..states)
        .map(|s| {
            let state = space.decode(s);
            (0..servers).map(|i| joint_transition_row(cfg, &space, &state, i)).collect()
        })
        .collect();

    let mut policy = vec![0usize; states];
    let mut best = f64::INFINITY;
    let mut tied: Vec<Vec<usize>> = Vec::new();
    let mut evaluated = 0;
    loop {
        let beta = average_cost(&rows, &holding, &policy)?;
        evaluated += 1;
        let slack = BETA_TIE * (1.0 + beta.abs());
        if beta < best - slack {
            best = beta;
            tied.clear();
            tied.push(policy.clone());
        } else if beta <= best + slack {
            tied.push(policy.clone());
        }
        if !advance(&mut policy, servers) {
            break;
        }
    }

    let canonical = tied
        .iter()
        .find(|pol| is_self_greedy(&rows, &holding, pol).unwrap_or(false))
        .unwrap_or(&tied[0])
        .clone();
    Ok(BruteForceResult { policy: canonical, beta: best, optimal_count: tied.len(), evaluated })
}

/// Odometer step; the last state's choice varies fastest.
fn advance(policy: &mut [usize], radix: usize) -> bool {
    for digit in policy.iter_mut().rev() {
        *digit += 1;
        if *digit < radix {
            return true;
        }
        *digit = 0;
    }
    false
}

fn average_cost(rows: &Rows, holding: &[f64], policy: &[usize]) -> Result<f64> {
    let n = rows.len();
    let mut local = vec![usize::MAX; n];
    let mut order = vec![0];
    local[0] = 0;
    let mut queue = VecDeque::from([0usize]);
    while let Some(s) = queue.pop_front() {
        for (t, w) in &rows[s][policy[s]] {
            if *w > 0.0 && local[*t] == usize::MAX {
                local[*t] = order.len();
                order.push(*t);
                queue.push_back(*t);
            }
        }
    }
    let m = order.len();
    let mut matrix = DMatrix::zeros(m, m);
    for (i, s) in order.iter().enumerate() {
        for (t, w) in &rows[*s][policy[*s]] {
            matrix[(i, local[*t])] += w;
        }
    }
    let pi = stationary_direct(&matrix)?;
    Ok(order.iter().zip(&pi).map(|(s, w)| w * holding[*s]).sum())
}

/// Solves `h + beta = c + P h`, `h(0) = 0` for the policy and checks that
/// the policy picks the lowest-index minimiser of `E^i[h]` everywhere.
fn is_self_greedy(rows: &Rows, holding: &[f64], policy: &[usize]) -> Result<bool> {
    let n = rows.len();
    let mut a = DMatrix::zeros(n + 1, n + 1);
    let mut rhs = DVector::zeros(n + 1);
    for s in 0..n {
        a[(s, s)] += 1.0;
        for (t, w) in &rows[s][policy[s]] {
            a[(s, *t)] -= w;
        }
        a[(s, n)] = 1.0;
        rhs[s] = holding[s];
    }
    a[(n, 0)] = 1.0;
    let sol = a.lu().solve(&rhs).ok_or_else(|| Error::Singular { context: "evaluating a joint policy".into() })?;
    let h = sol.rows(0, n);
    Ok((0..n).all(|s| {
        let (choice, _) = argmin_lowest(rows[s].iter().map(|row| row.iter().map(|(t, w)| w * h[*t]).sum::<f64>()));
        choice == policy[s]
    }))
}

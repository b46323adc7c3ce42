//! Server selection rules. Every rule activates exactly one server per slot,
//! including when all queues are empty; servers are numbered from 0 and exact
//! ties go to the lowest number.

use std::fmt;
use std::sync::Arc;

use rand::Rng;

use crate::dp::JointSolution;
use crate::model::SystemConfig;
use crate::whittle::IndexTable;

/// Per-server queue lengths.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct JointState(pub Vec<usize>);

impl JointState {
    pub fn empty(servers: usize) -> Self {
        Self(vec![0; servers])
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }
}

#[derive(Debug, Clone)]
pub enum PolicyKind {
    Whittle(Arc<IndexTable>),
    Cmu,
    /// Uniform choice; the generator is supplied per simulation run.
    Random,
    Exact(Arc<JointSolution>),
}

impl PolicyKind {
    pub fn name(&self) -> &'static str {
        match self {
            PolicyKind::Whittle(_) => "whittle",
            PolicyKind::Cmu => "cmu",
            PolicyKind::Random => "random",
            PolicyKind::Exact(_) => "exact",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn argmin(scores: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::INFINITY);
    for (i, s) in scores.enumerate() {
        if s < best.1 {
            best = (i, s);
        }
    }
    best.0
}

/// Server with the smallest Whittle index at its current length.
pub fn whittle_select(state: &[usize], tables: &IndexTable) -> usize {
    argmin(state.iter().enumerate().map(|(i, x)| tables.index(i, *x)))
}

/// Server with the smallest cost per unit rate `C_i x_i / q_i`.
pub fn cmu_select(state: &[usize], cfg: &SystemConfig) -> usize {
    argmin(state.iter().zip(&cfg.servers).map(|(x, s)| s.cost_c * *x as f64 / s.q))
}

pub fn random_select<R: Rng + ?Sized>(rng: &mut R, servers: usize) -> usize {
    assert!(servers >= 1, "no servers to choose from");
    rng.random_range(0..servers)
}

/// # Panics
///
/// If `state` lies outside the solution's joint space.
pub fn exact_select(state: &[usize], sol: &JointSolution) -> usize {
    sol.policy_at(state)
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::model::ServerParams;

    fn two_servers() -> SystemConfig {
        SystemConfig::new(
            0.4,
            vec![ServerParams { q: 0.55, cost_c: 30.0 }, ServerParams { q: 0.50, cost_c: 29.0 }],
            100,
        )
    }

    #[test]
    fn whittle_ties_and_argmin() {
        let same = IndexTable::from_rows(vec![vec![1.0, 2.0, 3.0], vec![1.0, 2.0, 3.0]]).unwrap();
        assert_eq!(whittle_select(&[1, 1], &same), 0);
        let table = IndexTable::from_rows(vec![vec![1.0, 5.0, 9.0], vec![0.5, 4.0, 8.0]]).unwrap();
        assert_eq!(whittle_select(&[1, 1], &table), 1);
        assert_eq!(whittle_select(&[0, 2], &table), 0);
        // Beyond x_max: 9 + 4*2 = 17 versus 8.
        assert_eq!(whittle_select(&[4, 2], &table), 1);
    }

    #[test]
    fn cmu_examples() {
        let cfg = two_servers();
        // 30*2/0.55 = 109.09 versus 29*1/0.5 = 58.
        assert_eq!(cmu_select(&[2, 1], &cfg), 1);
        assert_eq!(cmu_select(&[0, 0], &cfg), 0);
        assert_eq!(cmu_select(&[0, 5], &cfg), 0);
    }

    #[test]
    fn random_is_uniform_and_reproducible() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        assert!((0..100).all(|_| random_select(&mut rng, 1) == 0));
        let mut counts = [0usize; 3];
        for _ in 0..100_000 {
            counts[random_select(&mut rng, 3)] += 1;
        }
        for c in counts {
            assert!((c as f64 / 1e5 - 1.0 / 3.0).abs() < 0.01, "{counts:?}");
        }
        let a: Vec<_> = {
            let mut r = ChaCha8Rng::seed_from_u64(5);
            (0..50).map(|_| random_select(&mut r, 4)).collect()
        };
        let b: Vec<_> = {
            let mut r = ChaCha8Rng::seed_from_u64(5);
            (0..50).map(|_| random_select(&mut r, 4)).collect()
        };
        assert_eq!(a, b);
    }

    proptest! {
        #[test]
        fn cmu_choice_is_invariant_to_common_cost_scale(
            xs in proptest::collection::vec(0usize..50, 3), scale in 0.01f64..100.0,
        ) {
            let cfg = SystemConfig::new(
                0.4,
                vec![
                    ServerParams { q: 0.55, cost_c: 30.0 },
                    ServerParams { q: 0.50, cost_c: 29.0 },
                    ServerParams { q: 0.45, cost_c: 28.0 },
                ],
                100,
            );
            let mut scaled = cfg.clone();
            scaled.servers.iter_mut().for_each(|s| s.cost_c *= scale);
            let choice = cmu_select(&xs, &cfg);
            prop_assert!(choice < 3);
            prop_assert_eq!(choice, cmu_select(&xs, &scaled));
        }
    }
}

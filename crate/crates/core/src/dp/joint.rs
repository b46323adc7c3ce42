use super::{argmin_lowest, span, RviOptions};
use crate::error::{Error, Result};
use crate::model::{next_state_pmf, DepartureKernel, SystemConfig};

/// Largest product state space [`joint_rvi`] accepts.
const MAX_JOINT_STATES: usize = 10_000_000;

/// Row-major indexing of `{0, .., buffer}^I`; the last server varies fastest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JointSpace {
    dims: usize,
    side: usize,
    strides: Vec<usize>,
    len: usize,
}

impl JointSpace {
    pub fn new(dims: usize, buffer: usize) -> Result<Self> {
        let side = buffer + 1;
        let len = (0..dims)
            .try_fold(1usize, |acc, _| acc.checked_mul(side))
            .filter(|len| *len <= MAX_JOINT_STATES)
            .ok_or(Error::StateSpaceTooLarge { states: usize::MAX, policies: f64::INFINITY, limit: MAX_JOINT_STATES })?;
        let mut strides = vec![1; dims];
        for i in (0..dims.saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * side;
        }
        Ok(Self { dims, side, strides, len })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn buffer(&self) -> usize {
        self.side - 1
    }

    /// # Panics
    ///
    /// If the state has the wrong arity or a component exceeds the buffer.
    pub fn encode(&self, state: &[usize]) -> usize {
        assert_eq!(state.len(), self.dims, "state arity");
        state
            .iter()
            .zip(&self.strides)
            .map(|(x, s)| {
                assert!(*x < self.side, "queue length {x} outside the joint space");
                x * s
            })
            .sum()
    }

    pub fn decode(&self, index: usize) -> Vec<usize> {
        self.strides.iter().map(|s| (index / s) % self.side).collect()
    }

    fn coordinate(&self, index: usize, axis: usize) -> usize {
        (index / self.strides[axis]) % self.side
    }

    /// Expectation over departures along `axis`: `out(x) = sum_d K(d|x_axis) input(x - d e_axis)`.
    fn apply_departures(&self, axis: usize, kernel: &DepartureKernel, input: &[f64], out: &mut [f64]) {
        let stride = self.strides[axis];
        for (idx, slot) in out.iter_mut().enumerate() {
            let x = self.coordinate(idx, axis);
            *slot = kernel.row(x).iter().enumerate().map(|(d, w)| w * input[idx - d * stride]).sum();
        }
    }

    /// Expectation over an arrival offered to `axis`, dropped at the buffer.
    fn apply_arrival(&self, axis: usize, p: f64, input: &[f64], out: &mut [f64]) {
        let stride = self.strides[axis];
        let top = self.side - 1;
        for (idx, slot) in out.iter_mut().enumerate() {
            let up = if self.coordinate(idx, axis) < top { idx + stride } else { idx };
            *slot = p * input[up] + (1.0 - p) * input[idx];
        }
    }
}

#[derive(Debug, Clone)]
pub struct JointSolution {
    pub space: JointSpace,
    /// Relative values by joint-state index; zero at the reference state.
    pub values: Vec<f64>,
    pub beta: f64,
    /// Server to activate, by joint-state index (0-based).
    pub policy: Vec<usize>,
    pub reference: Vec<usize>,
    pub sweeps: usize,
}

impl JointSolution {
    pub fn policy_at(&self, state: &[usize]) -> usize {
        self.policy[self.space.encode(state)]
    }

    pub fn value_at(&self, state: &[usize]) -> f64 {
        self.values[self.space.encode(state)]
    }
}

struct JointOperator<'a> {
    cfg: &'a SystemConfig,
    space: JointSpace,
    kernels: Vec<DepartureKernel>,
    holding: Vec<f64>,
}

impl<'a> JointOperator<'a> {
    fn new(cfg: &'a SystemConfig) -> Result<Self> {
        let space = JointSpace::new(cfg.num_servers(), cfg.buffer)?;
        let kernels = cfg.servers.iter().map(|s| DepartureKernel::new(s.q, cfg.buffer)).collect();
        let holding = (0..space.len())
            .map(|idx| space.decode(idx).iter().zip(&cfg.servers).map(|(x, s)| s.cost_c * *x as f64).sum())
            .collect();
        Ok(Self { cfg, space, kernels, holding })
    }

    /// `E^i[h]` for every server `i`: arrival offered to `i`, departures everywhere.
    fn expectations(&self, h: &[f64], out: &mut [Vec<f64>], scratch: &mut Vec<f64>) {
        for (i, e) in out.iter_mut().enumerate() {
            self.space.apply_arrival(i, self.cfg.arrival_p, h, e);
            for (axis, kernel) in self.kernels.iter().enumerate() {
                self.space.apply_departures(axis, kernel, e, scratch);
                std::mem::swap(e, scratch);
            }
        }
    }
}

pub fn joint_rvi(cfg: &SystemConfig, opts: &RviOptions) -> Result<JointSolution> {
    joint_rvi_with_reference(cfg, &vec![0; cfg.num_servers()], opts)
}

/// Relative value iteration on the product space, normalised at `reference`.
pub fn joint_rvi_with_reference(cfg: &SystemConfig, reference: &[usize], opts: &RviOptions) -> Result<JointSolution> {
    cfg.validated()?;
    opts.validate()?;
    let op = JointOperator::new(cfg)?;
    let len = op.space.len();
    if reference.len() != cfg.num_servers() || reference.iter().any(|x| *x > cfg.buffer) {
        return Err(Error::invalid("reference", format!("{reference:?} outside the joint space")));
    }
    let r = op.space.encode(reference);
    let mut h = vec![0.0; len];
    let mut th = vec![0.0; len];
    let mut policy = vec![0usize; len];
    let mut exps = vec![vec![0.0; len]; cfg.num_servers()];
    let mut scratch = vec![0.0; len];
    let mut width = f64::INFINITY;

    let greedy = |h: &[f64], exps: &mut [Vec<f64>], scratch: &mut Vec<f64>, th: &mut [f64], policy: &mut [usize]| {
        op.expectations(h, exps, scratch);
        for s in 0..len {
            let (choice, best) = argmin_lowest(exps.iter().map(|e| e[s]));
            th[s] = op.holding[s] + best;
            policy[s] = choice;
        }
    };

    for sweep in 1..=opts.max_sweeps {
        greedy(&h, &mut exps, &mut scratch, &mut th, &mut policy);
        let (lo, hi) = span(th.iter().zip(&h).map(|(t, v)| t - v));
        width = hi - lo;
        let beta = th[r] - h[r];
        let shift = th[r];
        for (v, t) in h.iter_mut().zip(&th) {
            *v = t - shift;
        }
        if width <= opts.tol {
            greedy(&h, &mut exps, &mut scratch, &mut th, &mut policy);
            return Ok(JointSolution {
                space: op.space.clone(),
                values: h,
                beta,
                policy,
                reference: reference.to_vec(),
                sweeps: sweep,
            });
        }
    }
    Err(Error::NoConvergence { what: "joint relative value iteration", iterations: opts.max_sweeps, last: th[r], residual: width })
}

/// Next-state law of the joint chain when server `active` is offered the
/// arrival: the product of the per-server next-state laws.
pub fn joint_transition_row(cfg: &SystemConfig, space: &JointSpace, state: &[usize], active: usize) -> Vec<(usize, f64)> {
    let mut row = vec![(0usize, 1.0)];
    for (i, (x, server)) in state.iter().zip(&cfg.servers).enumerate() {
        let marginal = next_state_pmf(*x, server.q, cfg.arrival_p, i == active, cfg.buffer);
        let stride = space.strides[i];
        row = row
            .iter()
            .flat_map(|(idx, w)| marginal.iter().filter(|(_, m)| *m > 0.0).map(move |(y, m)| (idx + y * stride, w * m)))
            .collect();
    }
    row
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;

    use super::*;
    use crate::model::ServerParams;

    fn symmetric() -> SystemConfig {
        SystemConfig::new(0.4, vec![ServerParams { q: 0.55, cost_c: 3.0 }; 2], 12)
    }

    #[test]
    fn encode_decode_roundtrip() {
        let space = JointSpace::new(3, 4).unwrap();
        assert_eq!(space.len(), 125);
        for idx in 0..space.len() {
            assert_eq!(space.encode(&space.decode(idx)), idx);
        }
        assert_eq!(space.encode(&[0, 0, 1]), 1);
        assert_eq!(space.encode(&[1, 0, 0]), 25);
    }

    #[test]
    fn oversized_space_is_refused() {
        assert!(matches!(JointSpace::new(4, 100), Err(Error::StateSpaceTooLarge { .. })));
    }

    #[test]
    fn operator_matches_explicit_rows() {
        let cfg = SystemConfig::new(
            0.35,
            vec![ServerParams { q: 0.6, cost_c: 2.0 }, ServerParams { q: 0.45, cost_c: 1.0 }],
            5,
        );
        let op = JointOperator::new(&cfg).unwrap();
        let h: Vec<f64> = (0..op.space.len()).map(|i| ((i * 7919) % 101) as f64 / 10.0).collect();
        let mut exps = vec![vec![0.0; h.len()]; 2];
        let mut scratch = vec![0.0; h.len()];
        op.expectations(&h, &mut exps, &mut scratch);
        for idx in 0..op.space.len() {
            let state = op.space.decode(idx);
            for (i, e) in exps.iter().enumerate() {
                let row = joint_transition_row(&cfg, &op.space, &state, i);
                assert_abs_diff_eq!(row.iter().map(|(_, w)| w).sum::<f64>(), 1.0, epsilon = 1e-13);
                let want: f64 = row.iter().map(|(j, w)| w * h[*j]).sum();
                assert_abs_diff_eq!(e[idx], want, epsilon = 1e-11);
            }
        }
    }

    #[test]
    fn symmetric_instance_is_swap_invariant() {
        let sol = joint_rvi(&symmetric(), &RviOptions::new(1e-9, 1_000_000)).unwrap();
        assert_eq!(sol.value_at(&[0, 0]), 0.0);
        for a in 0..=12 {
            for b in 0..=12 {
                assert_abs_diff_eq!(sol.value_at(&[a, b]), sol.value_at(&[b, a]), epsilon = 1e-6);
                if a != b {
                    assert_eq!(sol.policy_at(&[a, b]), 1 - sol.policy_at(&[b, a]), "state ({a},{b})");
                }
            }
        }
    }

    #[test]
    fn beta_does_not_depend_on_reference() {
        let cfg = symmetric();
        let tol = 1e-9;
        let a = joint_rvi(&cfg, &RviOptions::new(tol, 1_000_000)).unwrap();
        let b = joint_rvi_with_reference(&cfg, &[3, 5], &RviOptions::new(tol, 1_000_000)).unwrap();
        assert!((a.beta - b.beta).abs() <= 2.0 * tol, "{} vs {}", a.beta, b.beta);
        assert_eq!(b.value_at(&[3, 5]), 0.0);
        assert!(joint_rvi_with_reference(&cfg, &[3, 13], &RviOptions::default()).is_err());
    }
}

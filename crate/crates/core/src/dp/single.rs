use super::{argmin_lowest, span, RviOptions};
use crate::error::{Error, Result};
use crate::model::{departure_pmf, DepartureKernel, ServerParams};

/// Solution of the single-queue average-cost equation on `{0, .., n}`.
#[derive(Debug, Clone)]
pub struct SingleQueueSolution {
    pub lambda: f64,
    /// Relative values, `values[0] = 0`.
    pub values: Vec<f64>,
    pub beta: f64,
    /// Greedy action per state; `true` admits arrivals.
    pub active: Vec<bool>,
    pub sweeps: usize,
}

impl SingleQueueSolution {
    pub fn n(&self) -> usize {
        self.values.len() - 1
    }

    /// Threshold of the greedy policy restricted to `0..=limit`: `Some(k)`
    /// when the active states there are exactly `{0, .., k}` (`k = -1` for
    /// none), `None` when the active set is not downward closed.
    pub fn threshold_within(&self, limit: usize) -> Option<i64> {
        let window = &self.active[..=limit.min(self.n())];
        let k = window.iter().take_while(|a| **a).count() as i64 - 1;
        window[(k + 1) as usize..].iter().all(|a| !*a).then_some(k)
    }
}

/// Precomputed transition data for one queue truncated at `n`.
#[derive(Debug, Clone)]
pub struct SingleQueueModel {
    server: ServerParams,
    p: f64,
    n: usize,
    kernel: DepartureKernel,
}

impl SingleQueueModel {
    pub fn new(server: ServerParams, p: f64, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid("n", format!("truncation {n} below 2")));
        }
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::invalid("p", format!("{p} outside (0,1)")));
        }
        Ok(Self { server, p, n, kernel: DepartureKernel::new(server.q, n) })
    }

    /// `(active, passive)` one-step costs at `x` against values `h`.
    fn action_values(&self, h: &[f64], x: usize, lambda: f64) -> (f64, f64) {
        let (mut stay, mut up) = (0.0, 0.0);
        for (d, w) in self.kernel.row(x).iter().enumerate() {
            stay += w * h[x - d];
            up += w * h[(x - d + 1).min(self.n)];
        }
        let holding = self.server.cost_c * x as f64;
        let active = holding + self.p * up + (1.0 - self.p) * stay;
        let passive = holding + lambda + stay;
        (active, passive)
    }

    fn greedy(&self, h: &[f64], lambda: f64, out: &mut [f64], active: &mut [bool]) {
        for x in 0..=self.n {
            let (a, b) = self.action_values(h, x, lambda);
            let (choice, best) = argmin_lowest([a, b]);
            out[x] = best;
            active[x] = choice == 0;
        }
    }

    /// Relative value iteration, optionally warm-started from `initial`.
    pub fn solve(&self, lambda: f64, opts: &RviOptions, initial: Option<&[f64]>) -> Result<SingleQueueSolution> {
        opts.validate()?;
        let len = self.n + 1;
        let mut h = match initial {
            Some(v) if v.len() == len => v.iter().map(|x| x - v[0]).collect(),
            Some(v) => return Err(Error::invalid("initial", format!("length {} != {len}", v.len()))),
            None => vec![0.0; len],
        };
        let mut th = vec![0.0; len];
        let mut active = vec![false; len];
        let mut width = f64::INFINITY;
        for sweep in 1..=opts.max_sweeps {
            self.greedy(&h, lambda, &mut th, &mut active);
            let (lo, hi) = span(th.iter().zip(&h).map(|(t, v)| t - v));
            width = hi - lo;
            let beta = th[0];
            for (v, t) in h.iter_mut().zip(&th) {
                *v = t - beta;
            }
            if width <= opts.tol {
                // Greedy actions against the returned table.
                self.greedy(&h, lambda, &mut th, &mut active);
                return Ok(SingleQueueSolution { lambda, values: h, beta, active, sweeps: sweep });
            }
        }
        Err(Error::NoConvergence { what: "single-queue relative value iteration", iterations: opts.max_sweeps, last: th[0], residual: width })
    }

    /// Largest violation of the Bellman equation by `sol`.
    pub fn bellman_residual(&self, sol: &SingleQueueSolution) -> f64 {
        (0..=self.n)
            .map(|x| {
                let (a, b) = self.action_values(&sol.values, x, sol.lambda);
                (sol.values[x] + sol.beta - a.min(b)).abs()
            })
            .fold(0.0, f64::max)
    }
}

pub fn single_queue_rvi(lambda: f64, server: &ServerParams, p: f64, n: usize, opts: &RviOptions) -> Result<SingleQueueSolution> {
    SingleQueueModel::new(*server, p, n)?.solve(lambda, opts, None)
}

/// `f(x) = E_x[V(x - D + xi)] - E_x[V(x - D)]` over a solved value table.
#[derive(Debug, Clone)]
pub struct AppendixDiagnostic {
    /// `(x, f(x))` for `x = 1, .., n-1`.
    pub f: Vec<(usize, f64)>,
    /// `f(x+1) - f(x)` for consecutive entries of `f`.
    pub differences: Vec<f64>,
}

impl AppendixDiagnostic {
    /// Smallest `f(x+1) - f(x)` with `x + 1 <= up_to`.
    pub fn min_difference(&self, up_to: usize) -> f64 {
        self.differences.iter().take(up_to.saturating_sub(1)).copied().fold(f64::INFINITY, f64::min)
    }
}

pub fn appendix_f_diagnostic(solution: &SingleQueueSolution, server: &ServerParams, p: f64) -> AppendixDiagnostic {
    let v = &solution.values;
    let f: Vec<(usize, f64)> = (1..solution.n())
        .map(|x| (x, departure_pmf(x, server.q).expect(|d| p * (v[x + 1 - d] - v[x - d]))))
        .collect();
    let differences = f.windows(2).map(|w| w[1].1 - w[0].1).collect();
    AppendixDiagnostic { f, differences }
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;

    use super::*;
    use crate::threshold::optimal_threshold_cost;

    const SERVER: ServerParams = ServerParams { q: 0.5, cost_c: 1.0 };

    #[test]
    fn huge_subsidy_makes_everything_passive() {
        let sol = single_queue_rvi(-100.0, &SERVER, 0.4, 60, &RviOptions::default()).unwrap();
        assert!(sol.active.iter().all(|a| !a));
        assert_abs_diff_eq!(sol.beta, -100.0, epsilon = 1e-8);
        assert_eq!(sol.threshold_within(30), Some(-1));
    }

    #[test]
    fn large_tax_makes_short_queues_active() {
        let sol = single_queue_rvi(100.0, &SERVER, 0.4, 60, &RviOptions::default()).unwrap();
        // The threshold sits where the Whittle index crosses the tax.
        let k = sol.threshold_within(50).expect("threshold policy") as usize;
        assert!(k > 10);
        let iter = crate::whittle::IndexIterationConfig::default();
        assert!(crate::whittle::compute_index(k, &SERVER, 0.4, &iter, 80).unwrap() <= 100.0);
        assert!(crate::whittle::compute_index(k + 1, &SERVER, 0.4, &iter, 80).unwrap() >= 100.0);
    }

    #[test]
    fn matches_best_threshold_cost() {
        let sol = single_queue_rvi(0.0, &SERVER, 0.4, 60, &RviOptions::default()).unwrap();
        let (_, best) = optimal_threshold_cost(0.0, 58, 1.0, 0.5, 0.4).unwrap();
        assert_abs_diff_eq!(sol.beta, best, epsilon = 1e-6);
        assert_eq!(sol.values[0], 0.0);
    }

    #[test]
    fn solution_satisfies_bellman_equation() {
        let model = SingleQueueModel::new(SERVER, 0.4, 40).unwrap();
        let sol = model.solve(2.5, &RviOptions::default(), None).unwrap();
        assert!(model.bellman_residual(&sol) < 1e-8);
        let warm = model.solve(2.6, &RviOptions::default(), Some(&sol.values)).unwrap();
        let cold = model.solve(2.6, &RviOptions::default(), None).unwrap();
        assert!(warm.sweeps < cold.sweeps);
        assert_abs_diff_eq!(warm.beta, cold.beta, epsilon = 1e-8);
    }

    #[test]
    fn beta_is_insensitive_to_doubling_the_truncation() {
        let server = ServerParams { q: 0.55, cost_c: 30.0 };
        for lambda in [-5.0, 0.0, 50.0, 500.0] {
            let a = single_queue_rvi(lambda, &server, 0.4, 100, &RviOptions::default()).unwrap();
            let b = single_queue_rvi(lambda, &server, 0.4, 200, &RviOptions::default()).unwrap();
            assert!((a.beta - b.beta).abs() < 1e-5, "lambda={lambda}: {} vs {}", a.beta, b.beta);
        }
    }

    #[test]
    fn threshold_detection() {
        let mut sol = single_queue_rvi(1.0, &SERVER, 0.4, 10, &RviOptions::default()).unwrap();
        sol.active = vec![true, true, false, true, false, false, false, false, false, false, false];
        assert_eq!(sol.threshold_within(2), Some(1));
        assert_eq!(sol.threshold_within(5), None);
    }

    #[test]
    fn non_convergence_is_reported() {
        let err = single_queue_rvi(0.0, &SERVER, 0.4, 30, &RviOptions::new(1e-12, 3)).unwrap_err();
        assert!(matches!(err, Error::NoConvergence { iterations: 3, .. }));
    }

    #[test]
    fn appendix_f_first_term_expands() {
        let sol = single_queue_rvi(0.0, &SERVER, 0.4, 40, &RviOptions::default()).unwrap();
        let diag = appendix_f_diagnostic(&sol, &SERVER, 0.4);
        let v = &sol.values;
        let (p, q) = (0.4, 0.5);
        let want = p * q * (v[1] - v[0]) + p * (1.0 - q) * (v[2] - v[1]);
        assert_eq!(diag.f[0].0, 1);
        assert_abs_diff_eq!(diag.f[0].1, want, epsilon = 1e-12);
        assert!(diag.f.iter().all(|(_, f)| *f >= 0.0));
        assert!(diag.min_difference(20) >= -1e-9);
    }
}

//! Whittle index computation.
//!
//! For a fixed passivity tax `lambda` and a candidate threshold `x`, the
//! relative values `V` and average cost `beta` of the policy "active on
//! `{0, .., x}`" solve a linear system. The index of `x` is the tax at which
//! activating and resting at `x` cost the same,
//!
//! ```text
//! Delta(lambda, x) = sum_j p_a(j|x) V(j) - sum_j p_b(j|x) V(j) - lambda = 0,
//! ```
//!
//! and is found with the damped fixed-point iteration
//! `lambda <- lambda + gamma * Delta(lambda, x)`.

use nalgebra::{DMatrix, DVector, LU};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{next_state_pmf, Pmf, ServerParams, SystemConfig};

/// Relative values and average cost of one threshold policy at a fixed tax.
#[derive(Debug, Clone)]
pub struct ValueSolution {
    pub lambda: f64,
    /// Largest state using the active dynamics.
    pub threshold_x: usize,
    /// Truncation level; `values` covers `0..=n`.
    pub n: usize,
    pub values: Vec<f64>,
    pub beta: f64,
}

impl ValueSolution {
    /// Largest absolute residual of the defining equations.
    pub fn max_equation_residual(&self, server: &ServerParams, p: f64) -> f64 {
        let mut worst = self.values[0].abs();
        for y in 0..=self.n {
            let active = y <= self.threshold_x;
            let tax = if active { 0.0 } else { self.lambda };
            let next = next_state_pmf(y, server.q, p, active, self.n);
            let rhs = server.cost_c * y as f64 + tax - self.beta + next.expect(|z| self.values[z]);
            worst = worst.max((self.values[y] - rhs).abs());
        }
        worst
    }
}

/// The linear system of one threshold policy, factored once and reused for
/// every tax value.
#[derive(Debug, Clone)]
pub struct ThresholdSystem {
    threshold_x: usize,
    n: usize,
    lu: LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    base_rhs: DVector<f64>,
    tax_rhs: DVector<f64>,
    active_next: Pmf,
    passive_next: Pmf,
}

impl ThresholdSystem {
    pub fn new(threshold_x: usize, server: &ServerParams, p: f64, n: usize) -> Result<Self> {
        if n < threshold_x + 1 {
            return Err(Error::invalid("n", format!("truncation {n} below threshold {threshold_x} + 1")));
        }
        let dim = n + 2;
        let beta = n + 1;
        let mut a = DMatrix::zeros(dim, dim);
        let mut base_rhs = DVector::zeros(dim);
        let mut tax_rhs = DVector::zeros(dim);
        for y in 0..=n {
            let active = y <= threshold_x;
            for (z, w) in next_state_pmf(y, server.q, p, active, n).iter() {
                a[(y, z)] -= w;
            }
            a[(y, y)] += 1.0;
            a[(y, beta)] = 1.0;
            base_rhs[y] = server.cost_c * y as f64;
            if !active {
                tax_rhs[y] = 1.0;
            }
        }
        a[(n + 1, 0)] = 1.0;
        let lu = a.lu();
        if !lu.is_invertible() {
            return Err(Error::Singular { context: format!("factoring the threshold-{threshold_x} value system") });
        }
        Ok(Self {
            threshold_x,
            n,
            lu,
            base_rhs,
            tax_rhs,
            active_next: next_state_pmf(threshold_x, server.q, p, true, n),
            passive_next: next_state_pmf(threshold_x, server.q, p, false, n),
        })
    }

    pub fn solve(&self, lambda: f64) -> Result<ValueSolution> {
        let rhs = &self.base_rhs + lambda * &self.tax_rhs;
        let sol = self.lu.solve(&rhs).ok_or_else(|| Error::Singular {
            context: format!("solving the threshold-{} value system", self.threshold_x),
        })?;
        let mut values: Vec<f64> = sol.iter().take(self.n + 1).copied().collect();
        // The normalisation row makes this exact up to round-off.
        values[0] = 0.0;
        Ok(ValueSolution { lambda, threshold_x: self.threshold_x, n: self.n, values, beta: sol[self.n + 1] })
    }

    /// `Delta(lambda, x)` at this system's threshold state.
    pub fn residual(&self, lambda: f64) -> Result<f64> {
        let sol = self.solve(lambda)?;
        let v = &sol.values;
        Ok(self.active_next.expect(|j| v[j]) - self.passive_next.expect(|j| v[j]) - lambda)
    }
}

pub fn solve_value(lambda: f64, threshold_x: usize, server: &ServerParams, p: f64, n: usize) -> Result<ValueSolution> {
    ThresholdSystem::new(threshold_x, server, p, n)?.solve(lambda)
}

pub fn index_residual(lambda: f64, x: usize, server: &ServerParams, p: f64, n: usize) -> Result<f64> {
    ThresholdSystem::new(x, server, p, n)?.residual(lambda)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndexIterationConfig {
    pub gamma: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub lambda0: f64,
}

impl Default for IndexIterationConfig {
    fn default() -> Self {
        Self { gamma: 0.1, tol: 1e-6, max_iter: 100_000, lambda0: 0.0 }
    }
}

impl IndexIterationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::invalid("gamma", format!("{} outside (0,1]", self.gamma)));
        }
        if !(self.tol > 0.0) {
            return Err(Error::invalid("tol", format!("{} must be positive", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::invalid("max_iter", "must be positive"));
        }
        Ok(())
    }
}

/// Whittle index of state `x` by the incremental tax iteration.
pub fn compute_index(x: usize, server: &ServerParams, p: f64, iter: &IndexIterationConfig, n: usize) -> Result<f64> {
    iter.validate()?;
    let system = ThresholdSystem::new(x, server, p, n)?;
    let mut lambda = iter.lambda0;
    let mut delta = f64::NAN;
    for _ in 0..iter.max_iter {
        delta = system.residual(lambda)?;
        let next = lambda + iter.gamma * delta;
        if !next.is_finite() {
            break;
        }
        if (next - lambda).abs() <= iter.tol {
            return Ok(next);
        }
        lambda = next;
    }
    Err(Error::NoConvergence { what: "index iteration", iterations: iter.max_iter, last: lambda, residual: delta })
}

/// Default truncation for index computation: `max(2 x_max, buffer)`.
pub fn default_truncation(x_max: usize, buffer: usize) -> usize {
    (2 * x_max).max(buffer)
}

/// Per-server Whittle indices on `0..=x_max`, linearly extrapolated beyond.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexTable {
    x_max: usize,
    indices: Vec<Vec<f64>>,
}

impl IndexTable {
    /// One row per server, each holding the indices of states `0..=x_max`.
    pub fn from_rows(indices: Vec<Vec<f64>>) -> Result<Self> {
        let x_max = match indices.first() {
            Some(row) if row.len() >= 2 => row.len() - 1,
            _ => return Err(Error::invalid("indices", "need at least one server with two states")),
        };
        if indices.iter().any(|row| row.len() != x_max + 1) {
            return Err(Error::invalid("indices", "rows differ in length"));
        }
        Ok(Self { x_max, indices })
    }

    pub fn x_max(&self) -> usize {
        self.x_max
    }

    pub fn num_servers(&self) -> usize {
        self.indices.len()
    }

    pub fn entries(&self, server: usize) -> &[f64] {
        &self.indices[server]
    }

    /// Index of `x` for `server`. States above `x_max` continue the line
    /// through the last two computed entries.
    pub fn index(&self, server: usize, x: usize) -> f64 {
        let row = &self.indices[server];
        if x <= self.x_max {
            row[x]
        } else {
            let last = row[self.x_max];
            let slope = last - row[self.x_max - 1];
            last + (x - self.x_max) as f64 * slope
        }
    }

    /// Whether every row is non-decreasing in the state.
    pub fn is_monotone(&self) -> bool {
        self.indices.iter().all(|row| row.windows(2).all(|w| w[1] >= w[0]))
    }
}

/// Computes `compute_index` for every server and every state in `0..=x_max`.
///
/// Cells are independent and evaluated in parallel; the first failing cell
/// (in server-major order) aborts construction.
pub fn build_index_table(cfg: &SystemConfig, x_max: usize, iter: &IndexIterationConfig, n: usize) -> Result<IndexTable> {
    cfg.validated()?;
    iter.validate()?;
    if x_max < 1 {
        return Err(Error::invalid("x_max", "must be at least 1"));
    }
    if n < x_max + 1 {
        return Err(Error::invalid("n", format!("truncation {n} below x_max + 1 = {}", x_max + 1)));
    }
    let cells: Vec<(usize, usize)> =
        (0..cfg.num_servers()).flat_map(|s| (0..=x_max).map(move |x| (s, x))).collect();
    let values: Vec<Result<f64>> = cells
        .par_iter()
        .map(|&(s, x)| {
            compute_index(x, &cfg.servers[s], cfg.arrival_p, iter, n)
                .map_err(|e| Error::IndexCell { server: s, state: x, source: Box::new(e) })
        })
        .collect();
    let mut rows = vec![Vec::with_capacity(x_max + 1); cfg.num_servers()];
    for ((s, _), v) in cells.into_iter().zip(values) {
        rows[s].push(v?);
    }
    IndexTable::from_rows(rows)
}

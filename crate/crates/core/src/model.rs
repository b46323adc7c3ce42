//! Queue dynamics, transition laws, stage costs and configuration checks.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the total mass of a [`Pmf`].
pub const PMF_TOLERANCE: f64 = 1e-12;

/// Service capacity and holding cost of one processor-sharing queue.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ServerParams {
    /// Mean departures per slot whenever the queue is non-empty, in (0, 1).
    pub q: f64,
    /// Holding cost per job per slot, > 0.
    pub cost_c: f64,
}

impl ServerParams {
    pub fn new(q: f64, cost_c: f64) -> Result<Self> {
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::invalid("q", format!("{q} outside (0,1)")));
        }
        if !(cost_c > 0.0 && cost_c.is_finite()) {
            return Err(Error::invalid("cost_c", format!("{cost_c} must be positive")));
        }
        Ok(Self { q, cost_c })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    pub arrival_p: f64,
    pub servers: Vec<ServerParams>,
    /// Largest admissible queue length; arrivals beyond it are dropped.
    pub buffer: usize,
    /// Enforce strictly decreasing capacities and `q_min > 2p`.
    #[serde(default)]
    pub strict_stability_mode: bool,
}

impl SystemConfig {
    pub fn new(arrival_p: f64, servers: Vec<ServerParams>, buffer: usize) -> Self {
        Self { arrival_p, servers, buffer, strict_stability_mode: false }
    }

    pub fn num_servers(&self) -> usize {
        self.servers.len()
    }

    pub fn q_min(&self) -> f64 {
        self.servers.iter().map(|s| s.q).fold(f64::INFINITY, f64::min)
    }

    /// Runs [`validate_config`] and turns violations into an error.
    pub fn validated(&self) -> Result<&Self> {
        let report = validate_config(self);
        if report.is_ok() {
            Ok(self)
        } else {
            Err(Error::InvalidConfig(report.violations))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, field: impl Into<String>, message: impl Into<String>) {
        self.violations.push(Violation { field: field.into(), message: message.into() });
    }
}

/// Checks every configuration invariant for the active mode.
///
/// The `q_min > 2p` stability condition and the strict capacity ordering are
/// only enforced in strict mode; with a finite buffer, excess arrivals are
/// dropped and the queues are stable regardless.
pub fn validate_config(cfg: &SystemConfig) -> ValidationReport {
    let mut report = ValidationReport::default();
    let p = cfg.arrival_p;
    if !(p > 0.0 && p < 1.0) {
        report.push("arrival_p", format!("arrival_p={p} outside (0,1)"));
    }
    if cfg.servers.is_empty() {
        report.push("servers", "at least one server is required");
    }
    for (i, s) in cfg.servers.iter().enumerate() {
        if !(s.q > 0.0 && s.q < 1.0) {
            report.push(format!("servers[{i}].q"), format!("q={} outside (0,1)", s.q));
        }
        if !(s.cost_c > 0.0 && s.cost_c.is_finite()) {
            report.push(format!("servers[{i}].cost_c"), format!("cost_c={} must be > 0", s.cost_c));
        }
    }
    if cfg.buffer < 1 {
        report.push("buffer", "buffer must be >= 1");
    }
    if cfg.strict_stability_mode && !cfg.servers.is_empty() {
        for (i, pair) in cfg.servers.windows(2).enumerate() {
            if pair[1].q >= pair[0].q {
                report.push(
                    format!("servers[{}].q", i + 1),
                    format!("q={} not strictly below q={} of servers[{i}]", pair[1].q, pair[0].q),
                );
            }
        }
        let q_min = cfg.q_min();
        if q_min <= 2.0 * p {
            report.push("servers.q", format!("q_min={q_min} <= 2p={}", 2.0 * p));
        }
    }
    report
}

/// Probability mass over `{0, 1, .., len-1}`; entry `i` is the mass at state `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Pmf {
    probs: Vec<f64>,
}

impl Pmf {
    pub fn point(state: usize) -> Self {
        let mut probs = vec![0.0; state + 1];
        probs[state] = 1.0;
        Self { probs }
    }

    /// Builds a pmf from dense weights indexed by state.
    ///
    /// A total within [`PMF_TOLERANCE`] of one is renormalised; anything
    /// further off is reported as an internal error.
    pub fn from_dense(mut probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::Internal("empty pmf".into()));
        }
        if let Some(bad) = probs.iter().find(|w| !(**w >= 0.0)) {
            return Err(Error::Internal(format!("negative or NaN mass {bad}")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > PMF_TOLERANCE {
            return Err(Error::Internal(format!("pmf mass {total} deviates from 1")));
        }
        if total != 1.0 {
            probs.iter_mut().for_each(|w| *w /= total);
        }
        Ok(Self { probs })
    }

    pub fn prob(&self, state: usize) -> f64 {
        self.probs.get(state).copied().unwrap_or(0.0)
    }

    /// `(state, probability)` pairs in ascending state order, zeros included.
    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.probs.iter().copied().enumerate()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }

    /// Largest state carrying positive mass.
    pub fn max_state(&self) -> usize {
        self.probs.iter().rposition(|w| *w > 0.0).unwrap_or(0)
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.iter().map(|(s, w)| s as f64 * w).sum()
    }

    /// `P(X <= state)`.
    pub fn cdf(&self, state: usize) -> f64 {
        self.probs.iter().take(state + 1).sum()
    }

    /// Expectation of `f` under this pmf.
    pub fn expect(&self, mut f: impl FnMut(usize) -> f64) -> f64 {
        self.iter().filter(|(_, w)| *w > 0.0).map(|(s, w)| w * f(s)).sum()
    }
}

/// Departures in one slot from a queue holding `x` jobs: `Binomial(x, q/x)`,
/// or a point mass at zero when the queue is empty.
pub fn departure_pmf(x: usize, q: f64) -> Pmf {
    debug_assert!(q > 0.0 && q < 1.0, "capacity {q} outside (0,1)");
    if x == 0 {
        return Pmf::point(0);
    }
    let r = q / x as f64;
    let odds = r / (1.0 - r);
    let mut probs = Vec::with_capacity(x + 1);
    let mut w = (1.0 - r).powi(x as i32);
    probs.push(w);
    for d in 0..x {
        w *= (x - d) as f64 / (d + 1) as f64 * odds;
        probs.push(w);
    }
    Pmf::from_dense(probs).expect("binomial weights sum to one")
}

/// Law of `min(x - D + active*xi, buffer)` with `D ~ departure_pmf(x, q)` and
/// `xi ~ Bernoulli(p)` independent.
///
/// # Panics
///
/// If `x > buffer`.
pub fn next_state_pmf(x: usize, q: f64, p: f64, active: bool, buffer: usize) -> Pmf {
    assert!(x <= buffer, "queue length {x} exceeds buffer {buffer}");
    let dep = departure_pmf(x, q);
    let top = if active { (x + 1).min(buffer) } else { x };
    let mut probs = vec![0.0; top + 1];
    for (d, w) in dep.iter() {
        let base = x - d;
        if active {
            probs[(base + 1).min(buffer)] += w * p;
            probs[base] += w * (1.0 - p);
        } else {
            probs[base] += w;
        }
    }
    Pmf::from_dense(probs).expect("mixture of pmfs sums to one")
}

/// `C x + (1 - nu) lambda`, with `nu = 1` iff the queue is active.
pub fn stage_cost(x: usize, active: bool, lambda: f64, cost_c: f64) -> f64 {
    let passive_charge = if active { 0.0 } else { lambda };
    cost_c * x as f64 + passive_charge
}

/// Dense departure laws for queue lengths `0..=max_len`, with tails below
/// [`KERNEL_TAIL`] folded into the last kept entry.
///
/// The solvers and the simulator share this table so that row lengths stay
/// near the effective support of `Binomial(x, q/x)`, which is Poisson-like
/// and concentrated on a few tens of values whatever `x` is.
#[derive(Debug, Clone)]
pub struct DepartureKernel {
    rows: Vec<Vec<f64>>,
}

/// Mass below which departure tails are folded away.
pub const KERNEL_TAIL: f64 = 1e-17;

impl DepartureKernel {
    pub fn new(q: f64, max_len: usize) -> Self {
        let rows = (0..=max_len)
            .map(|x| {
                let mut row = departure_pmf(x, q).as_slice().to_vec();
                let mut tail = 0.0;
                while row.len() > 1 && tail + row[row.len() - 1] < KERNEL_TAIL {
                    tail += row.pop().unwrap();
                }
                *row.last_mut().unwrap() += tail;
                row
            })
            .collect();
        Self { rows }
    }

    /// `row(x)[d]` is the probability of `d` departures from `x` jobs.
    pub fn row(&self, x: usize) -> &[f64] {
        &self.rows[x]
    }

    pub fn max_len(&self) -> usize {
        self.rows.len() - 1
    }
}

/// Exponent `a` and drift margin `b` of the Lyapunov function `sum_i e^{a x_i}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LyapunovCertificate {
    pub a: f64,
    pub b: f64,
}

/// `(q_min/2)(1 - e^{-a}) - p(e^a - 1)`; a certificate needs this positive.
pub fn lyapunov_margin(p: f64, q_min: f64, a: f64) -> f64 {
    0.5 * q_min * (1.0 - (-a).exp()) - p * (a.exp() - 1.0)
}

impl LyapunovCertificate {
    /// Certificate for a given exponent, if the drift inequality holds there.
    pub fn for_exponent(p: f64, q_min: f64, a: f64) -> Option<Self> {
        let b = lyapunov_margin(p, q_min, a);
        (a > 0.0 && b > 0.0).then_some(Self { a, b })
    }

    /// Re-evaluates the defining strict inequality.
    pub fn holds(&self, p: f64, q_min: f64) -> bool {
        p * (self.a.exp() - 1.0) < 0.5 * q_min * (1.0 - (-self.a).exp()) && self.b > 0.0
    }
}

const LYAPUNOV_A_MAX: f64 = 5.0;
const LYAPUNOV_RESOLUTION: f64 = 1e-10;

/// Finds the exponent in `(0, 5]` maximising the drift margin.
///
/// The margin is concave in `a` with slope `q_min/2 - p` at zero, so a
/// certificate exists iff `q_min > 2p`; the maximiser is located by bisection
/// on the sign of the slope.
pub fn lyapunov_certificate(p: f64, q_min: f64) -> Option<LyapunovCertificate> {
    let slope = |a: f64| 0.5 * q_min * (-a).exp() - p * a.exp();
    if slope(0.0) <= 0.0 {
        return None;
    }
    let a = if slope(LYAPUNOV_A_MAX) >= 0.0 {
        LYAPUNOV_A_MAX
    } else {
        let (mut lo, mut hi) = (0.0, LYAPUNOV_A_MAX);
        while hi - lo > LYAPUNOV_RESOLUTION {
            let mid = 0.5 * (lo + hi);
            if slope(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    LyapunovCertificate::for_exponent(p, q_min, a)
}

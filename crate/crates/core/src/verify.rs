//! Structural property suite.
//!
//! Each check recomputes its quantities from the solvers in this crate and
//! compares them against an independent route (bisection, a dynamic program,
//! a stationary law, a brute-force search or a simulation). The acceptance
//! tests and the command-line `properties` workflow both run these.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dp::{appendix_f_diagnostic, brute_force_policy_search, joint_rvi, RviOptions, SingleQueueModel};
use crate::error::{Error, Result};
use crate::model::{departure_pmf, ServerParams, SystemConfig};
use crate::policies::PolicyKind;
use crate::sim::{compare, simulate_trace, ComparisonTable, DepartureSampler};
use crate::threshold::{cumulative_active_mass, dominance_check, optimal_threshold_cost, threshold_average_cost};
use crate::whittle::{
    build_index_table, compute_index, default_truncation, index_residual, solve_value, IndexIterationConfig,
};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self { name: name.into(), passed, detail: detail.into() }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}: {}", if self.passed { "PASS" } else { "FAIL" }, self.name, self.detail)
    }
}

/// A single queue with its arrival probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arm {
    pub server: ServerParams,
    pub p: f64,
}

/// Seed of the sampled arms used by the full suite.
pub const ARM_SEED: u64 = 2024;

/// Reproducible `(q, p, C)` draws with `0.05 <= p <= q - 0.05`.
pub fn sample_arms(count: usize, seed: u64) -> Vec<Arm> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let q = rng.random_range(0.2..0.95);
            let p = rng.random_range(0.05..q - 0.05);
            let cost_c = rng.random_range(1.0..50.0);
            Arm { server: ServerParams { q, cost_c }, p }
        })
        .collect()
}

/// `lo, lo + step, .., hi` without accumulating rounding.
pub fn grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step).round() as usize;
    (0..=n).map(|i| lo + step * i as f64).collect()
}

// ---------------------------------------------------------------------------
// Single-queue structure: thresholds, indexability, value shape, convexity.

#[derive(Debug, Clone)]
pub struct StructureOptions {
    pub lambdas: Vec<f64>,
    /// Truncation of the single-queue dynamic program.
    pub n: usize,
    /// States `0..=window` are checked; the rest absorb truncation effects.
    pub window: usize,
    pub rvi: RviOptions,
    pub slack: f64,
}

impl Default for StructureOptions {
    fn default() -> Self {
        Self { lambdas: grid(-20.0, 20.0, 0.5), n: 80, window: 40, rvi: RviOptions::new(1e-10, 1_000_000), slack: 1e-9 }
    }
}

/// Violation counts over every `(arm, lambda)` solution.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StructureReport {
    pub solutions: usize,
    /// Active sets (within the window) that are not `{0, .., k}`.
    pub non_threshold: usize,
    /// Grid steps where the threshold decreased.
    pub non_monotone_threshold: usize,
    /// Decreases of `V` or of its first differences on the recurrent range.
    pub value_shape: usize,
    /// `f(x+1) - f(x)` below `-slack`.
    pub appendix: usize,
    /// Largest threshold seen, to confirm the window was not saturated.
    pub max_threshold: i64,
    pub first_failure: Option<String>,
}

impl StructureReport {
    fn merge(mut self, other: StructureReport) -> Self {
        self.solutions += other.solutions;
        self.non_threshold += other.non_threshold;
        self.non_monotone_threshold += other.non_monotone_threshold;
        self.value_shape += other.value_shape;
        self.appendix += other.appendix;
        self.max_threshold = self.max_threshold.max(other.max_threshold);
        self.first_failure = self.first_failure.or(other.first_failure);
        self
    }

    fn note(&mut self, what: impl FnOnce() -> String) {
        if self.first_failure.is_none() {
            self.first_failure = Some(what());
        }
    }
}

fn sweep_arm(arm: &Arm, opts: &StructureOptions) -> Result<StructureReport> {
    let model = SingleQueueModel::new(arm.server, arm.p, opts.n)?;
    let mut report = StructureReport { max_threshold: -1, ..Default::default() };
    let mut previous: Option<i64> = None;
    let mut warm: Option<Vec<f64>> = None;
    for &lambda in &opts.lambdas {
        let sol = model.solve(lambda, &opts.rvi, warm.as_deref())?;
        report.solutions += 1;
        let tag = || format!("q={:.4} p={:.4} C={:.3} lambda={lambda}", arm.server.q, arm.p, arm.server.cost_c);

        let k = sol.threshold_within(opts.window);
        match k {
            None => {
                report.non_threshold += 1;
                report.note(|| format!("{}: active set not downward closed", tag()));
            }
            Some(k) => {
                report.max_threshold = report.max_threshold.max(k);
                if previous.is_some_and(|prev| k < prev) {
                    report.non_monotone_threshold += 1;
                    report.note(|| format!("{}: threshold fell from {:?} to {k}", tag(), previous));
                }
                previous = Some(k);
            }
        }

        let top = k.map_or(opts.window, |k| ((k + 1).max(0) as usize).min(opts.window));
        let v = &sol.values;
        let shape_bad = (0..top).any(|x| v[x + 1] - v[x] < -opts.slack)
            || (1..top).any(|x| (v[x + 1] - v[x]) - (v[x] - v[x - 1]) < -opts.slack);
        if shape_bad {
            report.value_shape += 1;
            report.note(|| format!("{}: value function not increasing convex on 0..={top}", tag()));
        }

        let diag = appendix_f_diagnostic(&sol, &arm.server, arm.p);
        let worst = diag.min_difference(opts.window);
        if worst < -opts.slack {
            report.appendix += 1;
            report.note(|| format!("{}: f(x+1)-f(x) = {worst:e}", tag()));
        }
        warm = Some(sol.values);
    }
    Ok(report)
}

pub fn structure_sweep(arms: &[Arm], opts: &StructureOptions) -> Result<StructureReport> {
    let reports = arms.par_iter().map(|arm| sweep_arm(arm, opts)).collect::<Result<Vec<_>>>()?;
    Ok(reports.into_iter().fold(StructureReport { max_threshold: -1, ..Default::default() }, StructureReport::merge))
}

/// The four checks derived from one structure sweep.
pub fn structure_checks(report: &StructureReport, opts: &StructureOptions) -> Vec<Check> {
    let base = format!("{} solutions, thresholds up to {}", report.solutions, report.max_threshold);
    let saturated = report.max_threshold >= opts.window as i64;
    let detail = |count: usize| match (&report.first_failure, count) {
        (Some(f), c) if c > 0 => format!("{c} violations; first: {f}"),
        _ => base.clone(),
    };
    vec![
        Check::new("threshold structure", report.non_threshold == 0 && !saturated, detail(report.non_threshold)),
        Check::new("indexability", report.non_monotone_threshold == 0, detail(report.non_monotone_threshold)),
        Check::new("value function shape", report.value_shape == 0, detail(report.value_shape)),
        Check::new("drift-difference convexity", report.appendix == 0, detail(report.appendix)),
    ]
}

// ---------------------------------------------------------------------------
// Threshold-chain comparisons.

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DominanceReport {
    pub pairs: usize,
    pub chains: usize,
    pub mass_violations: usize,
    pub dominance_violations: usize,
    pub first_failure: Option<String>,
}

/// Cumulative active mass monotone in `k` and the dominance check, over the
/// `(q, p)` grid `{0.1, .., 0.9}^2` with `q > p` and `k = 0..=k_max`.
pub fn dominance_suite(k_max: usize) -> Result<DominanceReport> {
    let levels: Vec<f64> = (1..=9).map(|i| i as f64 / 10.0).collect();
    let pairs: Vec<(f64, f64)> =
        levels.iter().flat_map(|q| levels.iter().filter(move |p| *p < q).map(move |p| (*q, *p))).collect();
    let per_pair = pairs
        .par_iter()
        .map(|&(q, p)| -> Result<DominanceReport> {
            let mut r = DominanceReport { pairs: 1, ..Default::default() };
            let mut last = f64::NEG_INFINITY;
            for k in 0..=k_max {
                r.chains += 1;
                let mass = cumulative_active_mass(k, q, p)?;
                if mass < last - 1e-12 {
                    r.mass_violations += 1;
                    r.first_failure.get_or_insert_with(|| format!("q={q} p={p} k={k}: active mass fell"));
                }
                last = mass;
                if !dominance_check(k, q, p) {
                    r.dominance_violations += 1;
                    r.first_failure.get_or_insert_with(|| format!("q={q} p={p} k={k}: dominance fails"));
                }
            }
            Ok(r)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_pair.into_iter().fold(DominanceReport::default(), |mut acc, r| {
        acc.pairs += r.pairs;
        acc.chains += r.chains;
        acc.mass_violations += r.mass_violations;
        acc.dominance_violations += r.dominance_violations;
        acc.first_failure = acc.first_failure.or(r.first_failure);
        acc
    }))
}

pub fn dominance_checks(report: &DominanceReport) -> Vec<Check> {
    let detail = |c: usize| match &report.first_failure {
        Some(f) if c > 0 => format!("{c} violations; first: {f}"),
        _ => format!("{} (q,p) pairs, {} chains", report.pairs, report.chains),
    };
    vec![
        Check::new("active mass monotone", report.mass_violations == 0, detail(report.mass_violations)),
        Check::new("stochastic dominance", report.dominance_violations == 0, detail(report.dominance_violations)),
    ]
}

// ---------------------------------------------------------------------------
// Index correctness.

/// Root of the affine residual `index_residual(., x)` by bracketing and bisection.
pub fn bisection_index(x: usize, server: &ServerParams, p: f64, n: usize, tol: f64) -> Result<f64> {
    let f = |l: f64| index_residual(l, x, server, p, n);
    let (mut lo, mut hi) = (-1.0, 1.0);
    // Residual decreases in lambda (higher tax favours activity).
    while f(lo)? < 0.0 {
        lo *= 2.0;
        if lo < -1e12 {
            return Err(Error::Internal("bisection bracket diverged below".into()));
        }
    }
    while f(hi)? > 0.0 {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::Internal("bisection bracket diverged above".into()));
        }
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if f(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Smallest `lambda` on the grid `step * Z` at which the dynamic program keeps
/// `x` active, searched outward from `start`.
pub fn dp_grid_index(x: usize, server: &ServerParams, p: f64, n: usize, step: f64, start: f64) -> Result<f64> {
    let model = SingleQueueModel::new(*server, p, n)?;
    let opts = RviOptions::new(1e-9, 1_000_000);
    let mut warm: Option<Vec<f64>> = None;
    let mut active_at = |g: i64| -> Result<bool> {
        let sol = model.solve(g as f64 * step, &opts, warm.as_deref())?;
        let a = sol.active[x];
        warm = Some(sol.values);
        Ok(a)
    };
    let mut g = (start / step).round() as i64;
    const MAX_STEPS: usize = 400;
    if active_at(g)? {
        for _ in 0..MAX_STEPS {
            if !active_at(g - 1)? {
                return Ok(g as f64 * step);
            }
            g -= 1;
        }
    } else {
        for _ in 0..MAX_STEPS {
            g += 1;
            if active_at(g)? {
                return Ok(g as f64 * step);
            }
        }
    }
    Err(Error::NoConvergence { what: "grid index search", iterations: MAX_STEPS, last: g as f64 * step, residual: f64::NAN })
}

#[derive(Debug, Clone)]
pub struct IndexCorrectness {
    pub indices: Vec<f64>,
    pub bisection: Vec<f64>,
    pub dp_grid: Vec<f64>,
    pub max_bisection_error: f64,
    pub max_grid_error: f64,
    pub monotone: bool,
}

pub fn index_correctness(server: &ServerParams, p: f64, x_max: usize, grid_step: f64) -> Result<IndexCorrectness> {
    let iter = IndexIterationConfig::default();
    let n = default_truncation(x_max, 0).max(x_max + 2);
    let dp_n = n + 20;
    let rows = (0..=x_max)
        .into_par_iter()
        .map(|x| -> Result<(f64, f64, f64)> {
            let index = compute_index(x, server, p, &iter, n)?;
            let bisect = bisection_index(x, server, p, n, 1e-9)?;
            let grid = dp_grid_index(x, server, p, dp_n, grid_step, index)?;
            Ok((index, bisect, grid))
        })
        .collect::<Result<Vec<_>>>()?;
    let indices: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let bisection: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let dp_grid: Vec<f64> = rows.iter().map(|r| r.2).collect();
    let max_err = |other: &[f64]| indices.iter().zip(other).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Ok(IndexCorrectness {
        max_bisection_error: max_err(&bisection),
        max_grid_error: max_err(&dp_grid),
        monotone: indices.windows(2).all(|w| w[1] >= w[0]),
        indices,
        bisection,
        dp_grid,
    })
}

pub fn index_checks(res: &IndexCorrectness, grid_step: f64) -> Vec<Check> {
    let last = res.indices.len() - 1;
    vec![
        Check::new(
            "index vs bisection",
            res.max_bisection_error <= 1e-4,
            format!("max |error| {:.3e} over x=0..={last}", res.max_bisection_error),
        ),
        Check::new(
            "index vs dynamic program",
            res.max_grid_error <= grid_step + 1e-9,
            format!("max |error| {:.4} with grid step {grid_step}", res.max_grid_error),
        ),
        Check::new(
            "index monotone",
            res.monotone,
            format!("index(0) = {:.6}, index({last}) = {:.6}", res.indices[0], res.indices[last]),
        ),
    ]
}

// ---------------------------------------------------------------------------
// Solver cross-consistency.

/// Largest `|beta_solve_value - beta_threshold_chain|` over arms, thresholds
/// `0..=k_max`, truncations `k+1`, `k+5`, `2k+10` and a few taxes.
pub fn value_vs_chain(arms: &[Arm], k_max: usize) -> Result<f64> {
    let errors = arms
        .par_iter()
        .map(|arm| -> Result<f64> {
            let mut worst: f64 = 0.0;
            for k in 0..=k_max {
                for n in [k + 1, k + 5, 2 * k + 10] {
                    for lambda in [-7.5, 0.0, 3.25, 40.0] {
                        let a = solve_value(lambda, k, &arm.server, arm.p, n.max(2))?.beta;
                        let b = threshold_average_cost(k as i64, lambda, arm.server.cost_c, arm.server.q, arm.p)?;
                        worst = worst.max((a - b).abs());
                    }
                }
            }
            Ok(worst)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(errors.into_iter().fold(0.0, f64::max))
}

/// Two-server, buffer-1 instances for the exhaustive comparison.
pub fn tiny_instances() -> Vec<SystemConfig> {
    let s = |q, c| ServerParams { q, cost_c: c };
    vec![
        SystemConfig::new(0.3, vec![s(0.6, 2.0), s(0.5, 1.0)], 1),
        SystemConfig::new(0.4, vec![s(0.55, 100.0), s(0.5, 90.0)], 1),
        SystemConfig::new(0.2, vec![s(0.5, 1.0), s(0.5, 1.0)], 1),
        SystemConfig::new(0.7, vec![s(0.9, 3.0), s(0.3, 7.0)], 1),
        SystemConfig::new(0.5, vec![s(0.35, 5.0), s(0.8, 1.0)], 1),
        SystemConfig::new(0.1, vec![s(0.95, 10.0), s(0.15, 0.5)], 1),
    ]
}

#[derive(Debug, Clone)]
pub struct JointVsBrute {
    pub instances: usize,
    pub max_beta_error: f64,
    pub policy_mismatches: usize,
    pub first_mismatch: Option<String>,
}

pub fn joint_vs_brute(instances: &[SystemConfig]) -> Result<JointVsBrute> {
    let mut out = JointVsBrute { instances: instances.len(), max_beta_error: 0.0, policy_mismatches: 0, first_mismatch: None };
    for cfg in instances {
        let joint = joint_rvi(cfg, &RviOptions::new(1e-12, 10_000_000))?;
        let brute = brute_force_policy_search(cfg)?;
        out.max_beta_error = out.max_beta_error.max((joint.beta - brute.beta).abs());
        if joint.policy != brute.policy {
            out.policy_mismatches += 1;
            out.first_mismatch
                .get_or_insert_with(|| format!("{cfg:?}: rvi {:?} vs brute {:?}", joint.policy, brute.policy));
        }
    }
    Ok(out)
}

pub fn consistency_checks(value_error: f64, jb: &JointVsBrute) -> Vec<Check> {
    vec![
        Check::new("linear system vs threshold chain", value_error <= 1e-8, format!("max |beta difference| {value_error:.3e}")),
        Check::new(
            "joint dynamic program vs brute force",
            jb.max_beta_error <= 1e-8 && jb.policy_mismatches == 0,
            match &jb.first_mismatch {
                Some(m) => format!("{} mismatches; first: {m}", jb.policy_mismatches),
                None => format!("{} instances, max |beta difference| {:.3e}", jb.instances, jb.max_beta_error),
            },
        ),
    ]
}

// ---------------------------------------------------------------------------
// Departure law.

#[derive(Debug, Clone)]
pub struct DepartureFidelity {
    pub max_analytic_error: f64,
    /// `(q, x, empirical mean, standard error)` per pinned queue.
    pub pinned: Vec<(f64, usize, f64, f64)>,
    /// `(server, q, empirical mean, standard error)` from a simulated trace.
    pub traced: Vec<(usize, f64, f64, f64)>,
}

impl DepartureFidelity {
    pub fn worst_z(&self) -> f64 {
        self.pinned
            .iter()
            .map(|(q, _, m, se)| (m - q).abs() / se)
            .chain(self.traced.iter().map(|(_, q, m, se)| (m - q).abs() / se))
            .fold(0.0, f64::max)
    }
}

fn mean_and_se(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

pub fn departure_fidelity(slots: u64, seed: u64) -> Result<DepartureFidelity> {
    let qs: Vec<f64> = (1..=19).map(|i| i as f64 * 0.05).collect();
    let max_analytic_error = qs
        .iter()
        .flat_map(|q| (0..=200).map(move |x| if x == 0 { 0.0 } else { (departure_pmf(x, *q).mean() - q).abs() }))
        .fold(0.0, f64::max);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pinned = Vec::new();
    for (q, x) in [(0.55, 1), (0.55, 7), (0.3, 40), (0.95, 200), (0.1, 3)] {
        let sampler = DepartureSampler::new(q, x);
        let draws: Vec<f64> = (0..slots).map(|_| sampler.sample(x, rng.random()) as f64).collect();
        let (m, se) = mean_and_se(&draws);
        pinned.push((q, x, m, se));
    }

    // Through the simulator: departures in slots where the queue is non-empty.
    let cfg = SystemConfig::new(
        0.9,
        vec![ServerParams { q: 0.6, cost_c: 1.0 }, ServerParams { q: 0.45, cost_c: 1.0 }],
        60,
    );
    let trace = simulate_trace(&cfg, &PolicyKind::Random, slots, seed)?;
    let traced = (0..cfg.num_servers())
        .map(|i| {
            let draws: Vec<f64> =
                trace.iter().filter(|r| r.state[i] > 0).map(|r| r.departures[i] as f64).collect();
            let (m, se) = mean_and_se(&draws);
            (i, cfg.servers[i].q, m, se)
        })
        .collect();
    Ok(DepartureFidelity { max_analytic_error, pinned, traced })
}

pub fn departure_checks(res: &DepartureFidelity) -> Vec<Check> {
    vec![
        Check::new("departure mean (analytic)", res.max_analytic_error <= 1e-12, format!("max |mean - q| {:.3e}", res.max_analytic_error)),
        Check::new("departure mean (simulated)", res.worst_z() <= 3.0, format!("worst |z| {:.3}", res.worst_z())),
    ]
}

// ---------------------------------------------------------------------------
// Shape of the optimal relaxed cost in the tax.

#[derive(Debug, Clone)]
pub struct BetaShape {
    pub lambdas: Vec<f64>,
    pub beta: Vec<f64>,
    pub max_decrease: f64,
    pub max_second_difference: f64,
    pub max_unit_increment: f64,
}

pub fn beta_shape(arm: &Arm, lambdas: &[f64], k_max: usize) -> Result<BetaShape> {
    let beta = lambdas
        .iter()
        .map(|l| optimal_threshold_cost(*l, k_max, arm.server.cost_c, arm.server.q, arm.p).map(|r| r.1))
        .collect::<Result<Vec<_>>>()?;
    let step = lambdas.get(1).map_or(1.0, |l| l - lambdas[0]);
    let unit = (1.0 / step).round() as usize;
    Ok(BetaShape {
        max_decrease: beta.windows(2).map(|w| w[0] - w[1]).fold(f64::NEG_INFINITY, f64::max),
        max_second_difference: beta.windows(3).map(|w| w[2] - 2.0 * w[1] + w[0]).fold(f64::NEG_INFINITY, f64::max),
        max_unit_increment: (unit..beta.len()).map(|i| beta[i] - beta[i - unit]).fold(f64::NEG_INFINITY, f64::max),
        lambdas: lambdas.to_vec(),
        beta,
    })
}

/// `beta_shape` for every arm on `lambda in [-20, 20]` with step 0.25.
pub fn beta_shapes(arms: &[Arm]) -> Result<Vec<BetaShape>> {
    let lambdas = grid(-20.0, 20.0, 0.25);
    arms.par_iter().map(|arm| beta_shape(arm, &lambdas, 80)).collect()
}

pub fn beta_checks(shapes: &[BetaShape]) -> Vec<Check> {
    let worst = |f: fn(&BetaShape) -> f64| shapes.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
    let dec = worst(|s| s.max_decrease);
    let second = worst(|s| s.max_second_difference);
    let unit = worst(|s| s.max_unit_increment);
    vec![
        Check::new("relaxed cost non-decreasing", dec <= 1e-9, format!("largest decrease {dec:.3e}")),
        Check::new("relaxed cost concave", second <= 1e-9, format!("largest second difference {second:.3e}")),
        Check::new("relaxed cost slope at most one", unit <= 1.0 + 1e-9, format!("largest unit increment {unit:.12}")),
    ]
}

// ---------------------------------------------------------------------------
// Simulation experiments.

/// Three-server configurations of the policy comparison.
pub fn comparison_configs() -> Vec<(&'static str, SystemConfig)> {
    let cfg = |c: [f64; 3], q: [f64; 3]| {
        SystemConfig::new(0.4, c.iter().zip(q).map(|(c, q)| ServerParams { q, cost_c: *c }).collect(), 100)
    };
    vec![
        ("C=(30,29,28) q=(0.55,0.50,0.45)", cfg([30.0, 29.0, 28.0], [0.55, 0.50, 0.45])),
        ("C=(30,29,28) q=(0.95,0.50,0.45)", cfg([30.0, 29.0, 28.0], [0.95, 0.50, 0.45])),
        ("C=(40,23,16) q=(0.55,0.50,0.45)", cfg([40.0, 23.0, 16.0], [0.55, 0.50, 0.45])),
    ]
}

/// Whittle (x_max 40), Cμ and random, in that order.
pub fn heuristic_policies(cfg: &SystemConfig, x_max: usize) -> Result<Vec<PolicyKind>> {
    let iter = IndexIterationConfig::default();
    let table = build_index_table(cfg, x_max, &iter, default_truncation(x_max, cfg.buffer))?;
    Ok(vec![PolicyKind::Whittle(table.into()), PolicyKind::Cmu, PolicyKind::Random])
}

pub fn ordering_check(label: &str, table: &ComparisonTable) -> Check {
    let get = |name: &str| table.summary(name).expect("policy in table");
    let (w, c, r) = (get("whittle"), get("cmu"), get("random"));
    let passed = w.mean <= c.mean && c.mean <= r.mean && r.mean - w.mean > w.half_width + r.half_width;
    Check::new(
        format!("policy ordering {label}"),
        passed,
        format!(
            "whittle {:.4}±{:.4}, cmu {:.4}±{:.4}, random {:.4}±{:.4}",
            w.mean, w.half_width, c.mean, c.half_width, r.mean, r.half_width
        ),
    )
}

#[derive(Debug, Clone)]
pub struct GapResult {
    pub beta_opt: f64,
    pub whittle_mean: f64,
    pub half_width: f64,
    pub relative_gap: f64,
}

/// Whittle against the joint optimum on a two-server system.
pub fn suboptimality_gap(cfg: &SystemConfig, horizon: u64, burn_in: u64, seeds: &[u64]) -> Result<GapResult> {
    let opt = joint_rvi(cfg, &RviOptions::new(1e-7, 10_000_000))?;
    let policies = heuristic_policies(cfg, 40.min(cfg.buffer))?;
    let table = compare(cfg, &policies[..1], horizon, burn_in, seeds)?;
    let s = &table.summaries[0];
    Ok(GapResult {
        beta_opt: opt.beta,
        whittle_mean: s.mean,
        half_width: s.half_width,
        relative_gap: (s.mean - opt.beta) / opt.beta,
    })
}

pub fn gap_check(res: &GapResult) -> Check {
    let passed = res.whittle_mean >= res.beta_opt - res.half_width && res.relative_gap <= 0.15;
    Check::new(
        "whittle suboptimality",
        passed,
        format!(
            "optimal {:.4}, whittle {:.4}±{:.4}, gap {:.2}%",
            res.beta_opt,
            res.whittle_mean,
            res.half_width,
            100.0 * res.relative_gap
        ),
    )
}

// ---------------------------------------------------------------------------

/// Every structural and numerical check (no long simulations), in order.
pub fn run_structural_suite() -> Result<Vec<Check>> {
    let arms = sample_arms(20, ARM_SEED);
    let opts = StructureOptions::default();
    let mut checks = structure_checks(&structure_sweep(&arms, &opts)?, &opts);
    checks.extend(dominance_checks(&dominance_suite(40)?));
    let server = ServerParams { q: 0.55, cost_c: 30.0 };
    checks.extend(index_checks(&index_correctness(&server, 0.4, 40, 0.05)?, 0.05));
    checks.extend(consistency_checks(value_vs_chain(&arms, 30)?, &joint_vs_brute(&tiny_instances())?));
    checks.extend(departure_checks(&departure_fidelity(100_000, 7)?));
    checks.extend(beta_checks(&beta_shapes(&arms)?));
    Ok(checks)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_endpoints_are_exact() {
        let g = grid(-20.0, 20.0, 0.5);
        assert_eq!(g.len(), 81);
        assert_eq!(g[0], -20.0);
        assert_eq!(g[80], 20.0);
        assert_eq!(g[40], 0.0);
    }

    #[test]
    fn sampled_arms_are_stable_queues() {
        let arms = sample_arms(50, 1);
        assert!(arms.iter().all(|a| a.p < a.server.q && a.p > 0.0 && a.server.cost_c > 0.0));
        assert_eq!(arms, sample_arms(50, 1));
    }

    #[test]
    fn bisection_recovers_the_closed_form_at_zero() {
        let server = ServerParams { q: 0.55, cost_c: 30.0 };
        let l = bisection_index(0, &server, 0.4, 20, 1e-10).unwrap();
        assert!((l - 0.4 * 30.0 / 0.55).abs() < 1e-8);
    }

    #[test]
    fn small_structure_sweep_is_clean() {
        let arms = sample_arms(2, 99);
        let opts = StructureOptions { lambdas: grid(-5.0, 5.0, 1.0), ..Default::default() };
        let report = structure_sweep(&arms, &opts).unwrap();
        assert_eq!(report.solutions, 22);
        assert!(structure_checks(&report, &opts).iter().all(|c| c.passed), "{report:?}");
    }
}

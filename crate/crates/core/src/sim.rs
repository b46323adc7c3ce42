//! Seeded discrete-time simulation of the multi-queue system.
//!
//! Each slot: the cost `sum_i C_i X_i(t)` is recorded (after burn-in), the
//! policy picks one server from `X(t)`, every server draws its departures,
//! one Bernoulli arrival is offered to the chosen server only, and queues
//! update with excess arrivals dropped at the buffer.
//!
//! One master seed feeds independent ChaCha streams: stream 0 for arrivals,
//! stream 1 for the random policy, stream `2 + i` for server `i`'s
//! departures. A uniform is drawn for every server in every slot, so runs
//! with the same seed share arrival and service randomness across policies.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dp::JointSolution;
use crate::error::{Error, Result};
use crate::model::{DepartureKernel, SystemConfig};
use crate::policies::{cmu_select, exact_select, random_select, whittle_select, PolicyKind};
use crate::whittle::IndexTable;

/// Points in each report's running-average cost series.
pub const SERIES_POINTS: u64 = 100;

/// Normal quantile for two-sided 95% intervals.
pub const Z_95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, PartialEq)]
pub struct SimReport {
    pub policy: String,
    pub horizon: u64,
    pub burn_in: u64,
    pub seed: u64,
    /// Time average of `sum_i C_i X_i` over slots `burn_in..horizon`.
    pub avg_cost: f64,
    pub per_server_mean_length: Vec<f64>,
    /// Arrivals lost to the buffer over the whole run.
    pub drop_count: u64,
    /// `(slots since burn-in, running average cost)` checkpoints.
    pub cost_series: Vec<(u64, f64)>,
}

/// Inverse-CDF departure sampling from [`DepartureKernel`] rows.
#[derive(Debug, Clone)]
pub struct DepartureSampler {
    cumulative: Vec<Vec<f64>>,
}

impl DepartureSampler {
    pub fn new(q: f64, max_len: usize) -> Self {
        let kernel = DepartureKernel::new(q, max_len);
        let cumulative = (0..=max_len)
            .map(|x| {
                kernel
                    .row(x)
                    .iter()
                    .scan(0.0, |acc, w| {
                        *acc += w;
                        Some(*acc)
                    })
                    .collect()
            })
            .collect();
        Self { cumulative }
    }

    /// Departures from `x` jobs given a uniform draw `u` in `[0, 1)`.
    pub fn sample(&self, x: usize, u: f64) -> usize {
        let cum = &self.cumulative[x];
        cum.iter().position(|c| u < *c).unwrap_or(cum.len() - 1)
    }
}

/// One slot of a traced run.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotRecord {
    pub state: Vec<usize>,
    pub active: usize,
    pub departures: Vec<usize>,
    pub arrival: bool,
    /// Arrivals entering each queue (0 or 1, only at the active server).
    pub admitted: Vec<usize>,
    pub next: Vec<usize>,
}

enum Selector<'a> {
    Whittle(&'a IndexTable),
    Cmu,
    Random,
    Exact(&'a JointSolution),
}

struct Engine<'a> {
    cfg: &'a SystemConfig,
    selector: Selector<'a>,
    samplers: Vec<DepartureSampler>,
    departure_rngs: Vec<ChaCha8Rng>,
    arrival_rng: ChaCha8Rng,
    policy_rng: ChaCha8Rng,
    state: Vec<usize>,
    departures: Vec<usize>,
    drops: u64,
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

impl<'a> Engine<'a> {
    fn new(cfg: &'a SystemConfig, policy: &'a PolicyKind, seed: u64) -> Result<Self> {
        cfg.validated()?;
        let servers = cfg.num_servers();
        let selector = match policy {
            PolicyKind::Whittle(table) => {
                if table.num_servers() != servers {
                    return Err(Error::invalid("policy", format!("index table has {} servers, system has {servers}", table.num_servers())));
                }
                Selector::Whittle(table)
            }
            PolicyKind::Cmu => Selector::Cmu,
            PolicyKind::Random => Selector::Random,
            PolicyKind::Exact(sol) => {
                if sol.space.dims() != servers || sol.space.buffer() != cfg.buffer {
                    return Err(Error::invalid("policy", "exact policy table does not cover this system"));
                }
                Selector::Exact(sol)
            }
        };
        Ok(Self {
            cfg,
            selector,
            samplers: cfg.servers.iter().map(|s| DepartureSampler::new(s.q, cfg.buffer)).collect(),
            departure_rngs: (0..servers as u64).map(|i| stream(seed, 2 + i)).collect(),
            arrival_rng: stream(seed, 0),
            policy_rng: stream(seed, 1),
            state: vec![0; servers],
            departures: vec![0; servers],
            drops: 0,
        })
    }

    fn select(&mut self) -> usize {
        match self.selector {
            Selector::Whittle(table) => whittle_select(&self.state, table),
            Selector::Cmu => cmu_select(&self.state, self.cfg),
            Selector::Random => random_select(&mut self.policy_rng, self.state.len()),
            Selector::Exact(sol) => exact_select(&self.state, sol),
        }
    }

    /// Advances one slot; returns `(active server, arrival offered, admitted)`.
    fn step(&mut self) -> (usize, bool, bool) {
        let active = self.select();
        for i in 0..self.state.len() {
            let u: f64 = self.departure_rngs[i].random();
            self.departures[i] = self.samplers[i].sample(self.state[i], u);
        }
        let arrival = self.arrival_rng.random::<f64>() < self.cfg.arrival_p;
        for (x, d) in self.state.iter_mut().zip(&self.departures) {
            *x -= d;
        }
        let mut admitted = false;
        if arrival {
            if self.state[active] < self.cfg.buffer {
                self.state[active] += 1;
                admitted = true;
            } else {
                self.drops += 1;
            }
        }
        (active, arrival, admitted)
    }

    fn holding_cost(&self) -> f64 {
        self.state.iter().zip(&self.cfg.servers).map(|(x, s)| s.cost_c * *x as f64).sum()
    }
}

pub fn simulate(cfg: &SystemConfig, policy: &PolicyKind, horizon: u64, burn_in: u64, seed: u64) -> Result<SimReport> {
    if horizon <= burn_in {
        return Err(Error::invalid("horizon", format!("horizon {horizon} must exceed burn-in {burn_in}")));
    }
    let mut engine = Engine::new(cfg, policy, seed)?;
    let measured = horizon - burn_in;
    let every = (measured / SERIES_POINTS).max(1);
    let mut cost = 0.0;
    let mut lengths = vec![0u64; cfg.num_servers()];
    let mut series = Vec::with_capacity(SERIES_POINTS as usize + 1);
    for t in 0..horizon {
        if t >= burn_in {
            cost += engine.holding_cost();
            lengths.iter_mut().zip(&engine.state).for_each(|(acc, x)| *acc += *x as u64);
            let seen = t - burn_in + 1;
            if seen % every == 0 || seen == measured {
                series.push((seen, cost / seen as f64));
            }
        }
        engine.step();
    }
    series.dedup_by_key(|(n, _)| *n);
    Ok(SimReport {
        policy: policy.name().to_string(),
        horizon,
        burn_in,
        seed,
        avg_cost: cost / measured as f64,
        per_server_mean_length: lengths.iter().map(|l| *l as f64 / measured as f64).collect(),
        drop_count: engine.drops,
        cost_series: series,
    })
}

/// Runs `slots` slots from the empty state and records every transition.
pub fn simulate_trace(cfg: &SystemConfig, policy: &PolicyKind, slots: u64, seed: u64) -> Result<Vec<SlotRecord>> {
    let mut engine = Engine::new(cfg, policy, seed)?;
    let mut out = Vec::with_capacity(slots as usize);
    for _ in 0..slots {
        let state = engine.state.clone();
        let (active, arrival, admitted) = engine.step();
        let mut admitted_vec = vec![0; state.len()];
        admitted_vec[active] = admitted as usize;
        out.push(SlotRecord {
            state,
            active,
            departures: engine.departures.clone(),
            arrival,
            admitted: admitted_vec,
            next: engine.state.clone(),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicySummary {
    pub policy: String,
    pub runs: usize,
    pub mean: f64,
    /// Normal-approximation 95% half-width of the mean across seeds.
    pub half_width: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonTable {
    /// Policy-major, seed-minor.
    pub reports: Vec<SimReport>,
    pub summaries: Vec<PolicySummary>,
}

impl ComparisonTable {
    pub fn summary(&self, policy: &str) -> Option<&PolicySummary> {
        self.summaries.iter().find(|s| s.policy == policy)
    }
}

/// Mean and 95% half-width of a sample.
pub fn mean_and_half_width(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, f64::INFINITY);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, Z_95 * (var / n).sqrt())
}

/// Simulates every `(policy, seed)` pair and summarises each policy.
pub fn compare(cfg: &SystemConfig, policies: &[PolicyKind], horizon: u64, burn_in: u64, seeds: &[u64]) -> Result<ComparisonTable> {
    if policies.is_empty() {
        return Err(Error::Usage("compare needs at least one policy".into()));
    }
    if seeds.len() < 2 {
        return Err(Error::Usage(format!("compare needs at least two seeds for confidence intervals, got {}", seeds.len())));
    }
    let jobs: Vec<(&PolicyKind, u64)> = policies.iter().flat_map(|p| seeds.iter().map(move |s| (p, *s))).collect();
    let reports = jobs
        .par_iter()
        .map(|(policy, seed)| simulate(cfg, policy, horizon, burn_in, *seed))
        .collect::<Result<Vec<_>>>()?;
    let summaries = reports
        .chunks(seeds.len())
        .zip(policies)
        .map(|(chunk, policy)| {
            let costs: Vec<f64> = chunk.iter().map(|r| r.avg_cost).collect();
            let (mean, half_width) = mean_and_half_width(&costs);
            PolicySummary { policy: policy.name().to_string(), runs: chunk.len(), mean, half_width }
        })
        .collect();
    Ok(ComparisonTable { reports, summaries })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use approx::assert_abs_diff_eq;

    use super::*;
    use crate::model::ServerParams;
    use crate::threshold::{stationary_distribution, threshold_chain};

    fn fig3() -> SystemConfig {
        SystemConfig::new(
            0.4,
            vec![
                ServerParams { q: 0.55, cost_c: 30.0 },
                ServerParams { q: 0.50, cost_c: 29.0 },
                ServerParams { q: 0.45, cost_c: 28.0 },
            ],
            100,
        )
    }

    #[test]
    fn sampler_inverts_the_cdf() {
        let s = DepartureSampler::new(0.5, 3);
        assert_eq!(s.sample(0, 0.999), 0);
        // Binomial(2, 0.25): cdf 0.5625, 0.9375, 1.
        assert_eq!(s.sample(2, 0.5), 0);
        assert_eq!(s.sample(2, 0.6), 1);
        assert_eq!(s.sample(2, 0.95), 2);
    }

    #[test]
    fn rare_arrivals_keep_queues_empty() {
        let mut cfg = fig3();
        cfg.arrival_p = 1e-6;
        let total_c: f64 = cfg.servers.iter().map(|s| s.cost_c).sum();
        for policy in [PolicyKind::Cmu, PolicyKind::Random] {
            let r = simulate(&cfg, &policy, 100_000, 0, 3).unwrap();
            assert!(r.avg_cost < 0.01 * total_c, "{r:?}");
        }
    }

    #[test]
    fn single_always_active_queue_matches_stationary_mean() {
        let cfg = SystemConfig::new(0.4, vec![ServerParams { q: 0.5, cost_c: 1.0 }], 40);
        let report = simulate(&cfg, &PolicyKind::Cmu, 1_000_000, 10_000, 17).unwrap();
        // Always active with buffer 40 is the threshold-39 chain on {0..40}.
        let pi = stationary_distribution(&threshold_chain(39, 0.5, 0.4)).unwrap();
        let mean = pi.mean();
        // Batch means for the standard error of a correlated series.
        let batches: Vec<f64> = (0..20)
            .map(|b| simulate(&cfg, &PolicyKind::Cmu, 60_000, 10_000, 1000 + b).unwrap().avg_cost)
            .collect();
        let (_, hw) = mean_and_half_width(&batches);
        let se_long = hw / Z_95 * (50_000.0f64 / 990_000.0).sqrt() * (20f64).sqrt();
        assert!((report.avg_cost - mean).abs() <= 3.0 * se_long, "sim {} exact {mean} se {se_long}", report.avg_cost);
    }

    #[test]
    fn same_seed_same_report() {
        let cfg = fig3();
        let a = simulate(&cfg, &PolicyKind::Random, 20_000, 1_000, 9).unwrap();
        let b = simulate(&cfg, &PolicyKind::Random, 20_000, 1_000, 9).unwrap();
        assert_eq!(a, b);
        let c = simulate(&cfg, &PolicyKind::Random, 20_000, 1_000, 10).unwrap();
        assert_ne!(a.avg_cost, c.avg_cost);
        assert_eq!(a.cost_series.last().unwrap().0, 19_000);
        assert_abs_diff_eq!(a.cost_series.last().unwrap().1, a.avg_cost, epsilon = 1e-9);
    }

    #[test]
    fn trace_conserves_jobs() {
        let cfg = SystemConfig { buffer: 4, ..fig3() };
        let trace = simulate_trace(&cfg, &PolicyKind::Random, 10_000, 4).unwrap();
        let mut drops = 0;
        for (t, rec) in trace.iter().enumerate() {
            assert_eq!(rec.admitted.iter().sum::<usize>(), rec.admitted[rec.active]);
            for i in 0..3 {
                assert_eq!(rec.next[i] as i64 - rec.state[i] as i64 + rec.departures[i] as i64 - rec.admitted[i] as i64, 0);
                assert!(rec.next[i] <= 4);
            }
            if rec.arrival && rec.admitted[rec.active] == 0 {
                drops += 1;
            }
            if t + 1 < trace.len() {
                assert_eq!(rec.next, trace[t + 1].state);
            }
        }
        assert!(drops > 0, "tiny buffer should drop arrivals");
    }

    #[test]
    fn reports_respect_bounds() {
        let cfg = SystemConfig { buffer: 6, ..fig3() };
        let r = simulate(&cfg, &PolicyKind::Cmu, 50_000, 100, 1).unwrap();
        assert!(r.avg_cost >= 0.0);
        assert!(r.per_server_mean_length.iter().all(|m| (0.0..=6.0).contains(m)));
    }

    #[test]
    fn compare_bookkeeping_and_preconditions() {
        let cfg = fig3();
        let table = compare(&cfg, &[PolicyKind::Cmu], 5_000, 100, &[1, 2, 3]).unwrap();
        assert_eq!(table.reports.len(), 3);
        assert_eq!(table.summaries.len(), 1);
        assert!(table.reports.iter().all(|r| r.horizon == 5_000 && r.burn_in == 100));
        assert!(matches!(compare(&cfg, &[PolicyKind::Cmu], 5_000, 100, &[]), Err(Error::Usage(_))));
        assert!(matches!(compare(&cfg, &[PolicyKind::Cmu], 5_000, 100, &[1]), Err(Error::Usage(_))));
        assert!(matches!(compare(&cfg, &[], 5_000, 100, &[1, 2]), Err(Error::Usage(_))));
        assert!(simulate(&cfg, &PolicyKind::Cmu, 10, 10, 1).is_err());
    }

    #[test]
    fn random_policy_treats_symmetric_servers_alike() {
        let cfg = SystemConfig::new(0.4, vec![ServerParams { q: 0.6, cost_c: 1.0 }; 2], 50);
        let table = compare(&cfg, &[PolicyKind::Random], 100_000, 1_000, &[1, 2, 3, 4, 5, 6, 7, 8]).unwrap();
        let per: Vec<Vec<f64>> = (0..2)
            .map(|i| table.reports.iter().map(|r| r.per_server_mean_length[i]).collect())
            .collect();
        let (m0, h0) = mean_and_half_width(&per[0]);
        let (m1, h1) = mean_and_half_width(&per[1]);
        assert!((m0 - m1).abs() <= h0 + h1, "{m0}±{h0} vs {m1}±{h1}");
    }

    #[test]
    fn mismatched_tables_are_rejected() {
        let table = Arc::new(crate::whittle::IndexTable::from_rows(vec![vec![0.0, 1.0]]).unwrap());
        assert!(simulate(&fig3(), &PolicyKind::Whittle(table), 100, 0, 1).is_err());
    }
}

use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{anyhow, bail};

use ps_whittle::verify::run_structural_suite;
use ps_whittle::{
    build_index_table, compare, joint_rvi, lyapunov_certificate, simulate, validate_config, JointSolution, PolicyKind,
    RviOptions,
};

use crate::config::RunManifest;
use crate::output;

/// Joint state spaces up to this size are solved exactly by `compare`.
pub const EXACT_STATE_LIMIT: usize = 50_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum PolicyName {
    Whittle,
    Cmu,
    Random,
    Exact,
}

/// Files written and whether every reported check passed.
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub ok: bool,
}

impl Outcome {
    fn wrote(files: Vec<PathBuf>) -> Self {
        Self { files, ok: true }
    }
}

pub fn validate(m: &RunManifest) -> anyhow::Result<Outcome> {
    let report = validate_config(&m.system);
    for v in &report.violations {
        eprintln!("invalid: {v}");
    }
    if !report.is_ok() {
        bail!("{} configuration violation(s) in {}", report.violations.len(), m.config_path.display());
    }
    let p = m.system.arrival_p;
    let q_min = m.system.q_min();
    println!("config ok: {} servers, p={p}, buffer={}", m.system.num_servers(), m.system.buffer);
    match lyapunov_certificate(p, q_min) {
        Some(c) => println!("drift certificate: a={:.6} b={:.6}", c.a, c.b),
        None => println!("no drift certificate (q_min={q_min} <= 2p={}); buffer keeps queues bounded", 2.0 * p),
    }
    Ok(Outcome::wrote(Vec::new()))
}

fn whittle_table(m: &RunManifest) -> anyhow::Result<ps_whittle::IndexTable> {
    Ok(build_index_table(&m.system, m.x_max, &m.index, m.truncation_n)?)
}

pub fn indices(m: &RunManifest) -> anyhow::Result<Outcome> {
    let table = whittle_table(m)?;
    if !table.is_monotone() {
        eprintln!("warning: an index row is not monotone in the queue length");
    }
    Ok(Outcome::wrote(vec![output::write_index_table(&m.out_dir, &table)?]))
}

fn exact_solution(m: &RunManifest) -> anyhow::Result<JointSolution> {
    Ok(joint_rvi(&m.system, &RviOptions::default())?)
}

fn policy(m: &RunManifest, name: PolicyName) -> anyhow::Result<PolicyKind> {
    Ok(match name {
        PolicyName::Whittle => PolicyKind::Whittle(Arc::new(whittle_table(m)?)),
        PolicyName::Cmu => PolicyKind::Cmu,
        PolicyName::Random => PolicyKind::Random,
        PolicyName::Exact => PolicyKind::Exact(Arc::new(exact_solution(m)?)),
    })
}

pub fn simulate_one(m: &RunManifest, name: PolicyName, seed: u64, indices: Option<&Path>) -> anyhow::Result<Outcome> {
    let kind = match (name, indices) {
        (PolicyName::Whittle, Some(path)) => PolicyKind::Whittle(Arc::new(output::read_index_table(path)?)),
        (_, Some(_)) => bail!("--indices only applies to the whittle policy"),
        _ => policy(m, name)?,
    };
    let report = simulate(&m.system, &kind, m.horizon, m.burn_in, seed)?;
    println!("{}: avg_cost {} over {} slots", report.policy, output::sig12(report.avg_cost), m.horizon - m.burn_in);
    let reports = [report];
    let files = vec![
        output::write_reports(&m.out_dir, &format!("simulate_{}.csv", kind.name()), &reports)?,
        output::write_cost_series(&m.out_dir, &format!("cost_series_{}.csv", kind.name()), &reports)?,
    ];
    Ok(Outcome::wrote(files))
}

fn joint_states(m: &RunManifest) -> Option<usize> {
    (0..m.system.num_servers()).try_fold(1usize, |acc, _| acc.checked_mul(m.system.buffer + 1))
}

pub fn compare_all(m: &RunManifest) -> anyhow::Result<Outcome> {
    let mut names = vec![PolicyName::Whittle, PolicyName::Cmu, PolicyName::Random];
    match joint_states(m) {
        Some(n) if n <= EXACT_STATE_LIMIT => names.push(PolicyName::Exact),
        _ => eprintln!("note: joint state space exceeds {EXACT_STATE_LIMIT} states; exact policy skipped"),
    }
    let policies = names.iter().map(|n| policy(m, *n)).collect::<anyhow::Result<Vec<_>>>()?;
    let table = compare(&m.system, &policies, m.horizon, m.burn_in, &m.seeds)?;
    for s in &table.summaries {
        println!("{:<8} {} ± {}", s.policy, output::sig12(s.mean), output::sig12(s.half_width));
    }
    Ok(Outcome::wrote(output::write_comparison(&m.out_dir, &table)?))
}

pub fn exact(m: &RunManifest) -> anyhow::Result<Outcome> {
    let sol = exact_solution(m)?;
    println!("optimal average cost {} ({} states, {} sweeps)", output::sig12(sol.beta), sol.space.len(), sol.sweeps);
    Ok(Outcome::wrote(output::write_exact(&m.out_dir, &sol)?))
}

pub fn properties(out_dir: &Path) -> anyhow::Result<Outcome> {
    let checks = run_structural_suite().map_err(|e| anyhow!(e))?;
    for c in &checks {
        println!("{c}");
    }
    let ok = checks.iter().all(|c| c.passed);
    Ok(Outcome { files: vec![output::write_checks(out_dir, &checks)?], ok })
}

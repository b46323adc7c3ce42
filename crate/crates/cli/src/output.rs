//! Delimited output files. Floats carry 12 significant digits, except index
//! tables, which use the shortest exact representation so they read back
//! bit-for-bit.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};

use ps_whittle::verify::Check;
use ps_whittle::{ComparisonTable, IndexTable, JointSolution, SimReport};

/// `v` rounded to 12 significant digits, without trailing zeros.
pub fn sig12(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    let exp = v.abs().log10().floor() as i32;
    if (-5..15).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        let s = format!("{v:.decimals$}");
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        format!("{v:.11e}")
    }
}

fn writer(dir: &Path, name: &str) -> anyhow::Result<(csv::Writer<fs::File>, PathBuf)> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    let w = csv::Writer::from_path(&path).with_context(|| format!("opening {}", path.display()))?;
    Ok((w, path))
}

pub fn write_index_table(dir: &Path, table: &IndexTable) -> anyhow::Result<PathBuf> {
    let (mut w, path) = writer(dir, "indices.csv")?;
    w.write_record(["server", "x", "index"])?;
    for s in 0..table.num_servers() {
        for (x, v) in table.entries(s).iter().enumerate() {
            w.write_record([s.to_string(), x.to_string(), format!("{v:?}")])?;
        }
    }
    w.flush()?;
    Ok(path)
}

pub fn read_index_table(path: &Path) -> anyhow::Result<IndexTable> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for rec in r.deserialize() {
        let (s, x, v): (usize, usize, f64) = rec?;
        if s == rows.len() {
            rows.push(Vec::new());
        }
        if s + 1 != rows.len() || x != rows[s].len() {
            bail!("{}: rows must be ordered by server then state", path.display());
        }
        rows[s].push(v);
    }
    Ok(IndexTable::from_rows(rows)?)
}

fn report_header(servers: usize) -> Vec<String> {
    let mut h: Vec<String> = ["policy", "seed", "horizon", "burn_in", "avg_cost"].map(String::from).into();
    h.extend((1..=servers).map(|i| format!("mean_len_{i}")));
    h.push("drops".into());
    h
}

fn report_record(r: &SimReport) -> Vec<String> {
    let mut rec = vec![r.policy.clone(), r.seed.to_string(), r.horizon.to_string(), r.burn_in.to_string(), sig12(r.avg_cost)];
    rec.extend(r.per_server_mean_length.iter().map(|m| sig12(*m)));
    rec.push(r.drop_count.to_string());
    rec
}

pub fn write_reports(dir: &Path, name: &str, reports: &[SimReport]) -> anyhow::Result<PathBuf> {
    let servers = reports.first().map_or(0, |r| r.per_server_mean_length.len());
    let (mut w, path) = writer(dir, name)?;
    w.write_record(report_header(servers))?;
    for r in reports {
        w.write_record(report_record(r))?;
    }
    w.flush()?;
    Ok(path)
}

pub fn write_cost_series(dir: &Path, name: &str, reports: &[SimReport]) -> anyhow::Result<PathBuf> {
    let (mut w, path) = writer(dir, name)?;
    w.write_record(["policy", "seed", "slots", "running_avg_cost"])?;
    for r in reports {
        for (slots, c) in &r.cost_series {
            w.write_record([r.policy.clone(), r.seed.to_string(), slots.to_string(), sig12(*c)])?;
        }
    }
    w.flush()?;
    Ok(path)
}

pub fn write_comparison(dir: &Path, table: &ComparisonTable) -> anyhow::Result<Vec<PathBuf>> {
    let runs = write_reports(dir, "comparison.csv", &table.reports)?;
    let (mut w, summary) = writer(dir, "comparison_summary.csv")?;
    w.write_record(["policy", "runs", "mean_avg_cost", "half_width_95"])?;
    for s in &table.summaries {
        w.write_record([s.policy.clone(), s.runs.to_string(), sig12(s.mean), sig12(s.half_width)])?;
    }
    w.flush()?;
    let series = write_cost_series(dir, "comparison_cost_series.csv", &table.reports)?;
    Ok(vec![runs, summary, series])
}

pub fn write_exact(dir: &Path, sol: &JointSolution) -> anyhow::Result<Vec<PathBuf>> {
    let servers = sol.space.dims();
    let (mut w, policy) = writer(dir, "exact_policy.csv")?;
    let mut header: Vec<String> = (1..=servers).map(|i| format!("x_{i}")).collect();
    header.extend(["server".into(), "relative_value".into()]);
    w.write_record(&header)?;
    for idx in 0..sol.space.len() {
        let mut rec: Vec<String> = sol.space.decode(idx).iter().map(|x| x.to_string()).collect();
        rec.push(sol.policy[idx].to_string());
        rec.push(sig12(sol.values[idx]));
        w.write_record(&rec)?;
    }
    w.flush()?;
    let (mut w, beta) = writer(dir, "exact_beta.csv")?;
    w.write_record(["beta", "states", "sweeps"])?;
    w.write_record([sig12(sol.beta), sol.space.len().to_string(), sol.sweeps.to_string()])?;
    w.flush()?;
    Ok(vec![policy, beta])
}

pub fn write_checks(dir: &Path, checks: &[Check]) -> anyhow::Result<PathBuf> {
    let (mut w, path) = writer(dir, "properties.csv")?;
    w.write_record(["check", "passed", "detail"])?;
    for c in checks {
        w.write_record([c.name.as_str(), if c.passed { "true" } else { "false" }, c.detail.as_str()])?;
    }
    w.flush()?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(sig12(0.0), "0");
        assert_eq!(sig12(21.818181818181817), "21.8181818182");
        assert_eq!(sig12(3.0), "3");
        assert_eq!(sig12(-0.000123456789012345), "-0.000123456789012");
        assert_eq!(sig12(1234567.0), "1234567");
        assert_eq!(sig12(6.02e23), "6.02000000000e23");
    }

    #[test]
    fn index_table_round_trips_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let table = IndexTable::from_rows(vec![vec![0.1 + 0.2, 1.0 / 3.0, 1e-300], vec![21.818181818181817, 5.0, 7.25]]).unwrap();
        let path = write_index_table(dir.path(), &table).unwrap();
        assert_eq!(read_index_table(&path).unwrap(), table);
    }
}

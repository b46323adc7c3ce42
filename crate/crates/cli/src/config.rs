//! TOML configuration and command-line overrides.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::Deserialize;

use ps_whittle::whittle::default_truncation;
use ps_whittle::{IndexIterationConfig, ServerParams, SystemConfig};

pub const DEFAULT_X_MAX: usize = 40;
pub const DEFAULT_HORIZON: u64 = 1_000_000;
pub const DEFAULT_BURN_IN: u64 = 10_000;
pub const DEFAULT_SEEDS: u64 = 10;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub arrival_p: f64,
    pub buffer: usize,
    pub servers: Vec<ServerParams>,
    #[serde(default)]
    pub strict_stability: bool,
    #[serde(default)]
    pub whittle: WhittleSection,
    #[serde(default)]
    pub sim: SimSection,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WhittleSection {
    pub gamma: Option<f64>,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub x_max: Option<usize>,
    pub truncation_n: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    pub horizon: Option<u64>,
    pub burn_in: Option<u64>,
    /// Number of seeds; runs use seeds `1..=seeds`.
    pub seeds: Option<u64>,
}

/// Values given on the command line; each wins over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seeds: Option<u64>,
    pub horizon: Option<u64>,
    pub burn_in: Option<u64>,
    pub x_max: Option<usize>,
    pub gamma: Option<f64>,
    pub tol: Option<f64>,
    pub truncation_n: Option<usize>,
}

/// Everything a subcommand needs, after merging file and flags.
#[derive(Debug, Clone)]
pub struct RunManifest {
    pub config_path: PathBuf,
    pub out_dir: PathBuf,
    pub system: SystemConfig,
    pub index: IndexIterationConfig,
    pub x_max: usize,
    pub truncation_n: usize,
    pub horizon: u64,
    pub burn_in: u64,
    pub seeds: Vec<u64>,
}

pub fn load(path: &Path) -> anyhow::Result<FileConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

impl RunManifest {
    pub fn new(config_path: &Path, out_dir: &Path, file: FileConfig, o: &Overrides) -> anyhow::Result<Self> {
        let mut system = SystemConfig::new(file.arrival_p, file.servers, file.buffer);
        system.strict_stability_mode = file.strict_stability;

        let defaults = IndexIterationConfig::default();
        let index = IndexIterationConfig {
            gamma: o.gamma.or(file.whittle.gamma).unwrap_or(defaults.gamma),
            tol: o.tol.or(file.whittle.tol).unwrap_or(defaults.tol),
            max_iter: file.whittle.max_iter.unwrap_or(defaults.max_iter),
            lambda0: defaults.lambda0,
        };
        let x_max = o.x_max.or(file.whittle.x_max).unwrap_or(DEFAULT_X_MAX);
        let truncation_n =
            o.truncation_n.or(file.whittle.truncation_n).unwrap_or_else(|| default_truncation(x_max, system.buffer));
        let horizon = o.horizon.or(file.sim.horizon).unwrap_or(DEFAULT_HORIZON);
        let burn_in = o.burn_in.or(file.sim.burn_in).unwrap_or(DEFAULT_BURN_IN);
        if horizon <= burn_in {
            bail!("horizon {horizon} must exceed burn-in {burn_in}");
        }
        let seeds = (1..=o.seeds.or(file.sim.seeds).unwrap_or(DEFAULT_SEEDS)).collect();
        Ok(Self {
            config_path: config_path.to_path_buf(),
            out_dir: out_dir.to_path_buf(),
            system,
            index,
            x_max,
            truncation_n,
            horizon,
            burn_in,
            seeds,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIG3: &str = r#"
arrival_p = 0.4
buffer = 100
servers = [
  { q = 0.55, cost_c = 30.0 },
  { q = 0.50, cost_c = 29.0 },
  { q = 0.45, cost_c = 28.0 },
]

[whittle]
x_max = 20

[sim]
seeds = 4
"#;

    #[test]
    fn file_values_and_flags_merge() {
        let file: FileConfig = toml::from_str(FIG3).unwrap();
        let o = Overrides { x_max: Some(10), horizon: Some(50_000), ..Default::default() };
        let m = RunManifest::new(Path::new("c.toml"), Path::new("out"), file, &o).unwrap();
        assert_eq!(m.system.num_servers(), 3);
        assert_eq!(m.x_max, 10);
        assert_eq!(m.truncation_n, 100);
        assert_eq!(m.horizon, 50_000);
        assert_eq!(m.burn_in, DEFAULT_BURN_IN);
        assert_eq!(m.seeds, vec![1, 2, 3, 4]);
        assert_eq!(m.index.gamma, 0.1);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<FileConfig>("arrival_p = 0.4\nbuffer = 3\nservers = []\nbogus = 1\n").is_err());
    }

    #[test]
    fn horizon_must_exceed_burn_in() {
        let file: FileConfig = toml::from_str(FIG3).unwrap();
        let o = Overrides { horizon: Some(100), burn_in: Some(100), ..Default::default() };
        assert!(RunManifest::new(Path::new("c"), Path::new("o"), file, &o).is_err());
    }
}

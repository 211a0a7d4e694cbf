//! Run configuration: a JSON document mirroring [`RunConfig`], overridden by
//! command-line flags.

use std::path::{Path, PathBuf};

use adr_planner::data::{self, CloudRanges};
use adr_planner::{AgentConfig, DebrisCatalog, MissionConfig};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CatalogSource {
    Csv(PathBuf),
    Tle(PathBuf),
    Generate {
        n: usize,
        seed: u64,
        #[serde(default)]
        ranges: CloudRanges,
    },
}

impl Default for CatalogSource {
    fn default() -> Self {
        CatalogSource::Generate {
            n: 10,
            seed: 0,
            ranges: CloudRanges::default(),
        }
    }
}

impl CatalogSource {
    pub fn load(&self) -> Result<DebrisCatalog, CliError> {
        let catalog = match self {
            CatalogSource::Csv(path) => data::load_csv(path),
            CatalogSource::Tle(path) => data::load_tle(path),
            CatalogSource::Generate { n, seed, ranges } => data::generate_cloud(*n, *seed, ranges),
        };
        catalog.map_err(|e| CliError::Config(format!("catalog: {e}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub mission: MissionConfig,
    pub agent: AgentConfig,
    pub catalog: CatalogSource,
    /// Keep only the first `n` catalog entries. The mission size always
    /// follows the effective catalog length.
    pub n_debris: Option<usize>,
    pub output_dir: PathBuf,
    pub seeds: Vec<u64>,
    /// Greedy episodes per seed for evaluation.
    pub eval_episodes: usize,
    /// Episodes per point of the smoothed learning curve.
    pub curve_window: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            mission: MissionConfig::default(),
            agent: AgentConfig::default(),
            catalog: CatalogSource::default(),
            n_debris: None,
            output_dir: PathBuf::from("runs"),
            seeds: vec![0],
            eval_episodes: 100,
            curve_window: 100,
        }
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// Loads the catalog, applies `n_debris` and syncs the mission size.
    pub fn resolve_catalog(&mut self) -> Result<DebrisCatalog, CliError> {
        let mut catalog = self.catalog.load()?;
        if let Some(n) = self.n_debris {
            if n == 0 || n > catalog.len() {
                return Err(CliError::Config(format!(
                    "n_debris = {n} but the catalog holds {} debris",
                    catalog.len()
                )));
            }
            catalog = catalog.truncated(n);
        }
        if catalog.is_empty() {
            return Err(CliError::Config("catalog is empty".into()));
        }
        self.mission.n_debris = catalog.len();
        Ok(catalog)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.seeds.is_empty() {
            return Err(CliError::Config("seed list must not be empty".into()));
        }
        if self.curve_window == 0 {
            return Err(CliError::Config("curve_window must be positive".into()));
        }
        self.mission
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        self.agent
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn write_effective(&self, dir: &Path) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(self).expect("config serializes");
        std::fs::write(dir.join("effective_config.json"), text + "\n")
            .map_err(|e| CliError::io(dir, e))
    }
}

/// Worker cap from `ADR_PLANNER_THREADS`, defaulting to the available cores.
pub fn worker_count() -> Result<usize, CliError> {
    match std::env::var("ADR_PLANNER_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(CliError::Config(format!(
                "ADR_PLANNER_THREADS must be a positive integer, got `{v}`"
            ))),
        },
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

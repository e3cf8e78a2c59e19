//! Experiment configuration: the JSON file read by the command-line runner.
//!
//! Every block has defaults, so `{}` is a complete configuration describing
//! the reference scenario (275 GHz, Bob at 20 m with 55 dBi, Eve at 40 m with
//! 50 dBi, R0 = 3, Rs = 2, 30–70 dB).

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::optimizer::SearchGrid;
use crate::outage::HarqConfig;
use crate::thz_channel::{pointing_fading_params, AbsorptionConstants, Environment, LinkConfig, PointingFadingParams};

pub const WORKERS_ENV: &str = "HARQ_THZ_WORKERS";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HarqBlock {
    /// Maximum round counts M to evaluate, one curve each.
    pub rounds: Vec<usize>,
    pub main_rate: f64,
    pub secrecy_rate: f64,
}

impl Default for HarqBlock {
    fn default() -> Self {
        HarqBlock { rounds: vec![2, 4], main_rate: 3.0, secrecy_rate: 2.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SnrSweep {
    pub start_db: f64,
    pub stop_db: f64,
    pub step_db: f64,
}

impl Default for SnrSweep {
    fn default() -> Self {
        SnrSweep { start_db: 30.0, stop_db: 70.0, step_db: 5.0 }
    }
}

impl SnrSweep {
    /// Sweep points, inclusive of `stop_db` up to rounding.
    pub fn points(&self) -> Vec<f64> {
        let n = ((self.stop_db - self.start_db) / self.step_db + 1e-9).floor() as usize;
        (0..=n).map(|i| self.start_db + i as f64 * self.step_db).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MonteCarloBlock {
    /// Episodes per sweep point; 0 disables the simulated columns.
    pub episodes: u64,
    pub seed: u64,
    /// Worker cap; `None` uses every core.
    pub workers: Option<usize>,
    /// Write a per-episode CSV for each simulated point.
    pub episode_log: bool,
}

impl Default for MonteCarloBlock {
    fn default() -> Self {
        MonteCarloBlock { episodes: 1_000_000, seed: 20_200_701, workers: None, episode_log: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: String,
    pub environment: Environment,
    pub absorption: AbsorptionConstants,
    pub bob: LinkConfig,
    pub eve: LinkConfig,
    pub harq: HarqBlock,
    pub snr: SnrSweep,
    pub monte_carlo: MonteCarloBlock,
    pub search: SearchGrid,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            scenario: "reference".into(),
            environment: Environment::default(),
            absorption: AbsorptionConstants::default(),
            bob: LinkConfig::bob_default(),
            eve: LinkConfig::eve_default(),
            harq: HarqBlock::default(),
            snr: SnrSweep::default(),
            monte_carlo: MonteCarloBlock::default(),
            search: SearchGrid::default(),
            output_dir: PathBuf::from("out"),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.environment.validate()?;
        self.bob.validate()?;
        self.eve.validate()?;
        self.search.validate()?;
        let h = &self.harq;
        if h.rounds.is_empty() || h.rounds.contains(&0) {
            return Err(Error::config("harq.rounds must list at least one positive M"));
        }
        if !(h.secrecy_rate > 0.0 && h.secrecy_rate < h.main_rate) {
            return Err(Error::config(format!("need 0 < Rs < R0, got R0={}, Rs={}", h.main_rate, h.secrecy_rate)));
        }
        let s = &self.snr;
        if ![s.start_db, s.stop_db, s.step_db].iter().all(|v| v.is_finite()) || !(s.step_db > 0.0) || s.stop_db < s.start_db {
            return Err(Error::config(format!("bad SNR sweep {s:?}")));
        }
        if s.points().len() > 10_000 {
            return Err(Error::config("SNR sweep has more than 10000 points"));
        }
        if self.monte_carlo.workers == Some(0) {
            return Err(Error::config("monte_carlo.workers must be positive"));
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON form (defaults filled in). The output
    /// directory and the worker cap do not affect results and are left out.
    pub fn hash(&self) -> String {
        let mut key = self.clone();
        key.output_dir = PathBuf::new();
        key.monte_carlo.workers = None;
        let canonical = serde_json::to_string(&key).expect("config serializes");
        Sha256::digest(canonical.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Fading parameters (Bob, Eve) with path gains from the link geometry.
    pub fn link_params(&self) -> Result<(PointingFadingParams, PointingFadingParams)> {
        Ok((
            pointing_fading_params(&self.bob, &self.environment, &self.absorption)?,
            pointing_fading_params(&self.eve, &self.environment, &self.absorption)?,
        ))
    }

    /// Protocol configuration at common per-round SNR `snr_db`.
    pub fn harq_config(&self, max_rounds: usize, snr_db: f64) -> Result<HarqConfig> {
        let (bob, eve) = self.link_params()?;
        Ok(HarqConfig::uniform(max_rounds, self.harq.main_rate, self.harq.secrecy_rate, db_to_linear(snr_db), bob, eve))
    }

    /// Worker cap from the config, tightened by `HARQ_THZ_WORKERS` when set.
    pub fn effective_workers(&self) -> Result<Option<usize>> {
        let env = match std::env::var(WORKERS_ENV) {
            Ok(v) => Some(
                v.trim()
                    .parse::<usize>()
                    .ok()
                    .filter(|&n| n > 0)
                    .ok_or_else(|| Error::config(format!("{WORKERS_ENV} must be a positive integer, got {v:?}")))?,
            ),
            Err(_) => None,
        };
        Ok(match (self.monte_carlo.workers, env) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        })
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

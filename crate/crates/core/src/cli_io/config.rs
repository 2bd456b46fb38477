//! On-disk run configuration: strict schema, defaults, validation with
//! key-path error messages, canonical serialization, and config hashing.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::coupled_sim::{ProjectionMode, SimConfig};
use crate::diagnostics::DiagnosticsSettings;
use crate::error::{Error, Result};
use crate::game_env::{make_matrix_game, Game, GridworldGame, MatrixGame};
use crate::learners::LearnerSpec;

pub const SCHEMA_VERSION: u32 = 1;

/// Game selection; `payoffs` supplies a custom 2x2 table as eight reals
/// [r0(0,0), r0(0,1), r0(1,0), r0(1,1), r1(0,0), r1(0,1), r1(1,0), r1(1,1)].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameSpec {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payoffs: Option<[f64; 8]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zero_sum: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gridworld: Option<GridworldGame>,
}

impl GameSpec {
    pub fn named(name: &str) -> Self {
        GameSpec {
            name: name.to_string(),
            payoffs: None,
            zero_sum: None,
            gridworld: None,
        }
    }

    pub fn build(&self) -> Result<Game> {
        match self.name.as_str() {
            "custom" => {
                let p = self.payoffs.ok_or_else(|| {
                    Error::config("game.payoffs", "custom games require eight payoff entries")
                })?;
                if self.gridworld.is_some() {
                    return Err(Error::config(
                        "game.gridworld",
                        "gridworld parameters are not valid for a custom matrix game",
                    ));
                }
                let payoffs = [
                    [[p[0], p[1]], [p[2], p[3]]],
                    [[p[4], p[5]], [p[6], p[7]]],
                ];
                Ok(Game::Matrix(MatrixGame::custom(
                    "custom",
                    payoffs,
                    self.zero_sum.unwrap_or(false),
                )?))
            }
            "gridworld" => {
                if self.payoffs.is_some() || self.zero_sum.is_some() {
                    return Err(Error::config(
                        "game.payoffs",
                        "matrix-game fields are not valid for the gridworld",
                    ));
                }
                let g = self.gridworld.clone().unwrap_or_default();
                g.validate()?;
                Ok(Game::Gridworld(g))
            }
            name => {
                if self.payoffs.is_some() || self.zero_sum.is_some() || self.gridworld.is_some() {
                    return Err(Error::config(
                        "game",
                        "payoffs/zero_sum/gridworld overrides require name = custom or gridworld",
                    ));
                }
                Ok(Game::Matrix(make_matrix_game(name)?))
            }
        }
    }
}

fn default_schema_version() -> u32 {
    SCHEMA_VERSION
}
fn default_n_steps() -> u64 {
    50_000
}
fn default_n_burn() -> u64 {
    10_000
}
fn default_n_runs() -> usize {
    16
}
fn default_record_stride() -> u64 {
    10
}

/// The on-disk JSON run configuration. Unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_schema_version")]
    pub schema_version: u32,
    pub game: GameSpec,
    pub agents: Vec<LearnerSpec>,
    #[serde(default = "default_n_steps")]
    pub n_steps: u64,
    #[serde(default = "default_n_burn")]
    pub n_burn: u64,
    #[serde(default = "default_n_runs")]
    pub n_runs: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_record_stride")]
    pub record_stride: u64,
    #[serde(default)]
    pub projection_mode: ProjectionMode,
    #[serde(default)]
    pub diagnostics: DiagnosticsSettings,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::config(
                "schema_version",
                format!("expected {SCHEMA_VERSION}, got {}", self.schema_version),
            ));
        }
        if self.n_steps == 0 {
            return Err(Error::config("n_steps", "must be at least 1"));
        }
        if self.n_burn >= self.n_steps {
            return Err(Error::config("n_burn", "must be smaller than n_steps"));
        }
        if self.n_runs == 0 {
            return Err(Error::config("n_runs", "must be at least 1"));
        }
        if self.record_stride == 0 || self.record_stride > self.n_steps {
            return Err(Error::config(
                "record_stride",
                "must lie in [1, n_steps]",
            ));
        }
        if self.agents.len() != 2 {
            return Err(Error::config("agents", "exactly two agents are required"));
        }
        for (i, a) in self.agents.iter().enumerate() {
            a.validate(&format!("agents[{i}]"))?;
        }
        self.diagnostics.validate()?;
        self.game.build()?;
        Ok(())
    }

    /// Canonical pretty JSON: struct field order, two-space indent.
    pub fn canonical_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }

    /// FNV-1a hash of the canonical JSON, as 16 hex digits.
    pub fn hash(&self) -> String {
        fnv1a64(self.canonical_json().as_bytes())
    }

    pub fn to_sim_config(&self) -> Result<SimConfig> {
        self.validate()?;
        Ok(SimConfig {
            game: self.game.build()?,
            agents: self.agents.clone(),
            n_steps: self.n_steps,
            n_burn: self.n_burn,
            n_runs: self.n_runs,
            seed: self.seed,
            record_stride: self.record_stride,
            projection_mode: self.projection_mode,
            config_hash: self.hash(),
        })
    }

    pub fn from_json(text: &str, origin: &str) -> Result<Self> {
        let config: RunConfig = serde_json::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_string(),
            message: e.to_string(),
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_value(value: serde_json::Value, origin: &str) -> Result<Self> {
        let config: RunConfig = serde_json::from_value(value).map_err(|e| Error::Parse {
            path: origin.to_string(),
            message: e.to_string(),
        })?;
        config.validate()?;
        Ok(config)
    }
}

pub fn fnv1a64(bytes: &[u8]) -> String {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    format!("{hash:016x}")
}

/// Load and validate a run config from disk, filling defaults.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    RunConfig::from_json(&text, &path.display().to_string())
}

/// Persist a config in canonical form (atomic write).
pub fn save_config(config: &RunConfig, path: &Path) -> Result<()> {
    super::io::atomic_write(path, config.canonical_json().as_bytes())
}

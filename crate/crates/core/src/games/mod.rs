//! The two games and the glue that lets the harness treat them uniformly.

pub mod batkill;
pub mod jungle;
pub mod scripted;

use serde::{Deserialize, Serialize};

use crate::env::{EnvError, Environment, Game, GameEvent};

pub use batkill::{BatkillConfig, BatkillEnv, BatkillMetrics};
pub use jungle::{JungleConfig, JungleEnv, JungleMetrics, JungleRewardConfig};

/// A named game configuration: the tunable parameters of one version.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "game", rename_all = "lowercase")]
pub enum VersionSpec {
    Batkill {
        version: u32,
        config: BatkillConfig,
    },
    Jungle {
        version: u32,
        config: JungleConfig,
        #[serde(default)]
        rewards: JungleRewardConfig,
    },
}

impl VersionSpec {
    /// One of the shipped versions.
    pub fn shipped(game: Game, version: u32) -> Result<Self, EnvError> {
        Ok(match game {
            Game::Batkill => VersionSpec::Batkill {
                version,
                config: batkill::batkill_version(version)?,
            },
            Game::Jungle => VersionSpec::Jungle {
                version,
                config: jungle::jungle_version(version)?,
                rewards: JungleRewardConfig::default(),
            },
        })
    }

    pub fn game(&self) -> Game {
        match self {
            VersionSpec::Batkill { .. } => Game::Batkill,
            VersionSpec::Jungle { .. } => Game::Jungle,
        }
    }

    pub fn version(&self) -> u32 {
        match *self {
            VersionSpec::Batkill { version, .. } | VersionSpec::Jungle { version, .. } => version,
        }
    }

    pub fn make_env(&self) -> Result<Box<dyn Environment>, EnvError> {
        Ok(match *self {
            VersionSpec::Batkill { config, .. } => Box::new(BatkillEnv::new(config)?),
            VersionSpec::Jungle {
                config, rewards, ..
            } => Box::new(JungleEnv::with_rewards(config, rewards)?),
        })
    }

    pub fn metrics(&self) -> SessionMetrics {
        SessionMetrics::new(self.game())
    }

    pub fn num_versions(game: Game) -> u32 {
        match game {
            Game::Batkill => 5,
            Game::Jungle => 3,
        }
    }
}

/// Session-level balance metrics, accumulated from the event stream so that
/// they survive the automatic resets inside a timed session.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "game", rename_all = "lowercase")]
pub enum SessionMetrics {
    Batkill(BatkillMetrics),
    Jungle(JungleMetrics),
}

impl SessionMetrics {
    pub fn new(game: Game) -> Self {
        match game {
            Game::Batkill => SessionMetrics::Batkill(BatkillMetrics::default()),
            Game::Jungle => SessionMetrics::Jungle(JungleMetrics::default()),
        }
    }

    pub fn record(&mut self, events: &[GameEvent]) {
        match self {
            SessionMetrics::Batkill(m) => m.record(events),
            SessionMetrics::Jungle(m) => m.record(events),
        }
    }

    /// The game's balance score for these metrics.
    pub fn score(&self) -> i64 {
        match self {
            SessionMetrics::Batkill(m) => batkill::batkill_score(m),
            SessionMetrics::Jungle(m) => jungle::jungle_score(m),
        }
    }
}

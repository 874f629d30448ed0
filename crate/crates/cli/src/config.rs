//! The harness configuration file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use playbalance_core::analyzer::Thresholds;
use playbalance_core::env::Game;
use playbalance_core::eval::{EvaluationPlan, PlayerColumn};
use playbalance_core::games::VersionSpec;
use playbalance_core::rl::{ActMode, Model, Skill, TrainConfig};
use playbalance_core::session::{DEFAULT_RUNS, DEFAULT_TIME_S};

pub const CONFIG_SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_PORT: u16 = 8765;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HarnessConfig {
    pub schema_version: u32,
    pub game: Game,
    /// Versions to train and evaluate; empty means every shipped version.
    #[serde(default)]
    pub versions: Vec<u32>,
    #[serde(default)]
    pub training: TrainingSection,
    #[serde(default)]
    pub testing: TestingSection,
    #[serde(default)]
    pub thresholds: Thresholds,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default = "default_port")]
    pub server_port: u16,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("runs")
}

fn default_port() -> u16 {
    DEFAULT_PORT
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingSection {
    #[serde(default)]
    pub seed: u64,
    /// Use the 100K / 1M budgets instead of the desk-scale 20K / 200K.
    #[serde(default)]
    pub paper_scale: bool,
    /// Keyed by `<model>-<skill>`, e.g. `ppo-novice`.
    #[serde(default)]
    pub overrides: BTreeMap<String, TrainOverrides>,
}

/// Any subset of training hyperparameters.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainOverrides {
    pub total_steps: Option<u64>,
    pub gamma: Option<f64>,
    pub gae_lambda: Option<f64>,
    pub clip_epsilon: Option<f64>,
    pub rollout_length: Option<usize>,
    pub epochs: Option<usize>,
    pub minibatch_size: Option<usize>,
    pub entropy_coef: Option<f64>,
    pub value_coef: Option<f64>,
    pub learning_rate: Option<f64>,
    pub max_grad_norm: Option<f64>,
    pub parallel_envs: Option<usize>,
    pub action_repeat: Option<u32>,
    pub max_episode_ticks: Option<u64>,
}

impl TrainOverrides {
    pub fn apply(&self, c: &mut TrainConfig) {
        macro_rules! set {
            ($($field:ident),*) => {
                $(if let Some(v) = self.$field { c.$field = v; })*
            };
        }
        set!(
            total_steps,
            gamma,
            gae_lambda,
            clip_epsilon,
            rollout_length,
            epochs,
            minibatch_size,
            entropy_coef,
            value_coef,
            learning_rate,
            max_grad_norm,
            parallel_envs,
            action_repeat,
            max_episode_ticks
        );
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestingSection {
    #[serde(default = "default_time_s")]
    pub time_s: u32,
    #[serde(default = "default_runs")]
    pub runs: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "all_columns")]
    pub columns: Vec<PlayerColumn>,
    #[serde(default)]
    pub act_mode: ActMode,
}

fn default_time_s() -> u32 {
    DEFAULT_TIME_S
}

fn default_runs() -> u32 {
    DEFAULT_RUNS
}

fn all_columns() -> Vec<PlayerColumn> {
    PlayerColumn::ALL.to_vec()
}

impl Default for TestingSection {
    fn default() -> Self {
        Self {
            time_s: DEFAULT_TIME_S,
            runs: DEFAULT_RUNS,
            seed: 0,
            columns: all_columns(),
            act_mode: ActMode::Sample,
        }
    }
}

impl HarnessConfig {
    pub fn for_game(game: Game) -> Self {
        Self {
            schema_version: CONFIG_SCHEMA_VERSION,
            game,
            versions: Vec::new(),
            training: TrainingSection::default(),
            testing: TestingSection::default(),
            thresholds: Thresholds::default(),
            output_dir: default_output_dir(),
            server_port: DEFAULT_PORT,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let config: Self = serde_json::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != CONFIG_SCHEMA_VERSION {
            bail!(
                "config schema_version {} is not supported (expected {CONFIG_SCHEMA_VERSION})",
                self.schema_version
            );
        }
        for &v in &self.versions {
            VersionSpec::shipped(self.game, v)?;
        }
        for key in self.training.overrides.keys() {
            parse_override_key(key)?;
        }
        if self.testing.time_s == 0 || self.testing.runs == 0 {
            bail!("testing.time_s and testing.runs must be positive");
        }
        self.thresholds.validate()?;
        Ok(())
    }

    /// Creates the output directory and checks that it takes files.
    pub fn prepare_output(&self) -> Result<()> {
        std::fs::create_dir_all(&self.output_dir)
            .with_context(|| format!("creating {}", self.output_dir.display()))?;
        let probe = self.output_dir.join(".write-test");
        std::fs::write(&probe, b"")
            .with_context(|| format!("{} is not writable", self.output_dir.display()))?;
        std::fs::remove_file(probe)?;
        Ok(())
    }

    pub fn versions(&self) -> Vec<u32> {
        if self.versions.is_empty() {
            (1..=VersionSpec::num_versions(self.game)).collect()
        } else {
            self.versions.clone()
        }
    }

    /// Training configuration for one (model, skill) pair.
    pub fn train_config(&self, game: Game, model: Model, skill: Skill, seed: u64) -> Result<TrainConfig> {
        let budget = skill.budget(self.training.paper_scale);
        let mut config = TrainConfig::for_game(game, model, budget, seed);
        if let Some(o) = self.training.overrides.get(&override_key(model, skill)) {
            o.apply(&mut config);
        }
        config.validate()?;
        let labelled = Skill::for_steps(config.total_steps);
        if labelled != skill {
            bail!(
                "{} steps would be labelled {}, not {}",
                config.total_steps,
                labelled.name(),
                skill.name()
            );
        }
        Ok(config)
    }

    pub fn evaluation_plan(&self) -> EvaluationPlan {
        EvaluationPlan {
            game: self.game,
            versions: self.versions(),
            columns: self.testing.columns.clone(),
            time_s: self.testing.time_s,
            runs: self.testing.runs,
            seed: self.testing.seed,
            act_mode: self.testing.act_mode,
        }
    }

    pub fn checkpoint_dir(&self) -> PathBuf {
        self.output_dir.join("checkpoints")
    }

    pub fn checkpoint_path(&self, game: Game, version: u32, model: Model, skill: Skill) -> PathBuf {
        self.checkpoint_dir().join(format!(
            "{game}-v{version}-{}-{}.json",
            model.name(),
            skill.name()
        ))
    }

    pub fn human_dir(&self) -> PathBuf {
        self.output_dir.join("humans")
    }

    pub fn evaluation_dir(&self) -> PathBuf {
        self.output_dir.join("evaluation")
    }
}

pub fn override_key(model: Model, skill: Skill) -> String {
    format!("{}-{}", model.name(), skill.name())
}

fn parse_override_key(key: &str) -> Result<(Model, Skill)> {
    let (m, s) = key
        .split_once('-')
        .with_context(|| format!("override key {key:?} is not <model>-<skill>"))?;
    Ok((
        m.parse().map_err(anyhow::Error::msg)?,
        s.parse().map_err(anyhow::Error::msg)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_fills_defaults() {
        let c: HarnessConfig =
            serde_json::from_str(r#"{"schema_version":1,"game":"jungle"}"#).unwrap();
        c.validate().unwrap();
        assert_eq!(c.versions(), vec![1, 2, 3]);
        assert_eq!(c.testing.time_s, 180);
        assert_eq!(c.testing.runs, 2);
        assert_eq!(c.testing.columns.len(), 7);
        assert_eq!(c.thresholds, Thresholds::default());
    }

    #[test]
    fn invalid_configs_are_rejected() {
        for text in [
            r#"{"schema_version":2,"game":"jungle"}"#,
            r#"{"schema_version":1,"game":"jungle","versions":[4]}"#,
            r#"{"schema_version":1,"game":"jungle","training":{"overrides":{"dqn-novice":{}}}}"#,
            r#"{"schema_version":1,"game":"jungle","thresholds":{"spike":0.1,"chance":2.0}}"#,
        ] {
            let c: HarnessConfig = serde_json::from_str(text).unwrap();
            assert!(c.validate().is_err(), "{text}");
        }
        assert!(serde_json::from_str::<HarnessConfig>(
            r#"{"schema_version":1,"game":"jungle","colour":"red"}"#
        )
        .is_err());
    }

    #[test]
    fn overrides_apply_and_keep_the_skill_label() {
        let mut c = HarnessConfig::for_game(Game::Batkill);
        c.training.overrides.insert(
            "ppo-novice".into(),
            TrainOverrides {
                total_steps: Some(5000),
                learning_rate: Some(1e-3),
                ..Default::default()
            },
        );
        let t = c.train_config(Game::Batkill, Model::Ppo, Skill::Novice, 0).unwrap();
        assert_eq!(t.total_steps, 5000);
        assert_eq!(t.learning_rate, 1e-3);
        c.training.overrides.insert(
            "ppo-novice".into(),
            TrainOverrides {
                total_steps: Some(500_000),
                ..Default::default()
            },
        );
        assert!(c.train_config(Game::Batkill, Model::Ppo, Skill::Novice, 0).is_err());
    }
}

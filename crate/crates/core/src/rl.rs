//! PPO and A2C trainers, the random baseline, and trained-agent policies.
//!
//! Skill is a training budget: an agent trained for fewer steps than
//! [`PROFESSIONAL_THRESHOLD`] is a novice, anything at or above it a
//! professional.
//!
//! Training collects `rollout_length` steps from each of `parallel_envs`
//! environments (stored env-major, so each environment's trajectory is one
//! contiguous slice), computes GAE advantages per environment, and then runs
//! the algorithm's update. Every source of randomness is a stream derived from
//! the config seed, and environments are stepped in a fixed order, so a
//! `(config, seed)` pair fully determines the resulting checkpoint.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{EnvError, Environment, Game, Observation};
use crate::games::VersionSpec;
use crate::nn::{
    self, AdamConfig, GradientSet, Mlp, MlpSizes, NetworkSnapshot, NnError, OptimizerState,
};
use crate::rng::{derive_indexed, derive_seed, Rng};

pub const CHECKPOINT_SCHEMA_VERSION: u32 = 1;
pub const NOVICE_STEPS: u64 = 20_000;
pub const PROFESSIONAL_STEPS: u64 = 200_000;
pub const PAPER_NOVICE_STEPS: u64 = 100_000;
pub const PAPER_PROFESSIONAL_STEPS: u64 = 1_000_000;
pub const JUNGLE_ACTION_REPEAT: u32 = 4;
/// Budgets at or above this are professional.
pub const PROFESSIONAL_THRESHOLD: u64 = PROFESSIONAL_STEPS;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("rollout is empty")]
    EmptyRollout,
    #[error("training diverged at update {update} ({steps} steps): {what} is not finite")]
    Diverged {
        update: u64,
        steps: u64,
        what: &'static str,
    },
    #[error("policy expects {expected} actions and observations of length {obs}, {game} has {got} actions and length {got_obs}")]
    ShapeMismatch {
        game: Game,
        expected: usize,
        obs: usize,
        got: usize,
        got_obs: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Ppo,
    A2c,
}

impl Model {
    pub fn name(self) -> &'static str {
        match self {
            Model::Ppo => "ppo",
            Model::A2c => "a2c",
        }
    }
}

impl std::str::FromStr for Model {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "ppo" => Ok(Model::Ppo),
            "a2c" => Ok(Model::A2c),
            _ => Err(format!("unknown model {s:?}; expected ppo or a2c")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Skill {
    Novice,
    Professional,
}

impl Skill {
    pub fn name(self) -> &'static str {
        match self {
            Skill::Novice => "novice",
            Skill::Professional => "professional",
        }
    }

    pub fn for_steps(total_steps: u64) -> Skill {
        if total_steps >= PROFESSIONAL_THRESHOLD {
            Skill::Professional
        } else {
            Skill::Novice
        }
    }

    pub fn budget(self, paper_scale: bool) -> u64 {
        match (self, paper_scale) {
            (Skill::Novice, false) => NOVICE_STEPS,
            (Skill::Professional, false) => PROFESSIONAL_STEPS,
            (Skill::Novice, true) => PAPER_NOVICE_STEPS,
            (Skill::Professional, true) => PAPER_PROFESSIONAL_STEPS,
        }
    }
}

impl std::str::FromStr for Skill {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "novice" => Ok(Skill::Novice),
            "professional" | "pro" => Ok(Skill::Professional),
            _ => Err(format!("unknown skill {s:?}; expected novice or professional")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub model: Model,
    pub total_steps: u64,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub clip_epsilon: f64,
    /// Steps collected from each environment per update.
    pub rollout_length: usize,
    pub epochs: usize,
    pub minibatch_size: usize,
    pub entropy_coef: f64,
    pub value_coef: f64,
    pub learning_rate: f64,
    pub max_grad_norm: f64,
    pub seed: u64,
    pub parallel_envs: usize,
    /// Training episodes longer than this are cut off and restarted, so an
    /// agent that never reaches a terminal still sees episode boundaries.
    /// Timed sessions are unaffected.
    /// Ticks each chosen action is held for. Steps count decisions.
    #[serde(default = "default_action_repeat")]
    pub action_repeat: u32,
    #[serde(default = "default_max_episode_ticks")]
    pub max_episode_ticks: u64,
}

fn default_action_repeat() -> u32 {
    1
}

fn default_max_episode_ticks() -> u64 {
    3600
}

impl TrainConfig {
    pub fn ppo(total_steps: u64, seed: u64) -> Self {
        Self {
            model: Model::Ppo,
            total_steps,
            gamma: 0.99,
            gae_lambda: 0.95,
            clip_epsilon: 0.2,
            rollout_length: 256,
            epochs: 10,
            minibatch_size: 64,
            entropy_coef: 0.01,
            value_coef: 0.5,
            learning_rate: 3e-4,
            max_grad_norm: 0.5,
            seed,
            parallel_envs: 8,
            max_episode_ticks: default_max_episode_ticks(),
            action_repeat: default_action_repeat(),
        }
    }

    pub fn a2c(total_steps: u64, seed: u64) -> Self {
        Self {
            model: Model::A2c,
            rollout_length: 5,
            epochs: 1,
            minibatch_size: 40,
            ..Self::ppo(total_steps, seed)
        }
    }

    pub fn defaults(model: Model, total_steps: u64, seed: u64) -> Self {
        match model {
            Model::Ppo => Self::ppo(total_steps, seed),
            Model::A2c => Self::a2c(total_steps, seed),
        }
    }

    /// Defaults plus the per-game action repeat: Jungle agents hold each
    /// decision for [`JUNGLE_ACTION_REPEAT`] ticks, Batkill agents act every
    /// tick.
    pub fn for_game(game: Game, model: Model, total_steps: u64, seed: u64) -> Self {
        Self {
            action_repeat: match game {
                Game::Batkill => 1,
                Game::Jungle => JUNGLE_ACTION_REPEAT,
            },
            ..Self::defaults(model, total_steps, seed)
        }
    }

    pub fn skill(&self) -> Skill {
        Skill::for_steps(self.total_steps)
    }

    pub fn steps_per_update(&self) -> u64 {
        (self.rollout_length * self.parallel_envs) as u64
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::InvalidConfig(m.to_string()));
        let unit = |x: f64| x > 0.0 && x <= 1.0;
        if !unit(self.gamma) || !unit(self.gae_lambda) {
            return bad("gamma and gae_lambda must lie in (0, 1]");
        }
        if !(self.clip_epsilon > 0.0) {
            return bad("clip_epsilon must be positive");
        }
        if self.total_steps == 0 {
            return bad("total_steps must be positive");
        }
        if self.rollout_length == 0 || self.parallel_envs == 0 {
            return bad("rollout_length and parallel_envs must be positive");
        }
        if self.model == Model::Ppo && (self.epochs == 0 || self.minibatch_size == 0) {
            return bad("PPO needs at least one epoch and a positive minibatch size");
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return bad("learning_rate must be positive");
        }
        if self.action_repeat == 0 {
            return bad("action_repeat must be positive");
        }
        if self.max_episode_ticks == 0 {
            return bad("max_episode_ticks must be positive");
        }
        if !(self.max_grad_norm > 0.0) {
            return bad("max_grad_norm must be positive");
        }
        Ok(())
    }
}

/// `δ_t = r_t + γ V_{t+1} (1 - done_t) - V_t`,
/// `A_t = δ_t + γ λ (1 - done_t) A_{t+1}`, `returns = A + V`.
///
/// `done_t` marks that the episode ended with step `t`; `bootstrap` is the
/// value of the state after the last step.
pub fn compute_gae(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    bootstrap: f64,
    gamma: f64,
    lambda: f64,
) -> (Vec<f64>, Vec<f64>) {
    assert_eq!(rewards.len(), values.len());
    assert_eq!(rewards.len(), dones.len());
    let n = rewards.len();
    let mut advantages = vec![0.0; n];
    let mut next_value = bootstrap;
    let mut next_advantage = 0.0;
    for t in (0..n).rev() {
        let live = if dones[t] { 0.0 } else { 1.0 };
        let delta = rewards[t] + gamma * next_value * live - values[t];
        next_advantage = delta + gamma * lambda * live * next_advantage;
        advantages[t] = next_advantage;
        next_value = values[t];
    }
    let returns = advantages.iter().zip(values).map(|(a, v)| a + v).collect();
    (advantages, returns)
}

/// One batch of experience. Per-step arrays are env-major:
/// index `env * steps_per_env + t`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Rollout {
    pub num_envs: usize,
    pub steps_per_env: usize,
    pub observations: Vec<Vec<f64>>,
    pub actions: Vec<usize>,
    pub log_probs: Vec<f64>,
    pub rewards: Vec<f64>,
    pub values: Vec<f64>,
    pub dones: Vec<bool>,
    /// Value of the state following each environment's last step.
    pub bootstrap: Vec<f64>,
}

impl Rollout {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    /// Per-environment GAE, concatenated in storage order.
    pub fn advantages(&self, gamma: f64, lambda: f64) -> (Vec<f64>, Vec<f64>) {
        let mut advantages = Vec::with_capacity(self.len());
        let mut returns = Vec::with_capacity(self.len());
        for env in 0..self.num_envs {
            let span = env * self.steps_per_env..(env + 1) * self.steps_per_env;
            let (a, r) = compute_gae(
                &self.rewards[span.clone()],
                &self.values[span.clone()],
                &self.dones[span],
                self.bootstrap[env],
                gamma,
                lambda,
            );
            advantages.extend(a);
            returns.extend(r);
        }
        (advantages, returns)
    }
}

/// Shifts and scales to mean 0 and (sample) standard deviation 1.
pub fn normalize_advantages(advantages: &mut [f64]) {
    let n = advantages.len();
    if n < 2 {
        return;
    }
    let mean = advantages.iter().sum::<f64>() / n as f64;
    let var = advantages.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let std = var.sqrt() + 1e-8;
    advantages.iter_mut().for_each(|a| *a = (*a - mean) / std);
}

/// The clipped surrogate for one sample: `min(r Â, clip(r, 1-ε, 1+ε) Â)`.
pub fn clipped_surrogate(ratio: f64, advantage: f64, epsilon: f64) -> f64 {
    let clipped = ratio.clamp(1.0 - epsilon, 1.0 + epsilon);
    (ratio * advantage).min(clipped * advantage)
}

/// How the policy term of the loss is formed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PolicyObjective {
    /// `-min(r Â, clip(r) Â)`; `epsilon = INFINITY` gives the unclipped ratio
    /// objective.
    Clipped { epsilon: f64 },
    /// `-log π(a|s) Â`.
    LogProb,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossSpec {
    pub objective: PolicyObjective,
    pub normalize_advantages: bool,
    pub value_coef: f64,
    pub entropy_coef: f64,
}

/// Averages over the samples of one gradient evaluation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
    /// Largest `|ratio - 1|` seen.
    pub max_ratio_deviation: f64,
}

impl LossStats {
    pub fn total(&self, spec: &LossSpec) -> f64 {
        self.policy_loss + spec.value_coef * self.value_loss - spec.entropy_coef * self.entropy
    }

    fn is_finite(&self) -> bool {
        self.policy_loss.is_finite() && self.value_loss.is_finite() && self.entropy.is_finite()
    }
}

/// Gradient of the mean loss over `batch` (indices into `rollout`).
pub fn loss_gradient(
    mlp: &Mlp,
    rollout: &Rollout,
    batch: &[usize],
    advantages: &[f64],
    returns: &[f64],
    spec: &LossSpec,
) -> Result<(GradientSet, LossStats), TrainError> {
    if batch.is_empty() {
        return Err(TrainError::EmptyRollout);
    }
    let mut adv: Vec<f64> = batch.iter().map(|&i| advantages[i]).collect();
    if spec.normalize_advantages {
        normalize_advantages(&mut adv);
    }
    let scale = 1.0 / batch.len() as f64;
    let mut grads = GradientSet::zeros_like(mlp);
    let mut stats = LossStats::default();
    let mut clipped = 0usize;
    let mut dlogits = vec![0.0; mlp.sizes().actions];
    for (&i, &a_hat) in batch.iter().zip(&adv) {
        let cache = mlp.forward(&rollout.observations[i])?;
        let action = rollout.actions[i];
        let log_p = nn::log_softmax(&cache.logits);
        let probs: Vec<f64> = log_p.iter().map(|l| l.exp()).collect();
        let entropy = -probs.iter().zip(&log_p).map(|(p, l)| p * l).sum::<f64>();
        let log_ratio = log_p[action] - rollout.log_probs[i];
        let ratio = log_ratio.exp();

        // d(policy loss)/d(log π(a|s)).
        let (policy_loss, dlogp) = match spec.objective {
            PolicyObjective::Clipped { epsilon } => {
                let unclipped = ratio * a_hat;
                let surrogate = clipped_surrogate(ratio, a_hat, epsilon);
                if unclipped <= surrogate {
                    (-unclipped, -a_hat * ratio)
                } else {
                    clipped += 1;
                    (-surrogate, 0.0)
                }
            }
            PolicyObjective::LogProb => (-log_p[action] * a_hat, -a_hat),
        };
        let value_error = cache.value - returns[i];

        for (j, d) in dlogits.iter_mut().enumerate() {
            let indicator = if j == action { 1.0 } else { 0.0 };
            let d_policy = dlogp * (indicator - probs[j]);
            // dH/dz_j = -p_j (log p_j + H); the loss carries -c_H * H.
            let d_entropy = -probs[j] * (log_p[j] + entropy);
            *d = scale * (d_policy - spec.entropy_coef * d_entropy);
        }
        let dvalue = scale * spec.value_coef * 2.0 * value_error;
        mlp.backward_into(&cache, &dlogits, dvalue, &mut grads)?;

        stats.policy_loss += scale * policy_loss;
        stats.value_loss += scale * value_error * value_error;
        stats.entropy += scale * entropy;
        stats.approx_kl += scale * ((ratio - 1.0) - log_ratio);
        stats.max_ratio_deviation = stats.max_ratio_deviation.max((ratio - 1.0).abs());
    }
    stats.clip_fraction = clipped as f64 * scale;
    Ok((grads, stats))
}

/// Summary of one call to [`ppo_update`] or [`a2c_update`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct UpdateReport {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
    /// `max |ratio - 1|` over the first minibatch, before any optimizer step.
    pub initial_ratio_deviation: f64,
    pub optimizer_steps: u64,
}

fn apply(
    mlp: &mut Mlp,
    optimizer: &mut OptimizerState,
    mut grads: GradientSet,
    max_grad_norm: f64,
) -> Result<(), TrainError> {
    grads.clip_norm(max_grad_norm);
    optimizer.step(mlp.params_mut(), &grads)?;
    Ok(())
}

/// Clipped-surrogate PPO: `epochs` passes over shuffled minibatches, one
/// optimizer step per minibatch, advantages normalized per minibatch.
pub fn ppo_update(
    mlp: &mut Mlp,
    optimizer: &mut OptimizerState,
    rollout: &Rollout,
    config: &TrainConfig,
    rng: &mut Rng,
) -> Result<UpdateReport, TrainError> {
    if rollout.is_empty() {
        return Err(TrainError::EmptyRollout);
    }
    let (advantages, returns) = rollout.advantages(config.gamma, config.gae_lambda);
    let spec = LossSpec {
        objective: PolicyObjective::Clipped {
            epsilon: config.clip_epsilon,
        },
        normalize_advantages: true,
        value_coef: config.value_coef,
        entropy_coef: config.entropy_coef,
    };
    let mut order: Vec<usize> = (0..rollout.len()).collect();
    let mut report = UpdateReport::default();
    let mut batches = 0.0;
    for _ in 0..config.epochs {
        rng.shuffle(&mut order);
        for batch in order.chunks(config.minibatch_size) {
            let (grads, stats) = loss_gradient(mlp, rollout, batch, &advantages, &returns, &spec)?;
            if report.optimizer_steps == 0 {
                report.initial_ratio_deviation = stats.max_ratio_deviation;
            }
            if !stats.is_finite() {
                return Err(TrainError::Diverged {
                    update: 0,
                    steps: 0,
                    what: "loss",
                });
            }
            apply(mlp, optimizer, grads, config.max_grad_norm)?;
            report.optimizer_steps += 1;
            batches += 1.0;
            report.policy_loss += stats.policy_loss;
            report.value_loss += stats.value_loss;
            report.entropy += stats.entropy;
            report.approx_kl += stats.approx_kl;
            report.clip_fraction += stats.clip_fraction;
        }
    }
    report.policy_loss /= batches;
    report.value_loss /= batches;
    report.entropy /= batches;
    report.approx_kl /= batches;
    report.clip_fraction /= batches;
    Ok(report)
}

/// Advantage actor-critic: one optimizer step on the whole rollout with
/// unnormalized advantages.
pub fn a2c_update(
    mlp: &mut Mlp,
    optimizer: &mut OptimizerState,
    rollout: &Rollout,
    config: &TrainConfig,
) -> Result<UpdateReport, TrainError> {
    if rollout.is_empty() {
        return Err(TrainError::EmptyRollout);
    }
    let (advantages, returns) = rollout.advantages(config.gamma, config.gae_lambda);
    let spec = LossSpec {
        objective: PolicyObjective::LogProb,
        normalize_advantages: false,
        value_coef: config.value_coef,
        entropy_coef: config.entropy_coef,
    };
    let batch: Vec<usize> = (0..rollout.len()).collect();
    let (grads, stats) = loss_gradient(mlp, rollout, &batch, &advantages, &returns, &spec)?;
    if !stats.is_finite() {
        return Err(TrainError::Diverged {
            update: 0,
            steps: 0,
            what: "loss",
        });
    }
    apply(mlp, optimizer, grads, config.max_grad_norm)?;
    Ok(UpdateReport {
        policy_loss: stats.policy_loss,
        value_loss: stats.value_loss,
        entropy: stats.entropy,
        approx_kl: stats.approx_kl,
        clip_fraction: 0.0,
        initial_ratio_deviation: stats.max_ratio_deviation,
        optimizer_steps: 1,
    })
}

/// Anything that picks an action index from an observation.
pub trait Policy: Send {
    /// Size of the action set this policy chooses from.
    fn num_actions(&self) -> usize;

    fn act(&mut self, observation: &Observation) -> usize;
}

/// Uniform over the action set; ignores the observation.
#[derive(Debug, Clone)]
pub struct RandomPolicy {
    actions: usize,
    rng: Rng,
}

impl RandomPolicy {
    pub fn new(actions: usize, seed: u64) -> Self {
        assert!(actions >= 1, "random policy needs at least one action");
        Self {
            actions,
            rng: Rng::new(derive_seed(seed, "policy")),
        }
    }
}

impl Policy for RandomPolicy {
    fn num_actions(&self) -> usize {
        self.actions
    }

    fn act(&mut self, _observation: &Observation) -> usize {
        self.rng.below(self.actions as u64) as usize
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActMode {
    #[default]
    Sample,
    Argmax,
}

/// A trained network acting through its categorical head.
#[derive(Debug, Clone)]
pub struct AgentPolicy {
    mlp: Mlp,
    mode: ActMode,
    rng: Rng,
    repeat: u32,
    held: Option<(usize, u32)>,
}

impl AgentPolicy {
    pub fn new(mlp: Mlp, mode: ActMode, seed: u64) -> Self {
        Self {
            mlp,
            mode,
            rng: Rng::new(derive_seed(seed, "policy")),
            repeat: 1,
            held: None,
        }
    }

    /// Holds each chosen action for `repeat` consecutive ticks.
    pub fn with_repeat(mut self, repeat: u32) -> Self {
        self.repeat = repeat.max(1);
        self
    }

    pub fn logits(&self, observation: &Observation) -> Vec<f64> {
        self.mlp
            .forward(observation.as_slice())
            .expect("observation length checked when the policy was bound")
            .logits
    }
}

impl Policy for AgentPolicy {
    fn num_actions(&self) -> usize {
        self.mlp.sizes().actions
    }

    fn act(&mut self, observation: &Observation) -> usize {
        if let Some((action, left)) = self.held {
            if left > 0 {
                self.held = Some((action, left - 1));
                return action;
            }
        }
        let logits = self.logits(observation);
        let action = match self.mode {
            ActMode::Sample => nn::categorical_sample(&logits, &mut self.rng).0,
            ActMode::Argmax => nn::argmax(&logits),
        };
        self.held = Some((action, self.repeat - 1));
        action
    }
}

/// A checkpoint: network, optimizer, provenance and skill label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedAgent {
    pub schema_version: u32,
    pub model: Model,
    pub skill: Skill,
    pub game: Game,
    pub version: u32,
    pub version_spec: VersionSpec,
    pub steps_trained: u64,
    pub updates: u64,
    pub config: TrainConfig,
    pub network: NetworkSnapshot,
}

impl TrainedAgent {
    pub fn mlp(&self) -> Result<Mlp, NnError> {
        Ok(self.network.restore()?.0)
    }

    /// A policy for playing `env`, checking that shapes agree.
    pub fn policy(
        &self,
        env: &dyn Environment,
        mode: ActMode,
        seed: u64,
    ) -> Result<AgentPolicy, TrainError> {
        let mlp = self.mlp()?;
        let sizes = mlp.sizes();
        if sizes.actions != env.actions().len() || sizes.input != env.observation_len() {
            return Err(TrainError::ShapeMismatch {
                game: env.game(),
                expected: sizes.actions,
                obs: sizes.input,
                got: env.actions().len(),
                got_obs: env.observation_len(),
            });
        }
        Ok(AgentPolicy::new(mlp, mode, seed).with_repeat(self.config.action_repeat))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("checkpoint serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// One line of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpdateLog {
    pub update: u64,
    pub steps: u64,
    /// Mean undiscounted return of episodes that finished during this
    /// update's collection, if any did.
    pub mean_episode_reward: Option<f64>,
    pub episodes: u64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub approx_kl: f64,
    pub initial_ratio_deviation: f64,
    pub wall_clock_s: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub updates: Vec<UpdateLog>,
}

impl TrainingLog {
    pub fn to_jsonl(&self) -> String {
        self.updates
            .iter()
            .map(|u| serde_json::to_string(u).expect("log line serializes") + "\n")
            .collect()
    }

    /// Mean episode reward over the last `n` updates that finished episodes.
    pub fn recent_mean_reward(&self, n: usize) -> Option<f64> {
        let recent: Vec<f64> = self
            .updates
            .iter()
            .rev()
            .filter_map(|u| u.mean_episode_reward)
            .take(n)
            .collect();
        (!recent.is_empty()).then(|| recent.iter().sum::<f64>() / recent.len() as f64)
    }
}

struct Worker {
    env: Box<dyn Environment>,
    seed: u64,
    episode: u64,
    observation: Observation,
    episode_return: f64,
}

impl Worker {
    fn new(spec: &VersionSpec, seed: u64) -> Result<Self, TrainError> {
        let mut env = spec.make_env()?;
        let observation = env.reset(derive_indexed(seed, "episode", 0));
        Ok(Self {
            env,
            seed,
            episode: 0,
            observation,
            episode_return: 0.0,
        })
    }
}

/// Trains one agent and returns its final checkpoint.
pub fn train(
    spec: &VersionSpec,
    config: &TrainConfig,
) -> Result<(TrainedAgent, TrainingLog), TrainError> {
    let (mut agents, log) = train_with_snapshots(spec, config, &[])?;
    Ok((agents.pop().expect("final checkpoint"), log))
}

/// Trains once for `config.total_steps` and additionally returns a checkpoint
/// at each smaller budget in `snapshots`, labelled as if it had been trained
/// with that budget. Because training is deterministic and the schedule does
/// not depend on the total, a snapshot equals a separate run with the smaller
/// budget. Checkpoints come back in ascending budget order, the final one
/// last.
pub fn train_with_snapshots(
    spec: &VersionSpec,
    config: &TrainConfig,
    snapshots: &[u64],
) -> Result<(Vec<TrainedAgent>, TrainingLog), TrainError> {
    config.validate()?;
    let probe = spec.make_env()?;
    let sizes = MlpSizes::new(probe.observation_len(), probe.actions().len());
    let actions = probe.actions();
    drop(probe);

    let mut mlp = Mlp::init(sizes, config.seed)?;
    let adam = AdamConfig {
        learning_rate: config.learning_rate,
        ..AdamConfig::default()
    };
    let mut optimizer = OptimizerState::new(adam, mlp.params().len());
    let mut sample_rng = Rng::new(derive_seed(config.seed, "policy"));
    let mut batch_rng = Rng::new(derive_seed(config.seed, "minibatch"));
    let mut workers = (0..config.parallel_envs)
        .map(|i| Worker::new(spec, derive_indexed(config.seed, "env", i as u64)))
        .collect::<Result<Vec<_>, _>>()?;

    let mut budgets: Vec<u64> = snapshots
        .iter()
        .copied()
        .filter(|&b| b > 0 && b < config.total_steps)
        .collect();
    budgets.sort_unstable();
    budgets.dedup();
    let mut pending = budgets.into_iter().peekable();

    let started = Instant::now();
    let mut log = TrainingLog::default();
    let mut agents = Vec::new();
    let mut steps = 0u64;
    let mut update = 0u64;
    let t_len = config.rollout_length;
    let n = t_len * config.parallel_envs;

    let checkpoint = |mlp: &Mlp, optimizer: &OptimizerState, steps, updates, budget| TrainedAgent {
        schema_version: CHECKPOINT_SCHEMA_VERSION,
        model: config.model,
        skill: Skill::for_steps(budget),
        game: spec.game(),
        version: spec.version(),
        version_spec: *spec,
        steps_trained: steps,
        updates,
        config: TrainConfig {
            total_steps: budget,
            ..config.clone()
        },
        network: NetworkSnapshot::capture(mlp, optimizer),
    };

    while steps < config.total_steps {
        let mut rollout = Rollout {
            num_envs: config.parallel_envs,
            steps_per_env: t_len,
            observations: vec![Vec::new(); n],
            actions: vec![0; n],
            log_probs: vec![0.0; n],
            rewards: vec![0.0; n],
            values: vec![0.0; n],
            dones: vec![false; n],
            bootstrap: vec![0.0; config.parallel_envs],
        };
        let mut finished = Vec::new();
        for t in 0..t_len {
            for (e, worker) in workers.iter_mut().enumerate() {
                let i = e * t_len + t;
                let out = mlp.forward(worker.observation.as_slice())?;
                let (action, log_prob) = nn::categorical_sample(&out.logits, &mut sample_rng);
                let mut result = worker.env.step(actions[action])?;
                for _ in 1..config.action_repeat {
                    if result.done || worker.env.tick() >= config.max_episode_ticks {
                        break;
                    }
                    let next = worker.env.step(actions[action])?;
                    result = crate::env::StepResult {
                        reward: result.reward + next.reward,
                        ..next
                    };
                }
                worker.episode_return += result.reward;
                rollout.observations[i] = std::mem::take(&mut worker.observation.0);
                rollout.actions[i] = action;
                rollout.log_probs[i] = log_prob;
                rollout.rewards[i] = result.reward;
                rollout.values[i] = out.value;
                let done = result.done || worker.env.tick() >= config.max_episode_ticks;
                rollout.dones[i] = done;
                if done {
                    finished.push(worker.episode_return);
                    worker.episode_return = 0.0;
                    worker.episode += 1;
                    worker.observation = worker
                        .env
                        .reset(derive_indexed(worker.seed, "episode", worker.episode));
                } else {
                    worker.observation = result.observation;
                }
            }
        }
        for (e, worker) in workers.iter().enumerate() {
            rollout.bootstrap[e] = mlp.forward(worker.observation.as_slice())?.value;
        }
        steps += n as u64;
        update += 1;

        let report = match config.model {
            Model::Ppo => ppo_update(&mut mlp, &mut optimizer, &rollout, config, &mut batch_rng),
            Model::A2c => a2c_update(&mut mlp, &mut optimizer, &rollout, config),
        }
        .map_err(|e| match e {
            TrainError::Diverged { what, .. } => TrainError::Diverged {
                update,
                steps,
                what,
            },
            other => other,
        })?;
        if mlp.params().iter().any(|p| !p.is_finite()) {
            return Err(TrainError::Diverged {
                update,
                steps,
                what: "a network parameter",
            });
        }

        log.updates.push(UpdateLog {
            update,
            steps,
            mean_episode_reward: (!finished.is_empty())
                .then(|| finished.iter().sum::<f64>() / finished.len() as f64),
            episodes: finished.len() as u64,
            policy_loss: report.policy_loss,
            value_loss: report.value_loss,
            entropy: report.entropy,
            approx_kl: report.approx_kl,
            initial_ratio_deviation: report.initial_ratio_deviation,
            wall_clock_s: started.elapsed().as_secs_f64(),
        });

        while let Some(&budget) = pending.peek() {
            if steps < budget {
                break;
            }
            agents.push(checkpoint(&mlp, &optimizer, steps, update, budget));
            pending.next();
        }
    }
    agents.push(checkpoint(&mlp, &optimizer, steps, update, config.total_steps));
    Ok((agents, log))
}

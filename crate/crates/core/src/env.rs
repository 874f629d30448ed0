//! The environment contract shared by every game and every player.
//!
//! A game is a fixed-timestep Markov decision process: `reset` puts it in its
//! initial state for a seed, `step` advances exactly one tick under one
//! action. Everything is deterministic given the seed and the action
//! sequence; nothing reads the wall clock.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Fixed simulation rate. A 180 s session is 10 800 ticks.
pub const TICKS_PER_SECOND: u32 = 60;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Game {
    Batkill,
    Jungle,
}

impl Game {
    pub fn name(self) -> &'static str {
        match self {
            Game::Batkill => "batkill",
            Game::Jungle => "jungle",
        }
    }
}

impl fmt::Display for Game {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Game {
    type Err = EnvError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "batkill" => Ok(Game::Batkill),
            "jungle" | "jungle-climb" | "jungleclimb" => Ok(Game::Jungle),
            _ => Err(EnvError::UnknownGame(s.to_string())),
        }
    }
}

/// Symbolic action. Each game exposes a fixed, ordered subset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Action {
    Noop,
    Left,
    Right,
    Attack,
    Jump,
}

impl Action {
    pub const ALL: [Action; 5] = [
        Action::Noop,
        Action::Left,
        Action::Right,
        Action::Attack,
        Action::Jump,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Action::Noop => "NOOP",
            Action::Left => "LEFT",
            Action::Right => "RIGHT",
            Action::Attack => "ATTACK",
            Action::Jump => "JUMP",
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Action {
    type Err = EnvError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Action::ALL
            .into_iter()
            .find(|a| a.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| EnvError::UnknownActionName(s.to_string()))
    }
}

/// Fixed-length state vector, every entry in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Observation(pub Vec<f64>);

impl Observation {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn is_normalized(&self) -> bool {
        self.0.iter().all(|v| v.is_finite() && (-1.0..=1.0).contains(v))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EventKind {
    BatKilled,
    HitTaken,
    CorrectJump,
    Death,
    ScorePoint,
}

impl EventKind {
    pub fn name(self) -> &'static str {
        match self {
            EventKind::BatKilled => "BAT_KILLED",
            EventKind::HitTaken => "HIT_TAKEN",
            EventKind::CorrectJump => "CORRECT_JUMP",
            EventKind::Death => "DEATH",
            EventKind::ScorePoint => "SCORE_POINT",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GameEvent {
    pub kind: EventKind,
    pub tick: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepResult {
    pub observation: Observation,
    pub reward: f64,
    pub done: bool,
    pub events: Vec<GameEvent>,
    pub score_delta: i64,
}

impl StepResult {
    pub fn has_event(&self, kind: EventKind) -> bool {
        self.events.iter().any(|e| e.kind == kind)
    }

    pub fn count(&self, kind: EventKind) -> usize {
        self.events.iter().filter(|e| e.kind == kind).count()
    }
}

/// Fixed-timestep clock. Advances by exactly one tick per step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Clock {
    pub tick: u64,
    pub ticks_per_second: u32,
}

impl Clock {
    pub fn new(ticks_per_second: u32) -> Self {
        Self {
            tick: 0,
            ticks_per_second,
        }
    }

    pub fn advance(&mut self) {
        self.tick += 1;
    }

    pub fn elapsed_seconds(&self) -> f64 {
        self.tick as f64 / f64::from(self.ticks_per_second)
    }

    pub fn tick_seconds(&self) -> f64 {
        1.0 / f64::from(self.ticks_per_second)
    }
}

impl Default for Clock {
    fn default() -> Self {
        Self::new(TICKS_PER_SECOND)
    }
}

/// Renderable rectangle sent to play clients. World units, y up.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Entity {
    pub id: u64,
    pub kind: EntityKind,
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
    pub facing: i8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntityKind {
    Player,
    Bat,
    Platform,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EnvError {
    #[error("action {action} is not part of the {game} action set")]
    UnknownAction { game: Game, action: Action },
    #[error("unknown action name {0:?}")]
    UnknownActionName(String),
    #[error("unknown game {0:?}")]
    UnknownGame(String),
    #[error("{game} has no version {version}")]
    UnknownVersion { game: Game, version: u32 },
    #[error("invalid {game} configuration: {reason}")]
    InvalidConfig { game: Game, reason: String },
    #[error("step called before reset")]
    NotReset,
    #[error("step called after the episode ended; reset first")]
    StepAfterDone,
}

/// The MDP contract every game implements.
///
/// One instance is single-threaded; distinct instances share nothing and may
/// be moved across threads while idle.
pub trait Environment: Send {
    fn game(&self) -> Game;

    /// Fixed, ordered, non-empty action list. Indices are stable.
    fn actions(&self) -> &'static [Action];

    fn observation_len(&self) -> usize;

    fn ticks_per_second(&self) -> u32 {
        TICKS_PER_SECOND
    }

    fn reset(&mut self, seed: u64) -> Observation;

    fn step(&mut self, action: Action) -> Result<StepResult, EnvError>;

    /// Ticks since the last reset.
    fn tick(&self) -> u64;

    fn observe(&self) -> Observation;

    fn entities(&self) -> Vec<Entity>;

    fn action_index(&self, action: Action) -> Option<usize> {
        self.actions().iter().position(|&a| a == action)
    }
}

impl<E: Environment + ?Sized> Environment for Box<E> {
    fn game(&self) -> Game {
        (**self).game()
    }
    fn actions(&self) -> &'static [Action] {
        (**self).actions()
    }
    fn observation_len(&self) -> usize {
        (**self).observation_len()
    }
    fn ticks_per_second(&self) -> u32 {
        (**self).ticks_per_second()
    }
    fn reset(&mut self, seed: u64) -> Observation {
        (**self).reset(seed)
    }
    fn step(&mut self, action: Action) -> Result<StepResult, EnvError> {
        (**self).step(action)
    }
    fn tick(&self) -> u64 {
        (**self).tick()
    }
    fn observe(&self) -> Observation {
        (**self).observe()
    }
    fn entities(&self) -> Vec<Entity> {
        (**self).entities()
    }
}

/// Instrumentation hook, called synchronously after every step.
pub trait Observer {
    fn on_step(&mut self, tick: u64, action: Action, result: &StepResult);

    fn on_session_end(&mut self, _metrics: &crate::games::SessionMetrics) {}
}

/// Wraps an environment and broadcasts each step to attached observers in
/// attachment order. Observers see results but can never alter them.
pub struct Instrumented<'o, E> {
    env: E,
    observers: Vec<&'o mut (dyn Observer + Send)>,
}

impl<'o, E: Environment> Instrumented<'o, E> {
    pub fn new(env: E) -> Self {
        Self {
            env,
            observers: Vec::new(),
        }
    }

    pub fn attach_observer(&mut self, observer: &'o mut (dyn Observer + Send)) {
        self.observers.push(observer);
    }

    pub fn end_session(&mut self, metrics: &crate::games::SessionMetrics) {
        for observer in self.observers.iter_mut() {
            observer.on_session_end(metrics);
        }
    }

    pub fn inner(&self) -> &E {
        &self.env
    }

    pub fn into_inner(self) -> E {
        self.env
    }
}

impl<E: Environment> Environment for Instrumented<'_, E> {
    fn game(&self) -> Game {
        self.env.game()
    }
    fn actions(&self) -> &'static [Action] {
        self.env.actions()
    }
    fn observation_len(&self) -> usize {
        self.env.observation_len()
    }
    fn ticks_per_second(&self) -> u32 {
        self.env.ticks_per_second()
    }
    fn reset(&mut self, seed: u64) -> Observation {
        self.env.reset(seed)
    }
    fn step(&mut self, action: Action) -> Result<StepResult, EnvError> {
        let result = self.env.step(action)?;
        let tick = self.env.tick();
        for observer in self.observers.iter_mut() {
            observer.on_step(tick, action, &result);
        }
        Ok(result)
    }
    fn tick(&self) -> u64 {
        self.env.tick()
    }
    fn observe(&self) -> Observation {
        self.env.observe()
    }
    fn entities(&self) -> Vec<Entity> {
        self.env.entities()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn action_names_round_trip() {
        for action in Action::ALL {
            assert_eq!(action.name().parse::<Action>().unwrap(), action);
            let json = serde_json::to_string(&action).unwrap();
            assert_eq!(json, format!("\"{}\"", action.name()));
        }
        assert!("FLY".parse::<Action>().is_err());
    }

    #[test]
    fn event_names_serialize_as_enumeration_names() {
        for (kind, name) in [
            (EventKind::BatKilled, "BAT_KILLED"),
            (EventKind::HitTaken, "HIT_TAKEN"),
            (EventKind::CorrectJump, "CORRECT_JUMP"),
            (EventKind::Death, "DEATH"),
            (EventKind::ScorePoint, "SCORE_POINT"),
        ] {
            assert_eq!(serde_json::to_string(&kind).unwrap(), format!("\"{name}\""));
            assert_eq!(kind.name(), name);
        }
    }

    #[test]
    fn clock_counts_ticks() {
        let mut clock = Clock::default();
        for _ in 0..120 {
            clock.advance();
        }
        assert_eq!(clock.tick, 120);
        assert!((clock.elapsed_seconds() - 2.0).abs() < 1e-12);
    }
}

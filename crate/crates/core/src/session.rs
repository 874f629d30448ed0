//! Timed play sessions and their on-disk log.
//!
//! A session is `time_s` seconds of fixed-rate play. Episodes that end early
//! are reset in place with a per-episode seed, so a session always has
//! exactly `time_s * ticks_per_second` steps and its metrics accumulate
//! across episodes.
//!
//! The log is line-delimited JSON: one header line, one line per tick, one
//! footer line. Each step line holds the resolved action for that tick, so
//! a replay needs only the header and the action column.

use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{Action, EnvError, Environment, EventKind, Game, Observation};
use crate::games::{SessionMetrics, VersionSpec};
use crate::rl::{Model, Policy, Skill};
use crate::rng::derive_indexed;

pub const SESSION_FORMAT_VERSION: u32 = 1;

/// Identifies the simulation code that wrote a log. Bump the revision
/// whenever game mechanics change in a way that alters trajectories.
pub const SIMULATION_REVISION: u32 = 3;

pub fn build_id() -> String {
    format!(
        "{}-{}+sim{}",
        env!("CARGO_PKG_NAME"),
        env!("CARGO_PKG_VERSION"),
        SIMULATION_REVISION
    )
}

pub const DEFAULT_TIME_S: u32 = 180;
pub const DEFAULT_RUNS: u32 = 2;

#[derive(Debug, Error)]
pub enum SessionError {
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error("invalid test parameters: {0}")]
    InvalidParams(String),
    #[error("policy chooses among {policy} actions but {game} has {game_actions}")]
    ActionSpaceMismatch {
        game: Game,
        policy: usize,
        game_actions: usize,
    },
    #[error("policy returned action index {index} outside 0..{len}")]
    ActionOutOfRange { index: usize, len: usize },
    #[error("session already has all {0} ticks")]
    SessionOver(u64),
    #[error("corrupt session log at line {line}: {reason}")]
    Corrupt { line: usize, reason: String },
    #[error("incomplete session: {0}")]
    Incomplete(String),
    #[error("expected a {expected} session, found {found}")]
    WrongKind {
        expected: SessionKind,
        found: SessionKind,
    },
    #[error("replay mismatch: {0}")]
    ReplayMismatch(Mismatch),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SessionKind {
    Human,
    AiPlay,
    Random,
}

impl SessionKind {
    pub fn name(self) -> &'static str {
        match self {
            SessionKind::Human => "human",
            SessionKind::AiPlay => "ai-play",
            SessionKind::Random => "random",
        }
    }
}

impl fmt::Display for SessionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SessionKind {
    type Err = SessionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "human" => Ok(SessionKind::Human),
            "ai-play" => Ok(SessionKind::AiPlay),
            "random" => Ok(SessionKind::Random),
            other => Err(SessionError::InvalidParams(format!(
                "unknown session kind {other:?}"
            ))),
        }
    }
}

/// How one player is tested: how long, how often, under which label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestParams {
    #[serde(default = "default_time_s")]
    pub time_s: u32,
    #[serde(default = "default_runs")]
    pub runs: u32,
    pub session_kind: SessionKind,
    #[serde(default)]
    pub skill: Option<Skill>,
    pub version: u32,
    pub seed: u64,
}

fn default_time_s() -> u32 {
    DEFAULT_TIME_S
}

fn default_runs() -> u32 {
    DEFAULT_RUNS
}

impl TestParams {
    pub fn new(session_kind: SessionKind, skill: Option<Skill>, version: u32, seed: u64) -> Self {
        Self {
            time_s: DEFAULT_TIME_S,
            runs: DEFAULT_RUNS,
            session_kind,
            skill,
            version,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), SessionError> {
        if self.time_s == 0 {
            return Err(SessionError::InvalidParams("time_s must be positive".into()));
        }
        if self.runs == 0 {
            return Err(SessionError::InvalidParams("runs must be at least 1".into()));
        }
        if self.session_kind == SessionKind::Random && self.skill.is_some() {
            return Err(SessionError::InvalidParams(
                "random sessions carry no skill label".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionHeader {
    pub format_version: u32,
    pub build_id: String,
    pub game: Game,
    pub version: u32,
    /// Full game configuration, so custom versions replay without lookup.
    pub version_spec: VersionSpec,
    pub player_id: String,
    pub session_kind: SessionKind,
    pub skill: Option<Skill>,
    #[serde(default)]
    pub model: Option<Model>,
    pub seed: u64,
    pub ticks_per_second: u32,
    pub time_s: u32,
}

impl SessionHeader {
    pub fn expected_ticks(&self) -> u64 {
        u64::from(self.time_s) * u64::from(self.ticks_per_second)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    /// Session tick, counting across episode resets.
    pub tick: u64,
    pub action: Action,
    pub reward: f64,
    pub score_delta: i64,
    pub events: Vec<EventKind>,
    pub done: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub header: SessionHeader,
    pub steps: Vec<StepRecord>,
    pub metrics: SessionMetrics,
    pub score: i64,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum LogLine {
    Header(SessionHeader),
    Step(StepRecord),
    Footer {
        metrics: SessionMetrics,
        score: i64,
    },
}

impl SessionRecord {
    pub fn episodes(&self) -> u64 {
        self.steps.iter().filter(|s| s.done).count() as u64 + 1
    }

    /// Serializes to the line-delimited log format.
    pub fn to_jsonl(&self) -> String {
        let mut out = Vec::new();
        self.write_jsonl(&mut out).expect("writing to memory");
        String::from_utf8(out).expect("json is utf-8")
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let line = |l: &LogLine| serde_json::to_string(l).expect("log lines serialize");
        writeln!(w, "{}", line(&LogLine::Header(self.header.clone())))?;
        for step in &self.steps {
            writeln!(w, "{}", line(&LogLine::Step(step.clone())))?;
        }
        writeln!(
            w,
            "{}",
            line(&LogLine::Footer {
                metrics: self.metrics,
                score: self.score,
            })
        )
    }

    pub fn save(&self, path: &Path) -> Result<(), SessionError> {
        let file = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(file);
        self.write_jsonl(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, SessionError> {
        let file = std::fs::File::open(path)?;
        Self::read_jsonl(std::io::BufReader::new(file))
    }

    pub fn from_jsonl(text: &str) -> Result<Self, SessionError> {
        Self::read_jsonl(text.as_bytes())
    }

    /// Parses a log. A log without its footer is reported as incomplete
    /// rather than corrupt: that is what a dropped connection leaves behind.
    pub fn read_jsonl<R: BufRead>(reader: R) -> Result<Self, SessionError> {
        let mut header = None;
        let mut steps = Vec::new();
        let mut footer = None;
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let number = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            if footer.is_some() {
                return Err(corrupt(number, "content after the footer"));
            }
            let parsed: LogLine =
                serde_json::from_str(&line).map_err(|e| corrupt(number, &e.to_string()))?;
            match parsed {
                LogLine::Header(h) => {
                    if header.is_some() {
                        return Err(corrupt(number, "second header"));
                    }
                    header = Some(h);
                }
                LogLine::Step(s) if header.is_some() => steps.push(s),
                LogLine::Step(_) => return Err(corrupt(number, "step before header")),
                LogLine::Footer { metrics, score } => footer = Some((metrics, score)),
            }
        }
        let header = header.ok_or_else(|| corrupt(1, "missing header"))?;
        let (metrics, score) =
            footer.ok_or_else(|| SessionError::Incomplete("log has no footer".into()))?;
        Ok(SessionRecord {
            header,
            steps,
            metrics,
            score,
        })
    }
}

fn corrupt(line: usize, reason: &str) -> SessionError {
    SessionError::Corrupt {
        line,
        reason: reason.to_string(),
    }
}

/// Who is playing, for the header.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlayerInfo {
    pub player_id: String,
    pub session_kind: SessionKind,
    pub skill: Option<Skill>,
    pub model: Option<Model>,
}

impl PlayerInfo {
    pub fn random() -> Self {
        Self {
            player_id: "random".into(),
            session_kind: SessionKind::Random,
            skill: None,
            model: None,
        }
    }

    pub fn agent(model: Model, skill: Skill) -> Self {
        Self {
            player_id: format!("{}-{}", model.name(), skill.name()),
            session_kind: SessionKind::AiPlay,
            skill: Some(skill),
            model: Some(model),
        }
    }

    pub fn human(player_id: impl Into<String>, skill: Skill) -> Self {
        Self {
            player_id: player_id.into(),
            session_kind: SessionKind::Human,
            skill: Some(skill),
            model: None,
        }
    }
}

/// A session in progress. Both batch evaluation and the live play server
/// drive sessions through this type, so their logs are the same by
/// construction.
pub struct LiveSession {
    header: SessionHeader,
    env: Box<dyn Environment>,
    observation: Observation,
    metrics: SessionMetrics,
    steps: Vec<StepRecord>,
    episode: u64,
}

impl LiveSession {
    pub fn start(
        spec: &VersionSpec,
        player: PlayerInfo,
        time_s: u32,
        seed: u64,
    ) -> Result<Self, SessionError> {
        if time_s == 0 {
            return Err(SessionError::InvalidParams("time_s must be positive".into()));
        }
        let mut env = spec.make_env()?;
        let observation = env.reset(derive_indexed(seed, "episode", 0));
        let header = SessionHeader {
            format_version: SESSION_FORMAT_VERSION,
            build_id: build_id(),
            game: spec.game(),
            version: spec.version(),
            version_spec: *spec,
            player_id: player.player_id,
            session_kind: player.session_kind,
            skill: player.skill,
            model: player.model,
            seed,
            ticks_per_second: env.ticks_per_second(),
            time_s,
        };
        Ok(Self {
            steps: Vec::with_capacity(header.expected_ticks() as usize),
            header,
            env,
            observation,
            metrics: spec.metrics(),
            episode: 0,
        })
    }

    pub fn header(&self) -> &SessionHeader {
        &self.header
    }

    pub fn env(&self) -> &dyn Environment {
        self.env.as_ref()
    }

    pub fn observation(&self) -> &Observation {
        &self.observation
    }

    pub fn metrics(&self) -> &SessionMetrics {
        &self.metrics
    }

    pub fn tick(&self) -> u64 {
        self.steps.len() as u64
    }

    pub fn remaining_ticks(&self) -> u64 {
        self.header.expected_ticks() - self.tick()
    }

    pub fn is_finished(&self) -> bool {
        self.remaining_ticks() == 0
    }

    /// Advances one tick, resetting into the next episode if this one ended.
    pub fn step(&mut self, action: Action) -> Result<&StepRecord, SessionError> {
        if self.is_finished() {
            return Err(SessionError::SessionOver(self.tick()));
        }
        let result = self.env.step(action)?;
        self.metrics.record(&result.events);
        let record = StepRecord {
            tick: self.tick(),
            action,
            reward: result.reward,
            score_delta: result.score_delta,
            events: result.events.iter().map(|e| e.kind).collect(),
            done: result.done,
        };
        self.observation = if result.done {
            self.episode += 1;
            self.env
                .reset(derive_indexed(self.header.seed, "episode", self.episode))
        } else {
            result.observation
        };
        self.steps.push(record);
        Ok(self.steps.last().expect("just pushed"))
    }

    pub fn finish(self) -> Result<SessionRecord, SessionError> {
        if !self.is_finished() {
            return Err(SessionError::Incomplete(format!(
                "{} of {} ticks played",
                self.tick(),
                self.header.expected_ticks()
            )));
        }
        Ok(SessionRecord {
            score: self.metrics.score(),
            header: self.header,
            steps: self.steps,
            metrics: self.metrics,
        })
    }
}

/// Plays one full session with a non-human policy.
pub fn run_session(
    spec: &VersionSpec,
    policy: &mut dyn Policy,
    player: PlayerInfo,
    params: &TestParams,
) -> Result<SessionRecord, SessionError> {
    params.validate()?;
    let mut session = LiveSession::start(spec, player, params.time_s, params.seed)?;
    let actions = session.env().actions();
    if policy.num_actions() != actions.len() {
        return Err(SessionError::ActionSpaceMismatch {
            game: spec.game(),
            policy: policy.num_actions(),
            game_actions: actions.len(),
        });
    }
    while !session.is_finished() {
        let index = policy.act(session.observation());
        let action = *actions.get(index).ok_or(SessionError::ActionOutOfRange {
            index,
            len: actions.len(),
        })?;
        session.step(action)?;
    }
    session.finish()
}

/// Where and why a replay diverged from its log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mismatch {
    /// First tick whose logged outcome differs, or `None` when every step
    /// matched but the footer did not.
    pub tick: Option<u64>,
    pub detail: String,
    /// Set when the log was written by a different build.
    pub build_note: Option<String>,
}

impl fmt::Display for Mismatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.tick {
            Some(t) => write!(f, "tick {t}: {}", self.detail)?,
            None => write!(f, "{}", self.detail)?,
        }
        if let Some(note) = &self.build_note {
            write!(f, " ({note})")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "lowercase")]
pub enum ReplayVerdict {
    Match { ticks: u64, score: i64 },
    Mismatch(Mismatch),
}

impl ReplayVerdict {
    pub fn is_match(&self) -> bool {
        matches!(self, ReplayVerdict::Match { .. })
    }
}

/// Re-simulates a log from its seed and action column and compares every
/// logged outcome, bit for bit.
pub fn replay(record: &SessionRecord) -> Result<ReplayVerdict, SessionError> {
    let header = &record.header;
    let build_note = (header.build_id != build_id()).then(|| {
        format!(
            "log written by build {}, replayed on build {}",
            header.build_id,
            build_id()
        )
    });
    let mismatch = |tick, detail: String| {
        Ok(ReplayVerdict::Mismatch(Mismatch {
            tick,
            detail,
            build_note: build_note.clone(),
        }))
    };
    if header.game != header.version_spec.game() || header.version != header.version_spec.version()
    {
        return mismatch(None, "header game/version disagree with its version spec".into());
    }
    // Give the session its full length so the log's own length is checked
    // separately below.
    let time_s = header.time_s.max(1);
    let mut session = LiveSession::start(
        &header.version_spec,
        PlayerInfo {
            player_id: header.player_id.clone(),
            session_kind: header.session_kind,
            skill: header.skill,
            model: header.model,
        },
        time_s,
        header.seed,
    )?;
    if session.header().ticks_per_second != header.ticks_per_second {
        return mismatch(
            None,
            format!(
                "log runs at {} ticks/s, simulation at {}",
                header.ticks_per_second,
                session.header().ticks_per_second
            ),
        );
    }
    for (i, logged) in record.steps.iter().enumerate() {
        let tick = i as u64;
        if logged.tick != tick {
            return mismatch(Some(tick), format!("step numbered {} out of order", logged.tick));
        }
        if session.env().action_index(logged.action).is_none() {
            return mismatch(
                Some(tick),
                format!("action {} is not valid for {}", logged.action, header.game),
            );
        }
        let replayed = match session.step(logged.action) {
            Ok(r) => r,
            Err(SessionError::SessionOver(_)) => {
                return mismatch(Some(tick), "log is longer than the session".into())
            }
            Err(e) => return Err(e),
        };
        if let Some(diff) = step_difference(logged, replayed) {
            return mismatch(Some(tick), diff);
        }
    }
    let metrics = *session.metrics();
    if metrics != record.metrics {
        return mismatch(
            None,
            format!(
                "footer metrics {:?} differ from replayed {:?}",
                record.metrics, metrics
            ),
        );
    }
    if record.score != metrics.score() {
        return mismatch(
            None,
            format!(
                "footer score {} differs from replayed score {}",
                record.score,
                metrics.score()
            ),
        );
    }
    Ok(ReplayVerdict::Match {
        ticks: record.steps.len() as u64,
        score: record.score,
    })
}

fn step_difference(logged: &StepRecord, replayed: &StepRecord) -> Option<String> {
    if logged.reward.to_bits() != replayed.reward.to_bits() {
        return Some(format!(
            "reward {} logged, {} replayed",
            logged.reward, replayed.reward
        ));
    }
    if logged.score_delta != replayed.score_delta {
        return Some(format!(
            "score delta {} logged, {} replayed",
            logged.score_delta, replayed.score_delta
        ));
    }
    if logged.events != replayed.events {
        return Some(format!(
            "events {:?} logged, {:?} replayed",
            logged.events, replayed.events
        ));
    }
    if logged.done != replayed.done {
        return Some(format!(
            "done {} logged, {} replayed",
            logged.done, replayed.done
        ));
    }
    None
}

/// Validates a log written by the play server before it joins an
/// evaluation: it must be a human session, complete, and replay exactly.
pub fn import_human_session(text: &str) -> Result<SessionRecord, SessionError> {
    let record = SessionRecord::from_jsonl(text)?;
    if record.header.session_kind != SessionKind::Human {
        return Err(SessionError::WrongKind {
            expected: SessionKind::Human,
            found: record.header.session_kind,
        });
    }
    let expected = record.header.expected_ticks();
    if (record.steps.len() as u64) < expected {
        return Err(SessionError::Incomplete(format!(
            "{} of {} ticks played",
            record.steps.len(),
            expected
        )));
    }
    match replay(&record)? {
        ReplayVerdict::Match { .. } => Ok(record),
        ReplayVerdict::Mismatch(m) => Err(SessionError::ReplayMismatch(m)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rl::RandomPolicy;

    fn short(kind: SessionKind, seed: u64) -> TestParams {
        TestParams {
            time_s: 5,
            ..TestParams::new(kind, None, 1, seed)
        }
    }

    #[test]
    fn default_session_is_10800_ticks() {
        let spec = VersionSpec::shipped(Game::Batkill, 1).unwrap();
        let params = TestParams::new(SessionKind::Random, None, 1, 3);
        let mut policy = RandomPolicy::new(5, 3);
        let record = run_session(&spec, &mut policy, PlayerInfo::random(), &params).unwrap();
        assert_eq!(record.steps.len(), 10_800);
        assert_eq!(record.score, record.metrics.score());
    }

    #[test]
    fn jsonl_round_trips() {
        let spec = VersionSpec::shipped(Game::Jungle, 2).unwrap();
        let params = short(SessionKind::Random, 9);
        let mut policy = RandomPolicy::new(4, 9);
        let record = run_session(&spec, &mut policy, PlayerInfo::random(), &params).unwrap();
        let text = record.to_jsonl();
        assert_eq!(text.lines().count(), record.steps.len() + 2);
        assert_eq!(SessionRecord::from_jsonl(&text).unwrap(), record);
    }

    #[test]
    fn mismatched_policy_is_rejected() {
        let spec = VersionSpec::shipped(Game::Jungle, 1).unwrap();
        let mut policy = RandomPolicy::new(5, 0);
        let err = run_session(
            &spec,
            &mut policy,
            PlayerInfo::random(),
            &short(SessionKind::Random, 0),
        )
        .unwrap_err();
        assert!(matches!(err, SessionError::ActionSpaceMismatch { .. }));
    }

    #[test]
    fn params_validation() {
        let mut p = short(SessionKind::Random, 0);
        p.runs = 0;
        assert!(p.validate().is_err());
        p.runs = 1;
        p.time_s = 0;
        assert!(p.validate().is_err());
        let p = TestParams::new(SessionKind::Random, Some(Skill::Novice), 1, 0);
        assert!(p.validate().is_err());
    }

    #[test]
    fn missing_footer_is_incomplete() {
        let spec = VersionSpec::shipped(Game::Batkill, 1).unwrap();
        let mut policy = RandomPolicy::new(5, 1);
        let record = run_session(
            &spec,
            &mut policy,
            PlayerInfo::random(),
            &short(SessionKind::Random, 1),
        )
        .unwrap();
        let text = record.to_jsonl();
        let cut: String = text.lines().take(20).map(|l| format!("{l}\n")).collect();
        assert!(matches!(
            SessionRecord::from_jsonl(&cut),
            Err(SessionError::Incomplete(_))
        ));
        assert!(matches!(
            SessionRecord::from_jsonl("{\"kind\":\"step\"}"),
            Err(SessionError::Corrupt { .. })
        ));
    }
}

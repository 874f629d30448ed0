//! Jungle Climb: an endless vertical climber.
//!
//! Platforms are stacked 120 units apart, each with one or more gaps wide
//! enough to jump through. The character starts on a solid floor below them.
//! Once it gets above the second platform the screen starts scrolling up,
//! faster and faster; falling below the bottom edge is a death.
//!
//! Collision uses the character's feet: rising through a platform line is
//! only possible inside a gap, and falling onto a line lands unless the
//! whole body is inside a gap.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::env::{
    Action, Clock, Entity, EntityKind, EnvError, Environment, EventKind, Game, GameEvent,
    Observation, StepResult,
};
use crate::rng::{derive_seed, Rng};

pub const SCREEN_WIDTH: f64 = 600.0;
pub const SCREEN_HEIGHT: f64 = 800.0;
pub const PLAYER_WIDTH: f64 = 40.0;
pub const PLAYER_HEIGHT: f64 = 40.0;
pub const PLATFORM_SPACING: f64 = 120.0;
pub const PLATFORM_THICKNESS: f64 = 10.0;
pub const GAP_WIDTH: f64 = 80.0;
pub const MOVE_SPEED: f64 = 5.0;
pub const JUMP_VELOCITY: f64 = 12.0;
pub const GRAVITY: f64 = 0.5;
/// Scrolling starts once the feet are at or above this platform level.
pub const THRESHOLD_LEVEL: u64 = 2;
pub const GAP_SLOTS: usize = 3;
pub const PLATFORMS_OBSERVED: usize = 2;
pub const OBSERVATION_LEN: usize = 5 + PLATFORMS_OBSERVED * (1 + 2 * GAP_SLOTS);
/// Below-threshold reward rate per second of elapsed life time.
/// Gap offsets beyond this many units saturate at +-1.
pub const GAP_OFFSET_SCALE: f64 = SCREEN_WIDTH / 2.0;
pub const BTR_RATE: f64 = 5.0;
/// Scroll speeds are reported to agents relative to this.
const SCROLL_SPEED_SCALE: f64 = 4.0;

const ACTIONS: [Action; 4] = [Action::Noop, Action::Left, Action::Right, Action::Jump];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct JungleConfig {
    pub shift_speed: u32,
    pub max_gaps: u32,
}

impl JungleConfig {
    pub fn validate(&self) -> Result<(), EnvError> {
        let reason = if self.shift_speed < 1 {
            "shift_speed must be at least 1"
        } else if self.max_gaps < 1 {
            "max_gaps must be at least 1"
        } else if f64::from(self.max_gaps) * (GAP_WIDTH + PLAYER_WIDTH) > SCREEN_WIDTH - PLAYER_WIDTH
        {
            "max_gaps gaps do not fit on one platform"
        } else {
            return Ok(());
        };
        Err(EnvError::InvalidConfig {
            game: Game::Jungle,
            reason: reason.to_string(),
        })
    }
}

pub fn jungle_version(id: u32) -> Result<JungleConfig, EnvError> {
    let (shift_speed, max_gaps) = match id {
        1 => (1, 1),
        2 => (2, 1),
        3 => (2, 2),
        _ => {
            return Err(EnvError::UnknownVersion {
                game: Game::Jungle,
                version: id,
            })
        }
    };
    Ok(JungleConfig {
        shift_speed,
        max_gaps,
    })
}

/// Reward knobs that are not part of a game version.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct JungleRewardConfig {
    /// Added on the DEATH tick.
    pub death_penalty: f64,
    /// Added per CORRECT_JUMP.
    pub correct_jump: f64,
    /// Weight of the per-tick below-threshold term. Any positive weight makes
    /// staying at the bottom the best long-run strategy, so it is off by
    /// default.
    pub btr_weight: f64,
}

impl Default for JungleRewardConfig {
    fn default() -> Self {
        Self {
            death_penalty: 0.0,
            correct_jump: 10.0,
            btr_weight: 0.0,
        }
    }
}

/// Horizontal opening `[left, left + width)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gap {
    pub left: f64,
    pub width: f64,
}

impl Gap {
    pub fn center(&self) -> f64 {
        self.left + self.width / 2.0
    }

    /// Whether a body spanning `[x, x + w]` fits entirely inside.
    pub fn contains_span(&self, x: f64, w: f64) -> bool {
        x >= self.left && x + w <= self.left + self.width
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Platform {
    /// Level 0 is the solid starting floor.
    pub level: u64,
    pub y: f64,
    pub gaps: Vec<Gap>,
}

impl Platform {
    pub fn passable(&self, x: f64) -> bool {
        self.gaps.iter().any(|g| g.contains_span(x, PLAYER_WIDTH))
    }
}

/// Generates the gaps of the platform above `below`: 1..=max_gaps gaps of
/// [`GAP_WIDTH`], separated by at least a body width, and placed so that a
/// straight jump from somewhere solid on `below` passes through one of them.
pub fn generate_gaps(config: &JungleConfig, below: &Platform, rng: &mut Rng) -> Vec<Gap> {
    let max_left = SCREEN_WIDTH - GAP_WIDTH;
    loop {
        let count = 1 + rng.below(u64::from(config.max_gaps)) as usize;
        let mut gaps: Vec<Gap> = Vec::with_capacity(count);
        let mut attempts = 0;
        while gaps.len() < count && attempts < 64 {
            attempts += 1;
            let left = rng.range_f64(0.0, max_left).round();
            let clear = gaps
                .iter()
                .all(|g| (left - g.left).abs() >= GAP_WIDTH + PLAYER_WIDTH);
            if clear {
                gaps.push(Gap {
                    left,
                    width: GAP_WIDTH,
                });
            }
        }
        if gaps.is_empty() {
            continue;
        }
        gaps.sort_by(|a, b| a.left.total_cmp(&b.left));
        if reachable(below, &gaps) {
            return gaps;
        }
    }
}

/// The first platform has a single gap over the starting position, so the
/// first climb never depends on the layout.
pub fn opening_gaps(rng: &mut Rng) -> Vec<Gap> {
    let start = (SCREEN_WIDTH - PLAYER_WIDTH) / 2.0;
    let centered = start - (GAP_WIDTH - PLAYER_WIDTH) / 2.0;
    let slack = (GAP_WIDTH - PLAYER_WIDTH) / 2.0;
    vec![Gap {
        left: (centered + rng.range_f64(-slack, slack)).round(),
        width: GAP_WIDTH,
    }]
}

/// Whether some standing position on `below` lies fully under one of `gaps`.
///
/// The body only ever sits at multiples of [`MOVE_SPEED`], so candidate
/// positions are checked on that grid.
pub fn reachable(below: &Platform, gaps: &[Gap]) -> bool {
    gaps.iter().any(|upper| {
        let first = (upper.left / MOVE_SPEED).ceil() as i64;
        let last = ((upper.left + upper.width - PLAYER_WIDTH) / MOVE_SPEED).floor() as i64;
        (first..=last).any(|k| {
            let x = k as f64 * MOVE_SPEED;
            upper.contains_span(x, PLAYER_WIDTH) && !below.passable(x)
        })
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct JungleMetrics {
    pub points: u64,
    pub max_points: u64,
    pub correct_jumps: u64,
    pub max_correct_jumps: u64,
}

impl JungleMetrics {
    pub fn record(&mut self, events: &[GameEvent]) {
        for event in events {
            match event.kind {
                EventKind::ScorePoint => {
                    self.points += 1;
                    self.max_points = self.max_points.max(self.points);
                }
                EventKind::CorrectJump => {
                    self.correct_jumps += 1;
                    self.max_correct_jumps = self.max_correct_jumps.max(self.correct_jumps);
                }
                EventKind::Death => {
                    self.points = 0;
                    self.correct_jumps = 0;
                }
                _ => {}
            }
        }
    }
}

/// `score = max_points + 100 * max_correct_jumps`.
pub fn jungle_score(metrics: &JungleMetrics) -> i64 {
    (metrics.max_points + 100 * metrics.max_correct_jumps) as i64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClimberState {
    /// Left edge of the body.
    pub x: f64,
    /// Feet height in world units.
    pub y: f64,
    pub vertical_velocity: f64,
    pub on_ground: bool,
    pub standing_level: Option<u64>,
    /// Level the character last left the ground from.
    pub takeoff_level: u64,
    /// World height of the visible bottom edge.
    pub scroll_offset: f64,
    pub scrolling_active: bool,
    pub scroll_ticks: u64,
}

impl ClimberState {
    pub fn center_x(&self) -> f64 {
        self.x + PLAYER_WIDTH / 2.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JungleState {
    pub config: JungleConfig,
    pub clock: Clock,
    pub climber: ClimberState,
    /// Live platforms, lowest first, consecutive levels.
    pub platforms: VecDeque<Platform>,
    /// Current-life counters.
    pub metrics: JungleMetrics,
}

impl JungleState {
    pub fn initial(config: JungleConfig, rng: &mut Rng) -> Self {
        let mut state = Self {
            config,
            clock: Clock::default(),
            climber: ClimberState {
                x: (SCREEN_WIDTH - PLAYER_WIDTH) / 2.0,
                y: 0.0,
                vertical_velocity: 0.0,
                on_ground: true,
                standing_level: Some(0),
                takeoff_level: 0,
                scroll_offset: 0.0,
                scrolling_active: false,
                scroll_ticks: 0,
            },
            platforms: VecDeque::from([Platform {
                level: 0,
                y: 0.0,
                gaps: Vec::new(),
            }]),
            metrics: JungleMetrics::default(),
        };
        state.extend_platforms(rng);
        state
    }

    pub fn platform(&self, level: u64) -> Option<&Platform> {
        let first = self.platforms.front()?.level;
        self.platforms.get(level.checked_sub(first)? as usize)
    }

    /// Scroll rate in units per tick: grows linearly with scroll time.
    pub fn scroll_speed(&self) -> f64 {
        if !self.climber.scrolling_active {
            return 0.0;
        }
        let elapsed_s = self.climber.scroll_ticks as f64 / f64::from(self.clock.ticks_per_second);
        f64::from(self.config.shift_speed) * (0.5 + elapsed_s / 120.0)
    }

    fn extend_platforms(&mut self, rng: &mut Rng) {
        let top = self.climber.scroll_offset + SCREEN_HEIGHT + 2.0 * PLATFORM_SPACING;
        while let Some(last) = self.platforms.back() {
            if last.y > top {
                break;
            }
            let level = last.level + 1;
            let gaps = if level == 1 {
                opening_gaps(rng)
            } else {
                generate_gaps(&self.config, last, rng)
            };
            self.platforms.push_back(Platform {
                level,
                y: level as f64 * PLATFORM_SPACING,
                gaps,
            });
        }
        let floor = self.climber.scroll_offset - 2.0 * PLATFORM_SPACING;
        while self.platforms.len() > 2 && self.platforms[1].y < floor {
            self.platforms.pop_front();
        }
    }
}

/// Advances the world one tick and returns the tick's events.
pub fn jungle_step_dynamics(state: &mut JungleState, action: Action, rng: &mut Rng) -> Vec<GameEvent> {
    let tick = state.clock.tick + 1;
    let mut events = Vec::new();
    let c = &mut state.climber;

    match action {
        Action::Left => c.x = (c.x - MOVE_SPEED).max(0.0),
        Action::Right => c.x = (c.x + MOVE_SPEED).min(SCREEN_WIDTH - PLAYER_WIDTH),
        Action::Jump if c.on_ground => {
            c.vertical_velocity = JUMP_VELOCITY;
            c.on_ground = false;
            c.takeoff_level = c.standing_level.unwrap_or(c.takeoff_level);
            c.standing_level = None;
        }
        _ => {}
    }

    if c.on_ground {
        let level = c.standing_level.unwrap_or(0);
        let first = state.platforms.front().map_or(0, |p| p.level);
        let falls = match level.checked_sub(first) {
            Some(i) => state.platforms[i as usize].passable(c.x),
            None => true,
        };
        if falls {
            c.on_ground = false;
            c.takeoff_level = level;
            c.standing_level = None;
            c.vertical_velocity = 0.0;
        }
    }

    if !c.on_ground {
        let old_y = c.y;
        let mut new_y = c.y + c.vertical_velocity;
        c.vertical_velocity -= GRAVITY;
        if new_y > old_y {
            // Rising: stop under the first solid line crossed.
            if let Some(p) = state
                .platforms
                .iter()
                .find(|p| p.y > old_y && p.y <= new_y && !p.passable(c.x))
            {
                new_y = p.y - 1.0;
                c.vertical_velocity = 0.0;
            }
            c.y = new_y;
        } else {
            // Falling: land on the highest solid line crossed.
            let landing = state
                .platforms
                .iter()
                .rev()
                .find(|p| p.y <= old_y && p.y >= new_y && !p.passable(c.x));
            match landing {
                Some(p) => {
                    c.y = p.y;
                    c.vertical_velocity = 0.0;
                    c.on_ground = true;
                    c.standing_level = Some(p.level);
                    if p.level > c.takeoff_level {
                        events.push(GameEvent {
                            kind: EventKind::CorrectJump,
                            tick,
                        });
                    }
                }
                None => c.y = new_y,
            }
        }
    }

    if !c.scrolling_active {
        let threshold = THRESHOLD_LEVEL as f64 * PLATFORM_SPACING;
        if c.y >= threshold {
            c.scrolling_active = true;
        }
    }

    let speed = state.scroll_speed();
    let c = &mut state.climber;
    if c.scrolling_active {
        c.scroll_offset += speed;
        c.scroll_ticks += 1;
    }

    if c.y + PLAYER_HEIGHT < c.scroll_offset {
        events.push(GameEvent {
            kind: EventKind::Death,
            tick,
        });
    } else if c.scrolling_active {
        events.push(GameEvent {
            kind: EventKind::ScorePoint,
            tick,
        });
    }

    state.extend_platforms(rng);
    state.metrics.record(&events);
    state.clock.advance();
    events
}

/// Below-threshold reward: `time_elapsed * 5`, positive and growing while the
/// character has not reached the scrolling threshold.
pub fn below_threshold_reward(elapsed_s: f64) -> f64 {
    elapsed_s * BTR_RATE
}

/// Per-tick reward. `prev` are the current-life counters before the step and
/// `elapsed_s` is the life's elapsed time. While no point has been scored the
/// weighted below-threshold term is paid out per second (scaled by the tick
/// duration); each survived tick after that is worth one, and each correct
/// jump is worth `config.correct_jump`.
pub fn jungle_reward(
    prev: &JungleMetrics,
    clock: &Clock,
    events: &[GameEvent],
    elapsed_s: f64,
    config: &JungleRewardConfig,
) -> f64 {
    let mut reward = 0.0;
    if prev.points == 0 {
        reward += config.btr_weight * below_threshold_reward(elapsed_s) * clock.tick_seconds();
    }
    for event in events {
        match event.kind {
            EventKind::ScorePoint => reward += 1.0,
            EventKind::Death => reward += config.death_penalty,
            EventKind::CorrectJump => reward += config.correct_jump,
            _ => {}
        }
    }
    reward
}

/// Fixed-length encoding: x, height above the bottom edge, vertical speed,
/// grounded flag, scroll speed, then for the next two platforms above the
/// feet their relative height and the nearest gaps (offset of the gap
/// center from the body center, gap width), zero-padded.
pub fn jungle_observe(state: &JungleState) -> Observation {
    let c = &state.climber;
    let mut obs = Vec::with_capacity(OBSERVATION_LEN);
    obs.push(c.center_x() / (SCREEN_WIDTH / 2.0) - 1.0);
    obs.push(((c.y - c.scroll_offset) / SCREEN_HEIGHT).clamp(-1.0, 1.0));
    obs.push((c.vertical_velocity / JUMP_VELOCITY).clamp(-1.0, 1.0));
    obs.push(if c.on_ground { 1.0 } else { 0.0 });
    obs.push((state.scroll_speed() / SCROLL_SPEED_SCALE).min(1.0));

    // Platforms above the one the character stands on or last left, so a
    // platform stays visible while the character is passing through it.
    let base = c.standing_level.unwrap_or(c.takeoff_level);
    let above = state.platforms.iter().filter(|p| p.level > base);
    let mut observed = 0;
    for p in above.take(PLATFORMS_OBSERVED) {
        observed += 1;
        obs.push(((p.y - c.y) / SCREEN_HEIGHT).clamp(-1.0, 1.0));
        let mut gaps: Vec<&Gap> = p.gaps.iter().collect();
        gaps.sort_by(|a, b| {
            let da = (a.center() - c.center_x()).abs();
            let db = (b.center() - c.center_x()).abs();
            da.total_cmp(&db).then(a.left.total_cmp(&b.left))
        });
        for slot in 0..GAP_SLOTS {
            match gaps.get(slot) {
                Some(g) => {
                    obs.push(((g.center() - c.center_x()) / GAP_OFFSET_SCALE).clamp(-1.0, 1.0));
                    obs.push(g.width / SCREEN_WIDTH);
                }
                None => obs.extend_from_slice(&[0.0, 0.0]),
            }
        }
    }
    obs.resize(OBSERVATION_LEN, 0.0);
    debug_assert!(observed <= PLATFORMS_OBSERVED);
    Observation(obs)
}

#[derive(Debug, Clone)]
pub struct JungleEnv {
    config: JungleConfig,
    reward_config: JungleRewardConfig,
    state: JungleState,
    layout_rng: Rng,
    started: bool,
    done: bool,
}

impl JungleEnv {
    pub fn new(config: JungleConfig) -> Result<Self, EnvError> {
        Self::with_rewards(config, JungleRewardConfig::default())
    }

    pub fn with_rewards(
        config: JungleConfig,
        reward_config: JungleRewardConfig,
    ) -> Result<Self, EnvError> {
        config.validate()?;
        let mut layout_rng = Rng::new(0);
        let state = JungleState::initial(config, &mut layout_rng);
        Ok(Self {
            config,
            reward_config,
            state,
            layout_rng,
            started: false,
            done: false,
        })
    }

    pub fn version(id: u32) -> Result<Self, EnvError> {
        Self::new(jungle_version(id)?)
    }

    pub fn config(&self) -> &JungleConfig {
        &self.config
    }

    pub fn state(&self) -> &JungleState {
        &self.state
    }

    pub fn metrics(&self) -> JungleMetrics {
        self.state.metrics
    }
}

impl Environment for JungleEnv {
    fn game(&self) -> Game {
        Game::Jungle
    }

    fn actions(&self) -> &'static [Action] {
        &ACTIONS
    }

    fn observation_len(&self) -> usize {
        OBSERVATION_LEN
    }

    fn reset(&mut self, seed: u64) -> Observation {
        self.layout_rng = Rng::new(derive_seed(seed, "layout"));
        self.state = JungleState::initial(self.config, &mut self.layout_rng);
        self.started = true;
        self.done = false;
        jungle_observe(&self.state)
    }

    fn step(&mut self, action: Action) -> Result<StepResult, EnvError> {
        if !self.started {
            return Err(EnvError::NotReset);
        }
        if self.done {
            return Err(EnvError::StepAfterDone);
        }
        if !ACTIONS.contains(&action) {
            return Err(EnvError::UnknownAction {
                game: Game::Jungle,
                action,
            });
        }
        let prev = self.state.metrics;
        let elapsed_s = self.state.clock.elapsed_seconds();
        let events = jungle_step_dynamics(&mut self.state, action, &mut self.layout_rng);
        let reward = jungle_reward(
            &prev,
            &self.state.clock,
            &events,
            elapsed_s,
            &self.reward_config,
        );
        let score_delta = events
            .iter()
            .map(|e| match e.kind {
                EventKind::ScorePoint => 1,
                EventKind::CorrectJump => 100,
                _ => 0,
            })
            .sum();
        self.done = events.iter().any(|e| e.kind == EventKind::Death);
        Ok(StepResult {
            observation: jungle_observe(&self.state),
            reward,
            done: self.done,
            events,
            score_delta,
        })
    }

    fn tick(&self) -> u64 {
        self.state.clock.tick
    }

    fn observe(&self) -> Observation {
        jungle_observe(&self.state)
    }

    fn entities(&self) -> Vec<Entity> {
        let c = &self.state.climber;
        let bottom = c.scroll_offset;
        let mut out = vec![Entity {
            id: 0,
            kind: EntityKind::Player,
            x: c.x,
            y: c.y - bottom,
            w: PLAYER_WIDTH,
            h: PLAYER_HEIGHT,
            facing: 1,
        }];
        let mut id = 1;
        for p in &self.state.platforms {
            let y = p.y - bottom;
            if !(-PLATFORM_SPACING..=SCREEN_HEIGHT + PLATFORM_SPACING).contains(&y) {
                continue;
            }
            let mut cursor = 0.0;
            for gap in p.gaps.iter().chain(std::iter::once(&Gap {
                left: SCREEN_WIDTH,
                width: 0.0,
            })) {
                if gap.left > cursor {
                    out.push(Entity {
                        id: p.level * 16 + id,
                        kind: EntityKind::Platform,
                        x: cursor,
                        y: y - PLATFORM_THICKNESS,
                        w: gap.left - cursor,
                        h: PLATFORM_THICKNESS,
                        facing: 0,
                    });
                    id += 1;
                }
                cursor = gap.left + gap.width;
            }
            id = 1;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fresh(version: u32, seed: u64) -> JungleEnv {
        let mut env = JungleEnv::version(version).unwrap();
        env.reset(seed);
        env
    }

    use crate::games::scripted::jungle_climber;

    fn climb_action(state: &JungleState) -> Action {
        jungle_climber(state)
    }

    #[test]
    fn version_table() {
        assert_eq!(jungle_version(1).unwrap(), JungleConfig { shift_speed: 1, max_gaps: 1 });
        assert_eq!(jungle_version(2).unwrap(), JungleConfig { shift_speed: 2, max_gaps: 1 });
        assert_eq!(jungle_version(3).unwrap(), JungleConfig { shift_speed: 2, max_gaps: 2 });
        assert!(jungle_version(4).is_err());
        assert!(JungleEnv::new(JungleConfig { shift_speed: 0, max_gaps: 1 }).is_err());
        assert!(JungleEnv::new(JungleConfig { shift_speed: 1, max_gaps: 0 }).is_err());
    }

    #[test]
    fn action_list_is_fixed() {
        let env = JungleEnv::version(1).unwrap();
        assert_eq!(env.actions(), &[Action::Noop, Action::Left, Action::Right, Action::Jump]);
        assert_eq!(env.observation_len(), OBSERVATION_LEN);
    }

    #[test]
    fn attack_is_not_a_jungle_action() {
        let mut env = fresh(1, 1);
        assert!(matches!(
            env.step(Action::Attack),
            Err(EnvError::UnknownAction { .. })
        ));
    }

    #[test]
    fn score_formula() {
        let m = JungleMetrics { points: 0, max_points: 1000, correct_jumps: 0, max_correct_jumps: 5 };
        assert_eq!(jungle_score(&m), 1500);
        assert_eq!(jungle_score(&JungleMetrics::default()), 0);
    }

    #[test]
    fn no_points_before_threshold() {
        let mut env = fresh(1, 3);
        for _ in 0..600 {
            let r = env.step(Action::Noop).unwrap();
            assert!(!r.has_event(EventKind::ScorePoint));
            assert!(!env.state().climber.scrolling_active);
        }
        assert_eq!(env.state().climber.scroll_offset, 0.0);
    }

    #[test]
    fn climbing_lands_correct_jumps_and_starts_scrolling() {
        let mut env = fresh(1, 9);
        let mut correct = 0;
        for _ in 0..2000 {
            let action = climb_action(env.state());
            let r = env.step(action).unwrap();
            correct += r.count(EventKind::CorrectJump);
            if env.state().climber.scrolling_active {
                break;
            }
        }
        assert!(correct >= 1, "correct jumps {correct}");
        assert!(env.state().climber.scrolling_active);
        let r = env.step(Action::Noop).unwrap();
        assert!(r.has_event(EventKind::ScorePoint));
        assert_eq!(r.score_delta, 1);
    }

    #[test]
    fn standing_still_after_threshold_dies_and_keeps_maxima() {
        let mut env = fresh(1, 4);
        let mut session = JungleMetrics::default();
        for _ in 0..5000 {
            let action = climb_action(env.state());
            let r = env.step(action).unwrap();
            session.record(&r.events);
            if env.state().climber.scrolling_active {
                break;
            }
        }
        assert!(env.state().climber.scrolling_active);
        let mut died = false;
        for _ in 0..20_000 {
            let r = env.step(Action::Noop).unwrap();
            session.record(&r.events);
            if r.done {
                assert!(r.has_event(EventKind::Death));
                assert!(!r.has_event(EventKind::ScorePoint));
                died = true;
                break;
            }
        }
        assert!(died);
        assert_eq!(session.points, 0);
        assert!(session.max_points > 0);
        assert!(session.max_correct_jumps >= 1);
        assert_eq!(env.step(Action::Noop), Err(EnvError::StepAfterDone));
    }

    #[test]
    fn reward_terms() {
        let clock = Clock::default();
        let cfg = JungleRewardConfig::default();
        let scoring = JungleMetrics { points: 10, ..Default::default() };
        let point = [GameEvent { kind: EventKind::ScorePoint, tick: 1 }];
        assert_eq!(jungle_reward(&scoring, &clock, &point, 30.0, &cfg), 1.0);

        let jump = [GameEvent { kind: EventKind::CorrectJump, tick: 1 }];
        assert_eq!(jungle_reward(&scoring, &clock, &jump, 30.0, &cfg), cfg.correct_jump);

        let death = [GameEvent { kind: EventKind::Death, tick: 1 }];
        assert_eq!(jungle_reward(&scoring, &clock, &death, 5.0, &cfg), 0.0);
        let harsh = JungleRewardConfig { death_penalty: -10.0, ..cfg };
        assert_eq!(jungle_reward(&scoring, &clock, &death, 5.0, &harsh), -10.0);
    }

    #[test]
    fn below_threshold_term_grows_while_score_is_zero() {
        assert!(below_threshold_reward(1.0) > 0.0);
        assert!(below_threshold_reward(2.0) > below_threshold_reward(1.0));
        assert_eq!(below_threshold_reward(3.0), 15.0);

        let clock = Clock::default();
        let weighted = JungleRewardConfig { btr_weight: 1.0, ..Default::default() };
        let zero = JungleMetrics::default();
        let early = jungle_reward(&zero, &clock, &[], 1.0, &weighted);
        let later = jungle_reward(&zero, &clock, &[], 2.0, &weighted);
        assert!((early - 5.0 / 60.0).abs() < 1e-12);
        assert!(later > early);

        // Gone once the life has scored.
        let scoring = JungleMetrics { points: 1, ..Default::default() };
        assert_eq!(jungle_reward(&scoring, &clock, &[], 2.0, &weighted), 0.0);
        // Off by default.
        assert_eq!(jungle_reward(&zero, &clock, &[], 2.0, &JungleRewardConfig::default()), 0.0);
    }

    #[test]
    fn gap_center_offset_is_zero_when_centered() {
        let mut env = fresh(1, 2);
        let gap = env.state.platform(1).unwrap().gaps[0];
        env.state.climber.x = gap.center() - PLAYER_WIDTH / 2.0;
        let obs = env.observe();
        assert!(obs.0[6].abs() < 1e-12);
        assert!(obs.0[7] > 0.0);
    }

    #[test]
    fn identical_layouts_give_identical_observations() {
        let a = fresh(2, 17);
        let mut b = fresh(2, 99);
        b.state = a.state.clone();
        assert_eq!(a.observe(), b.observe());
    }

    #[test]
    fn platforms_keep_gap_invariants() {
        let mut rng = Rng::new(5);
        for version in 1..=3 {
            let config = jungle_version(version).unwrap();
            let mut below = Platform { level: 0, y: 0.0, gaps: Vec::new() };
            for level in 1..2000 {
                let gaps = generate_gaps(&config, &below, &mut rng);
                assert!(!gaps.is_empty() && gaps.len() <= config.max_gaps as usize);
                for pair in gaps.windows(2) {
                    assert!(pair[0].left + pair[0].width + PLAYER_WIDTH <= pair[1].left);
                }
                for g in &gaps {
                    assert!(g.width > PLAYER_WIDTH);
                    assert!(g.left >= 0.0 && g.left + g.width <= SCREEN_WIDTH);
                }
                below = Platform { level, y: level as f64 * PLATFORM_SPACING, gaps };
            }
        }
    }

    #[test]
    fn jump_clears_one_spacing_but_not_two() {
        let apex: f64 = (0..100)
            .scan(0.0, |y, k| {
                *y += JUMP_VELOCITY - GRAVITY * k as f64;
                Some(*y)
            })
            .fold(0.0, f64::max);
        assert!(apex > PLATFORM_SPACING);
        assert!(apex < 2.0 * PLATFORM_SPACING);
    }
}

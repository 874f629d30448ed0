//! Batkill: a single-screen arena where bats fly in from the edges and the
//! player kills them with a short-range attack or gets hit.
//!
//! The arena is one-dimensional horizontally (800 units wide) with a small
//! vertical component for jumping. Bats travel in a straight line from the
//! edge they spawned at towards the opposite edge, so every bat ends in
//! exactly one of: killed, hits the player, or (only when jumping is enabled)
//! passes underneath and leaves the arena.

use serde::{Deserialize, Serialize};

use crate::env::{
    Action, Clock, Entity, EntityKind, EnvError, Environment, EventKind, Game, GameEvent,
    Observation, StepResult,
};
use crate::rng::{derive_seed, Rng};

pub const ARENA_WIDTH: f64 = 800.0;
pub const PLAYER_SPEED: f64 = 4.0;
pub const PLAYER_WIDTH: f64 = 30.0;
pub const PLAYER_HEIGHT: f64 = 60.0;
pub const ATTACK_REACH: f64 = 45.0;
pub const ATTACK_ACTIVE_TICKS: u32 = 4;
pub const BAT_WIDTH: f64 = 20.0;
pub const BAT_HEIGHT: f64 = 20.0;
/// Bats fly with their bottom edge somewhere in `[0, BAT_MAX_LANE]`.
pub const BAT_MAX_LANE: f64 = 30.0;
pub const JUMP_VELOCITY: f64 = 9.0;
pub const GRAVITY: f64 = 0.5;
/// Training episode length; sessions keep going across episode boundaries.
pub const EPISODE_TICKS: u64 = 600;
/// Slots in the observation, nearest bats first.
pub const BAT_SLOTS: usize = 4;
pub const OBSERVATION_LEN: usize = 5 + 3 * BAT_SLOTS;

const INITIAL_SPAWN_STAGGER: u64 = 30;
const SPAWN_DELAY_START: u64 = 90;
const SPAWN_DELAY_STEP: u64 = 6;
pub const SPAWN_DELAY_FLOOR: u64 = 12;

const ACTIONS: [Action; 5] = [
    Action::Noop,
    Action::Left,
    Action::Right,
    Action::Attack,
    Action::Jump,
];

pub const REWARD_BAT_KILLED: f64 = 5.0;
pub const REWARD_HIT_TAKEN: f64 = -5.0;
pub const REWARD_ATTACK: f64 = -0.1;
pub const REWARD_JUMP: f64 = -0.2;
pub const REWARD_MOVING_TOWARDS: f64 = 0.1;
pub const REWARD_FACING_NEAREST: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatkillConfig {
    pub bats: u32,
    pub bat_speed: u32,
    pub attack_cooldown: u32,
    pub jump: bool,
}

impl BatkillConfig {
    pub fn validate(&self) -> Result<(), EnvError> {
        let reason = if self.bats < 1 {
            "bats must be at least 1"
        } else if self.bat_speed < 1 {
            "bat_speed must be at least 1"
        } else {
            return Ok(());
        };
        Err(EnvError::InvalidConfig {
            game: Game::Batkill,
            reason: reason.to_string(),
        })
    }
}

/// The five shipped versions.
///
/// Rows 2 and 3 of the original version table are identical; row 2 is taken
/// as "more bats" (3 bats at the old speed) and row 3 as "faster bats" so that
/// each version changes one thing.
pub fn batkill_version(id: u32) -> Result<BatkillConfig, EnvError> {
    let (bats, bat_speed, attack_cooldown, jump) = match id {
        1 => (2, 3, 10, false),
        2 => (3, 3, 10, false),
        3 => (3, 6, 10, false),
        4 => (3, 6, 15, false),
        5 => (3, 6, 15, true),
        _ => {
            return Err(EnvError::UnknownVersion {
                game: Game::Batkill,
                version: id,
            })
        }
    };
    Ok(BatkillConfig {
        bats,
        bat_speed,
        attack_cooldown,
        jump,
    })
}

/// Ticks before the next bat appears once `kills` bats have been killed.
pub fn spawn_delay(kills: u64) -> u64 {
    SPAWN_DELAY_START
        .saturating_sub(SPAWN_DELAY_STEP.saturating_mul(kills))
        .max(SPAWN_DELAY_FLOOR)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn sign(self) -> f64 {
        match self {
            Side::Left => -1.0,
            Side::Right => 1.0,
        }
    }

    fn mirrored(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlayerState {
    pub x: f64,
    pub facing: Side,
    /// Height of the feet above the ground; zero when grounded.
    pub height: f64,
    pub vertical_velocity: f64,
    pub cooldown_remaining: u32,
    pub attack_remaining: u32,
    /// Facing captured when the current attack started.
    pub attack_facing: Side,
}

impl PlayerState {
    pub fn airborne(&self) -> bool {
        self.height > 0.0 || self.vertical_velocity > 0.0
    }

    pub fn attack_active(&self) -> bool {
        self.attack_remaining > 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bat {
    pub id: u64,
    pub x: f64,
    /// Bottom edge of the bat above the ground.
    pub lane: f64,
    pub direction: Side,
    pub speed: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatkillMetrics {
    pub bats_killed: u64,
    pub hits_taken: u64,
}

impl BatkillMetrics {
    pub fn record(&mut self, events: &[GameEvent]) {
        for event in events {
            match event.kind {
                EventKind::BatKilled => self.bats_killed += 1,
                EventKind::HitTaken => self.hits_taken += 1,
                _ => {}
            }
        }
    }
}

/// `score = bats_killed - hits_taken`. Negative when hits outnumber kills.
pub fn batkill_score(metrics: &BatkillMetrics) -> i64 {
    metrics.bats_killed as i64 - metrics.hits_taken as i64
}

/// Everything that moves in one episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatkillState {
    pub config: BatkillConfig,
    pub clock: Clock,
    pub player: PlayerState,
    pub bats: Vec<Bat>,
    /// Ticks at which pending bats appear.
    pub pending_spawns: Vec<u64>,
    pub next_bat_id: u64,
    pub metrics: BatkillMetrics,
}

impl BatkillState {
    pub fn initial(config: BatkillConfig) -> Self {
        let pending_spawns = (1..=u64::from(config.bats))
            .map(|i| i * INITIAL_SPAWN_STAGGER)
            .collect();
        Self {
            config,
            clock: Clock::default(),
            player: PlayerState {
                x: ARENA_WIDTH / 2.0,
                facing: Side::Right,
                height: 0.0,
                vertical_velocity: 0.0,
                cooldown_remaining: 0,
                attack_remaining: 0,
                attack_facing: Side::Right,
            },
            bats: Vec::new(),
            pending_spawns,
            next_bat_id: 0,
            metrics: BatkillMetrics::default(),
        }
    }

    /// Nearest bat by horizontal distance; ties broken by id.
    pub fn nearest_bat(&self) -> Option<&Bat> {
        self.bats.iter().min_by(|a, b| {
            let da = (a.x - self.player.x).abs();
            let db = (b.x - self.player.x).abs();
            da.total_cmp(&db).then(a.id.cmp(&b.id))
        })
    }

    /// Left-right reflection of the whole world.
    pub fn mirrored(&self) -> Self {
        let mut m = self.clone();
        m.player.x = ARENA_WIDTH - m.player.x;
        m.player.facing = m.player.facing.mirrored();
        m.player.attack_facing = m.player.attack_facing.mirrored();
        for bat in &mut m.bats {
            bat.x = ARENA_WIDTH - bat.x;
            bat.direction = bat.direction.mirrored();
        }
        m
    }
}

/// Shaping facts about one transition, used by [`batkill_reward`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Shaping {
    pub moved_towards_nearest: bool,
    pub facing_nearest: bool,
}

/// Reward for one tick: the event rewards plus the small action and
/// positioning terms.
pub fn batkill_reward(action: Action, events: &[GameEvent], shaping: Shaping) -> f64 {
    let mut reward = 0.0;
    for event in events {
        match event.kind {
            EventKind::BatKilled => reward += REWARD_BAT_KILLED,
            EventKind::HitTaken => reward += REWARD_HIT_TAKEN,
            _ => {}
        }
    }
    match action {
        Action::Attack => reward += REWARD_ATTACK,
        Action::Jump => reward += REWARD_JUMP,
        _ => {}
    }
    if shaping.moved_towards_nearest {
        reward += REWARD_MOVING_TOWARDS;
    }
    if shaping.facing_nearest {
        reward += REWARD_FACING_NEAREST;
    }
    reward
}

fn facing_towards(facing: Side, from: f64, to: f64) -> bool {
    let dx = to - from;
    dx == 0.0 || dx.signum() == facing.sign()
}

/// Advances the world one tick. Returns the events and the shaping facts
/// of the transition. `action` must already be validated.
pub fn batkill_step_dynamics(
    state: &mut BatkillState,
    action: Action,
    rng: &mut Rng,
) -> (Vec<GameEvent>, Shaping) {
    let config = state.config;
    let tick = state.clock.tick + 1;
    let mut events = Vec::new();
    let nearest_before = state.nearest_bat().map(|b| b.x);
    let x_before = state.player.x;

    let player = &mut state.player;
    let half = PLAYER_WIDTH / 2.0;
    match action {
        Action::Left | Action::Right => {
            let side = if action == Action::Left {
                Side::Left
            } else {
                Side::Right
            };
            player.facing = side;
            player.x = (player.x + side.sign() * PLAYER_SPEED).clamp(half, ARENA_WIDTH - half);
        }
        Action::Attack => {
            if player.cooldown_remaining == 0 {
                player.attack_remaining = ATTACK_ACTIVE_TICKS;
                player.attack_facing = player.facing;
                player.cooldown_remaining = config.attack_cooldown;
            }
        }
        Action::Jump => {
            if config.jump && !player.airborne() {
                player.vertical_velocity = JUMP_VELOCITY;
            }
        }
        Action::Noop => {}
    }

    if player.airborne() {
        player.height += player.vertical_velocity;
        player.vertical_velocity -= GRAVITY;
        if player.height <= 0.0 {
            player.height = 0.0;
            player.vertical_velocity = 0.0;
        }
    }

    for bat in &mut state.bats {
        bat.x += bat.direction.sign() * bat.speed;
    }

    let mut removed = 0u64;
    if player.attack_active() {
        let facing = player.attack_facing.sign();
        let px = player.x;
        state.bats.retain(|bat| {
            let ahead = (bat.x - px) * facing;
            let hit = (0.0..=ATTACK_REACH).contains(&ahead);
            if hit {
                events.push(GameEvent {
                    kind: EventKind::BatKilled,
                    tick,
                });
            }
            !hit
        });
    }

    let contact = (PLAYER_WIDTH + BAT_WIDTH) / 2.0;
    let (px, ph) = (player.x, player.height);
    state.bats.retain(|bat| {
        let overlaps = (bat.x - px).abs() < contact && ph < bat.lane + BAT_HEIGHT;
        if overlaps {
            events.push(GameEvent {
                kind: EventKind::HitTaken,
                tick,
            });
            return false;
        }
        let gone = bat.x < -BAT_WIDTH || bat.x > ARENA_WIDTH + BAT_WIDTH;
        if gone {
            removed += 1;
        }
        !gone
    });

    if player.attack_remaining > 0 {
        player.attack_remaining -= 1;
    }
    if player.cooldown_remaining > 0 {
        player.cooldown_remaining -= 1;
    }

    state.metrics.record(&events);
    let resolved = events.len() as u64 + removed;
    let delay = spawn_delay(state.metrics.bats_killed);
    for _ in 0..resolved {
        state.pending_spawns.push(tick + delay);
    }

    let mut due = 0;
    state.pending_spawns.retain(|&t| {
        let ready = t <= tick;
        if ready {
            due += 1;
        }
        !ready
    });
    for _ in 0..due {
        if state.bats.len() >= config.bats as usize {
            break;
        }
        let direction = if rng.chance(0.5) { Side::Right } else { Side::Left };
        let x = match direction {
            Side::Right => -BAT_WIDTH / 2.0,
            Side::Left => ARENA_WIDTH + BAT_WIDTH / 2.0,
        };
        state.bats.push(Bat {
            id: state.next_bat_id,
            x,
            lane: rng.range_f64(0.0, BAT_MAX_LANE),
            direction,
            speed: f64::from(config.bat_speed),
        });
        state.next_bat_id += 1;
    }

    state.clock.advance();

    let moved = state.player.x - x_before;
    let moved_towards_nearest = match nearest_before {
        Some(bx) if moved != 0.0 => (bx - x_before).signum() == moved.signum(),
        _ => false,
    };
    let facing_nearest = state
        .nearest_bat()
        .is_some_and(|b| facing_towards(state.player.facing, state.player.x, b.x));
    (
        events,
        Shaping {
            moved_towards_nearest,
            facing_nearest,
        },
    )
}

/// Fixed-length encoding: player x, facing, cooldown, airborne flag, height,
/// then per slot (nearest bats first) relative x, direction, presence.
pub fn batkill_observe(state: &BatkillState) -> Observation {
    let p = &state.player;
    let mut obs = Vec::with_capacity(OBSERVATION_LEN);
    obs.push(p.x / (ARENA_WIDTH / 2.0) - 1.0);
    obs.push(p.facing.sign());
    let cooldown = if state.config.attack_cooldown == 0 {
        0.0
    } else {
        f64::from(p.cooldown_remaining) / f64::from(state.config.attack_cooldown)
    };
    obs.push(cooldown);
    obs.push(if p.airborne() { 1.0 } else { 0.0 });
    let apex = JUMP_VELOCITY * JUMP_VELOCITY / (2.0 * GRAVITY);
    obs.push((p.height / apex).min(1.0));

    let mut order: Vec<&Bat> = state.bats.iter().collect();
    order.sort_by(|a, b| {
        let da = (a.x - p.x).abs();
        let db = (b.x - p.x).abs();
        da.total_cmp(&db).then(a.id.cmp(&b.id))
    });
    for slot in 0..BAT_SLOTS {
        match order.get(slot) {
            Some(bat) => {
                obs.push(((bat.x - p.x) / ARENA_WIDTH).clamp(-1.0, 1.0));
                obs.push(bat.direction.sign());
                obs.push(1.0);
            }
            None => obs.extend_from_slice(&[0.0, 0.0, 0.0]),
        }
    }
    Observation(obs)
}

#[derive(Debug, Clone)]
pub struct BatkillEnv {
    config: BatkillConfig,
    state: BatkillState,
    spawn_rng: Rng,
    started: bool,
    done: bool,
}

impl BatkillEnv {
    pub fn new(config: BatkillConfig) -> Result<Self, EnvError> {
        config.validate()?;
        Ok(Self {
            config,
            state: BatkillState::initial(config),
            spawn_rng: Rng::new(0),
            started: false,
            done: false,
        })
    }

    pub fn version(id: u32) -> Result<Self, EnvError> {
        Self::new(batkill_version(id)?)
    }

    pub fn config(&self) -> &BatkillConfig {
        &self.config
    }

    pub fn state(&self) -> &BatkillState {
        &self.state
    }

    pub fn metrics(&self) -> BatkillMetrics {
        self.state.metrics
    }
}

impl Environment for BatkillEnv {
    fn game(&self) -> Game {
        Game::Batkill
    }

    fn actions(&self) -> &'static [Action] {
        &ACTIONS
    }

    fn observation_len(&self) -> usize {
        OBSERVATION_LEN
    }

    fn reset(&mut self, seed: u64) -> Observation {
        self.state = BatkillState::initial(self.config);
        self.spawn_rng = Rng::new(derive_seed(seed, "spawn"));
        self.started = true;
        self.done = false;
        batkill_observe(&self.state)
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
                game: Game::Batkill,
                action,
            });
        }
        let (events, shaping) = batkill_step_dynamics(&mut self.state, action, &mut self.spawn_rng);
        let reward = batkill_reward(action, &events, shaping);
        let score_delta = events
            .iter()
            .map(|e| match e.kind {
                EventKind::BatKilled => 1,
                EventKind::HitTaken => -1,
                _ => 0,
            })
            .sum();
        self.done = self.state.clock.tick >= EPISODE_TICKS;
        Ok(StepResult {
            observation: batkill_observe(&self.state),
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
        batkill_observe(&self.state)
    }

    fn entities(&self) -> Vec<Entity> {
        let p = &self.state.player;
        let mut out = vec![Entity {
            id: 0,
            kind: EntityKind::Player,
            x: p.x - PLAYER_WIDTH / 2.0,
            y: p.height,
            w: PLAYER_WIDTH,
            h: PLAYER_HEIGHT,
            facing: p.facing.sign() as i8,
        }];
        out.extend(self.state.bats.iter().map(|b| Entity {
            id: b.id + 1,
            kind: EntityKind::Bat,
            x: b.x - BAT_WIDTH / 2.0,
            y: b.lane,
            w: BAT_WIDTH,
            h: BAT_HEIGHT,
            facing: b.direction.sign() as i8,
        }));
        out
    }
}

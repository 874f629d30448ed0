//! JSON frames exchanged with play clients over the WebSocket.
//!
//! The server speaks first with `start`, then sends one `state` per tick
//! and a final `end`. Clients send `input` frames carrying the set of
//! currently held actions; the server resolves that set to a single action
//! per tick.

use serde::{Deserialize, Serialize};

use playbalance_core::env::{Action, Entity, Game};
use playbalance_core::games::SessionMetrics;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ServerFrame {
    Start {
        game: Game,
        version: u32,
        session_id: u64,
        tps: u32,
        time_s: u32,
        actions: Vec<Action>,
    },
    State {
        tick: u64,
        time_left_s: f64,
        score: i64,
        entities: Vec<Entity>,
        events: Vec<String>,
    },
    End {
        score: i64,
        metrics: SessionMetrics,
        session_id: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ClientFrame {
    Input { held: Vec<String> },
}

/// Fixed resolution order when several actions are held at once.
pub const PRIORITY: [Action; 4] = [Action::Attack, Action::Jump, Action::Left, Action::Right];

/// Turns a held set into the one action applied this tick. Names the game
/// does not know are ignored, as are actions outside its action set.
pub fn resolve_held(held: &[String], available: &[Action]) -> Action {
    let held: Vec<Action> = held.iter().filter_map(|n| n.parse().ok()).collect();
    PRIORITY
        .into_iter()
        .find(|a| held.contains(a) && available.contains(a))
        .unwrap_or(Action::Noop)
}

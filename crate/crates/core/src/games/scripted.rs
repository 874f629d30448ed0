//! Hand-written reference players. They are used as test bots and as a
//! sanity bound on what a trained agent can reach; they read the full game
//! state rather than the observation vector.

use crate::env::Action;

use super::batkill::{BatkillState, ATTACK_REACH, PLAYER_WIDTH as BAT_PLAYER_WIDTH};
use super::jungle::{JungleState, Platform, GAP_WIDTH, MOVE_SPEED, PLAYER_WIDTH, SCREEN_WIDTH};

/// Turns towards the nearest bat and attacks whenever it is in reach.
pub fn batkill_fighter(state: &BatkillState) -> Action {
    let p = &state.player;
    let Some(bat) = state.nearest_bat() else {
        return Action::Noop;
    };
    let dx = bat.x - p.x;
    let facing = p.facing.sign();
    if dx * facing < 0.0 && dx.abs() > BAT_PLAYER_WIDTH / 2.0 {
        return if dx < 0.0 { Action::Left } else { Action::Right };
    }
    if dx.abs() <= ATTACK_REACH + bat.speed && p.cooldown_remaining == 0 {
        Action::Attack
    } else {
        Action::Noop
    }
}

/// Walks under the closest reachable gap of the next platform, jumps, and
/// steps out of the gap towards the next takeoff spot once above it. When no
/// gap is reachable from the current stretch of platform it drops through
/// its own gap and tries again from below.
pub fn jungle_climber(state: &JungleState) -> Action {
    let c = &state.climber;
    if !c.on_ground {
        let passed = state
            .platforms
            .iter()
            .rev()
            .find(|p| p.y < c.y && p.level > 0);
        let Some(passed) = passed else {
            return Action::Noop;
        };
        if !passed.passable(c.x) {
            return Action::Noop;
        }
        let next = state.platform(passed.level + 1);
        let target = next.and_then(|n| takeoff_spot(n, passed, c.x, (0.0, f64::MAX)));
        let gap_center = passed
            .gaps
            .iter()
            .find(|g| g.contains_span(c.x, PLAYER_WIDTH))
            .map_or(c.center_x(), |g| g.center());
        let go_left = match target {
            Some(t) => t < c.x,
            None => c.center_x() < gap_center,
        };
        return if go_left { Action::Left } else { Action::Right };
    }
    let Some(next) = state.platforms.iter().find(|p| p.y > c.y) else {
        return Action::Noop;
    };
    let Some(current) = c.standing_level.and_then(|l| state.platform(l)) else {
        return Action::Noop;
    };
    let stretch = walkable_stretch(current, c.x);
    match takeoff_spot(next, current, c.x, stretch) {
        Some(x) if (x - c.x).abs() < MOVE_SPEED / 2.0 => Action::Jump,
        Some(x) if x < c.x => Action::Left,
        Some(_) => Action::Right,
        None => {
            // Drop through the nearest own gap.
            let nearest = current
                .gaps
                .iter()
                .min_by(|a, b| (a.center() - c.center_x()).abs().total_cmp(&(b.center() - c.center_x()).abs()));
            match nearest {
                Some(g) if g.center() < c.center_x() => Action::Left,
                Some(_) => Action::Right,
                None => Action::Noop,
            }
        }
    }
}

/// Leftmost and rightmost positions reachable by walking from `x`.
fn walkable_stretch(platform: &Platform, x: f64) -> (f64, f64) {
    let mut lo = x;
    while lo - MOVE_SPEED >= 0.0 && !platform.passable(lo - MOVE_SPEED) {
        lo -= MOVE_SPEED;
    }
    let mut hi = x;
    while hi + MOVE_SPEED <= SCREEN_WIDTH - PLAYER_WIDTH && !platform.passable(hi + MOVE_SPEED) {
        hi += MOVE_SPEED;
    }
    (lo, hi)
}

fn takeoff_spot(next: &Platform, current: &Platform, x: f64, (lo, hi): (f64, f64)) -> Option<f64> {
    let steps = ((GAP_WIDTH - PLAYER_WIDTH) / MOVE_SPEED) as i64;
    next.gaps
        .iter()
        .flat_map(|g| {
            let first = (g.left / MOVE_SPEED).ceil() as i64;
            (first..=first + steps)
                .map(|k| k as f64 * MOVE_SPEED)
                .filter(|&s| g.contains_span(s, PLAYER_WIDTH))
        })
        .filter(|&s| !current.passable(s) && s >= lo && s <= hi)
        .min_by(|a, b| (a - x).abs().total_cmp(&(b - x).abs()))
}

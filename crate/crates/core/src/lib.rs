//! Automated balance testing for versioned 2D platformer games.
//!
//! Games are headless, deterministic simulations behind the [`env`] contract.
//! Agents are trained on them with PPO or A2C ([`rl`]) on top of a small
//! hand-written actor-critic network ([`nn`]), evaluated in timed sessions
//! alongside a random baseline and imported human sessions ([`session`],
//! [`eval`]), and the resulting score matrix is turned into difficulty-spike
//! and skill-vs-chance findings ([`analyzer`]).

pub mod analyzer;
pub mod env;
pub mod eval;
pub mod games;
pub mod nn;
pub mod rl;
pub mod rng;
pub mod session;

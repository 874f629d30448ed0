//! The balance-testing pipeline as a command-line tool, plus the play
//! server that records human sessions.

pub mod commands;
pub mod config;
pub mod protocol;
pub mod server;

//! Authoritative play server for human sessions.
//!
//! Each WebSocket connection gets its own session with its own seed and its
//! own simulation loop. The client only ever influences the game through
//! the held-action set; the server resolves it to one action per tick, steps
//! the simulation, and broadcasts the resulting state. A finished session is
//! written as an ordinary session log; a session whose connection drops is
//! discarded.

use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use futures_util::{SinkExt, StreamExt};
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::mpsc;
use tokio_tungstenite::tungstenite::Message;
use tracing::{debug, info, warn};

use playbalance_core::games::VersionSpec;
use playbalance_core::rl::Skill;
use playbalance_core::rng::derive_indexed;
use playbalance_core::session::{LiveSession, PlayerInfo, SessionRecord};

use crate::protocol::{resolve_held, ClientFrame, ServerFrame};

/// When the simulation advances.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pacing {
    /// One tick per interval; inputs arriving between ticks are folded in
    /// at the next tick, the latest one winning.
    Realtime(Duration),
    /// One tick per received input frame. Meant for scripted clients that
    /// need exact control over which input lands on which tick.
    Lockstep,
}

#[derive(Debug, Clone)]
pub struct ServeOptions {
    pub spec: VersionSpec,
    pub skill: Skill,
    pub time_s: u32,
    pub pacing: Pacing,
    pub base_seed: u64,
    /// Finished sessions are written here.
    pub session_dir: PathBuf,
}

impl ServeOptions {
    pub fn session_seed(&self, session_id: u64) -> u64 {
        derive_indexed(self.base_seed, "session", session_id)
    }

    pub fn log_path(&self, session_id: u64) -> PathBuf {
        self.session_dir.join(format!(
            "human-{}-v{}-{}.jsonl",
            self.spec.game(),
            self.spec.version(),
            session_id
        ))
    }
}

/// Accepts connections forever, one session each.
pub async fn serve(listener: TcpListener, options: ServeOptions) -> Result<()> {
    std::fs::create_dir_all(&options.session_dir)
        .with_context(|| format!("creating {}", options.session_dir.display()))?;
    let options = Arc::new(options);
    let next_id = Arc::new(AtomicU64::new(1));
    info!(addr = %listener.local_addr()?, "play server listening");
    loop {
        let (stream, peer) = listener.accept().await?;
        let id = next_id.fetch_add(1, Ordering::Relaxed);
        let options = Arc::clone(&options);
        tokio::spawn(async move {
            match run_connection(stream, id, &options).await {
                Ok(Some(path)) => info!(session = id, %peer, path = %path.display(), "session saved"),
                Ok(None) => warn!(session = id, %peer, "connection dropped, session discarded"),
                Err(e) => warn!(session = id, %peer, "session failed: {e:#}"),
            }
        });
    }
}

fn text(frame: &ServerFrame) -> Message {
    Message::text(serde_json::to_string(frame).expect("frames serialize"))
}

fn state_frame(session: &LiveSession, events: Vec<String>) -> ServerFrame {
    let tps = f64::from(session.header().ticks_per_second);
    ServerFrame::State {
        tick: session.tick(),
        time_left_s: session.remaining_ticks() as f64 / tps,
        score: session.metrics().score(),
        entities: session.env().entities(),
        events,
    }
}

/// Runs one session to completion. Returns the log path, or `None` if the
/// client went away first.
async fn run_connection(
    stream: TcpStream,
    session_id: u64,
    options: &ServeOptions,
) -> Result<Option<PathBuf>> {
    let ws = tokio_tungstenite::accept_async(stream)
        .await
        .context("websocket handshake")?;
    let (mut sink, mut source) = ws.split();

    let (tx, mut inputs) = mpsc::unbounded_channel::<Vec<String>>();
    let reader = tokio::spawn(async move {
        while let Some(message) = source.next().await {
            let Ok(message) = message else { break };
            match message {
                Message::Text(body) => match serde_json::from_str::<ClientFrame>(&body) {
                    Ok(ClientFrame::Input { held }) => {
                        if tx.send(held).is_err() {
                            break;
                        }
                    }
                    Err(e) => debug!("ignoring client frame: {e}"),
                },
                Message::Close(_) => break,
                _ => {}
            }
        }
    });

    let player = PlayerInfo::human(format!("human-{session_id}"), options.skill);
    let seed = options.session_seed(session_id);
    let mut session = LiveSession::start(&options.spec, player, options.time_s, seed)?;
    let available = session.env().actions();

    let start = ServerFrame::Start {
        game: options.spec.game(),
        version: options.spec.version(),
        session_id,
        tps: session.header().ticks_per_second,
        time_s: options.time_s,
        actions: available.to_vec(),
    };
    if sink.send(text(&start)).await.is_err() {
        return Ok(None);
    }
    if sink.send(text(&state_frame(&session, Vec::new()))).await.is_err() {
        return Ok(None);
    }

    let mut held: Vec<String> = Vec::new();
    let mut interval = match options.pacing {
        Pacing::Realtime(period) => {
            let mut i = tokio::time::interval(period);
            i.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Delay);
            Some(i)
        }
        Pacing::Lockstep => None,
    };

    while !session.is_finished() {
        match interval.as_mut() {
            Some(interval) => {
                interval.tick().await;
                loop {
                    match inputs.try_recv() {
                        Ok(latest) => held = latest,
                        Err(mpsc::error::TryRecvError::Empty) => break,
                        Err(mpsc::error::TryRecvError::Disconnected) => {
                            reader.abort();
                            return Ok(None);
                        }
                    }
                }
            }
            None => match inputs.recv().await {
                Some(latest) => held = latest,
                None => return Ok(None),
            },
        }
        let action = resolve_held(&held, available);
        let step = session.step(action)?;
        let events = step.events.iter().map(|e| e.name().to_string()).collect();
        if sink.send(text(&state_frame(&session, events))).await.is_err() {
            reader.abort();
            return Ok(None);
        }
    }

    let record = session.finish()?;
    let path = options.log_path(session_id);
    save(&record, &path)?;
    let end = ServerFrame::End {
        score: record.score,
        metrics: record.metrics,
        session_id,
    };
    // The log is already safe; a client leaving now loses nothing.
    let _ = sink.send(text(&end)).await;
    let _ = sink.close().await;
    reader.abort();
    Ok(Some(path))
}

fn save(record: &SessionRecord, path: &std::path::Path) -> Result<()> {
    if path.exists() {
        bail!("refusing to overwrite {}", path.display());
    }
    record
        .save(path)
        .with_context(|| format!("writing {}", path.display()))
}

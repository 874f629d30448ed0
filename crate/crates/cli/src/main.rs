use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use tracing_subscriber::EnvFilter;

use playbalance::commands::{self, ReportFormat};
use playbalance::config::HarnessConfig;
use playbalance::server::{serve, Pacing, ServeOptions};
use playbalance_core::analyzer::Thresholds;
use playbalance_core::env::{Game, TICKS_PER_SECOND};
use playbalance_core::games::VersionSpec;
use playbalance_core::rl::{Model, Skill};
use playbalance_core::session::{ReplayVerdict, DEFAULT_TIME_S};

#[derive(Parser)]
#[command(name = "playbalance", version, about = "Automated balance testing for small arcade games")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train an agent, or every agent a config names with --all.
    Train {
        #[arg(long)]
        game: Option<Game>,
        #[arg(long)]
        version: Option<u32>,
        #[arg(long, value_parser = parse_model)]
        model: Option<Model>,
        #[arg(long, value_parser = parse_skill)]
        skill: Option<Skill>,
        #[arg(long)]
        paper_scale: bool,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, requires = "config")]
        all: bool,
    },
    /// Play every (version, player) cell and write the score report.
    Evaluate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Find difficulty spikes, luck-dominated versions and player similarity.
    Analyze {
        /// A report.json, or a CSV score table.
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        spike_threshold: Option<f64>,
        #[arg(long)]
        chance_threshold: Option<f64>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Print the latest evaluation's findings.
    Report {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// Serve one version to browser players and record their sessions.
    Serve {
        #[arg(long)]
        game: Game,
        #[arg(long)]
        version: u32,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, default_value_t = playbalance::config::DEFAULT_PORT)]
        port: u16,
        /// Skill recorded for everyone playing on this server.
        #[arg(long, value_parser = parse_skill)]
        skill_tag: Skill,
        #[arg(long, default_value_t = DEFAULT_TIME_S)]
        time_s: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Advance one tick per client input instead of on a clock.
        #[arg(long)]
        lockstep: bool,
        #[arg(long, default_value = "runs/humans")]
        out: PathBuf,
    },
    /// Re-simulate session logs and check them against what they recorded.
    Replay {
        #[arg(long, required = true, num_args = 1..)]
        log: Vec<PathBuf>,
    },
    /// Validate a human session log and file it for evaluation.
    Import {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, required = true, num_args = 1..)]
        log: Vec<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
    Text,
}

fn parse_model(s: &str) -> Result<Model, String> {
    s.parse()
}

fn parse_skill(s: &str) -> Result<Skill, String> {
    s.parse()
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .with_writer(std::io::stderr)
        .init();
    match run(Cli::parse().command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(command: Command) -> Result<ExitCode> {
    match command {
        Command::Train {
            game,
            version,
            model,
            skill,
            paper_scale,
            seed,
            config,
            all,
        } => {
            let mut harness = match (&config, game) {
                (Some(path), _) => HarnessConfig::load(path)?,
                (None, Some(game)) => HarnessConfig::for_game(game),
                (None, None) => anyhow::bail!("--game or --config is required"),
            };
            harness.training.paper_scale |= paper_scale;
            let seed = seed.unwrap_or(harness.training.seed);
            if all {
                for path in commands::cmd_train_all(&harness, seed)? {
                    println!("{}", path.display());
                }
            } else {
                let game = game.unwrap_or(harness.game);
                let path = commands::cmd_train(
                    &harness,
                    game,
                    version.context("--version is required")?,
                    model.context("--model is required")?,
                    skill.context("--skill is required")?,
                    seed,
                )?;
                println!("{}", path.display());
            }
        }
        Command::Evaluate { config } => {
            let harness = HarnessConfig::load(&config)?;
            let report = commands::cmd_evaluate(&harness)?;
            print!("{}", report.to_csv());
        }
        Command::Analyze {
            report,
            spike_threshold,
            chance_threshold,
            out,
        } => {
            let defaults = Thresholds::default();
            let thresholds = Thresholds {
                spike: spike_threshold.unwrap_or(defaults.spike),
                chance: chance_threshold.unwrap_or(defaults.chance),
            };
            let balance = commands::cmd_analyze(&report, thresholds, &out)?;
            print!("{}", balance.summary_text());
        }
        Command::Report { config, format } => {
            let harness = HarnessConfig::load(&config)?;
            let format = match format {
                Format::Json => ReportFormat::Json,
                Format::Csv => ReportFormat::Csv,
                Format::Text => ReportFormat::Text,
            };
            print!("{}", commands::cmd_report(&harness, format)?);
        }
        Command::Serve {
            game,
            version,
            host,
            port,
            skill_tag,
            time_s,
            seed,
            lockstep,
            out,
        } => {
            let spec = VersionSpec::shipped(game, version)?;
            let pacing = if lockstep {
                Pacing::Lockstep
            } else {
                Pacing::Realtime(Duration::from_secs(1) / TICKS_PER_SECOND)
            };
            let options = ServeOptions {
                spec,
                skill: skill_tag,
                time_s,
                pacing,
                base_seed: seed,
                session_dir: out,
            };
            tokio::runtime::Runtime::new()?.block_on(async move {
                let listener = tokio::net::TcpListener::bind((host.as_str(), port))
                    .await
                    .with_context(|| format!("binding {host}:{port}"))?;
                serve(listener, options).await
            })?;
        }
        Command::Replay { log } => {
            let mut failed = false;
            for path in commands::expand_logs(&log)? {
                match commands::cmd_replay(&path) {
                    Ok(ReplayVerdict::Match { ticks, score }) => {
                        println!("ok       {} ({ticks} ticks, score {score})", path.display())
                    }
                    Ok(ReplayVerdict::Mismatch(m)) => {
                        failed = true;
                        println!("MISMATCH {}: {m}", path.display());
                    }
                    Err(e) => {
                        failed = true;
                        println!("ERROR    {}: {e:#}", path.display());
                    }
                }
            }
            if failed {
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Import { config, log } => {
            let harness = HarnessConfig::load(&config)?;
            let mut failed = false;
            for path in commands::expand_logs(&log)? {
                match commands::cmd_import(&harness, &path) {
                    Ok(dest) => println!("imported {}", dest.display()),
                    Err(e) => {
                        failed = true;
                        println!("rejected {}: {e:#}", path.display());
                    }
                }
            }
            if failed {
                return Ok(ExitCode::FAILURE);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

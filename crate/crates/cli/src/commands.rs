//! The batch commands: train, evaluate, analyze, report, replay, import.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use tracing::{info, warn};

use playbalance_core::analyzer::{balance_report, BalanceReport, Thresholds};
use playbalance_core::env::Game;
use playbalance_core::eval::{run_evaluation, EvaluationReport, Roster};
use playbalance_core::games::VersionSpec;
use playbalance_core::rl::{train_with_snapshots, Model, Skill, TrainConfig, TrainedAgent};
use playbalance_core::session::{
    import_human_session, replay, ReplayVerdict, SessionKind, SessionRecord,
};

use crate::config::HarnessConfig;

/// Trains one (game, version, model, skill) agent and writes its checkpoint
/// and training log. Returns the checkpoint path.
pub fn cmd_train(
    config: &HarnessConfig,
    game: Game,
    version: u32,
    model: Model,
    skill: Skill,
    seed: u64,
) -> Result<PathBuf> {
    let train_config = config.train_config(game, model, skill, seed)?;
    let mut written = train_and_save(config, game, version, &train_config, &[])?;
    Ok(written.pop().expect("one checkpoint"))
}

/// Trains every configured (version, model, skill). Where the novice and
/// professional settings differ only in budget, one run yields both.
pub fn cmd_train_all(config: &HarnessConfig, seed: u64) -> Result<Vec<PathBuf>> {
    let game = config.game;
    let mut paths = Vec::new();
    for version in config.versions() {
        for model in [Model::Ppo, Model::A2c] {
            let pro = config.train_config(game, model, Skill::Professional, seed)?;
            let novice = config.train_config(game, model, Skill::Novice, seed)?;
            let shared = TrainConfig {
                total_steps: pro.total_steps,
                ..novice.clone()
            } == pro;
            if shared {
                paths.extend(train_and_save(config, game, version, &pro, &[novice.total_steps])?);
            } else {
                paths.extend(train_and_save(config, game, version, &novice, &[])?);
                paths.extend(train_and_save(config, game, version, &pro, &[])?);
            }
        }
    }
    Ok(paths)
}

fn train_and_save(
    config: &HarnessConfig,
    game: Game,
    version: u32,
    train_config: &TrainConfig,
    snapshots: &[u64],
) -> Result<Vec<PathBuf>> {
    let spec = VersionSpec::shipped(game, version)?;
    info!(
        %game, version, model = train_config.model.name(), steps = train_config.total_steps,
        "training"
    );
    let (agents, log) = train_with_snapshots(&spec, train_config, snapshots)
        .with_context(|| format!("training {game} v{version} {}", train_config.model.name()))?;
    std::fs::create_dir_all(config.checkpoint_dir())?;
    let mut paths = Vec::new();
    for agent in &agents {
        let path = config.checkpoint_path(game, version, agent.model, agent.skill);
        std::fs::write(&path, agent.to_json())
            .with_context(|| format!("writing {}", path.display()))?;
        let log_path = path.with_extension("log.jsonl");
        let upto: Vec<_> = log
            .updates
            .iter()
            .filter(|u| u.steps <= agent.steps_trained)
            .cloned()
            .collect();
        let partial = playbalance_core::rl::TrainingLog { updates: upto };
        std::fs::write(&log_path, partial.to_jsonl())?;
        info!(
            path = %path.display(),
            skill = agent.skill.name(),
            steps = agent.steps_trained,
            reward = ?partial.recent_mean_reward(5),
            "checkpoint written"
        );
        paths.push(path);
    }
    Ok(paths)
}

fn load_roster(config: &HarnessConfig) -> Result<Roster> {
    let mut roster = Roster::default();
    for version in config.versions() {
        for model in [Model::Ppo, Model::A2c] {
            for skill in [Skill::Professional, Skill::Novice] {
                let path = config.checkpoint_path(config.game, version, model, skill);
                if !path.exists() {
                    continue;
                }
                let text = std::fs::read_to_string(&path)?;
                let agent = TrainedAgent::from_json(&text)
                    .with_context(|| format!("reading checkpoint {}", path.display()))?;
                if agent.model != model || agent.skill != skill || agent.game != config.game {
                    bail!("{} does not hold a {model:?}/{skill:?} agent", path.display());
                }
                roster.add_agent(version, agent);
            }
        }
    }
    let human_dir = config.human_dir();
    if human_dir.is_dir() {
        for path in jsonl_files(&human_dir)? {
            let text = std::fs::read_to_string(&path)?;
            match import_human_session(&text) {
                Ok(record) if record.header.game == config.game => roster.add_human(record)?,
                Ok(_) => {}
                Err(e) => warn!(path = %path.display(), "human session rejected: {e}"),
            }
        }
    }
    Ok(roster)
}

/// Runs the evaluation grid and persists the report and session logs.
pub fn cmd_evaluate(config: &HarnessConfig) -> Result<EvaluationReport> {
    config.prepare_output()?;
    let roster = load_roster(config)?;
    let plan = config.evaluation_plan();
    info!(
        game = %plan.game,
        versions = ?plan.versions,
        agents = roster.agents.len(),
        human_cells = roster.humans.len(),
        "evaluating"
    );
    let evaluation = run_evaluation(&plan, &roster)?;
    let dir = config.evaluation_dir();
    evaluation.persist(&dir)?;
    info!(dir = %dir.display(), sessions = evaluation.sessions.len(), "evaluation written");
    Ok(evaluation.report)
}

/// Reads a report as JSON, or as a CSV score table.
pub fn read_report(path: &Path) -> Result<EvaluationReport> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let is_csv = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    let report = if is_csv {
        EvaluationReport::from_csv(&text)
    } else {
        EvaluationReport::from_json(&text)
    };
    report.with_context(|| format!("malformed report {}", path.display()))
}

/// Analyzes a report and writes `balance.json`, `balance.txt` and
/// `curve.csv` into `out_dir`.
pub fn cmd_analyze(report_path: &Path, thresholds: Thresholds, out_dir: &Path) -> Result<BalanceReport> {
    let report = read_report(report_path)?;
    let balance = balance_report(&report, thresholds)?;
    std::fs::create_dir_all(out_dir)?;
    std::fs::write(out_dir.join("balance.json"), balance.to_json())?;
    std::fs::write(out_dir.join("balance.txt"), balance.summary_text())?;
    std::fs::write(out_dir.join("curve.csv"), balance.curve.to_csv())?;
    Ok(balance)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
    Text,
}

/// Renders the latest evaluation: the balance findings as JSON or text,
/// or the score matrix as CSV.
pub fn cmd_report(config: &HarnessConfig, format: ReportFormat) -> Result<String> {
    let path = config.evaluation_dir().join("report.json");
    let report = read_report(&path).context("no evaluation found; run `evaluate` first")?;
    Ok(match format {
        ReportFormat::Csv => report.to_csv(),
        ReportFormat::Json => balance_report(&report, config.thresholds)?.to_json(),
        ReportFormat::Text => balance_report(&report, config.thresholds)?.summary_text(),
    })
}

/// Log files named by `paths`; directories contribute their `*.jsonl`.
pub fn expand_logs(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            out.extend(jsonl_files(p)?);
        } else {
            out.push(p.clone());
        }
    }
    Ok(out)
}

fn jsonl_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
        .collect();
    files.sort();
    Ok(files)
}

/// Re-simulates one log.
pub fn cmd_replay(path: &Path) -> Result<ReplayVerdict> {
    let record = SessionRecord::load(path)
        .with_context(|| format!("corrupt session log {}", path.display()))?;
    Ok(replay(&record)?)
}

/// Validates a human session log and files it for the next evaluation.
pub fn cmd_import(config: &HarnessConfig, path: &Path) -> Result<PathBuf> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let record = import_human_session(&text)
        .with_context(|| format!("rejected {}", path.display()))?;
    debug_assert_eq!(record.header.session_kind, SessionKind::Human);
    if record.header.game != config.game {
        bail!("session is {}, config is {}", record.header.game, config.game);
    }
    let dir = config.human_dir();
    std::fs::create_dir_all(&dir)?;
    let name = path.file_name().context("log path has no file name")?;
    let dest = dir.join(name);
    if dest.exists() && dest.canonicalize()? != path.canonicalize()? {
        bail!("{} already exists", dest.display());
    }
    if !dest.exists() {
        std::fs::copy(path, &dest)?;
    }
    Ok(dest)
}

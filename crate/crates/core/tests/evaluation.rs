//! The evaluation grid: shape, reproducibility, missing cells, and the
//! report's consistency with the session logs behind it.

use playbalance_core::analyzer::{balance_report, Thresholds};
use playbalance_core::env::Game;
use playbalance_core::eval::{
    load_sessions, median, report_from_sessions, run_evaluation, EvaluationPlan,
    EvaluationReport, PlayerColumn, Roster,
};
use playbalance_core::games::VersionSpec;
use playbalance_core::rl::{train, Model, Skill, TrainConfig, TrainedAgent};
use playbalance_core::rng::Rng;
use playbalance_core::session::{replay, LiveSession, PlayerInfo, SessionRecord};

fn tiny_agent(game: Game, version: u32, model: Model, skill: Skill) -> TrainedAgent {
    let spec = VersionSpec::shipped(game, version).unwrap();
    let mut config = TrainConfig::for_game(game, model, 256, version as u64);
    config.rollout_length = config.rollout_length.min(32);
    let (mut agent, _) = train(&spec, &config).unwrap();
    // The budget is far below either real one; only the label matters here.
    agent.skill = skill;
    agent
}

fn agent_roster(game: Game) -> Roster {
    let mut roster = Roster::default();
    for v in 1..=VersionSpec::num_versions(game) {
        for model in [Model::Ppo, Model::A2c] {
            for skill in [Skill::Professional, Skill::Novice] {
                roster.add_agent(v, tiny_agent(game, v, model, skill));
            }
        }
    }
    roster
}

fn quick_plan(game: Game) -> EvaluationPlan {
    EvaluationPlan {
        time_s: 8,
        ..EvaluationPlan::full(game, 2024)
    }
}

fn human_session(game: Game, version: u32, skill: Skill, time_s: u32, seed: u64) -> SessionRecord {
    let spec = VersionSpec::shipped(game, version).unwrap();
    let mut s = LiveSession::start(&spec, PlayerInfo::human("h1", skill), time_s, seed).unwrap();
    let actions = s.env().actions();
    let mut rng = Rng::new(seed);
    while !s.is_finished() {
        let a = actions[rng.below(actions.len() as u64) as usize];
        s.step(a).unwrap();
    }
    s.finish().unwrap()
}

#[test]
fn batkill_grid_without_humans() {
    let plan = quick_plan(Game::Batkill);
    let eval = run_evaluation(&plan, &agent_roster(Game::Batkill)).unwrap();
    let report = &eval.report;
    assert_eq!(report.rows.len(), 5);
    for row in &report.rows {
        assert_eq!(row.cells.len(), 7);
        for cell in &row.cells {
            match cell.column {
                PlayerColumn::HumanPro | PlayerColumn::HumanNovice => {
                    assert!(cell.median.is_none() && cell.missing.is_some())
                }
                _ => {
                    assert_eq!(cell.scores.len(), 2);
                    let values: Vec<f64> = cell.scores.iter().map(|&s| s as f64).collect();
                    let mean = (values[0] + values[1]) / 2.0;
                    assert_eq!(cell.median, Some(mean));
                    assert_eq!(median(&values).unwrap(), mean);
                }
            }
        }
    }
    // 5 versions x 5 played columns x 2 runs.
    assert_eq!(eval.sessions.len(), 50);

    let csv = report.to_csv();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 6);
    assert!(lines.iter().all(|l| l.split(',').count() == 8));
    assert_eq!(
        lines[0],
        "version,Human-Pro,Human-Novice,PPO-Pro,PPO-Novice,A2C-Pro,A2C-Novice,Random"
    );

    // The analyzer still runs on the remaining columns.
    let balance = balance_report(report, Thresholds::default()).unwrap();
    assert_eq!(balance.chance.len(), 5);
    assert_eq!(balance.curve.points.len(), 5);
}

#[test]
fn rerun_with_same_seed_is_identical() {
    let plan = quick_plan(Game::Jungle);
    let roster = agent_roster(Game::Jungle);
    let a = run_evaluation(&plan, &roster).unwrap().report;
    let b = run_evaluation(&plan, &roster).unwrap().report;
    assert_eq!(a.to_json(), b.to_json());
    assert_eq!(a.rows.len(), 3);
    let other = EvaluationPlan {
        seed: 7,
        ..plan
    };
    assert_ne!(run_evaluation(&other, &roster).unwrap().report, a);
}

#[test]
fn missing_checkpoints_leave_marked_cells() {
    let plan = quick_plan(Game::Batkill);
    let mut roster = Roster::default();
    roster.add_agent(1, tiny_agent(Game::Batkill, 1, Model::Ppo, Skill::Novice));
    let report = run_evaluation(&plan, &roster).unwrap().report;
    assert!(report.value(1, PlayerColumn::PpoNovice).is_some());
    assert!(report.value(2, PlayerColumn::PpoNovice).is_none());
    assert_eq!(
        report.cell(2, PlayerColumn::PpoNovice).unwrap().missing.as_deref(),
        Some("no checkpoint")
    );
    assert!(report.value(3, PlayerColumn::Random).is_some());
}

#[test]
fn persisted_logs_reproduce_the_report_and_replay() {
    let plan = quick_plan(Game::Batkill);
    let mut roster = agent_roster(Game::Batkill);
    for v in 1..=5 {
        for (i, skill) in [Skill::Professional, Skill::Novice].into_iter().enumerate() {
            for run in 0..2 {
                roster
                    .add_human(human_session(Game::Batkill, v, skill, 8, (v * 10 + run) as u64 + i as u64 * 100))
                    .unwrap();
            }
        }
    }
    let eval = run_evaluation(&plan, &roster).unwrap();
    assert!(eval.report.value(4, PlayerColumn::HumanPro).is_some());

    let dir = tempfile::tempdir().unwrap();
    let paths = eval.persist(dir.path()).unwrap();
    assert_eq!(paths.len(), eval.sessions.len());
    let loaded = load_sessions(&dir.path().join("sessions")).unwrap();
    assert_eq!(loaded.len(), 70);
    for record in &loaded {
        assert!(replay(record).unwrap().is_match());
    }
    let rebuilt = report_from_sessions(&plan, &loaded).unwrap();
    for v in 1..=5 {
        for c in PlayerColumn::ALL {
            assert_eq!(rebuilt.value(v, c), eval.report.value(v, c), "v{v} {c}");
            let mut a = rebuilt.cell(v, c).unwrap().scores.clone();
            let mut b = eval.report.cell(v, c).unwrap().scores.clone();
            a.sort();
            b.sort();
            assert_eq!(a, b);
        }
    }
    let json = std::fs::read_to_string(dir.path().join("report.json")).unwrap();
    assert_eq!(EvaluationReport::from_json(&json).unwrap(), eval.report);
    let csv = std::fs::read_to_string(dir.path().join("report.csv")).unwrap();
    let from_csv = EvaluationReport::from_csv(&csv).unwrap();
    assert_eq!(from_csv.value(2, PlayerColumn::A2cPro), eval.report.value(2, PlayerColumn::A2cPro));
}

#[test]
fn human_sessions_must_match_their_cell() {
    let plan = quick_plan(Game::Jungle);
    let mut roster = Roster::default();
    let wrong_version = human_session(Game::Jungle, 2, Skill::Novice, 8, 1);
    roster
        .humans
        .insert((1, PlayerColumn::HumanNovice), vec![wrong_version]);
    assert!(run_evaluation(&plan, &roster).is_err());

    let mut agent = tiny_agent(Game::Jungle, 1, Model::Ppo, Skill::Novice);
    let mut roster = Roster::default();
    agent.skill = Skill::Professional;
    roster.agents.insert((1, PlayerColumn::PpoNovice), agent);
    assert!(run_evaluation(&plan, &roster).is_err());
}

#[test]
fn report_json_rejects_other_schema_versions() {
    let plan = quick_plan(Game::Jungle);
    let report = run_evaluation(&plan, &Roster::default()).unwrap().report;
    let json = report.to_json().replace("\"schema_version\": 1", "\"schema_version\": 99");
    assert!(EvaluationReport::from_json(&json).is_err());
}

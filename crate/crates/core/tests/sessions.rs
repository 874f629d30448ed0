//! Session logs: determinism, replay verification and human-log import.

use playbalance_core::env::{Action, Environment, Game};
use playbalance_core::games::VersionSpec;
use playbalance_core::rl::{RandomPolicy, Skill};
use playbalance_core::rng::Rng;
use playbalance_core::session::{
    import_human_session, replay, run_session, LiveSession, PlayerInfo, ReplayVerdict,
    SessionError, SessionKind, SessionRecord, TestParams,
};

fn all_versions() -> Vec<VersionSpec> {
    [Game::Batkill, Game::Jungle]
        .into_iter()
        .flat_map(|g| (1..=VersionSpec::num_versions(g)).map(move |v| VersionSpec::shipped(g, v).unwrap()))
        .collect()
}

/// Plays a fixed pseudo-random action sequence, as a human would through
/// the server.
fn scripted(spec: &VersionSpec, time_s: u32, seed: u64, action_seed: u64) -> SessionRecord {
    let mut session = LiveSession::start(
        spec,
        PlayerInfo::human("tester", Skill::Novice),
        time_s,
        seed,
    )
    .unwrap();
    let actions = session.env().actions();
    let mut rng = Rng::new(action_seed);
    let mut held = actions[0];
    while !session.is_finished() {
        if rng.chance(0.05) {
            held = actions[rng.below(actions.len() as u64) as usize];
        }
        session.step(held).unwrap();
    }
    session.finish().unwrap()
}

#[test]
fn same_seed_and_actions_give_identical_logs() {
    for spec in all_versions() {
        let a = scripted(&spec, 20, 5, 6).to_jsonl();
        let b = scripted(&spec, 20, 5, 6).to_jsonl();
        assert_eq!(a, b, "{} v{}", spec.game(), spec.version());
    }
}

#[test]
fn random_sessions_are_reproducible_and_replay() {
    for spec in all_versions() {
        let params = TestParams {
            time_s: 30,
            ..TestParams::new(SessionKind::Random, None, spec.version(), 17)
        };
        let run = || {
            let actions = spec.make_env().unwrap().actions().len();
            let mut policy = RandomPolicy::new(actions, params.seed);
            run_session(&spec, &mut policy, PlayerInfo::random(), &params).unwrap()
        };
        let first = run();
        assert_eq!(first, run());
        assert_eq!(first.steps.len(), 30 * 60);
        assert!(replay(&first).unwrap().is_match());
    }
}

#[test]
fn persisted_logs_replay_from_disk() {
    let dir = tempfile::tempdir().unwrap();
    for (i, spec) in all_versions().into_iter().enumerate() {
        let record = scripted(&spec, 15, i as u64, 100 + i as u64);
        let path = dir.path().join(format!("{i}.jsonl"));
        record.save(&path).unwrap();
        let loaded = SessionRecord::load(&path).unwrap();
        assert_eq!(loaded, record);
        assert_eq!(
            replay(&loaded).unwrap(),
            ReplayVerdict::Match {
                ticks: 15 * 60,
                score: record.score
            }
        );
    }
}

#[test]
fn flipped_action_is_caught_at_or_after_its_tick() {
    let spec = VersionSpec::shipped(Game::Batkill, 2).unwrap();
    let mut record = scripted(&spec, 20, 1, 2);
    let flip = 300usize;
    // ATTACK costs reward that NOOP does not, so the flip is observable.
    record.steps[flip].action = if record.steps[flip].action == Action::Attack {
        Action::Noop
    } else {
        Action::Attack
    };
    match replay(&record).unwrap() {
        ReplayVerdict::Mismatch(m) => {
            let tick = m.tick.expect("a step diverges");
            assert!(tick >= flip as u64, "{m}");
            assert!(m.build_note.is_none());
        }
        other => panic!("expected a mismatch, got {other:?}"),
    }
}

#[test]
fn foreign_build_is_named_in_the_diagnostic() {
    let spec = VersionSpec::shipped(Game::Jungle, 1).unwrap();
    let mut record = scripted(&spec, 10, 3, 4);
    record.header.build_id = "playbalance-core-0.0.1+sim0".into();
    record.steps[100].reward += 1.0;
    match replay(&record).unwrap() {
        ReplayVerdict::Mismatch(m) => {
            assert_eq!(m.tick, Some(100));
            let note = m.build_note.expect("build diagnostic");
            assert!(note.contains("playbalance-core-0.0.1+sim0"), "{note}");
        }
        other => panic!("expected a mismatch, got {other:?}"),
    }
}

#[test]
fn valid_human_log_is_imported_with_its_score() {
    let spec = VersionSpec::shipped(Game::Batkill, 1).unwrap();
    let record = scripted(&spec, 180, 8, 9);
    assert_eq!(record.steps.len(), 10_800);
    let imported = import_human_session(&record.to_jsonl()).unwrap();
    assert_eq!(imported.score, record.score);
    assert_eq!(imported.header.skill, Some(Skill::Novice));
}

#[test]
fn tampered_score_is_rejected() {
    let spec = VersionSpec::shipped(Game::Jungle, 3).unwrap();
    let mut record = scripted(&spec, 30, 8, 9);
    record.score += 100;
    let err = import_human_session(&record.to_jsonl()).unwrap_err();
    match err {
        SessionError::ReplayMismatch(m) => {
            assert_eq!(m.tick, None);
            assert!(m.detail.contains("score"), "{m}");
        }
        other => panic!("expected replay mismatch, got {other}"),
    }
}

#[test]
fn truncated_session_is_rejected_as_incomplete() {
    let spec = VersionSpec::shipped(Game::Batkill, 4).unwrap();
    let record = scripted(&spec, 30, 1, 1);
    // Player quit early: footer present but only half the ticks.
    let mut short = record.clone();
    short.steps.truncate(900);
    assert!(matches!(
        import_human_session(&short.to_jsonl()),
        Err(SessionError::Incomplete(_))
    ));
    // Connection dropped: no footer at all.
    let text = record.to_jsonl();
    let cut: String = text.lines().take(500).map(|l| format!("{l}\n")).collect();
    assert!(matches!(
        import_human_session(&cut),
        Err(SessionError::Incomplete(_))
    ));
}

#[test]
fn agent_logs_are_not_importable_as_human() {
    let spec = VersionSpec::shipped(Game::Batkill, 1).unwrap();
    let params = TestParams {
        time_s: 5,
        ..TestParams::new(SessionKind::Random, None, 1, 0)
    };
    let mut policy = RandomPolicy::new(5, 0);
    let record = run_session(&spec, &mut policy, PlayerInfo::random(), &params).unwrap();
    assert!(matches!(
        import_human_session(&record.to_jsonl()),
        Err(SessionError::WrongKind { .. })
    ));
}

#[test]
fn metrics_survive_episode_resets() {
    // Jungle episodes end on death; a random player dies many times in three
    // minutes, and the session keeps counting across those resets.
    let spec = VersionSpec::shipped(Game::Jungle, 1).unwrap();
    let params = TestParams::new(SessionKind::Random, None, 1, 4);
    let mut policy = RandomPolicy::new(4, 4);
    let record = run_session(&spec, &mut policy, PlayerInfo::random(), &params).unwrap();
    assert!(record.episodes() > 1);
    assert_eq!(record.score, record.metrics.score());
    let resets = record.steps.iter().filter(|s| s.done).count() as u64;
    assert_eq!(record.episodes(), resets + 1);
}

//! End-to-end training: determinism, snapshot equivalence, and the update
//! invariants as seen in the training log.

use playbalance_core::env::{Environment, Game};
use playbalance_core::games::VersionSpec;
use playbalance_core::rl::{
    train, train_with_snapshots, Model, Policy, RandomPolicy, Skill, TrainConfig, TrainError,
    TrainedAgent,
};
use playbalance_core::rng::derive_indexed;

fn small(game: Game, model: Model, steps: u64, seed: u64) -> TrainConfig {
    let mut config = TrainConfig::for_game(game, model, steps, seed);
    if model == Model::Ppo {
        config.rollout_length = 64;
        config.parallel_envs = 4;
        config.epochs = 3;
    }
    config
}

#[test]
fn same_config_gives_byte_identical_checkpoints() {
    for game in [Game::Batkill, Game::Jungle] {
        for model in [Model::Ppo, Model::A2c] {
            let spec = VersionSpec::shipped(game, 1).unwrap();
            let config = small(game, model, 1024, 42);
            let (a, _) = train(&spec, &config).unwrap();
            let (b, _) = train(&spec, &config).unwrap();
            assert_eq!(a.to_json(), b.to_json(), "{game} {model:?}");
            let (c, _) = train(&spec, &small(game, model, 1024, 43)).unwrap();
            assert_ne!(a.network.params, c.network.params);
        }
    }
}

#[test]
fn checkpoint_round_trips_and_records_provenance() {
    let spec = VersionSpec::shipped(Game::Batkill, 3).unwrap();
    let (agent, log) = train(&spec, &small(Game::Batkill, Model::Ppo, 512, 1)).unwrap();
    assert_eq!(agent.game, Game::Batkill);
    assert_eq!(agent.version, 3);
    assert_eq!(agent.model, Model::Ppo);
    assert_eq!(agent.skill, Skill::Novice);
    assert!(agent.steps_trained >= 512);
    let back = TrainedAgent::from_json(&agent.to_json()).unwrap();
    assert_eq!(back, agent);
    assert_eq!(back.mlp().unwrap().params(), agent.mlp().unwrap().params());
    // The log is one JSON object per update, steps strictly increasing.
    let jsonl = log.to_jsonl();
    assert_eq!(jsonl.lines().count(), log.updates.len());
    assert!(log.updates.windows(2).all(|w| w[0].steps < w[1].steps));
}

#[test]
fn snapshot_equals_standalone_run() {
    for model in [Model::Ppo, Model::A2c] {
        let spec = VersionSpec::shipped(Game::Batkill, 1).unwrap();
        let (agents, _) =
            train_with_snapshots(&spec, &small(Game::Batkill, model, 2048, 5), &[768]).unwrap();
        assert_eq!(agents.len(), 2);
        let (standalone, _) = train(&spec, &small(Game::Batkill, model, 768, 5)).unwrap();
        assert_eq!(agents[0].to_json(), standalone.to_json(), "{model:?}");
        assert_eq!(agents[1].config.total_steps, 2048);
    }
}

#[test]
fn every_update_starts_at_ratio_one() {
    let spec = VersionSpec::shipped(Game::Jungle, 2).unwrap();
    let (_, log) = train(&spec, &small(Game::Jungle, Model::Ppo, 4096, 2)).unwrap();
    assert!(log.updates.len() >= 10);
    for u in &log.updates {
        assert!(u.initial_ratio_deviation <= 1e-12, "update {}", u.update);
    }
}

#[test]
fn invalid_config_is_rejected_before_training() {
    let spec = VersionSpec::shipped(Game::Batkill, 1).unwrap();
    let mut config = TrainConfig::ppo(1000, 0);
    config.gamma = 1.5;
    assert!(matches!(
        train(&spec, &config),
        Err(TrainError::InvalidConfig(_))
    ));
}

#[test]
fn agent_refuses_a_game_with_different_shapes() {
    let spec = VersionSpec::shipped(Game::Batkill, 1).unwrap();
    let (agent, _) = train(&spec, &small(Game::Batkill, Model::A2c, 200, 0)).unwrap();
    let jungle = VersionSpec::shipped(Game::Jungle, 1).unwrap().make_env().unwrap();
    assert!(matches!(
        agent.policy(jungle.as_ref(), Default::default(), 0),
        Err(TrainError::ShapeMismatch { .. })
    ));
}

/// Mean undiscounted return of the random policy over training-length
/// episodes.
fn random_episode_reward(spec: &VersionSpec, episodes: u64, cap: u64) -> f64 {
    let mut total = 0.0;
    for k in 0..episodes {
        let mut env = spec.make_env().unwrap();
        let mut policy = RandomPolicy::new(env.actions().len(), k);
        let mut obs = env.reset(derive_indexed(99, "episode", k));
        loop {
            let r = env.step(env.actions()[policy.act(&obs)]).unwrap();
            total += r.reward;
            if r.done || env.tick() >= cap {
                break;
            }
            obs = r.observation;
        }
    }
    total / episodes as f64
}

#[test]
fn desk_budget_ppo_beats_random_episode_reward() {
    let spec = VersionSpec::shipped(Game::Batkill, 1).unwrap();
    let config = TrainConfig::for_game(Game::Batkill, Model::Ppo, 30_000, 0);
    let (_, log) = train(&spec, &config).unwrap();
    let trained = log.recent_mean_reward(3).expect("episodes finished");
    let random = random_episode_reward(&spec, 8, config.max_episode_ticks);
    assert!(trained > random, "trained {trained} vs random {random}");
}

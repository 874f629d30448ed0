//! The analyzer on the two published score tables, checked against values
//! worked out by hand from the table cells.

use playbalance_core::analyzer::{
    balance_report, chance_index, classify_chance, detect_spikes, difficulty_curve, similarity,
    ChanceClass, Direction, Thresholds,
};
use playbalance_core::eval::{EvaluationReport, PlayerGroup};

const BATKILL: &str = include_str!("../../../fixtures/batkill_scores.csv");
const JUNGLE: &str = include_str!("../../../fixtures/jungle_scores.csv");

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() < 1e-9
}

#[test]
fn batkill_curve_means_and_range() {
    let report = EvaluationReport::from_csv(BATKILL).unwrap();
    let curve = difficulty_curve(&report).unwrap();
    // Row sums of the six skill-bearing cells.
    let sums = [
        78 + 59 + 18 + 23 + 29 + 13,
        21 + 6 - 7 + 7 - 44 - 47,
        -67 - 86 - 53 - 63 - 112 - 122,
        -74 - 92 - 96 - 86 - 121 - 123,
        -36 - 1 - 40 - 47 - 56 - 51,
    ];
    assert_eq!(sums, [220, -64, -503, -592, -231]);
    for (point, sum) in curve.points.iter().zip(sums) {
        assert!(close(point.mean, sum as f64 / 6.0), "{point:?}");
    }
    // 78 (v1 Human-Pro) down to -123 (v4 A2C-Novice).
    assert!(close(curve.range, 201.0));
}

#[test]
fn batkill_spike_magnitudes() {
    let report = EvaluationReport::from_csv(BATKILL).unwrap();
    let curve = difficulty_curve(&report).unwrap();
    let all = detect_spikes(&curve, 0.0);
    let magnitudes: Vec<f64> = all.iter().map(|s| s.magnitude).collect();
    let expected = [284.0 / 1206.0, 439.0 / 1206.0, 89.0 / 1206.0, 361.0 / 1206.0];
    for (m, e) in magnitudes.iter().zip(expected) {
        assert!(close(*m, e), "{m} vs {e}");
    }
}

#[test]
fn batkill_findings() {
    let report = EvaluationReport::from_csv(BATKILL).unwrap();
    let balance = balance_report(&report, Thresholds::default()).unwrap();
    let spikes: Vec<(u32, Direction)> =
        balance.spikes.iter().map(|s| (s.version, s.direction)).collect();
    assert_eq!(
        spikes,
        vec![
            (2, Direction::Harder),
            (3, Direction::Harder),
            (5, Direction::Easier)
        ]
    );
    assert_eq!(balance.chance_versions(), vec![3, 4]);
    let summary = balance.summary_text();
    assert!(summary.contains("Difficulty spikes: 3"), "{summary}");
    assert!(summary.contains("luck than skill: v3"), "{summary}");
}

#[test]
fn batkill_chance_indices() {
    let report = EvaluationReport::from_csv(BATKILL).unwrap();
    // (best skilled - random) / (best skilled - worst overall)
    let expected = [
        (78.0 + 13.0) / (78.0 + 13.0),
        (21.0 + 27.0) / (21.0 + 47.0),
        (-53.0 + 73.0) / (-53.0 + 122.0),
        (-74.0 + 98.0) / (-74.0 + 123.0),
        (-1.0 + 56.0) / (-1.0 + 56.0),
    ];
    for (v, e) in (1..=5).zip(expected) {
        let index = chance_index(&report, v).unwrap();
        assert!(close(index, e), "v{v}: {index} vs {e}");
    }
    assert!(close(chance_index(&report, 3).unwrap(), 20.0 / 69.0));
    assert_eq!(
        classify_chance(chance_index(&report, 2).unwrap(), 0.5),
        ChanceClass::Skill
    );
}

#[test]
fn jungle_curve_and_spikes() {
    let report = EvaluationReport::from_csv(JUNGLE).unwrap();
    let curve = difficulty_curve(&report).unwrap();
    let sums = [
        3262 + 2890 + 3597 + 1576 + 788 + 407,
        1908 + 1712 + 2251 + 850 + 519 + 305,
        1885 + 1591 + 2154 + 1102 + 100 + 338,
    ];
    assert_eq!(sums, [12520, 7545, 7170]);
    for (point, sum) in curve.points.iter().zip(sums) {
        assert!(close(point.mean, sum as f64 / 6.0));
    }
    assert!(close(curve.range, 3597.0 - 100.0));

    let all = detect_spikes(&curve, 0.0);
    assert!(close(all[0].magnitude, 4975.0 / 6.0 / 3497.0));
    assert!(close(all[1].magnitude, 375.0 / 6.0 / 3497.0));
}

#[test]
fn jungle_findings() {
    let report = EvaluationReport::from_csv(JUNGLE).unwrap();
    let balance = balance_report(&report, Thresholds::default()).unwrap();
    let spikes: Vec<(u32, Direction)> =
        balance.spikes.iter().map(|s| (s.version, s.direction)).collect();
    assert_eq!(spikes, vec![(2, Direction::Harder)]);
    assert!(balance.chance_versions().is_empty());
    let expected = [
        (3597.0 - 1371.0) / (3597.0 - 407.0),
        (2251.0 - 683.0) / (2251.0 - 305.0),
        (2154.0 - 615.0) / (2154.0 - 100.0),
    ];
    for (finding, e) in balance.chance.iter().zip(expected) {
        assert!(close(finding.chance_index, e));
        assert_eq!(finding.classification, ChanceClass::Skill);
    }
}

#[test]
fn jungle_human_vs_ppo_rank_correlation() {
    let report = EvaluationReport::from_csv(JUNGLE).unwrap();
    // Human averages 3076, 1810, 1738 rank v1 > v2 > v3. PPO averages
    // 2586.5, 1550.5, 1628 rank v1 > v3 > v2. Rank differences 0, 1, 1 give
    // 1 - 6 * 2 / (3 * 8) = 0.5.
    let entry = similarity(&report, PlayerGroup::Human, PlayerGroup::Ppo);
    assert!(close(entry.spearman.unwrap(), 0.5));
}

#[test]
fn threshold_overrides_are_recorded() {
    let report = EvaluationReport::from_csv(BATKILL).unwrap();
    let thresholds = Thresholds {
        spike: 0.3,
        chance: 0.25,
    };
    let balance = balance_report(&report, thresholds).unwrap();
    assert_eq!(balance.provenance.thresholds, thresholds);
    let versions: Vec<u32> = balance.spikes.iter().map(|s| s.version).collect();
    assert_eq!(versions, vec![3]);
    assert!(balance.chance_versions().is_empty());
    assert!(balance.to_json().contains("\"chance\": 0.25"));
}

//! Invariances of the balance findings, on random score matrices.

use playbalance_core::analyzer::{
    balance_report, chance_index, difficulty_curve, detect_spikes, BalanceReport, Thresholds,
};
use playbalance_core::eval::{EvaluationReport, PlayerColumn};
use proptest::prelude::*;

fn report_from(rows: &[Vec<f64>]) -> EvaluationReport {
    EvaluationReport::from_matrix(
        PlayerColumn::ALL.to_vec(),
        rows.iter()
            .enumerate()
            .map(|(i, r)| (i as u32 + 1, r.iter().map(|&v| Some(v)).collect()))
            .collect(),
    )
    .unwrap()
}

fn matrices() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (3usize..=6).prop_flat_map(|n| {
        prop::collection::vec(prop::collection::vec(-1000.0..1000.0f64, 7), n)
    })
}

/// Everything that should survive a positive affine change of scores.
fn findings(b: &BalanceReport) -> (Vec<(u32, String, f64)>, Vec<(u32, String, f64)>, Vec<Option<f64>>) {
    (
        b.spikes
            .iter()
            .map(|s| (s.version, s.direction.name().to_string(), s.magnitude))
            .collect(),
        b.chance
            .iter()
            .map(|c| (c.version, format!("{:?}", c.classification), c.chance_index))
            .collect(),
        b.similarity.iter().map(|s| s.spearman).collect(),
    )
}

fn assert_same(a: &BalanceReport, b: &BalanceReport) -> Result<(), TestCaseError> {
    let (sa, ca, ra) = findings(a);
    let (sb, cb, rb) = findings(b);
    prop_assert_eq!(sa.len(), sb.len());
    for (x, y) in sa.iter().zip(&sb) {
        prop_assert_eq!((x.0, &x.1), (y.0, &y.1));
        prop_assert!((x.2 - y.2).abs() < 1e-9);
    }
    prop_assert_eq!(ca.len(), cb.len());
    for (x, y) in ca.iter().zip(&cb) {
        prop_assert_eq!((x.0, &x.1), (y.0, &y.1));
        prop_assert!((x.2 - y.2).abs() < 1e-9);
    }
    prop_assert_eq!(ra.len(), rb.len());
    for (x, y) in ra.iter().zip(&rb) {
        match (x, y) {
            (Some(x), Some(y)) => prop_assert!((x - y).abs() < 1e-9),
            (None, None) => {}
            _ => prop_assert!(false, "similarity defined on one side only"),
        }
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn findings_invariant_under_scale_and_shift(
        rows in matrices(),
        c in 0.01f64..100.0,
        k in -5000.0f64..5000.0,
    ) {
        let base = balance_report(&report_from(&rows), Thresholds::default()).unwrap();
        let scaled: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|v| v * c).collect()).collect();
        let shifted: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|v| v + k).collect()).collect();
        let both: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|v| v * c + k).collect()).collect();
        for other in [scaled, shifted, both] {
            let b = balance_report(&report_from(&other), Thresholds::default()).unwrap();
            assert_same(&base, &b)?;
        }
    }

    #[test]
    fn chance_index_bounded_and_monotone_in_random(
        rows in matrices(),
        lift in 0.0f64..1.0,
    ) {
        let report = report_from(&rows);
        for v in report.versions() {
            let index = chance_index(&report, v).unwrap();
            prop_assert!((0.0..=1.0).contains(&index));
        }
        // Raise the random cell of v1 towards, but not past, the best
        // skilled score.
        let mut raised = rows.clone();
        let best = rows[0][..6].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let random = rows[0][6];
        if random < best {
            raised[0][6] = random + (best - random) * lift;
            let before = chance_index(&report, 1).unwrap();
            let after = chance_index(&report_from(&raised), 1).unwrap();
            prop_assert!(after <= before + 1e-12, "{} -> {}", before, after);
        }
    }

    #[test]
    fn spikes_stable_under_column_reordering(
        rows in matrices(),
        order in Just((0..7usize).collect::<Vec<_>>()).prop_shuffle(),
    ) {
        let columns: Vec<PlayerColumn> = order.iter().map(|&i| PlayerColumn::ALL[i]).collect();
        let permuted = EvaluationReport::from_matrix(
            columns,
            rows.iter()
                .enumerate()
                .map(|(v, r)| (v as u32 + 1, order.iter().map(|&i| Some(r[i])).collect()))
                .collect(),
        )
        .unwrap();
        let a = detect_spikes(&difficulty_curve(&report_from(&rows)).unwrap(), 0.15);
        let b = detect_spikes(&difficulty_curve(&permuted).unwrap(), 0.15);
        prop_assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            prop_assert_eq!((x.version, x.direction), (y.version, y.direction));
            prop_assert!((x.magnitude - y.magnitude).abs() < 1e-12);
        }
    }
}

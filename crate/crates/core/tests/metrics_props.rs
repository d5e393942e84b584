use perfpred_core::data::Proportion;
use perfpred_core::metrics::{
    abs_error, aggregate, auc, effort_saved, rank_order, read_curves_csv, summarize,
    write_curves_csv, CurvePoint, EffortSaved, ErrorCurve, Method, DEFAULT_TOLERANCES,
};
use perfpred_core::strategy::StrategyKind;
use proptest::prelude::*;

fn curve(errors: &[f64], step: usize) -> Vec<CurvePoint> {
    errors
        .iter()
        .enumerate()
        .map(|(i, &e)| CurvePoint {
            iteration: i,
            labels_added: i * step,
            error: e,
        })
        .collect()
}

fn errors() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..30.0f64, 2..42)
}

proptest! {
    #[test]
    fn ranks_are_a_permutation_average(vals in prop::collection::vec(prop_oneof![0.0..5.0f64, Just(1.0)], 1..12)) {
        let r = rank_order(&vals);
        let m = vals.len() as f64;
        prop_assert!((r.iter().sum::<f64>() - m * (m + 1.0) / 2.0).abs() < 1e-9);
        for i in 0..vals.len() {
            for j in 0..vals.len() {
                if vals[i] < vals[j] {
                    prop_assert!(r[i] < r[j]);
                }
                if vals[i] == vals[j] {
                    prop_assert_eq!(r[i], r[j]);
                }
            }
        }
    }

    #[test]
    fn auc_is_linear_and_nonnegative(e in errors(), a in 0.0..4.0f64, c in 0.0..4.0f64) {
        let f = curve(&e, 5);
        let g: Vec<f64> = e.iter().rev().copied().collect();
        let g = curve(&g, 5);
        let combo: Vec<f64> = f.iter().zip(&g).map(|(x, y)| a * x.error + c * y.error).collect();
        let lhs = auc(&curve(&combo, 5)).unwrap();
        let rhs = a * auc(&f).unwrap() + c * auc(&g).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + rhs.abs()));
        prop_assert!(auc(&f).unwrap() >= 0.0);
        // reversal leaves the trapezoid area unchanged
        prop_assert!((auc(&f).unwrap() - auc(&g).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn abs_error_is_symmetric(x in 0.0..=1.0f64, y in 0.0..=1.0f64) {
        prop_assert_eq!(abs_error(x, y), abs_error(y, x));
        prop_assert!(abs_error(x, y) >= 0.0);
        prop_assert_eq!(abs_error(x, x), 0.0);
    }

    #[test]
    fn self_comparison_saves_nothing(e in errors(), tol in 0.0..20.0f64) {
        let c = curve(&e, 3);
        let r = effort_saved(&c, &c, tol).unwrap();
        prop_assert!(matches!(r, EffortSaved::Saved(v) if v == 0.0) || r == EffortSaved::Undefined);
        if e.iter().any(|&x| x <= tol) {
            prop_assert_eq!(r, EffortSaved::Saved(0.0));
        }
    }

    #[test]
    fn saving_is_at_most_full(b in errors(), tol in 0.0..20.0f64) {
        let m: Vec<f64> = b.iter().map(|x| x * 0.5).collect();
        let base = curve(&b, 3);
        if let EffortSaved::Saved(v) = effort_saved(&base, &curve(&m, 3), tol).unwrap() {
            // halving the errors can only reach the tolerance sooner
            prop_assert!((0.0..=100.0).contains(&v));
        }
    }
}

#[test]
fn aggregate_then_roundtrip_through_csv() {
    let dir = tempfile::tempdir().unwrap();
    let mut all = Vec::new();
    for (ki, k) in [10u8, 40].into_iter().enumerate() {
        for s in [
            StrategyKind::AddOnlyRandom,
            StrategyKind::AddDeletePrioritized,
        ] {
            for (mi, m) in Method::ALL.into_iter().enumerate() {
                let reps: Vec<ErrorCurve> = (0..3)
                    .map(|r| {
                        let e: Vec<f64> = (0..41)
                            .map(|t| {
                                (12.0 - 0.25 * t as f64).max(0.0) * (1.0 + mi as f64 * 0.3)
                                    + 0.1 * r as f64
                                    + ki as f64 / 7.0
                            })
                            .collect();
                        ErrorCurve::new(m, curve(&e, 13)).unwrap()
                    })
                    .collect();
                let refs: Vec<&ErrorCurve> = reps.iter().collect();
                all.push(aggregate(Proportion::new(k).unwrap(), s, &refs).unwrap());
            }
        }
    }
    let summary = summarize(&all, &DEFAULT_TOLERANCES).unwrap();
    let path = dir.path().join("curves.csv");
    write_curves_csv(&path, &all).unwrap();
    let back = read_curves_csv(&path).unwrap();
    assert_eq!(back, all);
    assert_eq!(summarize(&back, &DEFAULT_TOLERANCES).unwrap(), summary);
    assert_eq!(summary.experiments.len(), 4);
    assert_eq!(summary.overall.rank[&Method::PerfPredResampled], 1.0);
    assert_eq!(summary.overall.rank[&Method::TestSet], 4.0);
    let p = &all[0].points[5];
    assert!((p.error_std - (2.0f64 / 3.0).sqrt() * 0.1).abs() < 1e-12);
}

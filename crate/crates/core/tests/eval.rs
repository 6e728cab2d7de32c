use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tabsynth::eval::{compare_experiments, weighted_metrics, welch_ttest, ConfusionMatrix};

/// Oracle working straight from label pairs, never touching the matrix type.
fn oracle(truth: &[usize], pred: &[usize], k: usize) -> (f64, f64, f64, f64) {
    let n = truth.len() as f64;
    let acc = truth.iter().zip(pred).filter(|(t, p)| t == p).count() as f64 / n;
    let (mut wp, mut wr, mut wf) = (0.0, 0.0, 0.0);
    for c in 0..k {
        let mut tp = 0.0;
        let mut fp = 0.0;
        let mut fne = 0.0;
        for (&t, &p) in truth.iter().zip(pred) {
            match (t == c, p == c) {
                (true, true) => tp += 1.0,
                (false, true) => fp += 1.0,
                (true, false) => fne += 1.0,
                _ => {}
            }
        }
        let pre = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
        let rec = if tp + fne > 0.0 { tp / (tp + fne) } else { 0.0 };
        let f1 = if pre + rec > 0.0 { 2.0 * pre * rec / (pre + rec) } else { 0.0 };
        let w = (tp + fne) / n;
        wp += w * pre;
        wr += w * rec;
        wf += w * f1;
    }
    (acc, wp, wr, wf)
}

#[test]
fn metrics_match_oracle_on_random_matrices() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..25 {
        let k = rng.random_range(2..=6);
        let n = rng.random_range(1..500);
        let skew = rng.random_range(0.0..0.9);
        let truth: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
        let pred: Vec<usize> = truth
            .iter()
            .map(|&t| if rng.random_bool(skew) { t } else { rng.random_range(0..k) })
            .collect();
        let m = ConfusionMatrix::from_indices(k, &truth, &pred).unwrap();
        let r = weighted_metrics(&m).unwrap();
        let (acc, p, rec, f1) = oracle(&truth, &pred, k);
        for (got, want, name) in [(r.accuracy, acc, "acc"), (r.precision, p, "pre"), (r.recall, rec, "rec"), (r.f1, f1, "f1")] {
            assert!((got - want).abs() <= 1e-12, "case {case} {name}: {got} vs {want}");
        }
        assert!((r.recall - r.accuracy).abs() <= 1e-12);
    }
}

/// (a, b, t, df, p) with t, df and p evaluated at 60 significant digits by
/// an arbitrary-precision incomplete-beta implementation.
#[allow(clippy::type_complexity)]
const WELCH_FIXTURES: [(&[f64], &[f64], f64, f64, f64); 10] = [
    (&[4.1, 5.2, 6.0, 3.9, 5.5, 4.8, 5.1, 6.2, 4.4, 4.8], &[6.3, 5.1, 7.0, 6.2, 5.8, 6.9, 5.5, 6.1, 6.6, 4.5],
        -2.8787658497487352976, 17.967763340533147357, 0.010005922013839527009),
    (&[1.0, 2.0, 3.0, 4.0, 5.0], &[2.0, 4.0, 6.0, 8.0, 10.0, 12.0],
        -2.376354103144018342, 6.972255729794933655, 0.049284338206730520766),
    (&[0.5, 0.7, 0.2, 0.9], &[0.1, 0.15, 0.3, 0.12, 0.05, 0.2, 0.25],
        2.6665265756572030206, 3.3002975290870997664, 0.0685915930654284103),
    (&[10.0, 10.5, 9.8, 10.2, 10.1, 9.9], &[10.0, 10.4, 9.7, 10.3, 10.0, 10.1],
        0.0, 10.0, 1.0),
    (&[1.0, 1.0, 1.0, 0.0, 1.0, 0.0, 1.0, 1.0, 1.0, 1.0, 0.0, 1.0], &[0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0],
        2.7080128015453201202, 22.0, 0.012845420968005782925),
    (&[3.3, 2.1, 4.8, 5.9, 1.2, 0.4, 3.3, 2.2], &[30.1, 28.4, 35.6, 29.9],
        -16.474533762920952276, 4.0313566928961738263, 0.00007529354789867812924),
    (&[100.0, 101.0, 99.0, 102.0, 98.0, 100.0, 101.0], &[100.5, 101.2, 99.1, 101.8, 98.9, 100.6, 101.7, 100.2],
        -0.5607486431114208959, 11.563245432218032084, 0.58567056828273614164),
    (&[-1.0, -2.0, -3.0, -2.5], &[1.0, 2.0, 3.0, 2.5],
        -7.0386687052920130215, 6.0, 0.00041100664278819285678),
    (&[0.001, 0.002, 0.0015, 0.0012, 0.0019], &[0.0011, 0.0021, 0.0014, 0.0013, 0.0022],
        -0.33942211665106533084, 7.8499656171205901352, 0.74319368324055168703),
    (&[5.0, 7.0, 5.0, 3.0, 5.0, 3.0, 3.0, 9.0], &[8.0, 1.0, 4.0, 6.0, 6.0, 4.0, 1.0, 2.0],
        0.84731854573632338779, 13.563057324840764331, 0.41152039973740937154),
];

#[test]
fn welch_matches_high_precision_values() {
    for (i, (a, b, t, df, p)) in WELCH_FIXTURES.iter().enumerate() {
        let r = welch_ttest(a, b).unwrap();
        assert!((r.p - p).abs() <= 1e-6, "fixture {i}: p {} vs {p}", r.p);
        assert!((r.t - t).abs() <= 1e-9 * t.abs().max(1.0), "fixture {i}: t {} vs {t}", r.t);
        if *t != 0.0 {
            assert!((r.df - df).abs() <= 1e-9 * df, "fixture {i}: df {} vs {df}", r.df);
        }
    }
}

#[test]
fn two_point_accuracy_gap_is_significant() {
    let n = 22544;
    let a: Vec<bool> = (0..n).map(|i| i % 100 < 75).collect();
    let b: Vec<bool> = (0..n).map(|i| i % 100 < 77).collect();
    assert!(compare_experiments(&a, &b).unwrap().p < 1e-4);
}

#[test]
fn jittered_separation() {
    let a: Vec<f64> = (0..100).map(|i| 1e-6 * (i % 7) as f64).collect();
    let b: Vec<f64> = (0..100).map(|i| 1.0 + 1e-6 * (i % 5) as f64).collect();
    assert!(welch_ttest(&a, &b).unwrap().p < 1e-10);
}

proptest! {
    #[test]
    fn welch_is_symmetric(
        a in prop::collection::vec(-100.0f64..100.0, 2..30),
        b in prop::collection::vec(-100.0f64..100.0, 2..30),
    ) {
        let ab = welch_ttest(&a, &b).unwrap();
        let ba = welch_ttest(&b, &a).unwrap();
        prop_assert_eq!(ab.t, -ba.t);
        prop_assert!((ab.p - ba.p).abs() <= 1e-15);
        prop_assert!(ab.p > 0.0 && ab.p <= 1.0);
    }

    #[test]
    fn confusion_is_permutation_invariant(
        pairs in prop::collection::vec((0usize..4, 0usize..4), 1..100),
        seed in any::<u64>(),
    ) {
        let (t, p): (Vec<usize>, Vec<usize>) = pairs.iter().cloned().unzip();
        let m = ConfusionMatrix::from_indices(4, &t, &p).unwrap();
        let mut shuffled = pairs.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rand::seq::SliceRandom::shuffle(&mut shuffled[..], &mut rng);
        let (t2, p2): (Vec<usize>, Vec<usize>) = shuffled.into_iter().unzip();
        prop_assert_eq!(&m, &ConfusionMatrix::from_indices(4, &t2, &p2).unwrap());
        prop_assert_eq!(m.total() as usize, pairs.len());
    }

    #[test]
    fn metric_invariants(grid in prop::collection::vec(prop::collection::vec(0u64..50, 5), 5)) {
        let m = ConfusionMatrix::from_grid(&grid).unwrap();
        prop_assume!(m.total() > 0);
        let r = weighted_metrics(&m).unwrap();
        prop_assert!((r.recall - r.accuracy).abs() <= 1e-12);
        for v in [r.accuracy, r.precision, r.recall, r.f1] {
            prop_assert!((0.0..=1.0 + 1e-15).contains(&v));
        }
        for c in &r.per_class {
            if c.precision > 0.0 && c.recall > 0.0 {
                let h = 2.0 / (1.0 / c.precision + 1.0 / c.recall);
                prop_assert!((c.f1 - h).abs() <= 1e-12);
            }
        }
    }
}

mod support;

use gaitgvf_core::gvf::{DutchTrace, GvfBank, GvfLearner, GvfSpec};
use gaitgvf_core::FeatureVector;
use proptest::prelude::*;
use support::Problem;

fn features(p: &Problem) -> Vec<FeatureVector> {
    (0..=p.steps()).map(|k| FeatureVector::from_sorted(p.phi[0].len(), p.active(k)).unwrap()).collect()
}

fn run_learner(p: &Problem, alpha: f64, gamma: f64, lambda: f64, threshold: f64) -> Vec<f64> {
    let spec = GvfSpec { cumulant_channel: 0, gamma, lambda, alpha };
    let mut learner = GvfLearner::with_threshold(spec, p.phi[0].len(), threshold).unwrap();
    let x = features(p);
    for k in 0..p.steps() {
        learner.step(&x[k], &x[k + 1], p.rewards[k]);
    }
    learner.weights().to_vec()
}

#[test]
fn matches_online_lambda_return() {
    for seed in 0..12 {
        let p = Problem::random(20, 300, seed);
        for lambda in [0.0, 0.5, 0.9] {
            let oracle = support::online_lambda_return(&p, 0.01, 0.94, lambda);
            let got = run_learner(&p, 0.01, 0.94, lambda, 0.0);
            for (a, b) in got.iter().zip(&oracle) {
                assert!((a - b).abs() < 1e-8, "seed {seed} λ {lambda}: {a} vs {b}");
            }
        }
    }
}

#[test]
fn lambda_zero_is_td0() {
    for seed in 0..5 {
        let p = Problem::random(20, 1000, 100 + seed);
        let got = run_learner(&p, 0.02, 0.9, 0.0, 0.0);
        let want = support::td0(&p, 0.02, 0.9);
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }
}

#[test]
fn truncated_trace_stays_close_to_dense() {
    let p = Problem::random(20, 1000, 7);
    let dense = run_learner(&p, 0.01, 0.94, 0.9, 0.0);
    let sparse = run_learner(&p, 0.01, 0.94, 0.9, 1e-9);
    let diff = dense.iter().zip(&sparse).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(diff < 1e-8, "{diff}");
}

#[test]
fn bank_matches_independent_learners() {
    let p = Problem::random(20, 400, 21);
    let x = features(&p);
    // three cumulants: the reward, its negation and a constant
    let cumulants = |k: usize| [p.rewards[k], -p.rewards[k], 0.5];
    let mut bank = GvfBank::with_threshold(3, 20, 0.94, 0.5, 0.01, 0.0).unwrap();
    let mut solo: Vec<GvfLearner> = (0..3)
        .map(|c| {
            GvfLearner::with_threshold(GvfSpec { cumulant_channel: c, gamma: 0.94, lambda: 0.5, alpha: 0.01 }, 20, 0.0)
                .unwrap()
        })
        .collect();
    for k in 0..p.steps() {
        let z = cumulants(k);
        let preds = bank.step(&x[k], &x[k + 1], &z).unwrap().to_vec();
        for (c, l) in solo.iter_mut().enumerate() {
            l.step(&x[k], &x[k + 1], z[c]);
            assert!((l.predict(&x[k + 1]) - preds[c]).abs() < 1e-12);
        }
    }
    for (c, l) in solo.iter().enumerate() {
        assert_eq!(bank.weights(c), l.weights());
    }
}

#[test]
fn zero_cumulant_keeps_zero_weights() {
    let p = Problem::random(20, 200, 3);
    let x = features(&p);
    let mut learner =
        GvfLearner::new(GvfSpec { cumulant_channel: 0, gamma: 0.94, lambda: 0.5, alpha: 0.01 }, 20).unwrap();
    for k in 0..p.steps() {
        learner.step(&x[k], &x[k + 1], 0.0);
    }
    assert!(learner.weights().iter().all(|&w| w == 0.0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn live_list_tracks_nonzero_entries(
        seqs in prop::collection::vec(prop::collection::btree_set(0u32..40, 0..8), 1..60),
        lambda in 0.0f64..1.0,
    ) {
        let mut trace = DutchTrace::new(40, 1e-9);
        for s in seqs {
            let x = FeatureVector::from_sorted(40, s.into_iter().collect()).unwrap();
            trace.update(&x, 0.01, 0.94, lambda);
            let mut live: Vec<u32> = trace.live().to_vec();
            live.sort();
            let nonzero: Vec<u32> = trace.values().iter().enumerate()
                .filter(|(_, v)| **v != 0.0).map(|(i, _)| i as u32).collect();
            prop_assert_eq!(live, nonzero);
        }
    }

    #[test]
    fn oracle_agreement_on_short_problems(seed in 0u64..10_000, lambda in 0.0f64..1.0) {
        let p = Problem::random(8, 60, seed);
        let oracle = support::online_lambda_return(&p, 0.05, 0.9, lambda);
        let got = run_learner(&p, 0.05, 0.9, lambda, 0.0);
        for (a, b) in got.iter().zip(&oracle) {
            prop_assert!((a - b).abs() < 1e-9);
        }
    }
}

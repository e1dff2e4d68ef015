mod support;

#[test]
fn prediction_leads_a_periodic_signal() {
    let a = support::anticipation_experiment(4000, 33.0);
    assert!(a.peak_lag < 0, "peak at lag {}", a.peak_lag);
    assert!(
        a.last_quartile_error <= 0.5 * a.first_quartile_error,
        "{} -> {}",
        a.first_quartile_error,
        a.last_quartile_error
    );
}

#[test]
fn brute_force_return_of_a_constant() {
    let z = vec![0.8; 400];
    let g = support::brute_force_returns(&z, 0.94, 200);
    let closed = 0.8 * (1.0 - 0.94f64.powi(200));
    assert!(g.iter().all(|v| (v - closed).abs() < 1e-12));
    let ours = gaitgvf_core::pipeline::discounted_targets(&z, 0.94, 200);
    assert_eq!(ours.len(), g.len());
    assert!(ours.iter().zip(&g).all(|(a, b)| (a - b).abs() < 1e-12));
}

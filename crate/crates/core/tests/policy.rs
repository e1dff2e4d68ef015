mod support;

use gaitgvf_core::nn::{Network, Workspace};
use gaitgvf_core::policy::assemble_batch;
use gaitgvf_core::{NetConfig, NetVariant, PolicyNet, ReplayBuffer, Sample};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn loss_at(net: &Network, params: &[f64], batch: &[(&[f64], &[f64], usize)]) -> f64 {
    let mut probe = net.clone();
    probe.params_mut().copy_from_slice(params);
    let mut g = vec![0.0; params.len()];
    probe.loss_and_grad(batch, &mut g, &mut Workspace::default()).unwrap()
}

#[test]
fn backprop_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let mut net = Network::mlp(&[10, 5, 7]).unwrap();
        net.init_he_uniform(&mut rng);
        let input: Vec<f64> = (0..10).map(|_| rng.random_range(-1.0..1.0)).collect();
        let label = rng.random_range(0..7);
        let batch = [(&input[..], &[][..], label)];
        let mut grad = vec![0.0; net.param_count()];
        net.loss_and_grad(&batch, &mut grad, &mut Workspace::default()).unwrap();
        let params = net.params().to_vec();
        let numeric = support::numeric_gradient(&params, 1e-6, |p| loss_at(&net, p, &batch));
        worst = worst.max(support::max_relative_error(&grad, &numeric, 1e-6));
    }
    assert!(worst < 1e-4, "{worst}");
}

#[test]
fn latent_merge_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut net = Network::with_merge(&[6, 5, 4, 3], Some((1, 2))).unwrap();
    net.init_he_uniform(&mut rng);
    let inputs: Vec<Vec<f64>> = (0..4).map(|_| (0..6).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let extras: Vec<Vec<f64>> = (0..4).map(|_| (0..2).map(|_| rng.random_range(0.0..1.0)).collect()).collect();
    let batch: Vec<(&[f64], &[f64], usize)> =
        inputs.iter().zip(&extras).enumerate().map(|(i, (x, e))| (&x[..], &e[..], i % 3)).collect();
    let mut grad = vec![0.0; net.param_count()];
    net.loss_and_grad(&batch, &mut grad, &mut Workspace::default()).unwrap();
    let params = net.params().to_vec();
    let numeric = support::numeric_gradient(&params, 1e-6, |p| loss_at(&net, p, &batch));
    assert!(support::max_relative_error(&grad, &numeric, 1e-6) < 1e-4);
}

#[test]
fn parameter_counts() {
    let counts: Vec<usize> = NetVariant::ALL
        .iter()
        .map(|&v| PolicyNet::build(NetConfig::for_variant(v, 0)).unwrap().param_count())
        .collect();
    // 30→24→16→32→16→7
    let control = 30 * 24 + 24 + 24 * 16 + 16 + 16 * 32 + 32 + 32 * 16 + 16 + 16 * 7 + 7;
    assert_eq!(counts[0], control);
    assert_eq!(counts[1], control + 30 * 24);
    assert_eq!(counts[2], control + 30 * 32);
}

fn sample(id: usize) -> Sample {
    Sample { actuals: vec![id as f64], predictions: vec![], label: id % 7 }
}

#[test]
fn replay_buffer_keeps_latest_thousand() {
    let mut buf = ReplayBuffer::new(ReplayBuffer::DEFAULT_CAPACITY);
    for i in 0..1500 {
        buf.push(sample(i));
    }
    assert_eq!(buf.len(), 1000);
    assert_eq!(buf.oldest().unwrap().actuals[0], 500.0);
    let mut ids: Vec<usize> = buf.iter().map(|s| s.actuals[0] as usize).collect();
    ids.sort();
    assert_eq!(ids, (500..1500).collect::<Vec<_>>());
}

#[test]
fn batch_is_half_recent_half_replay() {
    let mut buf = ReplayBuffer::new(1000);
    let recent: Vec<Sample> = (0..40).map(sample).collect();
    for i in 0..1000 {
        buf.push(sample(10_000 + i));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let batch = assemble_batch(&recent, &buf, 16, &mut rng);
    assert_eq!(batch.len(), 32);
    let newest: Vec<usize> = batch[..16].iter().map(|s| s.actuals[0] as usize).collect();
    assert_eq!(newest, (24..40).collect::<Vec<_>>());
    assert!(batch[16..].iter().all(|s| s.actuals[0] >= 10_000.0));
}

#[test]
fn adam_training_reduces_loss() {
    let mut net = PolicyNet::build(NetConfig::for_variant(NetVariant::InputGvf, 3)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let samples: Vec<Sample> = (0..64)
        .map(|i| {
            let label = i % 7;
            let actuals =
                (0..30).map(|c| if c % 7 == label { 0.9 } else { 0.1 } + rng.random_range(-0.05..0.05)).collect();
            Sample { actuals, predictions: vec![0.5; 30], label }
        })
        .collect();
    let batch: Vec<&Sample> = samples.iter().collect();
    let first = net.loss_and_grad(&batch).unwrap();
    for _ in 0..300 {
        net.train_batch(&batch).unwrap();
    }
    let last = net.loss_and_grad(&batch).unwrap();
    assert!(last < 0.2 * first, "{first} -> {last}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn buffer_size_is_min_of_pushes_and_capacity(cap in 1usize..50, pushes in 0usize..200) {
        let mut buf = ReplayBuffer::new(cap);
        for i in 0..pushes {
            buf.push(sample(i));
        }
        prop_assert_eq!(buf.len(), pushes.min(cap));
        prop_assert_eq!(buf.pushes(), pushes as u64);
        if pushes > 0 {
            prop_assert_eq!(buf.oldest().unwrap().actuals[0] as usize, pushes.saturating_sub(cap));
        }
    }

    #[test]
    fn probabilities_form_a_distribution(seed in any::<u64>(), x in prop::collection::vec(0.0f64..=1.0, 30)) {
        for v in NetVariant::ALL {
            let mut net = PolicyNet::build(NetConfig::for_variant(v, seed)).unwrap();
            let preds = vec![0.3; 30];
            let c = net.forward(&x, v.uses_predictions().then_some(&preds[..])).unwrap();
            let total: f64 = c.probabilities.iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-9);
            prop_assert!(c.probabilities.iter().all(|p| (0.0..=1.0).contains(p)));
            prop_assert!(c.predicted < 7);
        }
    }
}

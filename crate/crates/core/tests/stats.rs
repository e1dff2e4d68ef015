mod support;

use gaitgvf_core::stats::{chi_square_sf, dunn_holm_sidak, holm_sidak, kruskal_wallis};
use proptest::prelude::*;

fn refs(groups: &[Vec<f64>]) -> Vec<&[f64]> {
    groups.iter().map(|g| &g[..]).collect()
}

#[test]
fn two_group_example() {
    let kw = kruskal_wallis(&[&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]]).unwrap();
    assert!((kw.h - 3.857).abs() < 1e-3);
    assert!((kw.h - 27.0 / 7.0).abs() < 1e-12);
}

#[test]
fn holm_sidak_example() {
    let adj = holm_sidak(&[0.01, 0.04, 0.03]);
    let a0 = 1.0 - 0.99f64.powi(3);
    let a2 = (1.0 - 0.97f64.powi(2)).max(a0);
    let a1 = 0.04f64.max(a2);
    assert!((adj[0] - a0).abs() < 1e-12);
    assert!((adj[2] - a2).abs() < 1e-12);
    assert!((adj[1] - a1).abs() < 1e-12);
}

#[test]
fn holm_sidak_three_pair_example() {
    let adj = holm_sidak(&[0.01, 0.04, 0.30]);
    let want = [1.0 - 0.99f64.powi(3), 1.0 - 0.96f64.powi(2), 0.30];
    for (a, w) in adj.iter().zip(want) {
        assert!((a - w).abs() < 1e-6, "{a} vs {w}");
    }
    for (a, shown) in adj.iter().zip([0.0297, 0.0784, 0.30]) {
        assert!((a - shown).abs() < 5e-5);
    }
    assert_eq!(holm_sidak(&[0.2]), vec![0.2]);
}

#[test]
fn dunn_on_separated_groups() {
    let groups = vec![vec![1.0, 2.0, 3.0, 4.0], vec![5.0, 6.0, 7.0, 8.0], vec![9.0, 10.0, 11.0, 12.0]];
    let d = dunn_holm_sidak(&refs(&groups), 0.05).unwrap();
    assert_eq!(d.len(), 3);
    assert_eq!((d[0].first, d[0].second), (0, 1));
    assert_eq!((d[2].first, d[2].second), (1, 2));
    // N = 12, mean ranks 2.5, 6.5, 10.5: se = sqrt(13 * 2 / 4)
    let se = (12.0 * 13.0 / 12.0 * 0.5f64).sqrt();
    assert!((d[0].z + 4.0 / se).abs() < 1e-12);
    assert!((d[1].z + 8.0 / se).abs() < 1e-12);
    assert!(d[1].significant);
    assert!(d.iter().all(|r| r.p_adjusted >= r.p_raw));
}

#[test]
fn chi_square_tail_reference_points() {
    // df = 2: sf(x) = exp(−x/2)
    for x in [0.5, 2.0, 7.0] {
        assert!((chi_square_sf(x, 2.0) - (-x / 2.0f64).exp()).abs() < 1e-13);
    }
    assert!((chi_square_sf(9.487729, 4.0) - 0.05).abs() < 1e-6);
}

fn distinct_groups(sizes: &[usize], values: &[f64]) -> Vec<Vec<f64>> {
    let mut it = values.iter().copied();
    sizes.iter().map(|&n| (&mut it).take(n).collect()).collect()
}

fn groups_strategy() -> impl Strategy<Value = Vec<Vec<f64>>> {
    let value = prop::sample::select(vec![0.1, 0.2, 0.3, 0.35, 0.5, 0.6, 0.8, 0.9]);
    prop::collection::vec(prop::collection::vec(value, 1..7), 2..5)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn h_matches_textbook_formula(groups in groups_strategy()) {
        let n: usize = groups.iter().map(Vec::len).sum();
        let all_equal = groups.iter().flatten().all(|&v| v == groups[0][0]);
        prop_assume!(n > 1 && !all_equal);
        let got = kruskal_wallis(&refs(&groups)).unwrap();
        let want = support::kruskal_h(&groups);
        prop_assert!((got.h - want).abs() < 1e-9 * want.abs().max(1.0), "{} vs {}", got.h, want);
        prop_assert!((0.0..=1.0).contains(&got.p_value));
    }

    #[test]
    fn invariant_under_monotone_rescaling(groups in groups_strategy(), a in 0.1f64..10.0, b in -5.0f64..5.0) {
        let scaled: Vec<Vec<f64>> = groups.iter().map(|g| g.iter().map(|v| a * v + b).collect()).collect();
        let x = kruskal_wallis(&refs(&groups)).unwrap();
        let y = kruskal_wallis(&refs(&scaled)).unwrap();
        prop_assert!((x.h - y.h).abs() < 1e-9);
        let dx = dunn_holm_sidak(&refs(&groups), 0.05).unwrap();
        let dy = dunn_holm_sidak(&refs(&scaled), 0.05).unwrap();
        for (p, q) in dx.iter().zip(&dy) {
            prop_assert!((p.z - q.z).abs() < 1e-9);
        }
    }

    #[test]
    fn invariant_under_group_permutation(groups in groups_strategy(), shift in 1usize..4) {
        let mut rotated = groups.clone();
        let k = rotated.len();
        rotated.rotate_left(shift % k);
        let x = kruskal_wallis(&refs(&groups)).unwrap();
        let y = kruskal_wallis(&refs(&rotated)).unwrap();
        prop_assert!((x.h - y.h).abs() < 1e-9);
    }

    // Tie-free samples with N of 7 or 8. Smaller or heavily tied samples
    // have permutation distributions too coarse for the 0.15 band.
    #[test]
    fn chi_square_p_tracks_exhaustive_permutation(
        sizes in prop::sample::select(vec![vec![4, 4], vec![3, 5], vec![2, 6], vec![2, 2, 3], vec![2, 2, 4], vec![2, 3, 3], vec![2, 2, 2, 2]]),
        order in Just((0..8).map(f64::from).collect::<Vec<_>>()).prop_shuffle(),
    ) {
        let groups = distinct_groups(&sizes, &order);
        let chi = kruskal_wallis(&refs(&groups)).unwrap().p_value;
        let exact = support::permutation_p(&groups);
        prop_assert!((chi - exact).abs() <= 0.15, "{groups:?}: chi-square {chi}, exact {exact}");
    }

    #[test]
    fn holm_sidak_is_monotone_and_bounded(p in prop::collection::vec(0.0f64..=1.0, 1..12)) {
        let adj = holm_sidak(&p);
        let mut order: Vec<usize> = (0..p.len()).collect();
        order.sort_by(|&a, &b| p[a].total_cmp(&p[b]));
        for w in order.windows(2) {
            prop_assert!(adj[w[0]] <= adj[w[1]] + 1e-15);
        }
        for (a, r) in adj.iter().zip(&p) {
            prop_assert!(*a >= *r - 1e-15 && *a <= 1.0);
        }
    }
}

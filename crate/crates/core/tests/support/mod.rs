//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A random linear prediction problem: binary feature vectors `phi[0..=T]`
/// and rewards `r[1..=T]` (stored at `r[k]` for the transition `k → k+1`).
pub struct Problem {
    pub phi: Vec<Vec<f64>>,
    pub rewards: Vec<f64>,
}

impl Problem {
    pub fn random(n_features: usize, steps: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let phi = (0..=steps)
            .map(|_| (0..n_features).map(|_| if rng.random_bool(0.5) { 1.0 } else { 0.0 }).collect())
            .collect();
        let rewards = (0..steps).map(|_| rng.random_range(-1.0..1.0)).collect();
        Problem { phi, rewards }
    }

    pub fn steps(&self) -> usize {
        self.rewards.len()
    }

    pub fn active(&self, k: usize) -> Vec<u32> {
        self.phi[k].iter().enumerate().filter(|(_, &v)| v != 0.0).map(|(i, _)| i as u32).collect()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Online λ-return algorithm, run literally: for every horizon `h` the
/// weights restart from zero and sweep `k = 0..h` with the truncated
/// λ-return `G^{λ|h}_k`, whose n-step returns bootstrap from the final
/// weights of horizon `k+n`'s own sweep, `θ^{k+n}_{k+n}`. Quadratic in the
/// number of steps.
pub fn online_lambda_return(p: &Problem, alpha: f64, gamma: f64, lambda: f64) -> Vec<f64> {
    let d = p.phi[0].len();
    let t_max = p.steps();
    // diag[j] = θ^j_j
    let mut diag: Vec<Vec<f64>> = vec![vec![0.0; d]];
    for h in 1..=t_max {
        // truncated returns for k = h-1 down to 0
        let mut g = vec![0.0; h];
        g[h - 1] = p.rewards[h - 1] + gamma * dot(&diag[h - 1], &p.phi[h]);
        for k in (0..h - 1).rev() {
            let boot = dot(&diag[k], &p.phi[k + 1]);
            g[k] = p.rewards[k] + gamma * ((1.0 - lambda) * boot + lambda * g[k + 1]);
        }
        let mut theta = vec![0.0; d];
        for (gk, phi) in g.iter().zip(&p.phi[..h]) {
            let err = gk - dot(&theta, phi);
            for (w, x) in theta.iter_mut().zip(phi) {
                *w += alpha * err * x;
            }
        }
        diag.push(theta);
    }
    diag.pop().unwrap()
}

/// Linear TD(0) with no traces.
pub fn td0(p: &Problem, alpha: f64, gamma: f64) -> Vec<f64> {
    let mut w = vec![0.0; p.phi[0].len()];
    for k in 0..p.steps() {
        let delta = p.rewards[k] + gamma * dot(&w, &p.phi[k + 1]) - dot(&w, &p.phi[k]);
        for (wi, x) in w.iter_mut().zip(&p.phi[k]) {
            *wi += alpha * delta * x;
        }
    }
    w
}

/// Indices of the `c` nearest prototypes by a full stable sort on
/// (distance, index), ascending by index.
pub fn full_sort_nearest(dist: &[f64], c: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..dist.len()).collect();
    idx.sort_by(|&a, &b| dist[a].partial_cmp(&dist[b]).unwrap().then(a.cmp(&b)));
    let mut out = idx[..c].to_vec();
    out.sort();
    out
}

/// Active feature indices for a three-level encoding, computed by sorting.
pub fn skc_by_sorting(coords: &[f64], dim: usize, state: &[f64], levels: [usize; 3]) -> Vec<u32> {
    let k = coords.len() / dim;
    let dist: Vec<f64> =
        coords.chunks(dim).map(|p| p.iter().zip(state).map(|(a, b)| (a - b) * (a - b)).sum()).collect();
    let mut out = Vec::new();
    for (m, &c) in levels.iter().enumerate() {
        out.extend(full_sort_nearest(&dist, c).into_iter().map(|i| (i + m * k) as u32));
    }
    out.sort();
    out
}

/// Kruskal–Wallis H from the textbook formula
/// `H = [12/(N(N+1)) Σ R_i²/n_i − 3(N+1)] / (1 − Σ(t³−t)/(N³−N))`,
/// with ranks assigned by counting.
pub fn kruskal_h(groups: &[Vec<f64>]) -> f64 {
    let all: Vec<f64> = groups.iter().flatten().copied().collect();
    let n = all.len() as f64;
    let rank = |v: f64| {
        let below = all.iter().filter(|&&x| x < v).count() as f64;
        let equal = all.iter().filter(|&&x| x == v).count() as f64;
        below + (equal + 1.0) / 2.0
    };
    let sum: f64 = groups
        .iter()
        .map(|g| {
            let r: f64 = g.iter().map(|&v| rank(v)).sum();
            r * r / g.len() as f64
        })
        .sum();
    let h = 12.0 / (n * (n + 1.0)) * sum - 3.0 * (n + 1.0);
    let mut ties = 0.0;
    let mut seen: Vec<f64> = Vec::new();
    for &v in &all {
        if !seen.contains(&v) {
            seen.push(v);
            let t = all.iter().filter(|&&x| x == v).count() as f64;
            ties += t * t * t - t;
        }
    }
    h / (1.0 - ties / (n * n * n - n))
}

/// Central finite-difference gradient of `f` at `x`.
pub fn numeric_gradient(x: &[f64], h: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut p = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = p[i];
            p[i] = orig + h;
            let up = f(&p);
            p[i] = orig - h;
            let down = f(&p);
            p[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Max over components of `|a − b| / max(|a|, |b|, floor)`.
pub fn max_relative_error(a: &[f64], b: &[f64], floor: f64) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(floor)).fold(0.0, f64::max)
}

/// Sample cross-correlation of two equal-length series at integer `lag`
/// (`corr(a[t], b[t + lag])`), means removed.
pub fn cross_correlation(a: &[f64], b: &[f64], lag: isize) -> f64 {
    let n = a.len() as isize;
    let ma = a.iter().sum::<f64>() / a.len() as f64;
    let mb = b.iter().sum::<f64>() / b.len() as f64;
    let mut s = 0.0;
    let mut count = 0.0;
    for t in 0..n {
        let u = t + lag;
        if u >= 0 && u < n {
            s += (a[t as usize] - ma) * (b[u as usize] - mb);
            count += 1.0;
        }
    }
    let va = a.iter().map(|x| (x - ma) * (x - ma)).sum::<f64>() / a.len() as f64;
    let vb = b.iter().map(|x| (x - mb) * (x - mb)).sum::<f64>() / b.len() as f64;
    s / count / (va * vb).sqrt()
}

/// Noiseless periodic frames: channel 0 is `0.5 + 0.5 sin(2πt/P)`; the
/// other channels carry the quadrature and second harmonic so the phase is
/// recoverable from a single frame.
pub fn periodic_frames(frames: usize, period: f64) -> Vec<[f64; 3]> {
    (0..frames)
        .map(|t| {
            let th = 2.0 * std::f64::consts::PI * t as f64 / period;
            [0.5 + 0.5 * th.sin(), 0.5 + 0.5 * th.cos(), 0.5 + 0.5 * (2.0 * th).sin()]
        })
        .collect()
}

/// `(1 − γ) Σ_{k<W} γᵏ z[t+k+1]` by direct summation.
pub fn brute_force_returns(z: &[f64], gamma: f64, window: usize) -> Vec<f64> {
    (0..z.len().saturating_sub(window))
        .map(|t| (1.0 - gamma) * (0..window).map(|k| gamma.powi(k as i32) * z[t + k + 1]).sum::<f64>())
        .collect()
}

pub struct Anticipation {
    /// Lag of the peak of `corr(signal[t], prediction[t + lag])`.
    pub peak_lag: isize,
    pub first_quartile_error: f64,
    pub last_quartile_error: f64,
}

/// Trains a default-shaped GVF bank on a periodic stream and measures how
/// its channel-0 prediction relates to the signal.
pub fn anticipation_experiment(frames: usize, period: f64) -> Anticipation {
    use gaitgvf_core::gvf::{normalize_prediction, GvfBank, GvfSpec};
    use gaitgvf_core::{PrototypeSet, ResolutionLevels, SkcEncoder};

    let gamma = GvfSpec::DEFAULT_GAMMA;
    let levels = ResolutionLevels::DEFAULT;
    let data = periodic_frames(frames, period);
    let mut enc = SkcEncoder::new(PrototypeSet::random(5000, 3, 17).unwrap(), levels).unwrap();
    let mut bank =
        GvfBank::new(3, enc.feature_len(), gamma, GvfSpec::DEFAULT_LAMBDA, GvfSpec::default_alpha(levels.active()))
            .unwrap();
    let mut x = enc.encode(&data[0]).unwrap();
    bank.refresh(&x);
    let mut pred = Vec::with_capacity(frames);
    for t in 0..frames {
        pred.push(normalize_prediction(bank.last_predictions()[0], gamma));
        if t + 1 < frames {
            let next = enc.encode(&data[t + 1]).unwrap();
            bank.step(&x, &next, &data[t + 1]).unwrap();
            x = next;
        }
    }
    let z: Vec<f64> = data.iter().map(|f| f[0]).collect();
    let window = 200;
    let targets = brute_force_returns(&z, gamma, window);
    let q = targets.len() / 4;
    let mse =
        |r: std::ops::Range<usize>| r.clone().map(|t| (pred[t] - targets[t]).powi(2)).sum::<f64>() / r.len() as f64;

    // correlation over the trained second half only
    let half = frames / 2;
    // within half a period, so the lag is unambiguous
    let span = (period / 2.0).floor() as isize;
    let peak_lag = (-span..=span)
        .max_by(|&a, &b| {
            cross_correlation(&z[half..], &pred[half..], a).total_cmp(&cross_correlation(&z[half..], &pred[half..], b))
        })
        .unwrap();
    Anticipation {
        peak_lag,
        first_quartile_error: mse(0..q),
        last_quartile_error: mse(targets.len() - q..targets.len()),
    }
}

/// Exact permutation p-value of the Kruskal–Wallis statistic: the share of
/// all relabelings (group sizes fixed) whose H is at least the observed one.
pub fn permutation_p(groups: &[Vec<f64>]) -> f64 {
    let sizes: Vec<usize> = groups.iter().map(Vec::len).collect();
    let pooled: Vec<f64> = groups.iter().flatten().copied().collect();
    let observed = kruskal_h(groups);
    let k = sizes.len();
    let n = pooled.len();
    let (mut hits, mut total) = (0u64, 0u64);
    for code in 0..k.pow(n as u32) {
        let mut labels = Vec::with_capacity(n);
        let mut c = code;
        for _ in 0..n {
            labels.push(c % k);
            c /= k;
        }
        if (0..k).any(|g| labels.iter().filter(|&&l| l == g).count() != sizes[g]) {
            continue;
        }
        let relabeled: Vec<Vec<f64>> =
            (0..k).map(|g| pooled.iter().zip(&labels).filter(|(_, &l)| l == g).map(|(v, _)| *v).collect()).collect();
        total += 1;
        if kruskal_h(&relabeled) >= observed - 1e-9 {
            hits += 1;
        }
    }
    hits as f64 / total as f64
}

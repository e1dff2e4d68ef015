//! Seeded synthetic gait sessions.
//!
//! Each channel is a quasi-periodic waveform built from a handful of
//! harmonics of the gait cycle frequency. Every (terrain, channel) pair gets
//! its own amplitude, phase and offset profile, perturbed away from a shared
//! per-channel base by a terrain-specific spread: stairs sit far from even
//! ground, ramps, turns and uneven ground sit close to it.
//!
//! EMG channels amplitude-modulate a broadband carrier (components between
//! 20 and 400 Hz, all integer multiples of the cycle frequency), pressure
//! channels are rectified, goniometer channels are used as-is. Stride to
//! stride variability is a per-cycle gain jitter plus a baseline wander with
//! several knots per cycle, both linearly interpolated and both scaled by
//! `noise_std`, so a noiseless session is exactly periodic inside each
//! terrain segment. The wander survives the low-pass filters, which the
//! sample-level white noise mostly does not, and it makes single frames
//! ambiguous between neighbouring terrains.

use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::seed::{self, stream};
use crate::terrain::{ChannelKind, TerrainLabel};

/// Accepted range for `total_target_steps` in a strict session.
pub const TARGET_STEP_RANGE: (usize, usize) = (14_000, 18_000);
/// Every configured terrain appears at least this many times.
pub const MIN_TERRAIN_REPEATS: usize = 2;
const MAX_HARMONICS: usize = 5;
const CARRIER_COMPONENTS: usize = 32;
const CARRIER_LOW_HZ: f64 = 20.0;
const CARRIER_HIGH_HZ: f64 = 400.0;
/// Per-cycle gain jitter standard deviation, in units of `noise_std`.
const JITTER_PER_NOISE: f64 = 10.0;
/// Baseline wander standard deviation, in units of `noise_std`.
const WANDER_PER_NOISE: f64 = 36.0;
/// Wander knots per gait cycle, linearly interpolated in between.
const WANDER_KNOTS_PER_CYCLE: usize = 6;
/// Largest baseline shift of a terrain, per unit of spread.
const OFFSET_SPREAD: f64 = 4.8;

#[derive(Debug, Clone, PartialEq)]
pub struct SessionConfig {
    pub seed: u64,
    pub raw_rate_hz: f64,
    pub target_rate_hz: f64,
    pub n_channels: usize,
    pub total_target_steps: usize,
    pub cycle_period_s: f64,
    /// Inclusive range of segment lengths, in target-rate steps.
    pub segment_steps: (usize, usize),
    pub noise_std: f64,
    /// Terrains visited by the schedule.
    pub terrains: Vec<TerrainLabel>,
}

impl Default for SessionConfig {
    fn default() -> Self {
        SessionConfig {
            seed: 0,
            raw_rate_hz: 1000.0,
            target_rate_hz: 33.0,
            n_channels: 30,
            total_target_steps: 16_500,
            cycle_period_s: 1.0,
            segment_steps: (400, 1200),
            noise_std: 0.05,
            terrains: TerrainLabel::ALL.to_vec(),
        }
    }
}

impl SessionConfig {
    pub fn with_seed(seed: u64) -> Self {
        SessionConfig { seed, ..Default::default() }
    }

    /// Integer factor between the raw and the target rate.
    pub fn decimation_factor(&self) -> usize {
        libm::round(self.raw_rate_hz / self.target_rate_hz) as usize
    }

    /// Raw samples per gait cycle.
    pub fn period_samples(&self) -> usize {
        libm::round(self.cycle_period_s * self.raw_rate_hz) as usize
    }

    pub fn raw_len(&self) -> usize {
        self.total_target_steps * self.decimation_factor()
    }

    /// Highest frequency present in any synthesized channel.
    pub fn highest_frequency_hz(&self) -> f64 {
        let harmonic = MAX_HARMONICS as f64 / self.cycle_period_s;
        harmonic.max(carrier_band(self).1)
    }

    /// Full validation, including the 14k..18k step band.
    pub fn validate(&self) -> Result<()> {
        self.validate_shape()?;
        let (lo, hi) = TARGET_STEP_RANGE;
        if self.total_target_steps < lo || self.total_target_steps > hi {
            return Err(Error::config(alloc::format!(
                "total_target_steps = {} outside [{lo}, {hi}]",
                self.total_target_steps
            )));
        }
        Ok(())
    }

    /// Validation without the session-length band; used for small
    /// experiments and tests.
    pub fn validate_shape(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.raw_rate_hz) || !positive(self.target_rate_hz) {
            return Err(Error::config("sample rates must be positive"));
        }
        if !positive(self.cycle_period_s) {
            return Err(Error::config("cycle_period_s must be positive"));
        }
        if !(self.noise_std.is_finite() && self.noise_std >= 0.0) {
            return Err(Error::config("noise_std must be nonnegative"));
        }
        if self.n_channels == 0 {
            return Err(Error::config("n_channels must be at least 1"));
        }
        let k = self.decimation_factor();
        if k == 0 {
            return Err(Error::config("target rate exceeds raw rate"));
        }
        let effective = self.raw_rate_hz / k as f64;
        if libm::fabs(effective - self.target_rate_hz) > 0.05 * self.target_rate_hz {
            return Err(Error::config(alloc::format!(
                "raw rate {} Hz is not an integer multiple of target rate {} Hz",
                self.raw_rate_hz,
                self.target_rate_hz
            )));
        }
        let period = self.cycle_period_s * self.raw_rate_hz;
        if libm::fabs(period - libm::round(period)) > 1e-6 || period < 2.0 {
            return Err(Error::config("cycle_period_s * raw_rate_hz must be a whole number of samples (>= 2)"));
        }
        if 2.0 * MAX_HARMONICS as f64 / self.cycle_period_s >= self.raw_rate_hz {
            return Err(Error::config("cycle harmonics exceed the raw Nyquist rate"));
        }
        if self.terrains.is_empty() {
            return Err(Error::config("at least one terrain is required"));
        }
        for (i, t) in self.terrains.iter().enumerate() {
            if self.terrains[..i].contains(t) {
                return Err(Error::config("duplicate terrain in schedule"));
            }
        }
        let (lo, hi) = self.segment_steps;
        if lo == 0 || lo > hi {
            return Err(Error::config("segment_steps must satisfy 1 <= lo <= hi"));
        }
        let minimum = self.terrains.len() * MIN_TERRAIN_REPEATS * lo;
        if minimum > self.total_target_steps {
            return Err(Error::config(alloc::format!(
                "{} terrains x {MIN_TERRAIN_REPEATS} segments of >= {lo} steps exceed {} steps",
                self.terrains.len(),
                self.total_target_steps
            )));
        }
        Ok(())
    }
}

/// Channel kinds for an `n`-channel montage: EMG first, then goniometers,
/// then pressure insoles, split 14/4/12 for the default 30 channels.
pub fn default_channel_kinds(n: usize) -> Vec<ChannelKind> {
    let emg = (n * 14 + 15) / 30;
    let gonio = ((n * 4 + 15) / 30).min(n - emg.min(n));
    let emg = emg.min(n);
    (0..n)
        .map(|i| {
            if i < emg {
                ChannelKind::Emg
            } else if i < emg + gonio {
                ChannelKind::Goniometer
            } else {
                ChannelKind::Pressure
            }
        })
        .collect()
}

/// Raw multi-channel session at `raw_rate_hz`.
#[derive(Debug, Clone, PartialEq)]
pub struct RawSession {
    pub config: SessionConfig,
    pub channels: Vec<Vec<f64>>,
    pub labels: Vec<TerrainLabel>,
    pub kinds: Vec<ChannelKind>,
}

impl RawSession {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn raw_rate_hz(&self) -> f64 {
        self.config.raw_rate_hz
    }

    /// Number of whole gait cycles covered.
    pub fn gait_cycles(&self) -> usize {
        self.len() / self.config.period_samples()
    }

    /// Contiguous (terrain, raw length) runs in label order.
    pub fn segments(&self) -> Vec<(TerrainLabel, usize)> {
        run_lengths(&self.labels)
    }
}

pub(crate) fn run_lengths(labels: &[TerrainLabel]) -> Vec<(TerrainLabel, usize)> {
    let mut out: Vec<(TerrainLabel, usize)> = Vec::new();
    for &l in labels {
        match out.last_mut() {
            Some((t, n)) if *t == l => *n += 1,
            _ => out.push((l, 1)),
        }
    }
    out
}

/// Seeded terrain order with segment lengths in target-rate steps. Every
/// configured terrain appears at least twice, consecutive segments differ
/// (when more than one terrain is configured) and the lengths sum to
/// `total_target_steps`.
pub fn terrain_schedule(config: &SessionConfig) -> Result<Vec<(TerrainLabel, usize)>> {
    config.validate()?;
    Ok(schedule_unchecked(config))
}

fn schedule_unchecked(config: &SessionConfig) -> Vec<(TerrainLabel, usize)> {
    let mut rng = seed::rng(config.seed, stream::SCHEDULE);
    let terrains = &config.terrains;
    let (lo, hi) = config.segment_steps;
    let total = config.total_target_steps;

    let mut order: Vec<TerrainLabel> =
        terrains.iter().flat_map(|&t| core::iter::repeat_n(t, MIN_TERRAIN_REPEATS)).collect();
    order.shuffle(&mut rng);
    if terrains.len() > 1 {
        let mut tries = 0;
        while has_adjacent_repeat(&order) && tries < 1000 {
            order.shuffle(&mut rng);
            tries += 1;
        }
        repair_adjacent(&mut order);
    }

    let mut lengths: Vec<usize> = order.iter().map(|_| rng.random_range(lo..=hi)).collect();
    let mut sum: usize = lengths.iter().sum();

    if sum > total {
        // shrink from the back toward `lo`; feasible since validation
        // guarantees count * lo <= total
        let mut excess = sum - total;
        for len in lengths.iter_mut().rev() {
            let cut = excess.min(*len - lo);
            *len -= cut;
            excess -= cut;
            if excess == 0 {
                break;
            }
        }
        sum = total;
    }

    let pick_next = |rng: &mut rand_chacha::ChaCha8Rng, last: TerrainLabel| -> TerrainLabel {
        if terrains.len() == 1 {
            return terrains[0];
        }
        loop {
            let t = terrains[rng.random_range(0..terrains.len())];
            if t != last {
                return t;
            }
        }
    };

    while total - sum > hi {
        let last = *order.last().expect("schedule is never empty");
        order.push(pick_next(&mut rng, last));
        let len = rng.random_range(lo..=hi);
        lengths.push(len);
        sum += len;
    }
    let mut rest = total - sum;
    if rest >= lo {
        let last = *order.last().expect("schedule is never empty");
        order.push(pick_next(&mut rng, last));
        lengths.push(rest);
        rest = 0;
    }
    for len in lengths.iter_mut().rev() {
        if rest == 0 {
            break;
        }
        let add = rest.min(hi - *len);
        *len += add;
        rest -= add;
    }
    // Every segment already at `hi`: the last one runs long.
    if rest > 0 {
        *lengths.last_mut().expect("schedule is never empty") += rest;
    }

    order.into_iter().zip(lengths).collect()
}

fn has_adjacent_repeat(order: &[TerrainLabel]) -> bool {
    order.windows(2).any(|w| w[0] == w[1])
}

fn repair_adjacent(order: &mut [TerrainLabel]) {
    for i in 1..order.len() {
        if order[i] == order[i - 1] {
            if let Some(j) = (0..order.len()).find(|&j| {
                j != i
                    && order[j] != order[i]
                    && (j == 0 || order[j - 1] != order[i])
                    && (j + 1 >= order.len() || order[j + 1] != order[i])
                    && (i + 1 >= order.len() || order[i + 1] != order[j])
                    && order[i - 1] != order[j]
            }) {
                order.swap(i, j);
            }
        }
    }
}

/// Spread of a terrain's profile away from the shared channel base.
fn terrain_spread(t: TerrainLabel) -> f64 {
    match t {
        TerrainLabel::EvenGround => 0.045,
        TerrainLabel::UnevenGround => 0.09,
        TerrainLabel::UpStairs => 0.27,
        TerrainLabel::DownStairs => 0.27,
        TerrainLabel::UpRamp => 0.105,
        TerrainLabel::DownRamp => 0.105,
        TerrainLabel::Turns => 0.09,
    }
}

fn carrier_band(config: &SessionConfig) -> (f64, f64) {
    let high = CARRIER_HIGH_HZ.min(0.4 * config.raw_rate_hz);
    (CARRIER_LOW_HZ.min(high), high)
}

#[derive(Debug, Clone)]
struct Harmonics {
    amplitudes: Vec<f64>,
    phases: Vec<f64>,
    offset: f64,
}

/// One gait cycle of each (terrain, channel) harmonic sum, tabulated at the
/// raw rate. Returns (offsets, tables) indexed `[terrain][channel]`.
fn terrain_profiles(config: &SessionConfig) -> Vec<Vec<(f64, Vec<f64>)>> {
    let mut rng = seed::rng(config.seed, stream::PROFILES);
    let period = config.period_samples();
    let base: Vec<Harmonics> = (0..config.n_channels)
        .map(|_| {
            let n = rng.random_range(3..=MAX_HARMONICS);
            let amplitudes = (1..=n).map(|h| rng.random_range(0.3..1.0) / h as f64).collect();
            let phases = (0..n).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
            Harmonics { amplitudes, phases, offset: rng.random_range(-0.3..0.3) }
        })
        .collect();

    TerrainLabel::ALL
        .iter()
        .map(|&t| {
            let s = terrain_spread(t);
            base.iter()
                .map(|b| {
                    let mut u = || rng.random_range(-1.0..1.0);
                    let amplitudes: Vec<f64> = b.amplitudes.iter().map(|a| a * (1.0 + s * u())).collect();
                    let phases: Vec<f64> = b.phases.iter().map(|p| p + s * u() * PI / 3.0).collect();
                    let offset = b.offset + s * OFFSET_SPREAD * u();
                    let table = (0..period)
                        .map(|i| {
                            let theta = 2.0 * PI * i as f64 / period as f64;
                            amplitudes
                                .iter()
                                .zip(&phases)
                                .enumerate()
                                .map(|(h, (a, p))| a * libm::sin((h + 1) as f64 * theta + p))
                                .sum()
                        })
                        .collect();
                    (offset, table)
                })
                .collect()
        })
        .collect()
}

/// Broadband carrier with unit RMS, periodic over one gait cycle.
fn carrier_table(config: &SessionConfig, rng: &mut impl Rng) -> Vec<f64> {
    let period = config.period_samples();
    let f0 = 1.0 / config.cycle_period_s;
    let (lo, hi) = carrier_band(config);
    let h_lo = libm::ceil(lo / f0).max(1.0) as usize;
    let h_hi = (libm::floor(hi / f0) as usize).max(h_lo);
    let comps: Vec<(f64, f64)> = (0..CARRIER_COMPONENTS)
        .map(|_| (rng.random_range(h_lo..=h_hi) as f64, rng.random_range(0.0..2.0 * PI)))
        .collect();
    let amp = libm::sqrt(2.0 / CARRIER_COMPONENTS as f64);
    (0..period)
        .map(|i| {
            let theta = 2.0 * PI * i as f64 / period as f64;
            comps.iter().map(|(h, p)| amp * libm::sin(h * theta + p)).sum()
        })
        .collect()
}

/// Generates a session after full validation (including the 14k..18k
/// target-step band).
pub fn generate_session(config: &SessionConfig) -> Result<RawSession> {
    config.validate()?;
    Ok(generate_unchecked(config))
}

/// Generates a session of any length; shape checks still apply.
pub fn generate_session_relaxed(config: &SessionConfig) -> Result<RawSession> {
    config.validate_shape()?;
    Ok(generate_unchecked(config))
}

fn generate_unchecked(config: &SessionConfig) -> RawSession {
    let k = config.decimation_factor();
    let period = config.period_samples();
    let schedule = schedule_unchecked(config);
    let labels: Vec<TerrainLabel> = schedule.iter().flat_map(|&(t, n)| core::iter::repeat_n(t, n * k)).collect();
    let len = labels.len();
    let kinds = default_channel_kinds(config.n_channels);
    let profiles = terrain_profiles(config);

    let mut carrier_rng = seed::rng(config.seed, stream::CARRIER);
    let mut noise_rng = seed::rng(config.seed, stream::NOISE);
    let mut jitter_rng = seed::rng(config.seed, stream::JITTER);
    let jitter = JITTER_PER_NOISE * config.noise_std;
    let wander_std = WANDER_PER_NOISE * config.noise_std;
    let knot_len = (period / WANDER_KNOTS_PER_CYCLE).max(1);
    let n_cycles = len / period + 2;
    let n_knots = len / knot_len + 2;

    let channels = (0..config.n_channels)
        .map(|ch| {
            let kind = kinds[ch];
            let carrier = (kind == ChannelKind::Emg).then(|| carrier_table(config, &mut carrier_rng));
            let gains: Vec<f64> = (0..n_cycles)
                .map(|_| {
                    let z: f64 = jitter_rng.sample(StandardNormal);
                    1.0 + jitter * z
                })
                .collect();
            let wander: Vec<f64> =
                (0..n_knots).map(|_| wander_std * jitter_rng.sample::<f64, _>(StandardNormal)).collect();
            (0..len)
                .map(|i| {
                    let (offset, table) = &profiles[labels[i].index()][ch];
                    let phase = i % period;
                    let cycle = i / period;
                    let frac = phase as f64 / period as f64;
                    let gain = gains[cycle] + (gains[cycle + 1] - gains[cycle]) * frac;
                    let knot = i / knot_len;
                    let t = (i % knot_len) as f64 / knot_len as f64;
                    let drift = wander[knot] + (wander[knot + 1] - wander[knot]) * t;
                    let wave = offset + drift + gain * table[phase];
                    let noise: f64 = noise_rng.sample::<f64, _>(StandardNormal) * config.noise_std;
                    match (kind, &carrier) {
                        (ChannelKind::Emg, Some(c)) => {
                            let envelope = 1.0 + 0.8 * libm::tanh(wave);
                            envelope * c[phase] + noise
                        }
                        (ChannelKind::Pressure, _) => (wave + noise).max(0.0),
                        _ => wave + noise,
                    }
                })
                .collect()
        })
        .collect();

    RawSession { config: config.clone(), channels, labels, kinds }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seed: u64) -> SessionConfig {
        SessionConfig { seed, total_target_steps: 1500, segment_steps: (50, 120), n_channels: 6, ..Default::default() }
    }

    #[test]
    fn default_montage_split() {
        let kinds = default_channel_kinds(30);
        let count = |k| kinds.iter().filter(|&&x| x == k).count();
        assert_eq!(count(ChannelKind::Emg), 14);
        assert_eq!(count(ChannelKind::Goniometer), 4);
        assert_eq!(count(ChannelKind::Pressure), 12);
        assert_eq!(default_channel_kinds(1).len(), 1);
    }

    #[test]
    fn schedule_sums_and_covers() {
        for seed in 0..20 {
            let cfg = SessionConfig::with_seed(seed);
            let s = terrain_schedule(&cfg).unwrap();
            assert_eq!(s.iter().map(|x| x.1).sum::<usize>(), cfg.total_target_steps);
            for t in TerrainLabel::ALL {
                assert!(s.iter().filter(|x| x.0 == t).count() >= 2, "seed {seed}: {t:?}");
            }
            assert!(!has_adjacent_repeat(&s.iter().map(|x| x.0).collect::<Vec<_>>()));
        }
    }

    #[test]
    fn schedules_differ_between_seeds() {
        for (a, b) in [(1, 2), (3, 4), (5, 6), (7, 8), (100, 200)] {
            let sa = terrain_schedule(&SessionConfig::with_seed(a)).unwrap();
            let sb = terrain_schedule(&SessionConfig::with_seed(b)).unwrap();
            assert_ne!(sa, sb);
        }
    }

    #[test]
    fn rejects_bad_configs() {
        let mut c = SessionConfig { total_target_steps: 100_000, ..Default::default() };
        assert!(matches!(generate_session(&c), Err(Error::InvalidConfig(_))));
        c.total_target_steps = 13_999;
        assert!(c.validate().is_err());
        let c = SessionConfig { target_rate_hz: 700.0, ..Default::default() };
        assert!(c.validate().is_err());
        let c = SessionConfig { noise_std: -1.0, ..Default::default() };
        assert!(c.validate().is_err());
        let c = SessionConfig { segment_steps: (1300, 1200), ..Default::default() };
        assert!(c.validate().is_err());
        let c = SessionConfig { cycle_period_s: 1.0005, ..Default::default() };
        assert!(c.validate().is_err());
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate_session_relaxed(&small(9)).unwrap();
        let b = generate_session_relaxed(&small(9)).unwrap();
        assert_eq!(a, b);
        let c = generate_session_relaxed(&small(10)).unwrap();
        assert_ne!(a.channels, c.channels);
    }

    #[test]
    fn channels_align_with_labels() {
        let s = generate_session_relaxed(&small(3)).unwrap();
        assert_eq!(s.len(), 1500 * 30);
        for ch in &s.channels {
            assert_eq!(ch.len(), s.len());
        }
        for (ch, kind) in s.channels.iter().zip(&s.kinds) {
            if *kind == ChannelKind::Pressure {
                assert!(ch.iter().all(|&v| v >= 0.0));
            }
        }
    }

    #[test]
    fn noiseless_session_is_periodic_within_segments() {
        let cfg = SessionConfig { noise_std: 0.0, ..small(4) };
        let s = generate_session_relaxed(&cfg).unwrap();
        let p = cfg.period_samples();
        let mut start = 0;
        for (_, n) in s.segments() {
            for ch in &s.channels {
                for i in start..start + n - p {
                    assert_eq!(ch[i].to_bits(), ch[i + p].to_bits());
                }
            }
            start += n;
        }
    }

    #[test]
    fn default_session_has_paper_cycle_count() {
        let cfg = SessionConfig::default();
        // 16500 steps at 33.33 Hz with a 1 s cycle
        let cycles = cfg.raw_len() / cfg.period_samples();
        assert_eq!(cycles, 495);
        assert!((425..=545).contains(&cycles));
    }
}

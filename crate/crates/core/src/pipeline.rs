//! The online experiment loop.
//!
//! Frames stream in order. At step `t`:
//!
//! 1. every net classifies frame `t` from its actual signals and the GVF
//!    predictions currently available for it (scored before any training on
//!    frame `t`: prequential evaluation);
//! 2. the sample is pushed to the recent window and the replay buffer;
//! 3. every net takes one step on a 50-50 batch (shared across nets, so the
//!    variants see identical batches);
//! 4. frame `t+1` is encoded and the GVF bank learns the transition
//!    `t → t+1` with frame `t+1` as cumulants; its post-update predictions
//!    for frame `t+1` are what the nets see at step `t+1`.
//!
//! The GVF bank never reads labels, and nothing the nets do feeds back into
//! it.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::gvf::{GvfBank, GvfSpec, TRACE_EPSILON};
use crate::kanerva::{PrototypeSet, ResolutionLevels, SkcEncoder};
use crate::policy::{assemble_batch, NetConfig, NetVariant, PolicyNet, ReplayBuffer, Sample};
use crate::prep::ProcessedSession;
use crate::seed::{self, stream};
use crate::terrain::N_TERRAINS;

#[derive(Debug, Clone, PartialEq)]
pub struct KanervaConfig {
    pub prototypes: usize,
    pub levels: ResolutionLevels,
    pub seed: u64,
}

impl Default for KanervaConfig {
    fn default() -> Self {
        KanervaConfig { prototypes: 5000, levels: ResolutionLevels::DEFAULT, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GvfConfig {
    pub gamma: f64,
    pub lambda: f64,
    /// `None`: 0.1 divided by the number of active features.
    pub alpha: Option<f64>,
    pub trace_threshold: f64,
}

impl Default for GvfConfig {
    fn default() -> Self {
        GvfConfig {
            gamma: GvfSpec::DEFAULT_GAMMA,
            lambda: GvfSpec::DEFAULT_LAMBDA,
            alpha: None,
            trace_threshold: TRACE_EPSILON,
        }
    }
}

impl GvfConfig {
    pub fn alpha_for(&self, levels: &ResolutionLevels) -> f64 {
        self.alpha.unwrap_or_else(|| GvfSpec::default_alpha(levels.active()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchConfig {
    /// Samples per half batch (new / replay).
    pub half: usize,
    pub capacity: usize,
    pub seed: u64,
    /// Nets start training after this many frames.
    pub train_delay: usize,
    /// One training step every `train_every` frames.
    pub train_every: usize,
}

impl Default for BatchConfig {
    fn default() -> Self {
        BatchConfig { half: 16, capacity: ReplayBuffer::DEFAULT_CAPACITY, seed: 0, train_delay: 0, train_every: 1 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSettings {
    pub kanerva: KanervaConfig,
    pub gvf: GvfConfig,
    /// Template for every net; `variant` is replaced per run.
    pub net: NetConfig,
    pub batch: BatchConfig,
    pub variants: Vec<NetVariant>,
    /// Frames per convergence-curve point.
    pub window: usize,
    /// Tail fraction of frames that defines end-of-training accuracy.
    pub end_fraction: f64,
    /// Truncation of the brute-force discounted return used for GVF error.
    pub return_window: usize,
    /// Keep the per-step raw GVF predictions in the output.
    pub keep_gvf_trace: bool,
}

impl Default for RunSettings {
    fn default() -> Self {
        RunSettings {
            kanerva: KanervaConfig::default(),
            gvf: GvfConfig::default(),
            net: NetConfig::default(),
            batch: BatchConfig::default(),
            variants: NetVariant::ALL.to_vec(),
            window: 500,
            end_fraction: 0.1,
            return_window: 200,
            keep_gvf_trace: false,
        }
    }
}

impl RunSettings {
    /// All random streams derived from one seed.
    pub fn seeded(seed: u64) -> Self {
        let mut s = RunSettings::default();
        s.reseed(seed);
        s
    }

    pub fn reseed(&mut self, seed: u64) {
        self.kanerva.seed = seed;
        self.net.init_seed = seed;
        self.batch.seed = seed;
    }

    pub fn validate(&self, n_channels: usize) -> Result<()> {
        self.kanerva.levels.check_against(self.kanerva.prototypes)?;
        GvfSpec {
            cumulant_channel: 0,
            gamma: self.gvf.gamma,
            lambda: self.gvf.lambda,
            alpha: self.gvf.alpha_for(&self.kanerva.levels),
        }
        .validate()?;
        self.net.validate()?;
        if self.net.n_actual != n_channels {
            return Err(Error::DimensionMismatch { expected: self.net.n_actual, got: n_channels });
        }
        if self.net.n_predictions != n_channels {
            return Err(Error::DimensionMismatch { expected: self.net.n_predictions, got: n_channels });
        }
        if self.window == 0 || self.batch.half == 0 || self.batch.capacity == 0 || self.batch.train_every == 0 {
            return Err(Error::config("window, batch half, capacity and train_every must be positive"));
        }
        if !(self.end_fraction > 0.0 && self.end_fraction <= 1.0) {
            return Err(Error::config("end_fraction must lie in (0, 1]"));
        }
        for (i, v) in self.variants.iter().enumerate() {
            if self.variants[..i].contains(v) {
                return Err(Error::config("duplicate variant"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    /// Frames seen at the end of the window.
    pub step: usize,
    pub accuracy: f64,
}

pub type Confusion = [[u64; N_TERRAINS]; N_TERRAINS];

#[derive(Debug, Clone, PartialEq)]
pub struct VariantMetrics {
    pub variant: NetVariant,
    pub curve: Vec<CurvePoint>,
    /// Accuracy over the final `end_fraction` of frames.
    pub final_accuracy: f64,
    /// Accuracy over every frame.
    pub overall_accuracy: f64,
    /// Accuracy over frames after the training delay.
    pub post_delay_accuracy: f64,
    /// Per-terrain accuracy over every frame; `None` for absent terrains.
    pub per_terrain: [Option<f64>; N_TERRAINS],
    /// Rows: correct terrain, columns: predicted terrain.
    pub confusion: Confusion,
    pub mean_loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunMetrics {
    pub frames: usize,
    pub variants: Vec<VariantMetrics>,
    /// Mean squared error of `(1 − γ)V` against the truncated discounted
    /// return, per channel.
    pub gvf_error: Vec<f64>,
    /// Raw predictions `V(t)` row-major `[t][channel]` when requested.
    pub gvf_trace: Option<Vec<f64>>,
}

impl RunMetrics {
    pub fn variant(&self, v: NetVariant) -> Option<&VariantMetrics> {
        self.variants.iter().find(|m| m.variant == v)
    }
}

/// Final learner state of a run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub metrics: RunMetrics,
    pub prototypes: PrototypeSet,
    pub bank: GvfBank,
    pub nets: Vec<PolicyNet>,
}

struct Tally {
    confusion: Confusion,
    window_correct: usize,
    curve: Vec<CurvePoint>,
    final_correct: usize,
    post_delay_correct: usize,
    loss_sum: f64,
    loss_count: usize,
}

impl Tally {
    fn new() -> Self {
        Tally {
            confusion: [[0; N_TERRAINS]; N_TERRAINS],
            window_correct: 0,
            curve: Vec::new(),
            final_correct: 0,
            post_delay_correct: 0,
            loss_sum: 0.0,
            loss_count: 0,
        }
    }
}

/// Runs every configured variant over `session` from freshly built nets.
pub fn run_online(session: &ProcessedSession, settings: &RunSettings) -> Result<RunOutput> {
    settings.validate(session.n_channels)?;
    let nets = settings
        .variants
        .iter()
        .map(|&variant| PolicyNet::build(NetConfig { variant, ..settings.net.clone() }))
        .collect::<Result<Vec<_>>>()?;
    run_online_with(session, settings, nets)
}

/// Everything a run learns, as restored from a checkpoint.
#[derive(Debug, Clone)]
pub struct Learners {
    pub prototypes: PrototypeSet,
    pub bank: GvfBank,
    pub nets: Vec<PolicyNet>,
}

/// Runs the given nets with fresh prototypes and GVFs; `settings.variants`
/// is ignored in favor of the nets' own variants.
pub fn run_online_with(session: &ProcessedSession, settings: &RunSettings, nets: Vec<PolicyNet>) -> Result<RunOutput> {
    settings.validate(session.n_channels)?;
    let n = session.n_channels;
    let kc = &settings.kanerva;
    let prototypes = PrototypeSet::for_levels(kc.prototypes, n, kc.seed, &kc.levels)?;
    let gc = &settings.gvf;
    let bank = GvfBank::with_threshold(
        n,
        3 * prototypes.count(),
        gc.gamma,
        gc.lambda,
        gc.alpha_for(&kc.levels),
        gc.trace_threshold,
    )?;
    run_online_resume(session, settings, Learners { prototypes, bank, nets })
}

/// Continues learning on a new session. The GVF trace starts empty; weights,
/// optimizer state and step counters carry over. Prototypes and GVF
/// hyperparameters come from `learners`, resolution levels and everything
/// else from `settings`.
pub fn run_online_resume(session: &ProcessedSession, settings: &RunSettings, learners: Learners) -> Result<RunOutput> {
    settings.validate(session.n_channels)?;
    if session.is_empty() {
        return Err(Error::Empty("session"));
    }
    let Learners { prototypes, mut bank, mut nets } = learners;
    let n = session.n_channels;
    for net in &nets {
        let c = net.config();
        if c.n_actual != n || c.n_predictions != n {
            return Err(Error::DimensionMismatch { expected: n, got: c.n_actual });
        }
    }
    if prototypes.dim() != n || bank.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: prototypes.dim() });
    }
    let frames = session.len();
    let mut encoder = SkcEncoder::new(prototypes, settings.kanerva.levels)?;
    if bank.feature_len() != encoder.feature_len() {
        return Err(Error::DimensionMismatch { expected: encoder.feature_len(), got: bank.feature_len() });
    }
    bank.begin_episode();
    let gamma = bank.gamma();

    let bc = &settings.batch;
    let mut rng = seed::rng(bc.seed, stream::REPLAY);
    let mut buffer = ReplayBuffer::new(bc.capacity);
    let mut recent: Vec<Sample> = Vec::with_capacity(bc.half + 1);
    let mut tallies: Vec<Tally> = nets.iter().map(|_| Tally::new()).collect();
    let end_start = frames - libm::ceil(frames as f64 * settings.end_fraction) as usize;
    let mut trace = settings.keep_gvf_trace.then(|| Vec::with_capacity(frames * n));
    let mut raw_predictions: Vec<f64> = Vec::with_capacity(frames * n);

    let mut x = encoder.encode(session.frame(0))?;
    bank.refresh(&x);

    for t in 0..frames {
        let frame = session.frame(t);
        let label = session.label(t).index();
        let predictions = bank.normalized_predictions();
        raw_predictions.extend_from_slice(bank.last_predictions());

        for (net, tally) in nets.iter_mut().zip(tallies.iter_mut()) {
            let guess = net.classify(frame, Some(&predictions))?;
            tally.confusion[label][guess] += 1;
            let hit = (guess == label) as usize;
            tally.window_correct += hit;
            if t >= end_start {
                tally.final_correct += hit;
            }
            if t >= bc.train_delay {
                tally.post_delay_correct += hit;
            }
            if (t + 1) % settings.window == 0 {
                tally
                    .curve
                    .push(CurvePoint { step: t + 1, accuracy: tally.window_correct as f64 / settings.window as f64 });
                tally.window_correct = 0;
            }
        }

        let sample = Sample { actuals: frame.to_vec(), predictions, label };
        if recent.len() == bc.half {
            recent.remove(0);
        }
        recent.push(sample.clone());
        buffer.push(sample);

        if !nets.is_empty() && t >= bc.train_delay && recent.len() >= bc.half && t % bc.train_every == 0 {
            let batch = assemble_batch(&recent, &buffer, bc.half, &mut rng);
            for (net, tally) in nets.iter_mut().zip(tallies.iter_mut()) {
                tally.loss_sum += net.train_batch(&batch)?;
                tally.loss_count += 1;
            }
        }

        if t + 1 < frames {
            let x_next = encoder.encode(session.frame(t + 1))?;
            bank.step(&x, &x_next, session.frame(t + 1))?;
            x = x_next;
        }
    }

    let gvf_error = gvf_return_error(session, &raw_predictions, gamma, settings.return_window)?;
    if let Some(tr) = trace.as_mut() {
        tr.extend_from_slice(&raw_predictions);
    }

    let variants = nets
        .iter()
        .zip(tallies)
        .map(|(net, tally)| {
            let correct: u64 = (0..N_TERRAINS).map(|i| tally.confusion[i][i]).sum();
            let mut per_terrain = [None; N_TERRAINS];
            for (i, row) in tally.confusion.iter().enumerate() {
                let total: u64 = row.iter().sum();
                if total > 0 {
                    per_terrain[i] = Some(row[i] as f64 / total as f64);
                }
            }
            let post = frames.saturating_sub(bc.train_delay);
            VariantMetrics {
                variant: net.variant(),
                curve: tally.curve,
                final_accuracy: tally.final_correct as f64 / (frames - end_start) as f64,
                overall_accuracy: correct as f64 / frames as f64,
                post_delay_accuracy: if post > 0 { tally.post_delay_correct as f64 / post as f64 } else { 0.0 },
                per_terrain,
                confusion: tally.confusion,
                mean_loss: if tally.loss_count > 0 { tally.loss_sum / tally.loss_count as f64 } else { 0.0 },
            }
        })
        .collect();

    Ok(RunOutput {
        metrics: RunMetrics { frames, variants, gvf_error, gvf_trace: trace },
        prototypes: encoder.prototypes,
        bank,
        nets,
    })
}

/// Truncated discounted average `(1 − γ) Σ_{k<window} γᵏ z(t+k+1)` for every
/// `t` that has `window` trailing frames, computed by direct summation.
pub fn discounted_targets(signal: &[f64], gamma: f64, window: usize) -> Vec<f64> {
    if signal.len() <= window {
        return Vec::new();
    }
    let weights: Vec<f64> = (0..window).map(|k| libm::pow(gamma, k as f64)).collect();
    (0..signal.len() - window)
        .map(|t| (1.0 - gamma) * weights.iter().zip(&signal[t + 1..]).map(|(w, z)| w * z).sum::<f64>())
        .collect()
}

/// Per-channel mean squared error between `(1 − γ)V(t)` and the truncated
/// discounted return of the channel. `predictions` is row-major
/// `[t][channel]`; steps without `window` trailing frames are skipped.
pub fn gvf_return_error(
    session: &ProcessedSession,
    predictions: &[f64],
    gamma: f64,
    window: usize,
) -> Result<Vec<f64>> {
    let n = session.n_channels;
    if predictions.len() != session.len() * n {
        return Err(Error::DimensionMismatch { expected: session.len() * n, got: predictions.len() });
    }
    Ok((0..n)
        .map(|ch| {
            let signal: Vec<f64> = session.channel(ch).collect();
            let targets = discounted_targets(&signal, gamma, window);
            if targets.is_empty() {
                return 0.0;
            }
            let sq: f64 = targets
                .iter()
                .enumerate()
                .map(|(t, target)| {
                    let d = (1.0 - gamma) * predictions[t * n + ch] - target;
                    d * d
                })
                .sum();
            sq / targets.len() as f64
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::terrain::{ChannelKind, TerrainLabel};
    use alloc::vec;

    fn constant_session(v: f64, frames: usize) -> ProcessedSession {
        ProcessedSession::from_frames(
            2,
            33.0,
            vec![v; 2 * frames],
            vec![TerrainLabel::EvenGround; frames],
            vec![ChannelKind::Goniometer; 2],
        )
        .unwrap()
    }

    #[test]
    fn perfect_and_untrained_predictors() {
        let s = constant_session(0.5, 600);
        let gamma = 0.94;
        // exact truncated return, rescaled back to V
        let targets = discounted_targets(&s.channel(0).collect::<Vec<_>>(), gamma, 200);
        let mut perfect = vec![0.0; 1200];
        for (t, target) in targets.iter().enumerate() {
            perfect[2 * t] = target / (1.0 - gamma);
            perfect[2 * t + 1] = target / (1.0 - gamma);
        }
        let err = gvf_return_error(&s, &perfect, gamma, 200).unwrap();
        assert!(err.iter().all(|&e| e < 1e-24));
        let zero = gvf_return_error(&s, &vec![0.0; 1200], gamma, 200).unwrap();
        // the 200-step truncation leaves γ^200 ≈ 4e-6 of the mass out
        let truncated = 0.5 * (1.0 - libm::pow(gamma, 200.0));
        for e in zero {
            assert!((e - truncated * truncated).abs() < 1e-12, "{e}");
            assert!((e - 0.25).abs() < 1e-5);
        }
    }

    #[test]
    fn short_sessions_have_no_error_terms() {
        let s = constant_session(0.5, 100);
        assert_eq!(gvf_return_error(&s, &vec![0.0; 200], 0.94, 200).unwrap(), vec![0.0, 0.0]);
        assert!(gvf_return_error(&s, &[0.0; 10], 0.94, 200).is_err());
    }

    #[test]
    fn settings_validation() {
        let s = RunSettings::default();
        assert!(s.validate(30).is_ok());
        assert!(s.validate(12).is_err());
        let dup = RunSettings { variants: vec![NetVariant::Control, NetVariant::Control], ..RunSettings::default() };
        assert!(dup.validate(30).is_err());
    }
}

//! Preprocessing: per-kind filtering, integer decimation and session-wide
//! min-max normalization to [0, 1].
//!
//! EMG: band-pass, full-wave rectify, low-pass envelope.
//! Goniometer and pressure: low-pass.
//! All filters run causally from a zero state.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::filter::{design_butterworth, FilterSpec, FilterState};
use crate::synth::RawSession;
use crate::terrain::{ChannelKind, TerrainLabel};

#[derive(Debug, Clone, PartialEq)]
pub struct PrepConfig {
    pub target_rate_hz: f64,
    pub emg_band_hz: (f64, f64),
    pub emg_order: usize,
    /// See [`FilterSpec::strict_order`].
    pub emg_strict_order: bool,
    pub envelope_cut_hz: f64,
    pub envelope_order: usize,
    pub lowpass_cut_hz: f64,
    pub lowpass_order: usize,
}

impl Default for PrepConfig {
    fn default() -> Self {
        PrepConfig {
            target_rate_hz: 33.0,
            emg_band_hz: (10.0, 450.0),
            emg_order: 4,
            emg_strict_order: true,
            envelope_cut_hz: 5.0,
            envelope_order: 2,
            lowpass_cut_hz: 5.0,
            lowpass_order: 2,
        }
    }
}

/// Normalized session at the target rate. Frames are stored row-major:
/// frame `i` is `values[i * n_channels .. (i + 1) * n_channels]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessedSession {
    pub n_channels: usize,
    pub sample_rate_hz: f64,
    pub values: Vec<f64>,
    pub labels: Vec<TerrainLabel>,
    pub kinds: Vec<ChannelKind>,
    /// Per-channel (min, max) before normalization.
    pub bounds: Vec<(f64, f64)>,
    /// Channels that were constant and set to 0.5.
    pub constant_channels: Vec<usize>,
}

impl ProcessedSession {
    /// Builds a session from already-normalized frames.
    pub fn from_frames(
        n_channels: usize,
        sample_rate_hz: f64,
        values: Vec<f64>,
        labels: Vec<TerrainLabel>,
        kinds: Vec<ChannelKind>,
    ) -> Result<Self> {
        if n_channels == 0 || values.len() != n_channels * labels.len() {
            return Err(Error::DimensionMismatch { expected: n_channels * labels.len(), got: values.len() });
        }
        if kinds.len() != n_channels {
            return Err(Error::DimensionMismatch { expected: n_channels, got: kinds.len() });
        }
        if let Some(&bad) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::StateOutOfRange(bad));
        }
        Ok(ProcessedSession {
            n_channels,
            sample_rate_hz,
            values,
            labels,
            kinds,
            bounds: alloc::vec![(0.0, 1.0); n_channels],
            constant_channels: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    #[inline]
    pub fn frame(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_channels..(i + 1) * self.n_channels]
    }

    pub fn label(&self, i: usize) -> TerrainLabel {
        self.labels[i]
    }

    pub fn channel(&self, ch: usize) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().skip(ch).step_by(self.n_channels).copied()
    }

    /// A contiguous slice of frames as a new session.
    pub fn slice(&self, start: usize, end: usize) -> ProcessedSession {
        ProcessedSession {
            values: self.values[start * self.n_channels..end * self.n_channels].to_vec(),
            labels: self.labels[start..end].to_vec(),
            ..self.clone_meta()
        }
    }

    fn clone_meta(&self) -> ProcessedSession {
        ProcessedSession {
            n_channels: self.n_channels,
            sample_rate_hz: self.sample_rate_hz,
            values: Vec::new(),
            labels: Vec::new(),
            kinds: self.kinds.clone(),
            bounds: self.bounds.clone(),
            constant_channels: self.constant_channels.clone(),
        }
    }
}

/// Filter chain for one channel kind.
pub fn channel_filter(kind: ChannelKind, raw_rate_hz: f64, cfg: &PrepConfig) -> Result<ChannelChain> {
    let lowpass = |cut, order| design_butterworth(&FilterSpec::low_pass(cut, order, raw_rate_hz));
    Ok(match kind {
        ChannelKind::Emg => {
            let (lo, hi) = cfg.emg_band_hz;
            let band = FilterSpec {
                strict_order: cfg.emg_strict_order,
                ..FilterSpec::band_pass(lo, hi, cfg.emg_order, raw_rate_hz)
            };
            ChannelChain {
                pre: design_butterworth(&band)?,
                rectify: true,
                post: lowpass(cfg.envelope_cut_hz, cfg.envelope_order)?,
            }
        }
        ChannelKind::Goniometer | ChannelKind::Pressure => {
            ChannelChain { pre: Vec::new(), rectify: false, post: lowpass(cfg.lowpass_cut_hz, cfg.lowpass_order)? }
        }
    })
}

#[derive(Debug, Clone)]
pub struct ChannelChain {
    pub pre: Vec<crate::filter::Biquad>,
    pub rectify: bool,
    pub post: Vec<crate::filter::Biquad>,
}

impl ChannelChain {
    /// Runs the chain and keeps every `factor`-th output sample.
    pub fn run_decimated(&self, signal: &[f64], factor: usize) -> Vec<f64> {
        let mut pre = FilterState::new(&self.pre);
        let mut post = FilterState::new(&self.post);
        let mut out = Vec::with_capacity(signal.len() / factor + 1);
        for (i, &x) in signal.iter().enumerate() {
            let mut v = pre.process(x);
            if self.rectify {
                v = libm::fabs(v);
            }
            let y = post.process(v);
            if i % factor == 0 {
                out.push(y);
            }
        }
        out
    }
}

/// Min-max normalizes each channel of a row-major buffer in place. Returns
/// the bounds and the indices of constant channels (set to 0.5).
pub fn normalize_columns(values: &mut [f64], n_channels: usize) -> (Vec<(f64, f64)>, Vec<usize>) {
    let mut bounds = alloc::vec![(f64::INFINITY, f64::NEG_INFINITY); n_channels];
    for row in values.chunks_exact(n_channels) {
        for (b, &v) in bounds.iter_mut().zip(row) {
            b.0 = b.0.min(v);
            b.1 = b.1.max(v);
        }
    }
    let constant: Vec<usize> = bounds
        .iter()
        .enumerate()
        .filter(|(_, b)| b.1.partial_cmp(&b.0) != Some(core::cmp::Ordering::Greater))
        .map(|(i, _)| i)
        .collect();
    for row in values.chunks_exact_mut(n_channels) {
        for (ch, (v, &(lo, hi))) in row.iter_mut().zip(&bounds).enumerate() {
            *v = if constant.contains(&ch) {
                0.5
            } else {
                // clamp guards the last-ulp rounding of (v - lo) / (hi - lo)
                ((*v - lo) / (hi - lo)).clamp(0.0, 1.0)
            };
        }
    }
    (bounds, constant)
}

/// Filters, decimates and normalizes a raw session. Output frame `j` holds
/// the filtered raw sample `j * k` and its label, `k = round(raw / target)`.
pub fn preprocess(raw: &RawSession, cfg: &PrepConfig) -> Result<ProcessedSession> {
    let raw_rate = raw.raw_rate_hz();
    if !(cfg.target_rate_hz > 0.0 && cfg.target_rate_hz <= raw_rate) {
        return Err(Error::config("target rate must lie in (0, raw rate]"));
    }
    let factor = libm::round(raw_rate / cfg.target_rate_hz) as usize;
    let effective = raw_rate / factor as f64;
    if libm::fabs(effective - cfg.target_rate_hz) > 0.05 * cfg.target_rate_hz {
        return Err(Error::config("raw rate is not an integer multiple of the target rate"));
    }
    let n = raw.channels.len();
    if raw.kinds.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: raw.kinds.len() });
    }
    for ch in &raw.channels {
        if ch.len() != raw.labels.len() {
            return Err(Error::DimensionMismatch { expected: raw.labels.len(), got: ch.len() });
        }
    }

    let out_len = raw.labels.len().div_ceil(factor);
    let mut values = alloc::vec![0.0; out_len * n];
    for (ch, (signal, &kind)) in raw.channels.iter().zip(&raw.kinds).enumerate() {
        let chain = channel_filter(kind, raw_rate, cfg)?;
        for (j, y) in chain.run_decimated(signal, factor).into_iter().enumerate() {
            values[j * n + ch] = y;
        }
    }
    let labels = raw.labels.iter().step_by(factor).copied().collect();
    let (bounds, constant_channels) = normalize_columns(&mut values, n);

    Ok(ProcessedSession {
        n_channels: n,
        sample_rate_hz: effective,
        values,
        labels,
        kinds: raw.kinds.clone(),
        bounds,
        constant_channels,
    })
}

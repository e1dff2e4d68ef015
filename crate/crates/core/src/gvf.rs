//! General value functions learned with true online TD(λ).
//!
//! Per step, with `x` the current feature vector, `x'` the next one and `Z`
//! the cumulant observed on the transition:
//!
//! ```text
//! V  = wᵀx,   V' = wᵀx'
//! δ  = Z + γV' − V
//! e  ← γλe + x − αγλ(eᵀx)x
//! w  ← w + α(δ + V − V_old)e − α(V − V_old)x
//! V_old ← V'
//! ```
//!
//! Features are binary and sparse, so every term except the dense decay of
//! `e` touches only active indices. The trace keeps a list of its live
//! (nonzero) entries and drops entries whose magnitude falls below a
//! threshold; a threshold of zero reproduces the dense trace exactly.
//!
//! The trace recursion depends only on the feature sequence and on
//! (α, γ, λ), never on weights or cumulants. A [`GvfBank`] whose learners
//! share those hyperparameters therefore keeps a single trace for all of
//! them.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::kanerva::FeatureVector;

/// Default trace truncation threshold.
pub const TRACE_EPSILON: f64 = 1e-9;
/// Upper clamp applied to normalized predictions.
pub const NORMALIZED_CLAMP: f64 = 1.5;

/// Expected look-ahead, in steps, of a discount `gamma`: `1 / (1 − γ)`.
pub fn horizon(gamma: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::config(alloc::format!("gamma must lie in [0, 1), got {gamma}")));
    }
    Ok(1.0 / (1.0 - gamma))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GvfSpec {
    pub cumulant_channel: usize,
    pub gamma: f64,
    pub lambda: f64,
    pub alpha: f64,
}

impl GvfSpec {
    pub const DEFAULT_GAMMA: f64 = 0.94;
    pub const DEFAULT_LAMBDA: f64 = 0.5;

    /// Default step size for `active` simultaneously active binary features.
    pub fn default_alpha(active: usize) -> f64 {
        0.1 / active as f64
    }

    pub fn new(cumulant_channel: usize, active_features: usize) -> Self {
        GvfSpec {
            cumulant_channel,
            gamma: Self::DEFAULT_GAMMA,
            lambda: Self::DEFAULT_LAMBDA,
            alpha: Self::default_alpha(active_features),
        }
    }

    pub fn validate(&self) -> Result<()> {
        horizon(self.gamma)?;
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::config("lambda must lie in [0, 1]"));
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(Error::config("alpha must be positive"));
        }
        Ok(())
    }
}

/// Dutch eligibility trace with a live-index list.
#[derive(Debug, Clone, PartialEq)]
pub struct DutchTrace {
    values: Vec<f64>,
    live: Vec<u32>,
    is_live: Vec<bool>,
    threshold: f64,
}

impl DutchTrace {
    pub fn new(len: usize, threshold: f64) -> Self {
        DutchTrace { values: alloc::vec![0.0; len], live: Vec::new(), is_live: alloc::vec![false; len], threshold }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Indices that may hold nonzero values.
    pub fn live(&self) -> &[u32] {
        &self.live
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn reset(&mut self) {
        for &i in &self.live {
            self.values[i as usize] = 0.0;
            self.is_live[i as usize] = false;
        }
        self.live.clear();
    }

    /// `e ← γλe + x − αγλ(eᵀx)x` for binary `x`.
    pub fn update(&mut self, x: &FeatureVector, alpha: f64, gamma: f64, lambda: f64) {
        let gl = gamma * lambda;
        let ex: f64 = x.active().iter().map(|&i| self.values[i as usize]).sum();
        let threshold = self.threshold;
        let (values, is_live) = (&mut self.values, &mut self.is_live);
        self.live.retain(|&i| {
            let v = &mut values[i as usize];
            *v *= gl;
            if v.abs() < threshold || *v == 0.0 {
                *v = 0.0;
                is_live[i as usize] = false;
                false
            } else {
                true
            }
        });
        let bump = 1.0 - alpha * gl * ex;
        for &i in x.active() {
            let i = i as usize;
            self.values[i] += bump;
            if !self.is_live[i] {
                self.is_live[i] = true;
                self.live.push(i as u32);
            }
        }
    }
}

#[inline]
fn sparse_dot(w: &[f64], x: &FeatureVector) -> f64 {
    x.active().iter().map(|&i| w[i as usize]).sum()
}

/// One GVF with its own trace.
#[derive(Debug, Clone, PartialEq)]
pub struct GvfLearner {
    pub spec: GvfSpec,
    weights: Vec<f64>,
    trace: DutchTrace,
    v_old: f64,
}

impl GvfLearner {
    pub fn new(spec: GvfSpec, feature_len: usize) -> Result<Self> {
        Self::with_threshold(spec, feature_len, TRACE_EPSILON)
    }

    /// `threshold = 0` keeps the trace dense-exact.
    pub fn with_threshold(spec: GvfSpec, feature_len: usize, threshold: f64) -> Result<Self> {
        spec.validate()?;
        Ok(GvfLearner {
            spec,
            weights: alloc::vec![0.0; feature_len],
            trace: DutchTrace::new(feature_len, threshold),
            v_old: 0.0,
        })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn trace(&self) -> &DutchTrace {
        &self.trace
    }

    pub fn v_old(&self) -> f64 {
        self.v_old
    }

    /// `wᵀx` over the active indices.
    pub fn predict(&self, x: &FeatureVector) -> f64 {
        sparse_dot(&self.weights, x)
    }

    /// One true online TD(λ) update for the transition `x → x_next` with
    /// cumulant `z_next`. Returns `V' = wᵀx_next` computed before the update.
    pub fn step(&mut self, x: &FeatureVector, x_next: &FeatureVector, z_next: f64) -> f64 {
        let GvfSpec { gamma, lambda, alpha, .. } = self.spec;
        let v = self.predict(x);
        let v_next = self.predict(x_next);
        let delta = z_next + gamma * v_next - v;
        self.trace.update(x, alpha, gamma, lambda);
        let ce = alpha * (delta + v - self.v_old);
        let cx = alpha * (v - self.v_old);
        for &i in self.trace.live() {
            self.weights[i as usize] += ce * self.trace.values[i as usize];
        }
        for &i in x.active() {
            self.weights[i as usize] -= cx;
        }
        self.v_old = v_next;
        v_next
    }
}

/// Per-channel GVFs over one shared feature stream.
#[derive(Debug, Clone, PartialEq)]
pub struct GvfBank {
    gamma: f64,
    lambda: f64,
    alpha: f64,
    feature_len: usize,
    channels: Vec<usize>,
    /// Channel-major weights: learner `c` owns `weights[c*len..(c+1)*len]`.
    weights: Vec<f64>,
    v_old: Vec<f64>,
    trace: DutchTrace,
    last: Vec<f64>,
    steps: u64,
}

impl GvfBank {
    /// One learner per channel `0..n_channels`, sharing (γ, λ, α).
    pub fn new(n_channels: usize, feature_len: usize, gamma: f64, lambda: f64, alpha: f64) -> Result<Self> {
        Self::with_threshold(n_channels, feature_len, gamma, lambda, alpha, TRACE_EPSILON)
    }

    pub fn with_threshold(
        n_channels: usize,
        feature_len: usize,
        gamma: f64,
        lambda: f64,
        alpha: f64,
        threshold: f64,
    ) -> Result<Self> {
        GvfSpec { cumulant_channel: 0, gamma, lambda, alpha }.validate()?;
        if n_channels == 0 {
            return Err(Error::config("a GVF bank needs at least one channel"));
        }
        Ok(GvfBank {
            gamma,
            lambda,
            alpha,
            feature_len,
            channels: (0..n_channels).collect(),
            weights: alloc::vec![0.0; n_channels * feature_len],
            v_old: alloc::vec![0.0; n_channels],
            trace: DutchTrace::new(feature_len, threshold),
            last: alloc::vec![0.0; n_channels],
            steps: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.channels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.channels.is_empty()
    }

    pub fn feature_len(&self) -> usize {
        self.feature_len
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Restores the step counter of a checkpointed bank.
    pub fn set_steps(&mut self, steps: u64) {
        self.steps = steps;
    }

    pub fn trace_threshold(&self) -> f64 {
        self.trace.threshold()
    }

    /// Clears the trace and the stored `V_old` values, keeping the weights.
    /// Used at the start of a new, unrelated stream.
    pub fn begin_episode(&mut self) {
        self.trace.reset();
        self.v_old.iter_mut().for_each(|v| *v = 0.0);
    }

    pub fn spec(&self, learner: usize) -> GvfSpec {
        GvfSpec { cumulant_channel: self.channels[learner], gamma: self.gamma, lambda: self.lambda, alpha: self.alpha }
    }

    pub fn weights(&self, learner: usize) -> &[f64] {
        &self.weights[learner * self.feature_len..(learner + 1) * self.feature_len]
    }

    /// Replaces all weights (checkpoint restore). Traces and `V_old` reset.
    pub fn load_weights(&mut self, weights: Vec<f64>) -> Result<()> {
        if weights.len() != self.weights.len() {
            return Err(Error::DimensionMismatch { expected: self.weights.len(), got: weights.len() });
        }
        self.weights = weights;
        self.trace.reset();
        self.v_old.iter_mut().for_each(|v| *v = 0.0);
        Ok(())
    }

    pub fn all_weights(&self) -> &[f64] {
        &self.weights
    }

    /// Raw predictions `wᵀx` for every learner.
    pub fn predict_into(&self, x: &FeatureVector, out: &mut [f64]) {
        for (c, o) in out.iter_mut().enumerate().take(self.len()) {
            *o = sparse_dot(self.weights(c), x);
        }
    }

    /// Steps every learner on `x → x_next` with cumulants taken from
    /// `frame_next[channel]`. Stores and returns the post-update
    /// predictions `wᵀx_next`.
    pub fn step(&mut self, x: &FeatureVector, x_next: &FeatureVector, frame_next: &[f64]) -> Result<&[f64]> {
        if x.len() != self.feature_len || x_next.len() != self.feature_len {
            return Err(Error::DimensionMismatch { expected: self.feature_len, got: x.len().max(x_next.len()) });
        }
        if let Some(&max_ch) = self.channels.iter().max() {
            if max_ch >= frame_next.len() {
                return Err(Error::DimensionMismatch { expected: max_ch + 1, got: frame_next.len() });
            }
        }
        let (gamma, alpha) = (self.gamma, self.alpha);
        let n = self.len();
        let mut coeffs: Vec<(f64, f64)> = Vec::with_capacity(n);
        for c in 0..n {
            let w = self.weights(c);
            let v = sparse_dot(w, x);
            let v_next = sparse_dot(w, x_next);
            let delta = frame_next[self.channels[c]] + gamma * v_next - v;
            coeffs.push((alpha * (delta + v - self.v_old[c]), alpha * (v - self.v_old[c])));
            self.v_old[c] = v_next;
        }
        self.trace.update(x, alpha, gamma, self.lambda);
        let len = self.feature_len;
        for (c, &(ce, cx)) in coeffs.iter().enumerate() {
            let w = &mut self.weights[c * len..(c + 1) * len];
            for &i in &self.trace.live {
                w[i as usize] += ce * self.trace.values[i as usize];
            }
            for &i in x.active() {
                w[i as usize] -= cx;
            }
        }
        self.steps += 1;
        let mut last = core::mem::take(&mut self.last);
        self.predict_into(x_next, &mut last);
        self.last = last;
        Ok(&self.last)
    }

    /// Latest stored predictions (raw scale).
    pub fn last_predictions(&self) -> &[f64] {
        &self.last
    }

    /// Sets the stored predictions from `x` without learning.
    pub fn refresh(&mut self, x: &FeatureVector) {
        let mut last = core::mem::take(&mut self.last);
        self.predict_into(x, &mut last);
        self.last = last;
    }

    /// Latest predictions rescaled to the cumulant range.
    pub fn normalized_predictions(&self) -> Vec<f64> {
        self.last.iter().map(|&v| normalize_prediction(v, self.gamma)).collect()
    }
}

/// `V·(1 − γ)` clamped to `[0, 1.5]`.
pub fn normalize_prediction(v: f64, gamma: f64) -> f64 {
    (v * (1.0 - gamma)).clamp(0.0, NORMALIZED_CLAMP)
}

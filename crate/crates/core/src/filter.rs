//! Butterworth IIR design as cascaded second-order sections.
//!
//! Analog Butterworth prototypes are mapped to the z-plane with the bilinear
//! transform and cutoff prewarping, so the −3 dB point lands exactly on the
//! requested digital frequency. Band-pass filters are a high-pass edge
//! cascaded with a low-pass edge.

use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{Error, Result};

/// Normalized biquad `(b0 + b1 z⁻¹ + b2 z⁻²) / (1 + a1 z⁻¹ + a2 z⁻²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub a1: f64,
    pub a2: f64,
}

impl Biquad {
    pub const IDENTITY: Biquad = Biquad { b0: 1.0, b1: 0.0, b2: 0.0, a1: 0.0, a2: 0.0 };

    /// Complex response at normalized angular frequency `omega` (rad/sample),
    /// as (re, im).
    pub fn response(&self, omega: f64) -> (f64, f64) {
        let (c1, s1) = (libm::cos(omega), -libm::sin(omega));
        let (c2, s2) = (libm::cos(2.0 * omega), -libm::sin(2.0 * omega));
        let num = (self.b0 + self.b1 * c1 + self.b2 * c2, self.b1 * s1 + self.b2 * s2);
        let den = (1.0 + self.a1 * c1 + self.a2 * c2, self.a1 * s1 + self.a2 * s2);
        let d = den.0 * den.0 + den.1 * den.1;
        ((num.0 * den.0 + num.1 * den.1) / d, (num.1 * den.0 - num.0 * den.1) / d)
    }

    /// Largest pole magnitude.
    pub fn pole_radius(&self) -> f64 {
        let disc = self.a1 * self.a1 - 4.0 * self.a2;
        if disc < 0.0 {
            libm::sqrt(self.a2)
        } else {
            let r = libm::sqrt(disc);
            libm::fabs(-self.a1 + r).max(libm::fabs(-self.a1 - r)) / 2.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FilterBand {
    LowPass { cutoff_hz: f64 },
    HighPass { cutoff_hz: f64 },
    BandPass { low_hz: f64, high_hz: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterSpec {
    pub band: FilterBand,
    pub order: usize,
    pub sample_rate_hz: f64,
    /// Band-pass only: `true` reads `order` as the total order (order/2 poles
    /// per edge); `false` puts `order` poles on each edge.
    pub strict_order: bool,
}

impl FilterSpec {
    pub fn low_pass(cutoff_hz: f64, order: usize, sample_rate_hz: f64) -> Self {
        FilterSpec { band: FilterBand::LowPass { cutoff_hz }, order, sample_rate_hz, strict_order: true }
    }

    pub fn high_pass(cutoff_hz: f64, order: usize, sample_rate_hz: f64) -> Self {
        FilterSpec { band: FilterBand::HighPass { cutoff_hz }, order, sample_rate_hz, strict_order: true }
    }

    pub fn band_pass(low_hz: f64, high_hz: f64, order: usize, sample_rate_hz: f64) -> Self {
        FilterSpec { band: FilterBand::BandPass { low_hz, high_hz }, order, sample_rate_hz, strict_order: true }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sample_rate_hz.is_finite() && self.sample_rate_hz > 0.0) {
            return Err(Error::config("sample rate must be positive"));
        }
        if self.order == 0 {
            return Err(Error::config("filter order must be positive"));
        }
        let nyquist = self.sample_rate_hz / 2.0;
        let check = |f: f64| {
            if !(f.is_finite() && f > 0.0 && f < nyquist) {
                Err(Error::config(alloc::format!("cutoff {f} Hz must lie strictly inside (0, {nyquist}) Hz")))
            } else {
                Ok(())
            }
        };
        match self.band {
            FilterBand::LowPass { cutoff_hz } | FilterBand::HighPass { cutoff_hz } => check(cutoff_hz),
            FilterBand::BandPass { low_hz, high_hz } => {
                check(low_hz)?;
                check(high_hz)?;
                if low_hz >= high_hz {
                    return Err(Error::config("band-pass needs low cutoff < high cutoff"));
                }
                if self.strict_order && !self.order.is_multiple_of(2) {
                    return Err(Error::config("band-pass total order must be even"));
                }
                Ok(())
            }
        }
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Edge {
    Low,
    High,
}

fn butterworth_edge(edge: Edge, order: usize, cutoff_hz: f64, fs: f64, out: &mut Vec<Biquad>) {
    let k = libm::tan(PI * cutoff_hz / fs);
    let kk = k * k;
    for i in 0..order / 2 {
        // analog pole pair s² + s/q + 1
        let inv_q = 2.0 * libm::sin((2 * i + 1) as f64 * PI / (2 * order) as f64);
        let norm = 1.0 / (1.0 + k * inv_q + kk);
        let a1 = 2.0 * (kk - 1.0) * norm;
        let a2 = (1.0 - k * inv_q + kk) * norm;
        out.push(match edge {
            Edge::Low => Biquad { b0: kk * norm, b1: 2.0 * kk * norm, b2: kk * norm, a1, a2 },
            Edge::High => Biquad { b0: norm, b1: -2.0 * norm, b2: norm, a1, a2 },
        });
    }
    if order % 2 == 1 {
        let norm = 1.0 / (1.0 + k);
        let a1 = (k - 1.0) * norm;
        out.push(match edge {
            Edge::Low => Biquad { b0: k * norm, b1: k * norm, b2: 0.0, a1, a2: 0.0 },
            Edge::High => Biquad { b0: norm, b1: -norm, b2: 0.0, a1, a2: 0.0 },
        });
    }
}

/// Second-order-section cascade realizing the Butterworth response of `spec`.
pub fn design_butterworth(spec: &FilterSpec) -> Result<Vec<Biquad>> {
    spec.validate()?;
    let fs = spec.sample_rate_hz;
    let mut sections = Vec::new();
    match spec.band {
        FilterBand::LowPass { cutoff_hz } => butterworth_edge(Edge::Low, spec.order, cutoff_hz, fs, &mut sections),
        FilterBand::HighPass { cutoff_hz } => butterworth_edge(Edge::High, spec.order, cutoff_hz, fs, &mut sections),
        FilterBand::BandPass { low_hz, high_hz } => {
            let per_edge = if spec.strict_order { spec.order / 2 } else { spec.order };
            butterworth_edge(Edge::High, per_edge, low_hz, fs, &mut sections);
            butterworth_edge(Edge::Low, per_edge, high_hz, fs, &mut sections);
        }
    }
    Ok(sections)
}

/// Magnitude of the cascade at `freq_hz`.
pub fn magnitude(sections: &[Biquad], freq_hz: f64, sample_rate_hz: f64) -> f64 {
    let omega = 2.0 * PI * freq_hz / sample_rate_hz;
    sections
        .iter()
        .map(|s| {
            let (re, im) = s.response(omega);
            libm::sqrt(re * re + im * im)
        })
        .product()
}

/// Running state of one cascade (direct form II transposed).
#[derive(Debug, Clone)]
pub struct FilterState<'a> {
    sections: &'a [Biquad],
    state: Vec<[f64; 2]>,
}

impl<'a> FilterState<'a> {
    pub fn new(sections: &'a [Biquad]) -> Self {
        FilterState { sections, state: alloc::vec![[0.0; 2]; sections.len()] }
    }

    #[inline]
    pub fn process(&mut self, x: f64) -> f64 {
        let mut v = x;
        for (s, z) in self.sections.iter().zip(self.state.iter_mut()) {
            let y = s.b0 * v + z[0];
            z[0] = s.b1 * v - s.a1 * y + z[1];
            z[1] = s.b2 * v - s.a2 * y;
            v = y;
        }
        v
    }
}

/// Causal filtering from a zero initial state.
pub fn filter_forward(sections: &[Biquad], signal: &[f64]) -> Vec<f64> {
    let mut st = FilterState::new(sections);
    signal.iter().map(|&x| st.process(x)).collect()
}

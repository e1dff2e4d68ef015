//! Experiment configuration, read from TOML. Every table and key is
//! optional and defaults to the library defaults; unknown keys are errors.
//!
//! ```toml
//! [session]
//! total_target_steps = 16000
//! noise_std = 0.05
//!
//! [kanerva]
//! prototypes = 5000
//! levels = [500, 100, 25]
//!
//! [compare]
//! seeds = 10
//! jobs = 4
//! ```

use std::path::Path;

use gaitgvf_core::nn::OptimizerKind;
use gaitgvf_core::pipeline::{BatchConfig, GvfConfig, KanervaConfig};
use gaitgvf_core::{NetConfig, PrepConfig, ResolutionLevels, RunSettings, SessionConfig, TerrainLabel};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub session: SessionSection,
    pub prep: PrepSection,
    pub kanerva: KanervaSection,
    pub gvf: GvfSection,
    pub net: NetSection,
    pub batch: BatchSection,
    pub run: RunSection,
    pub compare: CompareSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SessionSection {
    pub raw_rate_hz: f64,
    pub target_rate_hz: f64,
    pub n_channels: usize,
    pub total_target_steps: usize,
    pub cycle_period_s: f64,
    pub segment_steps: [usize; 2],
    pub noise_std: f64,
    /// Terrain keys (`even_ground`, `up_stairs`, ...).
    pub terrains: Vec<String>,
}

impl Default for SessionSection {
    fn default() -> Self {
        let d = SessionConfig::default();
        SessionSection {
            raw_rate_hz: d.raw_rate_hz,
            target_rate_hz: d.target_rate_hz,
            n_channels: d.n_channels,
            total_target_steps: d.total_target_steps,
            cycle_period_s: d.cycle_period_s,
            segment_steps: [d.segment_steps.0, d.segment_steps.1],
            noise_std: d.noise_std,
            terrains: d.terrains.iter().map(|t| t.key().to_string()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PrepSection {
    pub emg_band_hz: [f64; 2],
    pub emg_order: usize,
    pub emg_strict_order: bool,
    pub envelope_cut_hz: f64,
    pub envelope_order: usize,
    pub lowpass_cut_hz: f64,
    pub lowpass_order: usize,
}

impl Default for PrepSection {
    fn default() -> Self {
        let d = PrepConfig::default();
        PrepSection {
            emg_band_hz: [d.emg_band_hz.0, d.emg_band_hz.1],
            emg_order: d.emg_order,
            emg_strict_order: d.emg_strict_order,
            envelope_cut_hz: d.envelope_cut_hz,
            envelope_order: d.envelope_order,
            lowpass_cut_hz: d.lowpass_cut_hz,
            lowpass_order: d.lowpass_order,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KanervaSection {
    pub prototypes: usize,
    pub levels: [usize; 3],
}

impl Default for KanervaSection {
    fn default() -> Self {
        let d = KanervaConfig::default();
        KanervaSection { prototypes: d.prototypes, levels: d.levels.counts() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GvfSection {
    pub gamma: f64,
    pub lambda: f64,
    /// Omit for 0.1 / (number of active features).
    pub alpha: Option<f64>,
    pub trace_threshold: f64,
}

impl Default for GvfSection {
    fn default() -> Self {
        let d = GvfConfig::default();
        GvfSection { gamma: d.gamma, lambda: d.lambda, alpha: d.alpha, trace_threshold: d.trace_threshold }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    Adam,
    Sgd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetSection {
    pub encoder_sizes: Vec<usize>,
    pub head_sizes: Vec<usize>,
    pub learning_rate: f64,
    pub optimizer: Optimizer,
}

impl Default for NetSection {
    fn default() -> Self {
        let d = NetConfig::default();
        NetSection {
            encoder_sizes: d.encoder_sizes,
            head_sizes: d.head_sizes,
            learning_rate: d.learning_rate,
            optimizer: Optimizer::Adam,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BatchSection {
    pub half: usize,
    pub capacity: usize,
    pub train_delay: usize,
    pub train_every: usize,
}

impl Default for BatchSection {
    fn default() -> Self {
        let d = BatchConfig::default();
        BatchSection { half: d.half, capacity: d.capacity, train_delay: d.train_delay, train_every: d.train_every }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub window: usize,
    pub end_fraction: f64,
    pub return_window: usize,
}

impl Default for RunSection {
    fn default() -> Self {
        let d = RunSettings::default();
        RunSection { window: d.window, end_fraction: d.end_fraction, return_window: d.return_window }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareSection {
    /// Number of seeded sessions.
    pub seeds: usize,
    /// First seed; session `i` uses `base_seed + i`.
    pub base_seed: u64,
    /// Worker threads.
    pub jobs: usize,
    pub alpha: f64,
}

impl Default for CompareSection {
    fn default() -> Self {
        CompareSection { seeds: 10, base_seed: 1, jobs: 1, alpha: 0.05 }
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg = Self::parse(&text).map_err(|e| match e {
            Error::Invalid(message) => Error::Config { path: path.to_path_buf(), message },
            other => other,
        })?;
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| Error::invalid(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks every section by building the library configs.
    pub fn validate(&self) -> Result<()> {
        self.levels()?;
        let session = self.session_config(0)?;
        session.validate_shape()?;
        self.run_settings(0).validate(session.n_channels)?;
        NetConfig { variant: gaitgvf_core::NetVariant::LatentGvf, ..self.run_settings(0).net }.validate()?;
        if self.compare.jobs == 0 {
            return Err(Error::invalid("compare.jobs must be at least 1"));
        }
        if !(self.compare.alpha > 0.0 && self.compare.alpha < 1.0) {
            return Err(Error::invalid("compare.alpha must lie in (0, 1)"));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    pub fn session_config(&self, seed: u64) -> Result<SessionConfig> {
        let s = &self.session;
        let terrains = s
            .terrains
            .iter()
            .map(|k| {
                TerrainLabel::ALL
                    .into_iter()
                    .find(|t| t.key() == k)
                    .ok_or_else(|| Error::invalid(format!("unknown terrain `{k}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SessionConfig {
            seed,
            raw_rate_hz: s.raw_rate_hz,
            target_rate_hz: s.target_rate_hz,
            n_channels: s.n_channels,
            total_target_steps: s.total_target_steps,
            cycle_period_s: s.cycle_period_s,
            segment_steps: (s.segment_steps[0], s.segment_steps[1]),
            noise_std: s.noise_std,
            terrains,
        })
    }

    pub fn prep_config(&self) -> PrepConfig {
        let p = &self.prep;
        PrepConfig {
            target_rate_hz: self.session.target_rate_hz,
            emg_band_hz: (p.emg_band_hz[0], p.emg_band_hz[1]),
            emg_order: p.emg_order,
            emg_strict_order: p.emg_strict_order,
            envelope_cut_hz: p.envelope_cut_hz,
            envelope_order: p.envelope_order,
            lowpass_cut_hz: p.lowpass_cut_hz,
            lowpass_order: p.lowpass_order,
        }
    }

    /// Run settings with every random stream derived from `seed`.
    pub fn run_settings(&self, seed: u64) -> RunSettings {
        let mut s = RunSettings::default();
        let [c1, c2, c3] = self.kanerva.levels;
        s.kanerva.prototypes = self.kanerva.prototypes;
        // invalid levels surface in validate() through ResolutionLevels::new
        s.kanerva.levels = ResolutionLevels::new(c1, c2, c3).unwrap_or(ResolutionLevels::DEFAULT);
        s.gvf = GvfConfig {
            gamma: self.gvf.gamma,
            lambda: self.gvf.lambda,
            alpha: self.gvf.alpha,
            trace_threshold: self.gvf.trace_threshold,
        };
        s.net.n_actual = self.session.n_channels;
        s.net.n_predictions = self.session.n_channels;
        s.net.encoder_sizes = self.net.encoder_sizes.clone();
        s.net.head_sizes = self.net.head_sizes.clone();
        s.net.learning_rate = self.net.learning_rate;
        s.net.optimizer = match self.net.optimizer {
            Optimizer::Adam => OptimizerKind::Adam,
            Optimizer::Sgd => OptimizerKind::Sgd,
        };
        s.batch.half = self.batch.half;
        s.batch.capacity = self.batch.capacity;
        s.batch.train_delay = self.batch.train_delay;
        s.batch.train_every = self.batch.train_every;
        s.window = self.run.window;
        s.end_fraction = self.run.end_fraction;
        s.return_window = self.run.return_window;
        s.reseed(seed);
        s
    }

    fn levels(&self) -> Result<ResolutionLevels> {
        let [c1, c2, c3] = self.kanerva.levels;
        Ok(ResolutionLevels::new(c1, c2, c3)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = Config::parse("").unwrap();
        assert_eq!(cfg, Config::default());
        assert_eq!(cfg.session_config(3).unwrap(), SessionConfig::with_seed(3));
        assert_eq!(cfg.run_settings(3), RunSettings::seeded(3));
        assert_eq!(cfg.prep_config(), PrepConfig::default());
    }

    #[test]
    fn round_trips_through_toml() {
        let mut cfg = Config::default();
        cfg.gvf.alpha = Some(0.001);
        cfg.compare.jobs = 3;
        assert_eq!(Config::parse(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(Config::parse("[session]\nnoise = 0.1\n").is_err());
        assert!(Config::parse("[sessions]\nnoise_std = 0.1\n").is_err());
        assert!(Config::parse("seed = 3\n").is_err());
    }

    #[test]
    fn invalid_values_are_rejected() {
        assert!(Config::parse("[kanerva]\nlevels = [10, 20, 5]\n").is_err());
        assert!(Config::parse("[kanerva]\nprototypes = 100\n").is_err());
        assert!(Config::parse("[gvf]\ngamma = 1.0\n").is_err());
        assert!(Config::parse("[session]\nterrains = [\"lava\"]\n").is_err());
        assert!(Config::parse("[net]\nencoder_sizes = [16, 24]\n").is_err());
        assert!(Config::parse("[compare]\njobs = 0\n").is_err());
    }
}

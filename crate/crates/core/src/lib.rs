//! Hierarchical continual-learning pipeline for terrain decisions from
//! wearable lower-limb sensor streams.
//!
//! The crate is `no_std` + `alloc`. It carries every algorithmic piece:
//! synthetic gait generation, Butterworth preprocessing, selective Kanerva
//! coding, a bank of GVFs learned with true online TD(λ), the three policy
//! net wirings with 50-50 replay batching, the prequential run loop and the
//! rank statistics used to compare variants. File formats, configuration
//! and the command line live in the `gaitgvf` companion crate.

#![no_std]

extern crate alloc;

pub mod error;
pub mod filter;
pub mod gvf;
pub mod kanerva;
pub mod nn;
pub mod pipeline;
pub mod policy;
pub mod prep;
pub mod seed;
pub mod stats;
pub mod synth;
pub mod terrain;

pub use error::{Error, Result};
pub use gvf::{horizon, GvfBank, GvfLearner, GvfSpec};
pub use kanerva::{FeatureVector, PrototypeSet, ResolutionLevels, SkcEncoder};
pub use pipeline::{
    run_online, run_online_resume, run_online_with, Learners, RunMetrics, RunOutput, RunSettings, VariantMetrics,
};
pub use policy::{NetConfig, NetVariant, PolicyNet, ReplayBuffer, Sample};
pub use prep::{preprocess, PrepConfig, ProcessedSession};
pub use synth::{generate_session, terrain_schedule, RawSession, SessionConfig};
pub use terrain::{ChannelKind, TerrainLabel, N_TERRAINS};

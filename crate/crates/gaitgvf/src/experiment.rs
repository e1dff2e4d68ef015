//! Session preparation and the multi-seed comparison.

use std::path::PathBuf;

use gaitgvf_core::{generate_session, preprocess, run_online, ProcessedSession, RunOutput, RunSettings};
use rayon::prelude::*;

use crate::config::Config;
use crate::error::{Error, Result};
use crate::report::SeedRun;
use crate::session_io::{read_session, LoadedSession};

/// Generates and preprocesses the session for `seed`.
pub fn seeded_session(config: &Config, seed: u64) -> Result<ProcessedSession> {
    let raw = generate_session(&config.session_config(seed)?)?;
    Ok(preprocess(&raw, &config.prep_config())?)
}

/// Loads a session file, preprocessing it first if it is raw.
pub fn load_processed(config: &Config, path: &std::path::Path) -> Result<ProcessedSession> {
    match read_session(path)? {
        LoadedSession::Processed(p) => Ok(p),
        LoadedSession::Raw(r) => Ok(preprocess(&r, &config.prep_config())?),
    }
}

pub fn run(session: &ProcessedSession, settings: &RunSettings) -> Result<RunOutput> {
    Ok(run_online(session, settings)?)
}

/// Where the compared sessions come from.
#[derive(Debug, Clone)]
pub enum Sources {
    /// Generated sessions, one per seed.
    Seeds(Vec<u64>),
    /// Session files; file `i` runs with seed `base_seed + i`.
    Files { paths: Vec<PathBuf>, base_seed: u64 },
}

impl Sources {
    pub fn len(&self) -> usize {
        match self {
            Sources::Seeds(s) => s.len(),
            Sources::Files { paths, .. } => paths.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Runs all three variants on every session with `jobs` worker threads.
/// Results come back in seed order whatever the scheduling.
pub fn compare(config: &Config, sources: &Sources, jobs: usize, progress: impl Fn(u64) + Sync) -> Result<Vec<SeedRun>> {
    if sources.len() < 3 {
        return Err(Error::invalid(format!("compare needs at least 3 sessions, got {}", sources.len())));
    }
    if jobs == 0 {
        return Err(Error::invalid("--jobs must be at least 1"));
    }
    let work: Vec<(u64, Option<PathBuf>)> = match sources {
        Sources::Seeds(seeds) => seeds.iter().map(|&s| (s, None)).collect(),
        Sources::Files { paths, base_seed } => {
            paths.iter().enumerate().map(|(i, p)| (base_seed + i as u64, Some(p.clone()))).collect()
        }
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::invalid(format!("cannot start {jobs} workers: {e}")))?;
    let mut runs = pool.install(|| {
        work.par_iter()
            .map(|(seed, path)| {
                let session = match path {
                    Some(p) => load_processed(config, p)?,
                    None => seeded_session(config, *seed)?,
                };
                let out = run(&session, &config.run_settings(*seed))?;
                progress(*seed);
                Ok(SeedRun { seed: *seed, metrics: out.metrics })
            })
            .collect::<Result<Vec<_>>>()
    })?;
    runs.sort_by_key(|r| r.seed);
    Ok(runs)
}

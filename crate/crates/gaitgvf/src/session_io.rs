//! Session files: a columnar CSV (`step,label,ch00,...`) plus a metadata
//! file next to it (`<stem>.meta`) holding `key = value` lines.
//!
//! Raw and processed sessions share the layout; the metadata `format` key
//! tells them apart. Raw metadata echoes the generator config, processed
//! metadata carries the per-channel normalization bounds. Labels are the
//! stable terrain indices 0..7. Values are written with Rust's shortest
//! round-trip float formatting, so a write/read cycle is lossless.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use gaitgvf_core::{ChannelKind, ProcessedSession, RawSession, SessionConfig, TerrainLabel};

use crate::error::{Error, Result};
use crate::report::write_atomic;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SessionFormat {
    Raw,
    Processed,
}

impl SessionFormat {
    fn key(self) -> &'static str {
        match self {
            SessionFormat::Raw => "raw",
            SessionFormat::Processed => "processed",
        }
    }
}

/// Either kind of session, as loaded from disk.
#[derive(Debug, Clone)]
pub enum LoadedSession {
    Raw(RawSession),
    Processed(ProcessedSession),
}

/// Metadata path for a session CSV: `x/name.csv` → `x/name.meta`.
pub fn meta_path(csv: &Path) -> PathBuf {
    csv.with_extension("meta")
}

fn kind_list(kinds: &[ChannelKind]) -> String {
    kinds.iter().map(|k| k.tag()).collect::<Vec<_>>().join(",")
}

fn header(n: usize) -> String {
    let mut h = String::from("step,label");
    for c in 0..n {
        write!(h, ",ch{c:02}").unwrap();
    }
    h.push('\n');
    h
}

fn rows(
    out: &mut String,
    len: usize,
    n: usize,
    label: impl Fn(usize) -> TerrainLabel,
    value: impl Fn(usize, usize) -> f64,
) {
    for t in 0..len {
        write!(out, "{t},{}", label(t).index()).unwrap();
        for c in 0..n {
            write!(out, ",{}", value(t, c)).unwrap();
        }
        out.push('\n');
    }
}

pub fn write_raw(csv: &Path, session: &RawSession) -> Result<()> {
    let n = session.channels.len();
    let mut body = header(n);
    rows(&mut body, session.len(), n, |t| session.labels[t], |t, c| session.channels[c][t]);
    let cfg = &session.config;
    let mut meta = String::new();
    writeln!(meta, "format = raw").unwrap();
    writeln!(meta, "version = {FORMAT_VERSION}").unwrap();
    writeln!(meta, "seed = {}", cfg.seed).unwrap();
    writeln!(meta, "raw_rate_hz = {}", cfg.raw_rate_hz).unwrap();
    writeln!(meta, "target_rate_hz = {}", cfg.target_rate_hz).unwrap();
    writeln!(meta, "n_channels = {}", cfg.n_channels).unwrap();
    writeln!(meta, "total_target_steps = {}", cfg.total_target_steps).unwrap();
    writeln!(meta, "cycle_period_s = {}", cfg.cycle_period_s).unwrap();
    writeln!(meta, "segment_steps = {},{}", cfg.segment_steps.0, cfg.segment_steps.1).unwrap();
    writeln!(meta, "noise_std = {}", cfg.noise_std).unwrap();
    writeln!(meta, "terrains = {}", cfg.terrains.iter().map(|t| t.key()).collect::<Vec<_>>().join(",")).unwrap();
    writeln!(meta, "channel_kinds = {}", kind_list(&session.kinds)).unwrap();
    writeln!(meta, "samples = {}", session.len()).unwrap();
    write_atomic(csv, body.as_bytes())?;
    write_atomic(&meta_path(csv), meta.as_bytes())
}

pub fn write_processed(csv: &Path, session: &ProcessedSession) -> Result<()> {
    let n = session.n_channels;
    let mut body = header(n);
    rows(&mut body, session.len(), n, |t| session.labels[t], |t, c| session.values[t * n + c]);
    let mut meta = String::new();
    writeln!(meta, "format = processed").unwrap();
    writeln!(meta, "version = {FORMAT_VERSION}").unwrap();
    writeln!(meta, "sample_rate_hz = {}", session.sample_rate_hz).unwrap();
    writeln!(meta, "n_channels = {n}").unwrap();
    writeln!(meta, "channel_kinds = {}", kind_list(&session.kinds)).unwrap();
    let bounds: Vec<String> = session.bounds.iter().map(|(lo, hi)| format!("{lo}:{hi}")).collect();
    writeln!(meta, "bounds = {}", bounds.join(",")).unwrap();
    let constant: Vec<String> = session.constant_channels.iter().map(|c| c.to_string()).collect();
    writeln!(meta, "constant_channels = {}", constant.join(",")).unwrap();
    writeln!(meta, "frames = {}", session.len()).unwrap();
    write_atomic(csv, body.as_bytes())?;
    write_atomic(&meta_path(csv), meta.as_bytes())
}

struct Meta {
    path: PathBuf,
    entries: BTreeMap<String, (u64, String)>,
}

impl Meta {
    fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut entries = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line_no = i as u64 + 1;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::corrupt(path, line_no, "expected `key = value`"))?;
            let key = k.trim().to_string();
            if entries.insert(key.clone(), (line_no, v.trim().to_string())).is_some() {
                return Err(Error::corrupt(path, line_no, format!("duplicate key `{key}`")));
            }
        }
        Ok(Meta { path: path.to_path_buf(), entries })
    }

    fn raw(&self, key: &str) -> Result<(u64, &str)> {
        self.entries
            .get(key)
            .map(|(l, v)| (*l, v.as_str()))
            .ok_or_else(|| Error::corrupt(&self.path, 0, format!("missing key `{key}`")))
    }

    fn get<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let (line, v) = self.raw(key)?;
        v.parse().map_err(|_| Error::corrupt(&self.path, line, format!("bad value for `{key}`: `{v}`")))
    }

    fn list<T>(&self, key: &str, parse: impl Fn(&str) -> Option<T>) -> Result<Vec<T>> {
        let (line, v) = self.raw(key)?;
        if v.is_empty() {
            return Ok(Vec::new());
        }
        v.split(',')
            .map(|item| {
                parse(item.trim())
                    .ok_or_else(|| Error::corrupt(&self.path, line, format!("bad item `{item}` in `{key}`")))
            })
            .collect()
    }

    fn format(&self) -> Result<SessionFormat> {
        let (line, v) = self.raw("format")?;
        let version: u32 = self.get("version")?;
        if version != FORMAT_VERSION {
            let (vl, _) = self.raw("version")?;
            return Err(Error::corrupt(&self.path, vl, format!("unsupported version {version}")));
        }
        match v {
            "raw" => Ok(SessionFormat::Raw),
            "processed" => Ok(SessionFormat::Processed),
            other => Err(Error::corrupt(&self.path, line, format!("unknown format `{other}`"))),
        }
    }
}

/// Rows of the CSV body: labels plus row-major values. Errors carry the
/// 1-based line number of the offending row.
fn read_rows(path: &Path, n: usize) -> Result<(Vec<TerrainLabel>, Vec<f64>)> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(false).from_reader(BufReader::new(file));
    let mut labels = Vec::new();
    let mut values = Vec::new();
    let mut record = csv::StringRecord::new();
    let expected_header = header(n);
    let mut first = true;
    loop {
        let line = reader.position().line();
        match reader.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) => {
                let at = e.position().map(|p| p.line()).unwrap_or(line);
                return Err(Error::corrupt(path, at, e.to_string()));
            }
        }
        if first {
            first = false;
            let got = record.iter().collect::<Vec<_>>().join(",");
            if got != expected_header.trim_end() {
                return Err(Error::corrupt(path, line, format!("unexpected header for {n} channels")));
            }
            continue;
        }
        if record.len() != n + 2 {
            return Err(Error::corrupt(path, line, format!("expected {} fields, found {}", n + 2, record.len())));
        }
        let step: usize = record[0].parse().map_err(|_| Error::corrupt(path, line, "bad step index"))?;
        if step != labels.len() {
            return Err(Error::corrupt(path, line, format!("expected step {}, found {step}", labels.len())));
        }
        let label = record[1]
            .parse::<usize>()
            .ok()
            .and_then(|i| TerrainLabel::from_index(i).ok())
            .ok_or_else(|| Error::corrupt(path, line, format!("bad terrain label `{}`", &record[1])))?;
        labels.push(label);
        for field in record.iter().skip(2) {
            let v: f64 = field.parse().map_err(|_| Error::corrupt(path, line, format!("bad value `{field}`")))?;
            if !v.is_finite() {
                return Err(Error::corrupt(path, line, format!("non-finite value `{field}`")));
            }
            values.push(v);
        }
    }
    if first {
        return Err(Error::corrupt(path, 1, "empty file"));
    }
    Ok((labels, values))
}

fn parse_kind(s: &str) -> Option<ChannelKind> {
    ChannelKind::from_tag(s)
}

/// Reads either kind of session, dispatching on the metadata.
pub fn read_session(csv: &Path) -> Result<LoadedSession> {
    let meta = Meta::read(&meta_path(csv))?;
    let format = meta.format()?;
    let n: usize = meta.get("n_channels")?;
    let kinds = meta.list("channel_kinds", parse_kind)?;
    if kinds.len() != n {
        let (line, _) = meta.raw("channel_kinds")?;
        return Err(Error::corrupt(&meta.path, line, format!("{} channel kinds for {n} channels", kinds.len())));
    }
    let (labels, values) = read_rows(csv, n)?;
    let rows = labels.len();
    let count_key = if format == SessionFormat::Raw { "samples" } else { "frames" };
    let declared: usize = meta.get(count_key)?;
    if declared != rows {
        return Err(Error::corrupt(csv, rows as u64 + 2, format!("{rows} rows, metadata declares {declared}")));
    }
    match format {
        SessionFormat::Raw => {
            let segs = meta.list("segment_steps", |s| s.parse::<usize>().ok())?;
            if segs.len() != 2 {
                let (line, _) = meta.raw("segment_steps")?;
                return Err(Error::corrupt(&meta.path, line, "segment_steps needs two values"));
            }
            let terrains = meta.list("terrains", |s| TerrainLabel::ALL.into_iter().find(|t| t.key() == s))?;
            let config = SessionConfig {
                seed: meta.get("seed")?,
                raw_rate_hz: meta.get("raw_rate_hz")?,
                target_rate_hz: meta.get("target_rate_hz")?,
                n_channels: n,
                total_target_steps: meta.get("total_target_steps")?,
                cycle_period_s: meta.get("cycle_period_s")?,
                segment_steps: (segs[0], segs[1]),
                noise_std: meta.get("noise_std")?,
                terrains,
            };
            let mut channels = vec![Vec::with_capacity(rows); n];
            for row in values.chunks_exact(n) {
                for (ch, v) in channels.iter_mut().zip(row) {
                    ch.push(*v);
                }
            }
            Ok(LoadedSession::Raw(RawSession { config, channels, labels, kinds }))
        }
        SessionFormat::Processed => {
            for (i, v) in values.iter().enumerate() {
                if !(0.0..=1.0).contains(v) {
                    return Err(Error::corrupt(csv, (i / n) as u64 + 2, format!("value {v} outside [0, 1]")));
                }
            }
            let bounds = meta.list("bounds", |s| {
                let (lo, hi) = s.split_once(':')?;
                Some((lo.parse().ok()?, hi.parse().ok()?))
            })?;
            let constant_channels = meta.list("constant_channels", |s| s.parse().ok())?;
            let mut session = ProcessedSession::from_frames(n, meta.get("sample_rate_hz")?, values, labels, kinds)
                .map_err(|e| Error::corrupt(&meta.path, 0, e.to_string()))?;
            if bounds.len() != n {
                let (line, _) = meta.raw("bounds")?;
                return Err(Error::corrupt(&meta.path, line, format!("{} bounds for {n} channels", bounds.len())));
            }
            session.bounds = bounds;
            session.constant_channels = constant_channels;
            Ok(LoadedSession::Processed(session))
        }
    }
}

impl SessionFormat {
    pub fn of(csv: &Path) -> Result<Self> {
        Meta::read(&meta_path(csv))?.format()
    }

    pub fn name(self) -> &'static str {
        self.key()
    }
}

/// Reads a raw session file.
pub fn read_raw(csv: &Path) -> Result<RawSession> {
    match read_session(csv)? {
        LoadedSession::Raw(r) => Ok(r),
        LoadedSession::Processed(_) => Err(Error::invalid(format!("{} is a processed session", csv.display()))),
    }
}

/// Reads a processed session file.
pub fn read_processed(csv: &Path) -> Result<ProcessedSession> {
    match read_session(csv)? {
        LoadedSession::Processed(p) => Ok(p),
        LoadedSession::Raw(_) => Err(Error::invalid(format!("{} is a raw session", csv.display()))),
    }
}

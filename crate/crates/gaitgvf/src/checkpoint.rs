//! Binary checkpoint of everything a run has learned: the prototype set, the
//! GVF bank and every policy net with its optimizer state.
//!
//! Layout (little-endian): the 8-byte magic `GAITCKPT`, a `u32` version, the
//! three sections, then an FNV-1a hash of all preceding bytes. Vectors are a
//! `u64` length followed by their elements.

use std::fs;
use std::path::Path;

use gaitgvf_core::nn::{Optimizer, OptimizerKind};
use gaitgvf_core::{GvfBank, Learners, NetConfig, NetVariant, PolicyNet, PrototypeSet};

use crate::error::{Error, Result};
use crate::report::write_atomic;

const MAGIC: &[u8; 8] = b"GAITCKPT";
pub const VERSION: u32 = 1;

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| (h ^ b as u64).wrapping_mul(0x100_0000_01b3))
}

#[derive(Default)]
struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64s(&mut self, v: &[f64]) {
        self.u64(v.len() as u64);
        v.iter().for_each(|&x| self.f64(x));
    }
    fn sizes(&mut self, v: &[usize]) {
        self.u64(v.len() as u64);
        v.iter().for_each(|&x| self.u64(x as u64));
    }
}

struct Reader<'a> {
    path: &'a Path,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn fail(&self, message: impl Into<String>) -> Error {
        Error::BadCheckpoint { path: self.path.to_path_buf(), offset: self.pos as u64, message: message.into() }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(self.fail("unexpected end of file"));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn usize(&mut self) -> Result<usize> {
        let v = self.u64()?;
        usize::try_from(v).map_err(|_| self.fail("length out of range"))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn len(&mut self, elem: usize) -> Result<usize> {
        let n = self.usize()?;
        if n.checked_mul(elem).is_none_or(|b| b > self.bytes.len() - self.pos) {
            return Err(self.fail(format!("vector length {n} exceeds the file")));
        }
        Ok(n)
    }
    fn f64s(&mut self) -> Result<Vec<f64>> {
        let n = self.len(8)?;
        (0..n).map(|_| self.f64()).collect()
    }
    fn sizes(&mut self) -> Result<Vec<usize>> {
        let n = self.len(8)?;
        (0..n).map(|_| self.usize()).collect()
    }
}

fn variant_code(v: NetVariant) -> u8 {
    match v {
        NetVariant::Control => 0,
        NetVariant::InputGvf => 1,
        NetVariant::LatentGvf => 2,
    }
}

pub fn encode(learners: &Learners) -> Vec<u8> {
    let mut w = Writer::default();
    w.0.extend_from_slice(MAGIC);
    w.0.extend_from_slice(&VERSION.to_le_bytes());

    let p = &learners.prototypes;
    w.u64(p.count() as u64);
    w.u64(p.dim() as u64);
    w.u64(p.seed());
    w.f64s(p.coords());

    let b = &learners.bank;
    w.u64(b.len() as u64);
    w.u64(b.feature_len() as u64);
    w.f64(b.gamma());
    w.f64(b.lambda());
    w.f64(b.alpha());
    w.f64(b.trace_threshold());
    w.u64(b.steps());
    w.f64s(b.all_weights());

    w.u64(learners.nets.len() as u64);
    for net in &learners.nets {
        let c = net.config();
        w.u8(variant_code(c.variant));
        w.u64(c.n_actual as u64);
        w.u64(c.n_predictions as u64);
        w.u64(c.n_classes as u64);
        w.sizes(&c.encoder_sizes);
        w.sizes(&c.head_sizes);
        w.f64(c.learning_rate);
        w.u8(matches!(c.optimizer, OptimizerKind::Sgd) as u8);
        w.u64(c.init_seed);
        w.f64s(net.network().params());
        let o = net.optimizer();
        w.f64(o.learning_rate);
        w.f64(o.beta1);
        w.f64(o.beta2);
        w.f64(o.epsilon);
        w.f64s(&o.m);
        w.f64s(&o.v);
        w.u64(o.t);
        w.u64(net.steps());
    }
    let hash = fnv1a(&w.0);
    w.u64(hash);
    w.0
}

pub fn decode(path: &Path, bytes: &[u8]) -> Result<Learners> {
    let mut r = Reader { path, bytes, pos: 0 };
    if r.take(8)? != MAGIC {
        r.pos = 0;
        return Err(r.fail("not a checkpoint file"));
    }
    let version = u32::from_le_bytes(r.take(4)?.try_into().unwrap());
    if version != VERSION {
        return Err(r.fail(format!("unsupported checkpoint version {version}")));
    }
    if bytes.len() < 20 {
        return Err(r.fail("unexpected end of file"));
    }
    let body_end = bytes.len() - 8;
    let stored = u64::from_le_bytes(bytes[body_end..].try_into().unwrap());
    if stored != fnv1a(&bytes[..body_end]) {
        return Err(Error::BadCheckpoint {
            path: path.to_path_buf(),
            offset: body_end as u64,
            message: "checksum mismatch".into(),
        });
    }
    r.bytes = &bytes[..body_end];

    let at = r.pos;
    let (count, dim, seed) = (r.usize()?, r.usize()?, r.u64()?);
    let coords = r.f64s()?;
    let core = |at: usize, e: gaitgvf_core::Error| Error::BadCheckpoint {
        path: path.to_path_buf(),
        offset: at as u64,
        message: e.to_string(),
    };
    let prototypes = PrototypeSet::from_coords(count, dim, seed, coords).map_err(|e| core(at, e))?;

    let at = r.pos;
    let (n, feature_len) = (r.usize()?, r.usize()?);
    let (gamma, lambda, alpha, threshold) = (r.f64()?, r.f64()?, r.f64()?, r.f64()?);
    let steps = r.u64()?;
    let weights = r.f64s()?;
    let mut bank = GvfBank::with_threshold(n, feature_len, gamma, lambda, alpha, threshold).map_err(|e| core(at, e))?;
    bank.load_weights(weights).map_err(|e| core(at, e))?;
    bank.set_steps(steps);

    let n_nets = r.len(1)?;
    let mut nets = Vec::with_capacity(n_nets);
    for _ in 0..n_nets {
        let at = r.pos;
        let variant = match r.u8()? {
            0 => NetVariant::Control,
            1 => NetVariant::InputGvf,
            2 => NetVariant::LatentGvf,
            other => return Err(r.fail(format!("unknown variant code {other}"))),
        };
        let config = NetConfig {
            variant,
            n_actual: r.usize()?,
            n_predictions: r.usize()?,
            n_classes: r.usize()?,
            encoder_sizes: r.sizes()?,
            head_sizes: r.sizes()?,
            learning_rate: r.f64()?,
            optimizer: match r.u8()? {
                0 => OptimizerKind::Adam,
                1 => OptimizerKind::Sgd,
                other => return Err(r.fail(format!("unknown optimizer code {other}"))),
            },
            init_seed: r.u64()?,
        };
        let params = r.f64s()?;
        let learning_rate = r.f64()?;
        let (beta1, beta2, epsilon) = (r.f64()?, r.f64()?, r.f64()?);
        let (m, v, t) = (r.f64s()?, r.f64s()?, r.u64()?);
        let optimizer = Optimizer { kind: config.optimizer, learning_rate, beta1, beta2, epsilon, m, v, t };
        let net_steps = r.u64()?;
        nets.push(PolicyNet::from_parts(config, params, optimizer, net_steps).map_err(|e| core(at, e))?);
    }
    if r.pos != r.bytes.len() {
        return Err(r.fail("trailing bytes"));
    }
    Ok(Learners { prototypes, bank, nets })
}

pub fn save(path: &Path, learners: &Learners) -> Result<()> {
    write_atomic(path, &encode(learners))
}

pub fn load(path: &Path) -> Result<Learners> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(path, &bytes)
}

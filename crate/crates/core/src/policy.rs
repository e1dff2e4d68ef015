//! Terrain policy nets and the replay machinery that trains them.
//!
//! Three wirings share one encoder/head layout:
//!
//! * `Control`: actual signals → encoder → head → 7 logits.
//! * `InputGvf`: actual signals ++ GVF predictions → encoder → head.
//! * `LatentGvf`: actual signals → encoder; GVF predictions are appended to
//!   the encoder output before the head.
//!
//! Training batches mix the newest samples with uniform draws (with
//! replacement) from a bounded replay buffer, half and half.

use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::{log_softmax_parts, softmax, Network, Optimizer, OptimizerKind, Workspace};
use crate::seed::{self, stream};
use crate::terrain::N_TERRAINS;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NetVariant {
    Control,
    InputGvf,
    LatentGvf,
}

impl NetVariant {
    pub const ALL: [NetVariant; 3] = [NetVariant::Control, NetVariant::InputGvf, NetVariant::LatentGvf];

    pub fn uses_predictions(self) -> bool {
        self != NetVariant::Control
    }

    /// Command-line / file identifier.
    pub fn key(self) -> &'static str {
        match self {
            NetVariant::Control => "control",
            NetVariant::InputGvf => "input-gvf",
            NetVariant::LatentGvf => "latent-gvf",
        }
    }

    pub fn from_key(key: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|v| v.key() == key)
    }

    pub fn display_name(self) -> &'static str {
        match self {
            NetVariant::Control => "Policy Net",
            NetVariant::InputGvf => "Input GVF Policy Net",
            NetVariant::LatentGvf => "Latent GVF Policy Net",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetConfig {
    pub variant: NetVariant,
    pub n_actual: usize,
    pub n_predictions: usize,
    pub n_classes: usize,
    /// Strictly decreasing encoder widths.
    pub encoder_sizes: Vec<usize>,
    pub head_sizes: Vec<usize>,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    pub init_seed: u64,
}

impl Default for NetConfig {
    fn default() -> Self {
        NetConfig {
            variant: NetVariant::Control,
            n_actual: 30,
            n_predictions: 30,
            n_classes: N_TERRAINS,
            encoder_sizes: alloc::vec![24, 16],
            head_sizes: alloc::vec![32, 16],
            learning_rate: 0.001,
            optimizer: OptimizerKind::Adam,
            init_seed: 0,
        }
    }
}

impl NetConfig {
    pub fn for_variant(variant: NetVariant, init_seed: u64) -> Self {
        NetConfig { variant, init_seed, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.encoder_sizes.is_empty() {
            return Err(Error::config("at least one encoder layer is required"));
        }
        if self.encoder_sizes.windows(2).any(|w| w[0] <= w[1]) {
            return Err(Error::config("encoder sizes must be strictly decreasing"));
        }
        if self.n_actual == 0 || self.n_classes < 2 {
            return Err(Error::config("need actual inputs and at least two classes"));
        }
        if self.variant.uses_predictions() && self.n_predictions == 0 {
            return Err(Error::config("GVF variants need at least one prediction input"));
        }
        if self.encoder_sizes.iter().chain(&self.head_sizes).any(|&s| s == 0) {
            return Err(Error::config("layer sizes must be positive"));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(Error::config("learning rate must be nonnegative"));
        }
        Ok(())
    }

    /// Layer widths from input to output, and the merge point if any.
    pub fn layout(&self) -> (Vec<usize>, Option<(usize, usize)>) {
        let input = match self.variant {
            NetVariant::InputGvf => self.n_actual + self.n_predictions,
            _ => self.n_actual,
        };
        let mut sizes = alloc::vec![input];
        sizes.extend(&self.encoder_sizes);
        sizes.extend(&self.head_sizes);
        sizes.push(self.n_classes);
        let merge = (self.variant == NetVariant::LatentGvf).then_some((self.encoder_sizes.len(), self.n_predictions));
        (sizes, merge)
    }
}

#[derive(Debug, Clone)]
pub struct PolicyNet {
    config: NetConfig,
    net: Network,
    optimizer: Optimizer,
    steps: u64,
    ws: Workspace,
    grad: Vec<f64>,
    concat: Vec<f64>,
}

impl PartialEq for PolicyNet {
    fn eq(&self, other: &Self) -> bool {
        self.config == other.config
            && self.net == other.net
            && self.optimizer == other.optimizer
            && self.steps == other.steps
    }
}

/// Output of one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    pub logits: Vec<f64>,
    pub probabilities: Vec<f64>,
    pub predicted: usize,
}

impl PolicyNet {
    pub fn build(config: NetConfig) -> Result<Self> {
        config.validate()?;
        let (sizes, merge) = config.layout();
        let mut net = Network::with_merge(&sizes, merge)?;
        let mut rng = seed::rng(config.init_seed, stream::NET_INIT);
        net.init_he_uniform(&mut rng);
        let optimizer = Optimizer::new(config.optimizer, config.learning_rate, net.param_count());
        Ok(Self::assemble(config, net, optimizer, 0))
    }

    /// Reassembles a net from checkpointed parts.
    pub fn from_parts(config: NetConfig, params: Vec<f64>, optimizer: Optimizer, steps: u64) -> Result<Self> {
        config.validate()?;
        let (sizes, merge) = config.layout();
        let mut net = Network::with_merge(&sizes, merge)?;
        if params.len() != net.param_count() {
            return Err(Error::DimensionMismatch { expected: net.param_count(), got: params.len() });
        }
        if optimizer.kind == OptimizerKind::Adam
            && (optimizer.m.len() != params.len() || optimizer.v.len() != params.len())
        {
            return Err(Error::DimensionMismatch { expected: params.len(), got: optimizer.m.len() });
        }
        net.params_mut().copy_from_slice(&params);
        Ok(Self::assemble(config, net, optimizer, steps))
    }

    fn assemble(config: NetConfig, net: Network, optimizer: Optimizer, steps: u64) -> Self {
        let grad = alloc::vec![0.0; net.param_count()];
        PolicyNet { config, net, optimizer, steps, ws: Workspace::default(), grad, concat: Vec::new() }
    }

    pub fn config(&self) -> &NetConfig {
        &self.config
    }

    pub fn variant(&self) -> NetVariant {
        self.config.variant
    }

    pub fn network(&self) -> &Network {
        &self.net
    }

    pub fn network_mut(&mut self) -> &mut Network {
        &mut self.net
    }

    pub fn optimizer(&self) -> &Optimizer {
        &self.optimizer
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn param_count(&self) -> usize {
        self.net.param_count()
    }

    fn check_predictions<'p>(&self, predictions: Option<&'p [f64]>) -> Result<&'p [f64]> {
        if !self.variant().uses_predictions() {
            return Ok(&[]);
        }
        let p = predictions.ok_or(Error::MissingPredictions(self.variant()))?;
        if p.len() != self.config.n_predictions {
            return Err(Error::DimensionMismatch { expected: self.config.n_predictions, got: p.len() });
        }
        Ok(p)
    }

    fn logits_into(&mut self, actuals: &[f64], predictions: &[f64]) -> Result<&[f64]> {
        if actuals.len() != self.config.n_actual {
            return Err(Error::DimensionMismatch { expected: self.config.n_actual, got: actuals.len() });
        }
        match self.variant() {
            NetVariant::Control => self.net.forward(actuals, &[], &mut self.ws),
            NetVariant::LatentGvf => self.net.forward(actuals, predictions, &mut self.ws),
            NetVariant::InputGvf => {
                self.concat.clear();
                self.concat.extend_from_slice(actuals);
                self.concat.extend_from_slice(predictions);
                self.net.forward(&self.concat, &[], &mut self.ws)
            }
        }
    }

    /// Logits and softmax probabilities. `predictions` is ignored by the
    /// control net and required by the GVF nets.
    pub fn forward(&mut self, actuals: &[f64], predictions: Option<&[f64]>) -> Result<Classification> {
        let p = self.check_predictions(predictions)?;
        let logits = self.logits_into(actuals, p)?.to_vec();
        let probabilities = softmax(&logits);
        let (_, predicted) = log_softmax_parts(&logits);
        Ok(Classification { logits, probabilities, predicted })
    }

    /// Most likely class, without allocating.
    pub fn classify(&mut self, actuals: &[f64], predictions: Option<&[f64]>) -> Result<usize> {
        let p = self.check_predictions(predictions)?;
        let logits = self.logits_into(actuals, p)?;
        Ok(log_softmax_parts(logits).1)
    }

    /// Mean cross-entropy of `batch` under the current parameters and its
    /// gradient (left in an internal buffer).
    pub fn loss_and_grad(&mut self, batch: &[&Sample]) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::Empty("training batch"));
        }
        for s in batch {
            if s.label >= self.config.n_classes {
                return Err(Error::LabelOutOfRange(s.label));
            }
            self.check_predictions(Some(&s.predictions))?;
        }
        let variant = self.variant();
        let width = self.config.n_actual + self.config.n_predictions;
        if variant == NetVariant::InputGvf {
            self.concat.clear();
            for s in batch {
                self.concat.extend_from_slice(&s.actuals);
                self.concat.extend_from_slice(&s.predictions);
            }
        }
        let items: Vec<(&[f64], &[f64], usize)> = batch
            .iter()
            .enumerate()
            .map(|(i, s)| match variant {
                NetVariant::Control => (&s.actuals[..], &[][..], s.label),
                NetVariant::LatentGvf => (&s.actuals[..], &s.predictions[..], s.label),
                NetVariant::InputGvf => (&self.concat[i * width..(i + 1) * width], &[][..], s.label),
            })
            .collect();
        self.net.loss_and_grad(&items, &mut self.grad, &mut self.ws)
    }

    pub fn gradient(&self) -> &[f64] {
        &self.grad
    }

    /// Backpropagates the mean cross-entropy over `batch` and takes one
    /// optimizer step. Returns the loss before the step.
    pub fn train_batch(&mut self, batch: &[&Sample]) -> Result<f64> {
        let loss = self.loss_and_grad(batch)?;
        self.optimizer.step(self.net.params_mut(), &self.grad);
        self.steps += 1;
        Ok(loss)
    }
}

/// One training example.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub actuals: Vec<f64>,
    pub predictions: Vec<f64>,
    /// Terrain index, 0..7.
    pub label: usize,
}

/// Bounded store that overwrites its oldest entry when full.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Sample>,
    next: usize,
    pushes: u64,
}

impl ReplayBuffer {
    pub const DEFAULT_CAPACITY: usize = 1000;

    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay buffer capacity must be positive");
        ReplayBuffer { capacity, items: Vec::with_capacity(capacity), next: 0, pushes: 0 }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn pushes(&self) -> u64 {
        self.pushes
    }

    pub fn push(&mut self, sample: Sample) {
        if self.items.len() < self.capacity {
            self.items.push(sample);
        } else {
            self.items[self.next] = sample;
        }
        self.next = (self.next + 1) % self.capacity;
        self.pushes += 1;
    }

    /// Oldest stored sample.
    pub fn oldest(&self) -> Option<&Sample> {
        if self.items.len() < self.capacity {
            self.items.first()
        } else {
            self.items.get(self.next)
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &Sample> {
        self.items.iter()
    }

    /// Uniform draw; `None` when empty.
    pub fn sample<'a>(&'a self, rng: &mut impl Rng) -> Option<&'a Sample> {
        if self.items.is_empty() {
            None
        } else {
            Some(&self.items[rng.random_range(0..self.items.len())])
        }
    }
}

/// Builds a 50-50 batch: the last `half` entries of `recent` plus `half`
/// uniform draws with replacement from `buffer`. While the buffer holds
/// fewer than `half` samples the replay half is skipped and the batch is the
/// recent samples alone.
pub fn assemble_batch<'a>(
    recent: &'a [Sample],
    buffer: &'a ReplayBuffer,
    half: usize,
    rng: &mut impl Rng,
) -> Vec<&'a Sample> {
    let start = recent.len().saturating_sub(half);
    let mut batch: Vec<&Sample> = recent[start..].iter().collect();
    if buffer.len() >= half {
        for _ in 0..half {
            batch.push(buffer.sample(rng).expect("buffer is nonempty"));
        }
    }
    batch
}

//! Small dense feed-forward networks with ReLU hidden layers, a linear
//! output layer, softmax cross-entropy loss and Adam/SGD optimizers.
//!
//! A network may take a second input vector that is concatenated to the
//! activation entering one of its layers (the "merge" point). All
//! parameters live in one flat vector; layer `l` stores its
//! `outputs × inputs` weights row-major followed by its biases.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerShape {
    pub inputs: usize,
    pub outputs: usize,
    offset: usize,
}

impl LayerShape {
    fn weights(&self) -> core::ops::Range<usize> {
        self.offset..self.offset + self.inputs * self.outputs
    }

    fn biases(&self) -> core::ops::Range<usize> {
        let w = self.offset + self.inputs * self.outputs;
        w..w + self.outputs
    }

    pub fn param_count(&self) -> usize {
        self.inputs * self.outputs + self.outputs
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    layers: Vec<LayerShape>,
    /// `(layer, width)`: `width` extra inputs are appended to the input of
    /// `layer`.
    merge: Option<(usize, usize)>,
    params: Vec<f64>,
}

impl Network {
    /// Plain MLP through `sizes` (input, hidden..., output).
    pub fn mlp(sizes: &[usize]) -> Result<Self> {
        Self::with_merge(sizes, None)
    }

    /// `merge = Some((layer, width))` widens the input of `layer` by `width`.
    /// Parameters start at zero; see [`Network::init_he_uniform`].
    pub fn with_merge(sizes: &[usize], merge: Option<(usize, usize)>) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::config("a network needs at least an input and an output size, all positive"));
        }
        if let Some((layer, _)) = merge {
            if layer >= sizes.len() - 1 {
                return Err(Error::config("merge point past the last layer"));
            }
        }
        let mut layers = Vec::with_capacity(sizes.len() - 1);
        let mut offset = 0;
        for l in 0..sizes.len() - 1 {
            let extra = match merge {
                Some((at, w)) if at == l => w,
                _ => 0,
            };
            let shape = LayerShape { inputs: sizes[l] + extra, outputs: sizes[l + 1], offset };
            offset += shape.param_count();
            layers.push(shape);
        }
        Ok(Network { layers, merge, params: vec![0.0; offset] })
    }

    /// Weights uniform in ±√(6 / fan_in), biases zero.
    pub fn init_he_uniform(&mut self, rng: &mut impl Rng) {
        for layer in &self.layers {
            let bound = libm::sqrt(6.0 / layer.inputs as f64);
            for p in &mut self.params[layer.weights()] {
                *p = rng.random_range(-bound..bound);
            }
            for p in &mut self.params[layer.biases()] {
                *p = 0.0;
            }
        }
    }

    pub fn layers(&self) -> &[LayerShape] {
        &self.layers
    }

    pub fn merge(&self) -> Option<(usize, usize)> {
        self.merge
    }

    pub fn input_size(&self) -> usize {
        self.layers[0].inputs - self.extra_width_at(0)
    }

    pub fn extra_size(&self) -> usize {
        self.merge.map_or(0, |m| m.1)
    }

    pub fn output_size(&self) -> usize {
        self.layers.last().map_or(0, |l| l.outputs)
    }

    fn extra_width_at(&self, layer: usize) -> usize {
        match self.merge {
            Some((at, w)) if at == layer => w,
            _ => 0,
        }
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    /// Forward pass into `ws`; returns the logits.
    pub fn forward<'w>(&self, input: &[f64], extra: &[f64], ws: &'w mut Workspace) -> Result<&'w [f64]> {
        if input.len() != self.input_size() {
            return Err(Error::DimensionMismatch { expected: self.input_size(), got: input.len() });
        }
        if extra.len() != self.extra_size() {
            return Err(Error::DimensionMismatch { expected: self.extra_size(), got: extra.len() });
        }
        ws.ensure(self);
        let last = self.layers.len() - 1;
        ws.inputs[0].clear();
        ws.inputs[0].extend_from_slice(input);
        for (l, layer) in self.layers.iter().enumerate() {
            if self.extra_width_at(l) > 0 {
                ws.inputs[l].extend_from_slice(extra);
            }
            let w = &self.params[layer.weights()];
            let b = &self.params[layer.biases()];
            let (head, tail) = ws.inputs.split_at_mut(l + 1);
            let a = &head[l];
            let z = &mut ws.pre[l];
            for (o, zo) in z.iter_mut().enumerate() {
                let row = &w[o * layer.inputs..(o + 1) * layer.inputs];
                *zo = b[o] + row.iter().zip(a).map(|(wi, ai)| wi * ai).sum::<f64>();
            }
            if l < last {
                let next = &mut tail[0];
                next.clear();
                next.extend(z.iter().map(|&v| v.max(0.0)));
            }
        }
        Ok(&ws.pre[last])
    }

    /// Mean softmax cross-entropy over `batch` and its gradient, written to
    /// `grad` (overwritten). Each item is `(input, extra, class)`.
    pub fn loss_and_grad(
        &self,
        batch: &[(&[f64], &[f64], usize)],
        grad: &mut [f64],
        ws: &mut Workspace,
    ) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::Empty("training batch"));
        }
        if grad.len() != self.params.len() {
            return Err(Error::DimensionMismatch { expected: self.params.len(), got: grad.len() });
        }
        grad.iter_mut().for_each(|g| *g = 0.0);
        let n_out = self.output_size();
        let scale = 1.0 / batch.len() as f64;
        let mut loss = 0.0;
        for &(input, extra, class) in batch {
            if class >= n_out {
                return Err(Error::LabelOutOfRange(class));
            }
            self.forward(input, extra, ws)?;
            let last = self.layers.len() - 1;
            let (lse, _) = log_softmax_parts(&ws.pre[last]);
            loss += lse - ws.pre[last][class];
            // dL/dz = softmax - onehot
            let delta = &mut ws.delta[last];
            for (d, &z) in delta.iter_mut().zip(&ws.pre[last]) {
                *d = libm::exp(z - lse) * scale;
            }
            delta[class] -= scale;
            self.backward(grad, ws);
        }
        Ok(loss * scale)
    }

    fn backward(&self, grad: &mut [f64], ws: &mut Workspace) {
        for l in (0..self.layers.len()).rev() {
            let layer = self.layers[l];
            let (dh, dt) = ws.delta.split_at_mut(l);
            let delta = &dt[0];
            let a = &ws.inputs[l];
            let gw = layer.weights();
            let gb = layer.biases();
            for (o, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                let row = &mut grad[gw.start + o * layer.inputs..gw.start + (o + 1) * layer.inputs];
                for (g, &ai) in row.iter_mut().zip(a) {
                    *g += d * ai;
                }
                grad[gb.start + o] += d;
            }
            if l == 0 {
                break;
            }
            // propagate into the previous layer's ReLU output (the merged
            // extra inputs sit after it and are not trained)
            let prev = &mut dh[l - 1];
            let w = &self.params[layer.weights()];
            let z_prev = &ws.pre[l - 1];
            for (i, p) in prev.iter_mut().enumerate() {
                if z_prev[i] <= 0.0 {
                    *p = 0.0;
                    continue;
                }
                let mut s = 0.0;
                for (o, &d) in delta.iter().enumerate() {
                    s += w[o * layer.inputs + i] * d;
                }
                *p = s;
            }
        }
    }
}

/// `(logsumexp(z), argmax)`.
pub fn log_softmax_parts(z: &[f64]) -> (f64, usize) {
    let (arg, max) =
        z.iter().enumerate().fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) });
    let s: f64 = z.iter().map(|&v| libm::exp(v - max)).sum();
    (max + libm::log(s), arg)
}

pub fn softmax(z: &[f64]) -> Vec<f64> {
    let (lse, _) = log_softmax_parts(z);
    z.iter().map(|&v| libm::exp(v - lse)).collect()
}

/// Scratch buffers for forward/backward passes.
#[derive(Debug, Clone, Default)]
pub struct Workspace {
    inputs: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
    delta: Vec<Vec<f64>>,
}

impl Workspace {
    fn ensure(&mut self, net: &Network) {
        if self.pre.len() == net.layers.len() && self.pre.iter().zip(&net.layers).all(|(p, l)| p.len() == l.outputs) {
            return;
        }
        self.inputs = net.layers.iter().map(|l| Vec::with_capacity(l.inputs)).collect();
        self.pre = net.layers.iter().map(|l| vec![0.0; l.outputs]).collect();
        self.delta = net.layers.iter().map(|l| vec![0.0; l.outputs]).collect();
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerKind {
    Adam,
    Sgd,
}

/// Adam (β₁ = 0.9, β₂ = 0.999, ε = 1e-8 by default) or plain SGD.
#[derive(Debug, Clone, PartialEq)]
pub struct Optimizer {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, learning_rate: f64, n_params: usize) -> Self {
        let moments = if kind == OptimizerKind::Adam { n_params } else { 0 };
        Optimizer {
            kind,
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            m: vec![0.0; moments],
            v: vec![0.0; moments],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let lr = self.learning_rate;
        match self.kind {
            OptimizerKind::Sgd => {
                for (p, g) in params.iter_mut().zip(grad) {
                    *p -= lr * g;
                }
            }
            OptimizerKind::Adam => {
                let (b1, b2) = (self.beta1, self.beta2);
                let c1 = 1.0 - libm::pow(b1, self.t as f64);
                let c2 = 1.0 - libm::pow(b2, self.t as f64);
                for i in 0..params.len() {
                    let g = grad[i];
                    self.m[i] = b1 * self.m[i] + (1.0 - b1) * g;
                    self.v[i] = b2 * self.v[i] + (1.0 - b2) * g * g;
                    let m_hat = self.m[i] / c1;
                    let v_hat = self.v[i] / c2;
                    params[i] -= lr * m_hat / (libm::sqrt(v_hat) + self.epsilon);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn merge_widens_the_merge_layer() {
        let net = Network::with_merge(&[30, 24, 16, 32, 16, 7], Some((2, 30))).unwrap();
        assert_eq!(net.layers()[2].inputs, 46);
        assert_eq!(net.input_size(), 30);
        assert_eq!(net.extra_size(), 30);
        assert!(Network::with_merge(&[3, 2], Some((1, 4))).is_err());
    }

    #[test]
    fn zero_network_is_uniform() {
        let net = Network::mlp(&[4, 3, 7]).unwrap();
        let mut ws = Workspace::default();
        let z = net.forward(&[0.1, 0.2, 0.3, 0.4], &[], &mut ws).unwrap().to_vec();
        let p = softmax(&z);
        for v in p {
            assert!((v - 1.0 / 7.0).abs() < 1e-15);
        }
        let mut grad = vec![0.0; net.param_count()];
        let x = [0.5; 4];
        let batch: Vec<(&[f64], &[f64], usize)> = (0..7).map(|c| (&x[..], &[][..], c)).collect();
        let loss = net.loss_and_grad(&batch, &mut grad, &mut ws).unwrap();
        assert!((loss - libm::log(7.0)).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_labels_and_shapes() {
        let net = Network::mlp(&[2, 3]).unwrap();
        let mut ws = Workspace::default();
        let mut grad = vec![0.0; net.param_count()];
        let x = [0.0, 1.0];
        assert_eq!(net.loss_and_grad(&[(&x, &[], 3)], &mut grad, &mut ws), Err(Error::LabelOutOfRange(3)));
        assert!(net.forward(&[1.0], &[], &mut ws).is_err());
        assert!(net.loss_and_grad(&[], &mut grad, &mut ws).is_err());
    }

    #[test]
    fn sgd_and_zero_rate_adam() {
        let mut p = vec![1.0, -1.0];
        Optimizer::new(OptimizerKind::Sgd, 0.5, 2).step(&mut p, &[2.0, -2.0]);
        assert_eq!(p, vec![0.0, 0.0]);
        let mut adam = Optimizer::new(OptimizerKind::Adam, 0.0, 2);
        adam.step(&mut p, &[3.0, 4.0]);
        assert_eq!(p, vec![0.0, 0.0]);
    }

    #[test]
    fn gradient_matches_finite_differences_with_merge() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut net = Network::with_merge(&[4, 3, 2, 3], Some((1, 2))).unwrap();
        net.init_he_uniform(&mut rng);
        for p in net.params_mut() {
            *p += rng.random_range(-0.1..0.1);
        }
        let x = [0.3, 0.9, 0.1, 0.5];
        let e = [0.7, 0.2];
        let batch = [(&x[..], &e[..], 1usize), (&x[..], &e[..], 2usize)];
        let mut ws = Workspace::default();
        let mut grad = vec![0.0; net.param_count()];
        net.loss_and_grad(&batch, &mut grad, &mut ws).unwrap();
        let mut scratch = vec![0.0; net.param_count()];
        for (i, &g) in grad.iter().enumerate() {
            let h = 1e-5;
            let orig = net.params()[i];
            net.params_mut()[i] = orig + h;
            let up = net.loss_and_grad(&batch, &mut scratch, &mut ws).unwrap();
            net.params_mut()[i] = orig - h;
            let down = net.loss_and_grad(&batch, &mut scratch, &mut ws).unwrap();
            net.params_mut()[i] = orig;
            let fd = (up - down) / (2.0 * h);
            let rel = (fd - g).abs() / fd.abs().max(g.abs()).max(1e-6);
            assert!(rel < 1e-4, "param {i}: fd {fd} vs {g}");
        }
    }
}

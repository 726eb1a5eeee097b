//! Small feedforward classifier with manual forward/backward passes.
//!
//! The network is a stack of dense layers (ReLU hidden activations, identity
//! logits) over `f64`. It exposes the three quantities the rest of the crate
//! needs: the cross-entropy loss value, its gradient with respect to the
//! *input* (for attacks), and its gradient with respect to the *parameters*
//! (for training).
//!
//! Checkpoint format (version 1), all integers little-endian:
//!
//! ```text
//! magic   8 bytes  b"SOADVCK1"
//! layers  u32      number of layers
//! per layer:
//!   in_dim  u32
//!   out_dim u32
//!   act     u8     0 = relu, 1 = identity
//!   weight  out_dim * in_dim f64 (row-major, row = output unit)
//!   bias    out_dim f64
//! ```
//!
//! Weights round-trip bit-exactly.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tensor::{Shape, Tensor};

const CHECKPOINT_MAGIC: &[u8; 8] = b"SOADVCK1";

/// Layer activation. The final layer is always `Identity` (raw logits).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Identity => z,
        }
    }

    /// Derivative as a function of the pre-activation; relu'(0) := 0.
    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

/// One dense layer: `out = act(W x + b)` with `W` stored row-major
/// (`out_dim` rows of `in_dim` entries).
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn new(
        in_dim: usize,
        out_dim: usize,
        weight: Vec<f64>,
        bias: Vec<f64>,
        activation: Activation,
    ) -> Result<Self> {
        if in_dim == 0 || out_dim == 0 {
            return Err(Error::InvalidShape("layer dimensions must be >= 1".into()));
        }
        if weight.len() != in_dim * out_dim || bias.len() != out_dim {
            return Err(Error::InvalidShape(format!(
                "layer {out_dim}x{in_dim}: weight has {} entries, bias {}",
                weight.len(),
                bias.len()
            )));
        }
        Ok(Layer {
            in_dim,
            out_dim,
            weight,
            bias,
            activation,
        })
    }

    /// z = W x + b (pre-activation).
    fn affine(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for row in 0..self.out_dim {
            let w = &self.weight[row * self.in_dim..(row + 1) * self.in_dim];
            let mut acc = self.bias[row];
            for (wi, xi) in w.iter().zip(x) {
                acc += wi * xi;
            }
            out.push(acc);
        }
    }
}

/// A labeled classification example with pixels in `[0, 1]`.
#[derive(Debug, Clone)]
pub struct LabeledExample {
    pub x: Tensor,
    pub y: usize,
}

impl LabeledExample {
    pub fn new(x: Tensor, y: usize, num_classes: usize) -> Result<Self> {
        if y >= num_classes {
            return Err(Error::LabelOutOfRange {
                label: y,
                num_classes,
            });
        }
        Ok(LabeledExample { x, y })
    }
}

/// Per-layer velocity buffers for SGD with momentum.
#[derive(Debug, Clone)]
pub struct Velocity {
    weight: Vec<Vec<f64>>,
    bias: Vec<Vec<f64>>,
}

impl Velocity {
    pub fn zeros_for(model: &FeedForwardModel) -> Self {
        Velocity {
            weight: model
                .layers
                .iter()
                .map(|l| vec![0.0; l.weight.len()])
                .collect(),
            bias: model.layers.iter().map(|l| vec![0.0; l.bias.len()]).collect(),
        }
    }
}

/// Parameter gradients mirroring the layer buffers.
#[derive(Debug, Clone)]
pub struct ParamGradients {
    pub weight: Vec<Vec<f64>>,
    pub bias: Vec<Vec<f64>>,
}

impl ParamGradients {
    fn zeros_for(model: &FeedForwardModel) -> Self {
        ParamGradients {
            weight: model
                .layers
                .iter()
                .map(|l| vec![0.0; l.weight.len()])
                .collect(),
            bias: model.layers.iter().map(|l| vec![0.0; l.bias.len()]).collect(),
        }
    }

    fn scale(&mut self, s: f64) {
        for g in self.weight.iter_mut().chain(self.bias.iter_mut()) {
            for v in g.iter_mut() {
                *v *= s;
            }
        }
    }
}

/// Dense feedforward classifier. Immutable during inference; training
/// steps mutate it and must be serialized by the caller.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedForwardModel {
    layers: Vec<Layer>,
    input_dim: usize,
    num_classes: usize,
}

impl FeedForwardModel {
    /// Build a ReLU MLP with the given layer widths, e.g. `[784, 256, 10]`.
    /// Weights are drawn uniformly from ±sqrt(6 / (fan_in + fan_out)) with a
    /// seeded generator; biases start at zero.
    pub fn new_mlp(sizes: &[usize], seed: u64) -> Result<Self> {
        if sizes.len() < 2 {
            return Err(Error::InvalidShape(
                "an MLP needs at least input and output widths".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers = Vec::with_capacity(sizes.len() - 1);
        for k in 0..sizes.len() - 1 {
            let (fan_in, fan_out) = (sizes[k], sizes[k + 1]);
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let dist = Uniform::new_inclusive(-bound, bound);
            let weight: Vec<f64> = (0..fan_in * fan_out).map(|_| dist.sample(&mut rng)).collect();
            let activation = if k + 1 == sizes.len() - 1 {
                Activation::Identity
            } else {
                Activation::Relu
            };
            layers.push(Layer::new(fan_in, fan_out, weight, vec![0.0; fan_out], activation)?);
        }
        Self::from_layers(layers)
    }

    /// Build from explicit layers, validating the dimension chain and the
    /// identity-logits invariant.
    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidShape("model needs at least one layer".into()));
        }
        for pair in layers.windows(2) {
            if pair[0].out_dim != pair[1].in_dim {
                return Err(Error::InvalidShape(format!(
                    "layer widths do not chain: {} -> {}",
                    pair[0].out_dim, pair[1].in_dim
                )));
            }
        }
        let last = layers.last().unwrap();
        if last.activation != Activation::Identity {
            return Err(Error::InvalidShape(
                "final layer must produce raw logits (identity activation)".into(),
            ));
        }
        Ok(FeedForwardModel {
            input_dim: layers[0].in_dim,
            num_classes: last.out_dim,
            layers,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    fn check_input(&self, x: &Tensor) -> Result<()> {
        if x.len() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                got: x.len(),
            });
        }
        Ok(())
    }

    fn check_label(&self, y: usize) -> Result<()> {
        if y >= self.num_classes {
            return Err(Error::LabelOutOfRange {
                label: y,
                num_classes: self.num_classes,
            });
        }
        Ok(())
    }

    /// Logits for one input.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        self.check_input(x)?;
        let mut act = x.as_slice().to_vec();
        let mut z = Vec::new();
        for layer in &self.layers {
            layer.affine(&act, &mut z);
            act.clear();
            act.extend(z.iter().map(|&v| layer.activation.apply(v)));
        }
        Ok(Tensor::from_computed(Shape::from(self.num_classes), act))
    }

    /// Forward pass keeping pre-activations and activations for backprop.
    /// Returns (pre-activations per layer, activations per layer incl. input).
    fn forward_trace(&self, x: &Tensor) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.as_slice().to_vec());
        for layer in &self.layers {
            let mut z = Vec::new();
            layer.affine(acts.last().unwrap(), &mut z);
            let a = z.iter().map(|&v| layer.activation.apply(v)).collect();
            pre.push(z);
            acts.push(a);
        }
        (pre, acts)
    }

    /// Softmax probabilities implied by logits (numerically stable).
    pub fn softmax(logits: &[f64]) -> Vec<f64> {
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
        let sum: f64 = exps.iter().sum();
        exps.into_iter().map(|e| e / sum).collect()
    }

    /// Cross-entropy loss −log p_y(x) via a stable log-sum-exp.
    pub fn loss(&self, x: &Tensor, y: usize) -> Result<f64> {
        self.check_label(y)?;
        let logits = self.forward(x)?;
        Ok(Self::loss_from_logits(logits.as_slice(), y))
    }

    /// −log softmax(logits)[y] = logsumexp(logits) − logits[y].
    pub fn loss_from_logits(logits: &[f64], y: usize) -> f64 {
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = logits.iter().map(|&l| (l - max).exp()).sum();
        (max + sum.ln() - logits[y]).max(0.0)
    }

    /// Gradient of the loss with respect to the input, same shape as `x`.
    pub fn input_gradient(&self, x: &Tensor, y: usize) -> Result<Tensor> {
        self.check_input(x)?;
        self.check_label(y)?;
        let (pre, _) = self.forward_trace(x);

        // dL/dlogits = softmax(logits) - one_hot(y)
        let mut delta = Self::softmax(pre.last().unwrap());
        delta[y] -= 1.0;

        // Walk back through the layers; after the loop delta is dL/dx.
        for (k, layer) in self.layers.iter().enumerate().rev() {
            let mut upstream = vec![0.0; layer.in_dim];
            for row in 0..layer.out_dim {
                let d = delta[row];
                if d == 0.0 {
                    continue;
                }
                let w = &layer.weight[row * layer.in_dim..(row + 1) * layer.in_dim];
                for (u, wi) in upstream.iter_mut().zip(w) {
                    *u += wi * d;
                }
            }
            if k > 0 {
                let act = self.layers[k - 1].activation;
                for (u, &z) in upstream.iter_mut().zip(&pre[k - 1]) {
                    *u *= act.derivative(z);
                }
            }
            delta = upstream;
        }
        Tensor::from_shape_vec(x.shape().clone(), delta)
    }

    /// Accumulate parameter gradients of the loss at one example.
    fn accumulate_param_gradients(&self, x: &Tensor, y: usize, grads: &mut ParamGradients) {
        let (pre, acts) = self.forward_trace(x);
        let mut delta = Self::softmax(pre.last().unwrap());
        delta[y] -= 1.0;

        for (k, layer) in self.layers.iter().enumerate().rev() {
            let input = &acts[k];
            for row in 0..layer.out_dim {
                let d = delta[row];
                grads.bias[k][row] += d;
                if d == 0.0 {
                    continue;
                }
                let g = &mut grads.weight[k][row * layer.in_dim..(row + 1) * layer.in_dim];
                for (gi, xi) in g.iter_mut().zip(input) {
                    *gi += d * xi;
                }
            }
            if k > 0 {
                let mut upstream = vec![0.0; layer.in_dim];
                for row in 0..layer.out_dim {
                    let d = delta[row];
                    if d == 0.0 {
                        continue;
                    }
                    let w = &layer.weight[row * layer.in_dim..(row + 1) * layer.in_dim];
                    for (u, wi) in upstream.iter_mut().zip(w) {
                        *u += wi * d;
                    }
                }
                let act = self.layers[k - 1].activation;
                for (u, &z) in upstream.iter_mut().zip(&pre[k - 1]) {
                    *u *= act.derivative(z);
                }
                delta = upstream;
            }
        }
    }

    /// Mean parameter gradient over a batch.
    pub fn batch_param_gradients(&self, batch: &[LabeledExample]) -> Result<ParamGradients> {
        if batch.is_empty() {
            return Err(Error::Empty("batch"));
        }
        let mut grads = ParamGradients::zeros_for(self);
        for ex in batch {
            self.check_input(&ex.x)?;
            self.check_label(ex.y)?;
            self.accumulate_param_gradients(&ex.x, ex.y, &mut grads);
        }
        grads.scale(1.0 / batch.len() as f64);
        Ok(grads)
    }

    /// One SGD-with-momentum step on the mean batch loss:
    /// `v ← momentum·v + (∇ + weight_decay·θ)`, `θ ← θ − lr·v`.
    pub fn sgd_step(
        &mut self,
        batch: &[LabeledExample],
        lr: f64,
        momentum: f64,
        weight_decay: f64,
        velocity: &mut Velocity,
    ) -> Result<()> {
        let grads = self.batch_param_gradients(batch)?;
        for (k, layer) in self.layers.iter_mut().enumerate() {
            for (i, w) in layer.weight.iter_mut().enumerate() {
                let g = grads.weight[k][i] + weight_decay * *w;
                velocity.weight[k][i] = momentum * velocity.weight[k][i] + g;
                *w -= lr * velocity.weight[k][i];
            }
            for (i, b) in layer.bias.iter_mut().enumerate() {
                let g = grads.bias[k][i] + weight_decay * *b;
                velocity.bias[k][i] = momentum * velocity.bias[k][i] + g;
                *b -= lr * velocity.bias[k][i];
            }
        }
        Ok(())
    }

    /// Predicted class: argmax over logits, ties broken at the lowest index.
    pub fn predict(&self, x: &Tensor) -> Result<usize> {
        let logits = self.forward(x)?;
        Ok(argmax(logits.as_slice()))
    }

    /// Serialize to the versioned binary checkpoint format.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        buf.extend_from_slice(CHECKPOINT_MAGIC);
        buf.extend_from_slice(&(self.layers.len() as u32).to_le_bytes());
        for layer in &self.layers {
            buf.extend_from_slice(&(layer.in_dim as u32).to_le_bytes());
            buf.extend_from_slice(&(layer.out_dim as u32).to_le_bytes());
            buf.push(match layer.activation {
                Activation::Relu => 0,
                Activation::Identity => 1,
            });
            for w in &layer.weight {
                buf.extend_from_slice(&w.to_le_bytes());
            }
            for b in &layer.bias {
                buf.extend_from_slice(&b.to_le_bytes());
            }
        }
        let mut file = fs::File::create(path)?;
        file.write_all(&buf)?;
        Ok(())
    }

    /// Load a checkpoint written by [`FeedForwardModel::save`].
    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path)?;
        let mut cur = Cursor { bytes: &bytes, pos: 0 };
        let magic = cur.take(8)?;
        if magic != CHECKPOINT_MAGIC {
            return Err(Error::CheckpointFormat(format!(
                "magic {:02x?} is not {:02x?}",
                magic, CHECKPOINT_MAGIC
            )));
        }
        let n_layers = cur.read_u32()? as usize;
        let mut layers = Vec::with_capacity(n_layers);
        for _ in 0..n_layers {
            let in_dim = cur.read_u32()? as usize;
            let out_dim = cur.read_u32()? as usize;
            let activation = match cur.take(1)?[0] {
                0 => Activation::Relu,
                1 => Activation::Identity,
                tag => {
                    return Err(Error::CheckpointFormat(format!(
                        "unknown activation tag {tag}"
                    )))
                }
            };
            let weight = cur.read_f64s(in_dim * out_dim)?;
            let bias = cur.read_f64s(out_dim)?;
            layers.push(Layer::new(in_dim, out_dim, weight, bias, activation)?);
        }
        Self::from_layers(layers)
    }
}

/// Index of the largest element; lowest index wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::CheckpointFormat(format!(
                "truncated: needed {} bytes at offset {}, file has {}",
                n,
                self.pos,
                self.bytes.len()
            )));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn read_u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn read_f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let b = self.take(8 * n)?;
        Ok(b.chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

//! Fully-connected classifier with hand-written backprop and SGD momentum.

use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::labelbank::{read_f64, read_u32, read_u64};
use crate::numerics::{argmax, softmax_into};
use crate::rng::{self, Stream};
use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"PMLP";
const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Tanh,
}

impl Activation {
    fn id(self) -> u32 {
        match self {
            Activation::Relu => 0,
            Activation::Tanh => 1,
        }
    }

    fn from_id(id: u32) -> Option<Self> {
        match id {
            0 => Some(Activation::Relu),
            1 => Some(Activation::Tanh),
            _ => None,
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "relu" => Some(Activation::Relu),
            "tanh" => Some(Activation::Tanh),
            _ => None,
        }
    }

    #[inline]
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative expressed through the pre-activation and the activation value.
    #[inline]
    fn derivative(self, pre: f64, post: f64) -> f64 {
        match self {
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - post * post,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    /// Input dimension, hidden widths, number of classes.
    pub layer_sizes: Vec<usize>,
    pub activation: Activation,
    pub seed: u64,
}

impl MlpConfig {
    pub fn validate(&self) -> Result<()> {
        if self.layer_sizes.len() < 2 {
            return Err(Error::invalid("an MLP needs at least an input and an output layer"));
        }
        if self.layer_sizes.contains(&0) {
            return Err(Error::invalid("layer sizes must be positive"));
        }
        if *self.layer_sizes.last().unwrap() < 2 {
            return Err(Error::invalid("the output layer needs at least two classes"));
        }
        Ok(())
    }

    pub fn num_classes(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }
}

/// SGD with momentum and L2 weight decay:
/// `buf <- momentum * buf + (grad + decay * param)`, `param <- param - lr * buf`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sgd {
    pub learning_rate: f64,
    pub momentum: f64,
    pub weight_decay: f64,
}

impl Default for Sgd {
    fn default() -> Self {
        Sgd {
            learning_rate: 0.05,
            momentum: 0.9,
            weight_decay: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Layer {
    inputs: usize,
    outputs: usize,
    /// outputs x inputs, row-major
    weights: Vec<f64>,
    bias: Vec<f64>,
    weight_buf: Vec<f64>,
    bias_buf: Vec<f64>,
}

impl Layer {
    fn params(&self) -> impl Iterator<Item = &f64> {
        self.weights.iter().chain(&self.bias)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Backbone {
    config: MlpConfig,
    pub sgd: Sgd,
    layers: Vec<Layer>,
}

/// Per-layer activations retained for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    batch: usize,
    /// `inputs[l]` is the batch-major input to layer `l`; `inputs[0]` is the data.
    inputs: Vec<Vec<f64>>,
    /// Pre-activations of the hidden layers.
    pre: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct ForwardOutput {
    pub logits: Vec<Vec<f64>>,
    pub probs: Vec<Vec<f64>>,
    pub cache: ForwardCache,
}

/// Parameter gradients, same layout as the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl Backbone {
    /// Glorot-uniform weights, zero biases, zero momentum.
    pub fn new(config: MlpConfig, sgd: Sgd) -> Result<Self> {
        config.validate()?;
        let mut rng = rng::stream(config.seed, Stream::Init);
        let layers = config
            .layer_sizes
            .windows(2)
            .map(|w| {
                let (inputs, outputs) = (w[0], w[1]);
                let bound = (6.0 / (inputs + outputs) as f64).sqrt();
                let weights = (0..inputs * outputs)
                    .map(|_| rng.random_range(-bound..bound))
                    .collect();
                Layer {
                    inputs,
                    outputs,
                    weights,
                    bias: vec![0.0; outputs],
                    weight_buf: vec![0.0; inputs * outputs],
                    bias_buf: vec![0.0; outputs],
                }
            })
            .collect();
        Ok(Backbone { config, sgd, layers })
    }

    pub fn config(&self) -> &MlpConfig {
        &self.config
    }

    pub fn num_classes(&self) -> usize {
        self.config.num_classes()
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    /// Weights of layer `l` (outputs x inputs, row-major) and its bias.
    pub fn layer_params(&self, l: usize) -> (&[f64], &[f64]) {
        (&self.layers[l].weights, &self.layers[l].bias)
    }

    pub fn layer_params_mut(&mut self, l: usize) -> (&mut [f64], &mut [f64]) {
        let layer = &mut self.layers[l];
        (&mut layer.weights, &mut layer.bias)
    }

    pub fn momentum_buffers(&self, l: usize) -> (&[f64], &[f64]) {
        (&self.layers[l].weight_buf, &self.layers[l].bias_buf)
    }

    pub fn reset_momentum(&mut self) {
        for layer in &mut self.layers {
            layer.weight_buf.iter_mut().for_each(|v| *v = 0.0);
            layer.bias_buf.iter_mut().for_each(|v| *v = 0.0);
        }
    }

    pub fn forward<T: AsRef<[f64]>>(&self, x_batch: &[T]) -> Result<ForwardOutput> {
        let dim = self.config.input_dim();
        let batch = x_batch.len();
        let mut input = Vec::with_capacity(batch * dim);
        for (i, row) in x_batch.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != dim {
                return Err(Error::invalid(format!(
                    "row {i} has {} features, network expects {dim}",
                    row.len()
                )));
            }
            input.extend_from_slice(row);
        }

        let act = self.config.activation;
        let last = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(last);
        let mut current = input;
        for (l, layer) in self.layers.iter().enumerate() {
            let mut out = vec![0.0; batch * layer.outputs];
            for b in 0..batch {
                let x = &current[b * layer.inputs..(b + 1) * layer.inputs];
                let o = &mut out[b * layer.outputs..(b + 1) * layer.outputs];
                for (k, ok) in o.iter_mut().enumerate() {
                    let w = &layer.weights[k * layer.inputs..(k + 1) * layer.inputs];
                    *ok = layer.bias[k] + w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
                }
            }
            inputs.push(current);
            if l < last {
                let post = out.iter().map(|&v| act.apply(v)).collect();
                pre.push(out);
                current = post;
            } else {
                current = out;
            }
        }

        let c = self.num_classes();
        let logits: Vec<Vec<f64>> = current.chunks(c).map(<[f64]>::to_vec).collect();
        let mut probs = Vec::with_capacity(batch);
        for (i, z) in logits.iter().enumerate() {
            if z.iter().any(|v| !v.is_finite()) {
                return Err(Error::Divergence(format!("non-finite logits for row {i}")));
            }
            let mut p = vec![0.0; c];
            softmax_into(z, &mut p);
            probs.push(p);
        }
        Ok(ForwardOutput {
            logits,
            probs,
            cache: ForwardCache { batch, inputs, pre },
        })
    }

    /// Chain rule from logit gradients to parameter gradients.
    pub fn backward(&self, cache: &ForwardCache, grad_logits: &[Vec<f64>]) -> Result<Gradients> {
        let c = self.num_classes();
        if grad_logits.len() != cache.batch || cache.inputs.len() != self.layers.len() {
            return Err(Error::invalid("gradient batch does not match the forward cache"));
        }
        let mut delta = Vec::with_capacity(cache.batch * c);
        for (i, g) in grad_logits.iter().enumerate() {
            if g.len() != c {
                return Err(Error::invalid(format!("logit gradient {i} has wrong length")));
            }
            if g.iter().any(|v| !v.is_finite()) {
                return Err(Error::Divergence(format!("non-finite logit gradient for row {i}")));
            }
            delta.extend_from_slice(g);
        }

        let act = self.config.activation;
        let mut gw = vec![Vec::new(); self.layers.len()];
        let mut gb = vec![Vec::new(); self.layers.len()];
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let x = &cache.inputs[l];
            let mut dw = vec![0.0; layer.weights.len()];
            let mut db = vec![0.0; layer.outputs];
            for b in 0..cache.batch {
                let d = &delta[b * layer.outputs..(b + 1) * layer.outputs];
                let xb = &x[b * layer.inputs..(b + 1) * layer.inputs];
                for (k, &dk) in d.iter().enumerate() {
                    db[k] += dk;
                    let row = &mut dw[k * layer.inputs..(k + 1) * layer.inputs];
                    for (r, &xv) in row.iter_mut().zip(xb) {
                        *r += dk * xv;
                    }
                }
            }
            if l > 0 {
                let pre = &cache.pre[l - 1];
                let mut prev = vec![0.0; cache.batch * layer.inputs];
                for b in 0..cache.batch {
                    let d = &delta[b * layer.outputs..(b + 1) * layer.outputs];
                    let p = &mut prev[b * layer.inputs..(b + 1) * layer.inputs];
                    for (k, &dk) in d.iter().enumerate() {
                        let w = &layer.weights[k * layer.inputs..(k + 1) * layer.inputs];
                        for (pj, &wj) in p.iter_mut().zip(w) {
                            *pj += wj * dk;
                        }
                    }
                    for (j, pj) in p.iter_mut().enumerate() {
                        let idx = b * layer.inputs + j;
                        *pj *= act.derivative(pre[idx], x[idx]);
                    }
                }
                delta = prev;
            }
            gw[l] = dw;
            gb[l] = db;
        }
        Ok(Gradients {
            weights: gw,
            biases: gb,
        })
    }

    /// One SGD-momentum update.
    pub fn step(&mut self, grads: &Gradients) -> Result<()> {
        let Sgd {
            learning_rate: lr,
            momentum,
            weight_decay: decay,
        } = self.sgd;
        for (l, layer) in self.layers.iter_mut().enumerate() {
            update(&mut layer.weights, &mut layer.weight_buf, &grads.weights[l], lr, momentum, decay);
            update(&mut layer.bias, &mut layer.bias_buf, &grads.biases[l], lr, momentum, decay);
        }
        if self.layers.iter().any(|l| l.params().any(|v| !v.is_finite())) {
            return Err(Error::Divergence("non-finite parameters after update".into()));
        }
        Ok(())
    }

    pub fn backward_and_step(&mut self, cache: &ForwardCache, grad_logits: &[Vec<f64>]) -> Result<()> {
        let grads = self.backward(cache, grad_logits)?;
        self.step(&grads)
    }

    /// Fraction of rows whose predicted class equals the label.
    pub fn evaluate_accuracy<T: AsRef<[f64]>>(&self, x_batch: &[T], labels: &[usize]) -> Result<f64> {
        if x_batch.is_empty() {
            return Err(Error::invalid("accuracy of an empty batch"));
        }
        if x_batch.len() != labels.len() {
            return Err(Error::invalid("feature and label counts differ"));
        }
        let out = self.forward(x_batch)?;
        let hits = out
            .probs
            .iter()
            .zip(labels)
            .filter(|(p, &l)| argmax(p) == l)
            .count();
        Ok(hits as f64 / labels.len() as f64)
    }

    /// Writes the `PMLP` checkpoint.
    ///
    /// Layout (little-endian): magic `PMLP`, `u32` version, `u32` layer count
    /// followed by that many `u32` sizes, `u32` activation id (0 relu, 1 tanh),
    /// `u64` seed, `f64` learning rate, momentum and weight decay; then per layer
    /// the weights, bias, weight momentum and bias momentum as `f64`.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(self.config.layer_sizes.len() as u32).to_le_bytes())?;
        for &s in &self.config.layer_sizes {
            w.write_all(&(s as u32).to_le_bytes())?;
        }
        w.write_all(&self.config.activation.id().to_le_bytes())?;
        w.write_all(&self.config.seed.to_le_bytes())?;
        for v in [self.sgd.learning_rate, self.sgd.momentum, self.sgd.weight_decay] {
            w.write_all(&v.to_le_bytes())?;
        }
        for layer in &self.layers {
            for v in layer
                .weights
                .iter()
                .chain(&layer.bias)
                .chain(&layer.weight_buf)
                .chain(&layer.bias_buf)
            {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::format("model checkpoint", "bad magic bytes"));
        }
        let version = read_u32(&mut r)?;
        if version != VERSION {
            return Err(Error::format("model checkpoint", format!("unsupported version {version}")));
        }
        let count = read_u32(&mut r)? as usize;
        if count > 1024 {
            return Err(Error::format("model checkpoint", "implausible layer count"));
        }
        let layer_sizes = (0..count)
            .map(|_| read_u32(&mut r).map(|v| v as usize))
            .collect::<Result<Vec<_>>>()?;
        let activation = Activation::from_id(read_u32(&mut r)?)
            .ok_or_else(|| Error::format("model checkpoint", "unknown activation id"))?;
        let seed = read_u64(&mut r)?;
        let sgd = Sgd {
            learning_rate: read_f64(&mut r)?,
            momentum: read_f64(&mut r)?,
            weight_decay: read_f64(&mut r)?,
        };
        let config = MlpConfig {
            layer_sizes,
            activation,
            seed,
        };
        config
            .validate()
            .map_err(|e| Error::format("model checkpoint", e.to_string()))?;
        let mut read_vec = |len: usize| (0..len).map(|_| read_f64(&mut r)).collect::<Result<Vec<_>>>();
        let mut layers = Vec::new();
        for w in config.layer_sizes.windows(2) {
            let (inputs, outputs) = (w[0], w[1]);
            layers.push(Layer {
                inputs,
                outputs,
                weights: read_vec(inputs * outputs)?,
                bias: read_vec(outputs)?,
                weight_buf: read_vec(inputs * outputs)?,
                bias_buf: read_vec(outputs)?,
            });
        }
        Ok(Backbone { config, sgd, layers })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_from(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

fn update(params: &mut [f64], buf: &mut [f64], grad: &[f64], lr: f64, momentum: f64, decay: f64) {
    for ((p, b), &g) in params.iter_mut().zip(buf.iter_mut()).zip(grad) {
        let g = g + decay * *p;
        *b = momentum * *b + g;
        *p -= lr * *b;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{finite_diff_grad, FD_STEP};

    fn net(sizes: &[usize], act: Activation, seed: u64) -> Backbone {
        let cfg = MlpConfig {
            layer_sizes: sizes.to_vec(),
            activation: act,
            seed,
        };
        Backbone::new(cfg, Sgd::default()).unwrap()
    }

    #[test]
    fn zero_parameters_give_uniform_predictions() {
        let mut n = net(&[3, 5, 4], Activation::Tanh, 1);
        for l in 0..n.num_layers() {
            let (w, b) = n.layer_params_mut(l);
            w.iter_mut().for_each(|v| *v = 0.0);
            b.iter_mut().for_each(|v| *v = 0.0);
        }
        let out = n.forward(&[vec![1.0, -2.0, 3.0], vec![100.0, 0.0, -7.0]]).unwrap();
        for p in &out.probs {
            assert!(p.iter().all(|v| (v - 0.25).abs() < 1e-15));
        }
    }

    #[test]
    fn forward_is_deterministic() {
        let a = net(&[2, 8, 3], Activation::Relu, 42);
        let b = net(&[2, 8, 3], Activation::Relu, 42);
        let x = [vec![0.3, -1.2], vec![2.0, 0.5]];
        let pa = a.forward(&x).unwrap().probs;
        let pb = b.forward(&x).unwrap().probs;
        assert_eq!(pa, pb);
        assert_ne!(net(&[2, 8, 3], Activation::Relu, 43).forward(&x).unwrap().probs, pa);
    }

    #[test]
    fn single_linear_layer_by_hand() {
        let mut n = net(&[2, 2], Activation::Relu, 0);
        {
            let (w, b) = n.layer_params_mut(0);
            w.copy_from_slice(&[1.0, 0.0, 0.0, 1.0]);
            b.copy_from_slice(&[0.5, -0.5]);
        }
        let out = n.forward(&[vec![2.0, 1.0]]).unwrap();
        // z = (2.5, 0.5); softmax = (1, e^-2) / (1 + e^-2)
        assert_eq!(out.logits[0], vec![2.5, 0.5]);
        let p0 = 1.0 / (1.0 + (-2.0f64).exp());
        assert!((out.probs[0][0] - p0).abs() < 1e-15);
        assert!((out.probs[0][1] - (1.0 - p0)).abs() < 1e-15);
    }

    #[test]
    fn forward_rejects_wrong_dimension() {
        let n = net(&[3, 2], Activation::Relu, 0);
        assert!(n.forward(&[vec![1.0, 2.0]]).is_err());
        assert!(MlpConfig { layer_sizes: vec![3], activation: Activation::Relu, seed: 0 }
            .validate()
            .is_err());
    }

    #[test]
    fn zero_gradient_step_is_pure_weight_decay() {
        let mut n = net(&[2, 4, 3], Activation::Tanh, 9);
        n.sgd = Sgd {
            learning_rate: 0.1,
            momentum: 0.9,
            weight_decay: 1e-2,
        };
        let before = n.clone();
        let out = n.forward(&[vec![1.0, 1.0]]).unwrap();
        n.backward_and_step(&out.cache, &[vec![0.0; 3]]).unwrap();
        let factor = 1.0 - 0.1 * 1e-2;
        for l in 0..n.num_layers() {
            for (a, b) in n.layer_params(l).0.iter().zip(before.layer_params(l).0) {
                assert!((a - b * factor).abs() <= 1e-15 * b.abs().max(1e-300));
            }
        }
    }

    #[test]
    fn zero_learning_rate_only_moves_momentum() {
        let mut n = net(&[2, 4, 3], Activation::Relu, 9);
        n.sgd.learning_rate = 0.0;
        let before = n.clone();
        let out = n.forward(&[vec![0.5, -0.2]]).unwrap();
        n.backward_and_step(&out.cache, &[vec![0.3, -0.1, -0.2]]).unwrap();
        for l in 0..n.num_layers() {
            assert_eq!(n.layer_params(l), before.layer_params(l));
        }
        assert!(n.momentum_buffers(1).0.iter().any(|v| *v != 0.0));
    }

    #[test]
    fn non_finite_gradient_is_divergence() {
        let mut n = net(&[2, 3], Activation::Relu, 0);
        let out = n.forward(&[vec![0.5, -0.2]]).unwrap();
        let err = n.backward_and_step(&out.cache, &[vec![f64::NAN, 0.0, 0.0]]).unwrap_err();
        assert!(matches!(err, Error::Divergence(_)));
    }

    /// Scalar loss `Σ_i w_i · z_i` through the forward pass, so `∂/∂z = w`.
    fn probe_loss(n: &Backbone, x: &[Vec<f64>], upstream: &[Vec<f64>]) -> f64 {
        let out = n.forward(x).unwrap();
        out.logits
            .iter()
            .zip(upstream)
            .map(|(z, w)| z.iter().zip(w).map(|(a, b)| a * b).sum::<f64>())
            .sum()
    }

    #[test]
    fn parameter_gradients_match_finite_differences() {
        for act in [Activation::Tanh, Activation::Relu] {
            let n = net(&[2, 8, 3], act, 17);
            let x = vec![vec![0.4, -1.3], vec![1.7, 0.2], vec![-0.6, 0.9]];
            let upstream = vec![vec![0.2, -0.5, 0.3], vec![-0.1, 0.4, -0.3], vec![0.05, 0.05, -0.1]];
            let out = n.forward(&x).unwrap();
            let grads = n.backward(&out.cache, &upstream).unwrap();
            for l in 0..n.num_layers() {
                let (w, b) = n.layer_params(l);
                let flat: Vec<f64> = w.iter().chain(b).copied().collect();
                let fd = finite_diff_grad(
                    |theta| {
                        let mut m = n.clone();
                        let (mw, mb) = m.layer_params_mut(l);
                        let split = mw.len();
                        mw.copy_from_slice(&theta[..split]);
                        mb.copy_from_slice(&theta[split..]);
                        probe_loss(&m, &x, &upstream)
                    },
                    &flat,
                    FD_STEP,
                )
                .unwrap();
                let analytic: Vec<f64> = grads.weights[l].iter().chain(&grads.biases[l]).copied().collect();
                for (a, f) in analytic.iter().zip(&fd) {
                    assert!((a - f).abs() <= 1e-6 || (a - f).abs() <= 1e-4 * a.abs(), "{act:?} layer {l}: {a} vs {f}");
                }
            }
        }
    }

    #[test]
    fn accuracy_edges() {
        let n = net(&[2, 3], Activation::Relu, 0);
        assert!(n.evaluate_accuracy::<Vec<f64>>(&[], &[]).is_err());
        let acc = n.evaluate_accuracy(&[vec![0.0, 0.0]], &[0]).unwrap();
        // zero input -> zero logits -> tie -> class 0
        assert_eq!(acc, 1.0);
    }

    #[test]
    fn checkpoint_roundtrip() {
        let mut n = net(&[3, 6, 4], Activation::Tanh, 5);
        let out = n.forward(&[vec![0.1, 0.2, 0.3]]).unwrap();
        n.backward_and_step(&out.cache, &[vec![0.1, -0.1, 0.05, -0.05]]).unwrap();
        let mut buf = Vec::new();
        n.write_to(&mut buf).unwrap();
        let back = Backbone::read_from(&buf[..]).unwrap();
        assert_eq!(back, n);
        assert!(Backbone::read_from(&buf[..buf.len() - 1]).is_err());
    }
}

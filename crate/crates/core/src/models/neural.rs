//! Feed-forward networks: dense ReLU hidden layers, inverted dropout, a single
//! sigmoid output unit, binary cross-entropy and the Adam optimizer.
//!
//! Layer `l` computes `z = a W + b` with `W` stored fan_in x fan_out. All
//! arithmetic is sequential, so a given seed reproduces results bit for bit.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::logreg::sigmoid;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::seed;

pub const PROB_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HiddenActivation {
    #[default]
    Relu,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputActivation {
    #[default]
    Sigmoid,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    #[default]
    BinaryCrossEntropy,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "lowercase")]
pub enum Optimizer {
    Adam(AdamConfig),
}

impl Default for Optimizer {
    fn default() -> Self {
        Optimizer::Adam(AdamConfig::default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetConfig {
    pub hidden_layers: Vec<usize>,
    #[serde(default)]
    pub activation_hidden: HiddenActivation,
    #[serde(default)]
    pub activation_output: OutputActivation,
    pub dropout_rate: f64,
    #[serde(default)]
    pub optimizer: Optimizer,
    #[serde(default)]
    pub loss: Loss,
    pub epochs: usize,
    pub batch_size: usize,
    pub validation_split: f64,
    pub seed: u64,
}

impl NetConfig {
    /// The proposed detector: 128/64 ReLU units, dropout 0.5, Adam, 10 epochs
    /// of batch 32, with a 0.2 validation hold-out.
    pub fn dnn() -> Self {
        Self {
            hidden_layers: vec![128, 64],
            activation_hidden: HiddenActivation::Relu,
            activation_output: OutputActivation::Sigmoid,
            dropout_rate: 0.5,
            optimizer: Optimizer::default(),
            loss: Loss::BinaryCrossEntropy,
            epochs: 10,
            batch_size: 32,
            validation_split: 0.2,
            seed: 0,
        }
    }

    /// Conventional single-hidden-layer MLP baseline.
    pub fn mlp() -> Self {
        Self {
            hidden_layers: vec![100],
            dropout_rate: 0.0,
            epochs: 200,
            batch_size: 200,
            validation_split: 0.0,
            ..Self::dnn()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden_layers.contains(&0) {
            return Err(Error::InvalidConfig(
                "hidden layers need at least one unit".into(),
            ));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::InvalidConfig(
                "dropout_rate must lie in [0, 1)".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.validation_split) {
            return Err(Error::InvalidConfig(
                "validation_split must lie in [0, 1)".into(),
            ));
        }
        let Optimizer::Adam(a) = self.optimizer;
        if !(a.lr > 0.0
            && (0.0..1.0).contains(&a.beta1)
            && (0.0..1.0).contains(&a.beta2)
            && a.epsilon > 0.0)
        {
            return Err(Error::InvalidConfig("invalid Adam hyperparameters".into()));
        }
        Ok(())
    }
}

/// Dense layer weights. Serialized with `W` as nested rows (fan_in rows of fan_out values).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "LayerRepr", try_from = "LayerRepr")]
pub struct DenseLayer {
    pub w: Matrix,
    pub b: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct LayerRepr {
    #[serde(rename = "W")]
    w: Vec<Vec<f64>>,
    b: Vec<f64>,
}

impl From<DenseLayer> for LayerRepr {
    fn from(l: DenseLayer) -> Self {
        Self {
            w: l.w.row_iter().map(|r| r.to_vec()).collect(),
            b: l.b,
        }
    }
}

impl TryFrom<LayerRepr> for DenseLayer {
    type Error = Error;

    fn try_from(r: LayerRepr) -> Result<Self> {
        let w = if r.w.is_empty() {
            Matrix::zeros(0, r.b.len())
        } else {
            Matrix::from_rows(&r.w)?
        };
        if w.cols() != r.b.len() {
            return Err(Error::ShapeMismatch {
                expected: w.cols(),
                got: r.b.len(),
            });
        }
        Ok(Self { w, b: r.b })
    }
}

impl DenseLayer {
    pub fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self {
            w: Matrix::zeros(fan_in, fan_out),
            b: vec![0.0; fan_out],
        }
    }

    pub fn fan_in(&self) -> usize {
        self.w.rows()
    }

    pub fn fan_out(&self) -> usize {
        self.w.cols()
    }

    fn params(&self) -> impl Iterator<Item = &f64> {
        self.w.as_slice().iter().chain(&self.b)
    }

    /// `a W + b` for a batch `a`.
    fn affine(&self, a: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(a.rows(), self.fan_out());
        for i in 0..a.rows() {
            let o = out.row_mut(i);
            o.copy_from_slice(&self.b);
            for (k, &ak) in a.row(i).iter().enumerate() {
                if ak == 0.0 {
                    continue;
                }
                for (oj, wkj) in o.iter_mut().zip(self.w.row(k)) {
                    *oj += ak * wkj;
                }
            }
        }
        out
    }
}

/// How a forward pass treats dropout.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mode {
    /// Masks are drawn from a generator seeded with `mask_seed`.
    Train {
        dropout_rate: f64,
        mask_seed: u64,
    },
    Infer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub layers: Vec<DenseLayer>,
}

/// Per-layer gradients, shaped like the network.
pub type Gradients = Vec<DenseLayer>;

struct Cache {
    /// Layer inputs: the batch itself, then each post-dropout hidden activation.
    inputs: Vec<Matrix>,
    /// Hidden pre-activations.
    pre: Vec<Matrix>,
    /// Per-hidden-layer dropout multipliers (0 or 1/(1-p)).
    masks: Vec<Option<Vec<f64>>>,
    probs: Vec<f64>,
}

impl Network {
    /// He-uniform weights `U(-sqrt(6/fan_in), sqrt(6/fan_in))`, zero biases.
    pub fn he_uniform<R: Rng>(input_dim: usize, hidden: &[usize], rng: &mut R) -> Self {
        let mut dims = vec![input_dim];
        dims.extend_from_slice(hidden);
        dims.push(1);
        let layers = dims
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let limit = (6.0 / fan_in.max(1) as f64).sqrt();
                let data = (0..fan_in * fan_out)
                    .map(|_| rng.random_range(-limit..limit))
                    .collect();
                DenseLayer {
                    w: Matrix::from_vec(fan_in, fan_out, data).expect("sized"),
                    b: vec![0.0; fan_out],
                }
            })
            .collect();
        Self { layers }
    }

    pub fn from_layers(layers: Vec<DenseLayer>) -> Result<Self> {
        for w in layers.windows(2) {
            if w[0].fan_out() != w[1].fan_in() {
                return Err(Error::ShapeMismatch {
                    expected: w[0].fan_out(),
                    got: w[1].fan_in(),
                });
            }
        }
        match layers.last() {
            Some(l) if l.fan_out() == 1 => Ok(Self { layers }),
            Some(l) => Err(Error::ShapeMismatch {
                expected: 1,
                got: l.fan_out(),
            }),
            None => Err(Error::InvalidConfig("network has no layers".into())),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].fan_in()
    }

    pub fn n_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.w.as_slice().len() + l.b.len())
            .sum()
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.params().all(|v| v.is_finite()))
    }

    fn forward_cache(&self, rows: &Matrix, mode: Mode) -> Result<Cache> {
        if rows.cols() != self.input_dim() {
            return Err(Error::ShapeMismatch {
                expected: self.input_dim(),
                got: rows.cols(),
            });
        }
        let (rate, mut rng) = match mode {
            Mode::Train {
                dropout_rate,
                mask_seed,
            } if dropout_rate > 0.0 => (dropout_rate, Some(seed::rng(mask_seed))),
            _ => (0.0, None),
        };
        let keep_scale = 1.0 / (1.0 - rate);
        let last = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(last);
        let mut masks = Vec::with_capacity(last);
        inputs.push(rows.clone());
        for layer in &self.layers[..last] {
            let z = layer.affine(inputs.last().expect("non-empty"));
            let mut a = z.clone();
            a.as_mut_slice().iter_mut().for_each(|v| *v = v.max(0.0));
            let mask = rng.as_mut().map(|r| {
                let m: Vec<f64> = (0..a.as_slice().len())
                    .map(|_| {
                        if r.random::<f64>() >= rate {
                            keep_scale
                        } else {
                            0.0
                        }
                    })
                    .collect();
                a.as_mut_slice()
                    .iter_mut()
                    .zip(&m)
                    .for_each(|(v, s)| *v *= s);
                m
            });
            pre.push(z);
            masks.push(mask);
            inputs.push(a);
        }
        let out = self.layers[last].affine(inputs.last().expect("non-empty"));
        let probs = out.as_slice().iter().map(|&z| sigmoid(z)).collect();
        Ok(Cache {
            inputs,
            pre,
            masks,
            probs,
        })
    }

    /// Output probabilities in (0, 1).
    pub fn forward(&self, rows: &Matrix, mode: Mode) -> Result<Vec<f64>> {
        Ok(self.forward_cache(rows, mode)?.probs)
    }

    /// Mean clamped BCE of a batch, its exact gradient, and the forward
    /// probabilities. Dropout masks are regenerated from the same seed as the
    /// matching forward pass.
    pub fn backward(
        &self,
        rows: &Matrix,
        labels: &[u8],
        mode: Mode,
    ) -> Result<(f64, Gradients, Vec<f64>)> {
        if labels.len() != rows.rows() {
            return Err(Error::LengthMismatch {
                left: rows.rows(),
                right: labels.len(),
            });
        }
        let cache = self.forward_cache(rows, mode)?;
        let n = rows.rows() as f64;
        let loss = bce(&cache.probs, labels);

        // dL/dz at the sigmoid output
        let delta_out: Vec<f64> = cache
            .probs
            .iter()
            .zip(labels)
            .map(|(p, &y)| (p - y as f64) / n)
            .collect();
        let mut delta = Matrix::from_vec(rows.rows(), 1, delta_out)?;
        let mut grads: Gradients = self
            .layers
            .iter()
            .map(|l| DenseLayer::zeros(l.fan_in(), l.fan_out()))
            .collect();

        for l in (0..self.layers.len()).rev() {
            let a = &cache.inputs[l];
            let g = &mut grads[l];
            for i in 0..a.rows() {
                let d_i = delta.row(i);
                for (gb, dv) in g.b.iter_mut().zip(d_i) {
                    *gb += dv;
                }
                for (k, &ak) in a.row(i).iter().enumerate() {
                    if ak == 0.0 {
                        continue;
                    }
                    for (gw, dv) in g.w.row_mut(k).iter_mut().zip(d_i) {
                        *gw += ak * dv;
                    }
                }
            }
            if l == 0 {
                break;
            }
            let w = &self.layers[l].w;
            let z = &cache.pre[l - 1];
            let mask = &cache.masks[l - 1];
            let mut next = Matrix::zeros(a.rows(), w.rows());
            for i in 0..a.rows() {
                let d_i = delta.row(i);
                let out = next.row_mut(i);
                for (k, o) in out.iter_mut().enumerate() {
                    if z.get(i, k) <= 0.0 {
                        continue;
                    }
                    let mut s: f64 = w.row(k).iter().zip(d_i).map(|(wv, dv)| wv * dv).sum();
                    if let Some(m) = mask {
                        s *= m[i * w.rows() + k];
                    }
                    *o = s;
                }
            }
            delta = next;
        }
        Ok((loss, grads, cache.probs))
    }

    /// Flat view of every parameter, layer by layer (`W` row-major, then `b`).
    pub fn flat_params(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.params().copied())
            .collect()
    }

    pub fn set_flat_param(&mut self, mut index: usize, value: f64) {
        for l in &mut self.layers {
            let nw = l.w.as_slice().len();
            if index < nw {
                l.w.as_mut_slice()[index] = value;
                return;
            }
            index -= nw;
            if index < l.b.len() {
                l.b[index] = value;
                return;
            }
            index -= l.b.len();
        }
        panic!("parameter index out of range");
    }
}

/// Flattens gradients in the same order as `Network::flat_params`.
pub fn flat_gradients(g: &Gradients) -> Vec<f64> {
    g.iter().flat_map(|l| l.params().copied()).collect()
}

/// Mean binary cross-entropy with probabilities clamped to `[1e-12, 1 - 1e-12]`.
pub fn bce(probs: &[f64], labels: &[u8]) -> f64 {
    let total: f64 = probs
        .iter()
        .zip(labels)
        .map(|(&p, &y)| {
            let p = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
            if y == 1 {
                -p.ln()
            } else {
                -(1.0 - p).ln()
            }
        })
        .sum();
    total / probs.len() as f64
}

/// Adam moments for every parameter plus the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub config: AdamConfig,
    pub t: u64,
    m: Gradients,
    v: Gradients,
}

impl Adam {
    pub fn new(net: &Network, config: AdamConfig) -> Self {
        let zeros: Gradients = net
            .layers
            .iter()
            .map(|l| DenseLayer::zeros(l.fan_in(), l.fan_out()))
            .collect();
        Self {
            config,
            t: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn step(&mut self, net: &mut Network, grads: &Gradients) -> Result<()> {
        if grads.len() != net.layers.len() {
            return Err(Error::ShapeMismatch {
                expected: net.layers.len(),
                got: grads.len(),
            });
        }
        self.t += 1;
        let AdamConfig {
            lr,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        let c1 = 1.0 - beta1.powi(self.t as i32);
        let c2 = 1.0 - beta2.powi(self.t as i32);
        let update = |theta: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64]| {
            for (((th, &gi), mi), vi) in theta.iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut())
            {
                *mi = beta1 * *mi + (1.0 - beta1) * gi;
                *vi = beta2 * *vi + (1.0 - beta2) * gi * gi;
                let m_hat = *mi / c1;
                let v_hat = *vi / c2;
                *th -= lr * m_hat / (v_hat.sqrt() + epsilon);
            }
        };
        for (((layer, g), m), v) in net
            .layers
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut())
            .zip(self.v.iter_mut())
        {
            if g.w.as_slice().len() != layer.w.as_slice().len() || g.b.len() != layer.b.len() {
                return Err(Error::ShapeMismatch {
                    expected: layer.w.as_slice().len() + layer.b.len(),
                    got: g.w.as_slice().len() + g.b.len(),
                });
            }
            update(
                layer.w.as_mut_slice(),
                g.w.as_slice(),
                m.w.as_mut_slice(),
                v.w.as_mut_slice(),
            );
            update(&mut layer.b, &g.b, &mut m.b, &mut v.b);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_loss: Option<f64>,
    pub val_acc: Option<f64>,
}

/// One entry per completed epoch.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    pub epochs: Vec<EpochStats>,
}

impl TrainTrace {
    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }

    pub fn write_csv_to<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(w);
        w.write_record(["epoch", "train_loss", "train_acc", "val_loss", "val_acc"])?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for e in &self.epochs {
            w.write_record([
                e.epoch.to_string(),
                e.train_loss.to_string(),
                e.train_acc.to_string(),
                opt(e.val_loss),
                opt(e.val_acc),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv_to(std::fs::File::create(path)?)
    }
}

fn accuracy(probs: &[f64], labels: &[u8]) -> f64 {
    let correct = probs
        .iter()
        .zip(labels)
        .filter(|(&p, &y)| u8::from(p >= 0.5) == y)
        .count();
    correct as f64 / labels.len() as f64
}

/// Minibatch Adam training. The validation rows are carved out once before
/// the first epoch; training rows are reshuffled every epoch. Reported
/// training loss and accuracy are running means over the epoch's batches
/// (dropout active); validation figures use inference mode.
pub fn net_fit(train: &Dataset, config: &NetConfig) -> Result<(Network, TrainTrace)> {
    config.validate()?;
    let n = train.n_rows();
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    let mut rng = seed::rng(config.seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let n_val = (config.validation_split * n as f64).floor() as usize;
    if n_val >= n {
        return Err(Error::InvalidConfig(
            "validation split leaves no training rows".into(),
        ));
    }
    let val_idx: Vec<usize> = order[..n_val].to_vec();
    let mut train_idx: Vec<usize> = order[n_val..].to_vec();
    let x = train.rows();
    let y = train.labels();
    let val_x = x.select_rows(&val_idx);
    let val_y: Vec<u8> = val_idx.iter().map(|&i| y[i]).collect();

    let mut net = Network::he_uniform(x.cols(), &config.hidden_layers, &mut rng);
    let Optimizer::Adam(adam_cfg) = config.optimizer;
    let mut adam = Adam::new(&net, adam_cfg);
    let mut trace = TrainTrace::default();

    for epoch in 0..config.epochs {
        train_idx.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut correct = 0.0;
        for batch in train_idx.chunks(config.batch_size) {
            let bx = x.select_rows(batch);
            let by: Vec<u8> = batch.iter().map(|&i| y[i]).collect();
            let mode = Mode::Train {
                dropout_rate: config.dropout_rate,
                mask_seed: rng.random(),
            };
            let (loss, grads, probs) = net.backward(&bx, &by, mode)?;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss {
                    model: "net".into(),
                    epoch,
                });
            }
            loss_sum += loss * batch.len() as f64;
            correct += accuracy(&probs, &by) * batch.len() as f64;
            adam.step(&mut net, &grads)?;
        }
        if !net.is_finite() {
            return Err(Error::NonFiniteLoss {
                model: "net".into(),
                epoch,
            });
        }
        let m = train_idx.len() as f64;
        let (val_loss, val_acc) = if n_val > 0 {
            let p = net.forward(&val_x, Mode::Infer)?;
            (Some(bce(&p, &val_y)), Some(accuracy(&p, &val_y)))
        } else {
            (None, None)
        };
        trace.epochs.push(EpochStats {
            epoch: epoch + 1,
            train_loss: loss_sum / m,
            train_acc: correct / m,
            val_loss,
            val_acc,
        });
    }
    Ok((net, trace))
}

/// Inference-mode probabilities for a stored layer list.
pub fn predict_layers(layers: &[DenseLayer], rows: &Matrix) -> Result<Vec<f64>> {
    let net = Network::from_layers(layers.to_vec())?;
    net.forward(rows, Mode::Infer)
}

//! Waypoint regressor: a ReLU multilayer perceptron trained with MSE and
//! AdamW, plus the dataset it learns from.

mod dagger;
mod io;

pub use dagger::{alpha, dagger, dagger_collect, DaggerConfig, DaggerOutcome};
pub use io::{load_dataset, load_policy, read_dataset, read_policy, save_dataset, save_policy, write_dataset, write_policy};

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng;

pub const LABEL_DIM: usize = 4;
pub const DEFAULT_DIMS: [usize; 4] = [1031, 256, 128, 4];
/// Features whose spread is below this keep a unit scale.
const MIN_STD: f64 = 1e-6;

/// Round to the nearest `f32`, as stored on disk.
fn quantize(x: f64) -> f64 {
    x as f32 as f64
}

#[derive(Clone, Debug, PartialEq)]
pub struct MlpPolicy {
    /// `weights[l]` is `out x in`.
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
    pub shift: Array1<f64>,
    pub scale: Array1<f64>,
}

impl MlpPolicy {
    pub fn dims(&self) -> Vec<usize> {
        let mut d = vec![self.weights[0].ncols()];
        d.extend(self.weights.iter().map(|w| w.nrows()));
        d
    }

    pub fn input_dim(&self) -> usize {
        self.weights[0].ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.weights.last().expect("at least one layer").nrows()
    }

    /// Check that the layer chain and normalization vectors agree.
    pub fn validate(&self) -> Result<()> {
        if self.weights.is_empty() || self.weights.len() != self.biases.len() {
            return Err(Error::InvalidConfig("policy needs matching weight and bias layers".into()));
        }
        for l in 0..self.weights.len() {
            if self.biases[l].len() != self.weights[l].nrows() {
                return Err(Error::DimMismatch {
                    expected: self.weights[l].nrows(),
                    got: self.biases[l].len(),
                });
            }
            if l > 0 && self.weights[l].ncols() != self.weights[l - 1].nrows() {
                return Err(Error::DimMismatch {
                    expected: self.weights[l - 1].nrows(),
                    got: self.weights[l].ncols(),
                });
            }
        }
        let n = self.input_dim();
        if self.shift.len() != n || self.scale.len() != n {
            return Err(Error::DimMismatch {
                expected: n,
                got: self.shift.len().min(self.scale.len()),
            });
        }
        if self.scale.iter().any(|&s| !(s > 0.0)) {
            return Err(Error::InvalidConfig("normalization scale must be positive".into()));
        }
        Ok(())
    }

    /// Freeze per-feature normalization at the dataset mean and standard
    /// deviation.
    pub fn fit_normalization(&mut self, data: &Dataset) -> Result<()> {
        if data.obs_dim != self.input_dim() {
            return Err(Error::DimMismatch {
                expected: self.input_dim(),
                got: data.obs_dim,
            });
        }
        if data.is_empty() {
            return Err(Error::InvalidConfig("cannot fit normalization on an empty dataset".into()));
        }
        let x = data.obs_matrix();
        let mean = x.mean_axis(Axis(0)).expect("nonempty");
        let std = x.std_axis(Axis(0), 0.0);
        self.shift = mean.mapv(quantize);
        self.scale = std.mapv(|s| if s < MIN_STD { 1.0 } else { quantize(s) });
        Ok(())
    }

    fn normalize(&self, x: ArrayView2<f64>) -> Array2<f64> {
        (&x - &self.shift) / &self.scale
    }

    /// Pre-activations and activations per layer for a batch (rows).
    fn forward_cached(&self, x: ArrayView2<f64>) -> (Vec<Array2<f64>>, Vec<Array2<f64>>) {
        let mut acts = vec![self.normalize(x)];
        let mut pre = Vec::with_capacity(self.weights.len());
        let last = self.weights.len() - 1;
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let z = acts[l].dot(&w.t()) + b;
            let a = if l < last { z.mapv(|v| v.max(0.0)) } else { z.clone() };
            pre.push(z);
            acts.push(a);
        }
        (pre, acts)
    }

    pub fn forward_batch(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.input_dim() {
            return Err(Error::DimMismatch {
                expected: self.input_dim(),
                got: x.ncols(),
            });
        }
        let (_, mut acts) = self.forward_cached(x);
        Ok(acts.pop().expect("output layer"))
    }

    pub fn forward(&self, obs: &[f64]) -> Result<Vec<f64>> {
        let x = ArrayView2::from_shape((1, obs.len()), obs).expect("row view");
        Ok(self.forward_batch(x)?.row(0).to_vec())
    }

    /// `J^T upstream` for the Jacobian of the output with respect to the
    /// raw (unnormalized) input.
    pub fn input_gradient(&self, obs: &[f64], upstream: &[f64]) -> Result<Vec<f64>> {
        if obs.len() != self.input_dim() {
            return Err(Error::DimMismatch {
                expected: self.input_dim(),
                got: obs.len(),
            });
        }
        let x = ArrayView2::from_shape((1, obs.len()), obs).expect("row view");
        let (pre, _) = self.forward_cached(x);
        let mut d = Array2::from_shape_vec((1, upstream.len()), upstream.to_vec())
            .map_err(|e| Error::InvalidConfig(e.to_string()))?;
        for l in (0..self.weights.len()).rev() {
            if l + 1 < self.weights.len() {
                d = d * pre[l].mapv(|z| if z > 0.0 { 1.0 } else { 0.0 });
            }
            d = d.dot(&self.weights[l]);
        }
        Ok((d.row(0).to_owned() / &self.scale).to_vec())
    }

    /// Mean squared error over every label component and its parameter
    /// gradients.
    pub fn loss_and_grads(&self, x: ArrayView2<f64>, y: ArrayView2<f64>) -> Result<(f64, Grads)> {
        if x.ncols() != self.input_dim() || y.ncols() != self.output_dim() || x.nrows() != y.nrows() {
            return Err(Error::DimMismatch {
                expected: self.input_dim(),
                got: x.ncols(),
            });
        }
        let (pre, acts) = self.forward_cached(x);
        let out = acts.last().expect("output");
        let diff = out - &y;
        let count = diff.len() as f64;
        let loss = diff.iter().map(|e| e * e).sum::<f64>() / count;
        let mut d = diff * (2.0 / count);
        let n = self.weights.len();
        let mut dw = vec![Array2::zeros((0, 0)); n];
        let mut db = vec![Array1::zeros(0); n];
        for l in (0..n).rev() {
            if l + 1 < n {
                d = d * pre[l].mapv(|z| if z > 0.0 { 1.0 } else { 0.0 });
            }
            dw[l] = d.t().dot(&acts[l]);
            db[l] = d.sum_axis(Axis(0));
            if l > 0 {
                d = d.dot(&self.weights[l]);
            }
        }
        Ok((loss, Grads { dw, db }))
    }

    pub fn loss(&self, data: &Dataset) -> Result<f64> {
        Ok(self.loss_and_grads(data.obs_matrix().view(), data.label_matrix().view())?.0)
    }

    fn quantize_params(&mut self) {
        for w in &mut self.weights {
            w.mapv_inplace(quantize);
        }
        for b in &mut self.biases {
            b.mapv_inplace(quantize);
        }
    }
}

#[derive(Clone, Debug)]
pub struct Grads {
    pub dw: Vec<Array2<f64>>,
    pub db: Vec<Array1<f64>>,
}

/// Weights uniform in `+-sqrt(6 / fan_in)` (stored at `f32` precision),
/// zero biases, identity normalization.
pub fn init_policy(seed: u64, dims: &[usize]) -> Result<MlpPolicy> {
    if dims.len() < 2 || dims.contains(&0) {
        return Err(Error::InvalidConfig(format!("bad layer dims {dims:?}")));
    }
    let mut r = rng::stream(seed);
    let mut weights = Vec::new();
    let mut biases = Vec::new();
    for pair in dims.windows(2) {
        let (fan_in, fan_out) = (pair[0], pair[1]);
        let bound = (6.0 / fan_in as f64).sqrt();
        let w = Array2::from_shape_simple_fn((fan_out, fan_in), || {
            let mut v = (rng::uniform(&mut r, -bound, bound)) as f32;
            if (v as f64).abs() > bound {
                // Rounding pushed it past the bound; step one ulp inward.
                v = f32::from_bits(v.to_bits() - 1);
            }
            v as f64
        });
        weights.push(w);
        biases.push(Array1::zeros(fan_out));
    }
    Ok(MlpPolicy {
        weights,
        biases,
        shift: Array1::zeros(dims[0]),
        scale: Array1::ones(dims[0]),
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub weight_decay: f64,
    pub batch: usize,
    pub epochs: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            weight_decay: 1e-2,
            batch: 64,
            epochs: 10,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr >= 0.0) || self.batch == 0 || self.weight_decay < 0.0 {
            return Err(Error::InvalidConfig(format!("bad training config: {self:?}")));
        }
        Ok(())
    }
}

/// AdamW with decay applied to weights only.
#[derive(Clone, Debug)]
pub struct AdamW {
    cfg: TrainConfig,
    step: i32,
    mw: Vec<Array2<f64>>,
    vw: Vec<Array2<f64>>,
    mb: Vec<Array1<f64>>,
    vb: Vec<Array1<f64>>,
}

impl AdamW {
    pub fn new(policy: &MlpPolicy, cfg: TrainConfig) -> Self {
        Self {
            cfg,
            step: 0,
            mw: policy.weights.iter().map(|w| Array2::zeros(w.raw_dim())).collect(),
            vw: policy.weights.iter().map(|w| Array2::zeros(w.raw_dim())).collect(),
            mb: policy.biases.iter().map(|b| Array1::zeros(b.raw_dim())).collect(),
            vb: policy.biases.iter().map(|b| Array1::zeros(b.raw_dim())).collect(),
        }
    }

    pub fn update(&mut self, policy: &mut MlpPolicy, g: &Grads) {
        let c = self.cfg;
        self.step += 1;
        let bc1 = 1.0 - c.beta1.powi(self.step);
        let bc2 = 1.0 - c.beta2.powi(self.step);
        let decay = 1.0 - c.lr * c.weight_decay;
        let adam = |p: &mut f64, m: &mut f64, v: &mut f64, g: f64| {
            *m = c.beta1 * *m + (1.0 - c.beta1) * g;
            *v = c.beta2 * *v + (1.0 - c.beta2) * g * g;
            *p -= c.lr * (*m / bc1) / ((*v / bc2).sqrt() + c.eps);
        };
        for l in 0..policy.weights.len() {
            policy.weights[l].mapv_inplace(|w| w * decay);
            ndarray::Zip::from(&mut policy.weights[l])
                .and(&mut self.mw[l])
                .and(&mut self.vw[l])
                .and(&g.dw[l])
                .for_each(|p, m, v, &g| adam(p, m, v, g));
            ndarray::Zip::from(&mut policy.biases[l])
                .and(&mut self.mb[l])
                .and(&mut self.vb[l])
                .and(&g.db[l])
                .for_each(|p, m, v, &g| adam(p, m, v, g));
        }
    }
}

/// Fit `policy` to `data` for `cfg.epochs` seeded shuffle passes. Returns
/// the trained policy (parameters rounded to `f32`) and the full-dataset
/// loss after each epoch.
pub fn train(policy: &MlpPolicy, data: &Dataset, cfg: &TrainConfig) -> Result<(MlpPolicy, Vec<f64>)> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::InvalidConfig("training needs a nonempty dataset".into()));
    }
    if data.obs_dim != policy.input_dim() {
        return Err(Error::DimMismatch {
            expected: policy.input_dim(),
            got: data.obs_dim,
        });
    }
    let x = data.obs_matrix();
    let y = data.label_matrix();
    let mut p = policy.clone();
    let mut opt = AdamW::new(&p, *cfg);
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut order: Vec<usize> = (0..data.len()).collect();
    for epoch in 0..cfg.epochs {
        let mut r = rng::derived(cfg.seed, epoch as u64);
        order.sort_unstable();
        order.shuffle(&mut r);
        for chunk in order.chunks(cfg.batch) {
            let xb = x.select(Axis(0), chunk);
            let yb = y.select(Axis(0), chunk);
            let (_, g) = p.loss_and_grads(xb.view(), yb.view())?;
            opt.update(&mut p, &g);
        }
        history.push(p.loss_and_grads(x.view(), y.view())?.0);
    }
    p.quantize_params();
    Ok((p, history))
}

/// Observation/label pairs at `f32` precision, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub obs_dim: usize,
    pub obs: Vec<f32>,
    pub labels: Vec<f32>,
}

impl Dataset {
    pub fn new(obs_dim: usize) -> Self {
        Self {
            obs_dim,
            obs: Vec::new(),
            labels: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len() / LABEL_DIM
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn push(&mut self, obs: &[f64], label: [f64; 4]) -> Result<()> {
        if obs.len() != self.obs_dim {
            return Err(Error::DimMismatch {
                expected: self.obs_dim,
                got: obs.len(),
            });
        }
        if label.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("labels must be finite".into()));
        }
        self.obs.extend(obs.iter().map(|&v| v as f32));
        self.labels.extend(label.iter().map(|&v| v as f32));
        Ok(())
    }

    pub fn extend(&mut self, other: &Dataset) -> Result<()> {
        if other.obs_dim != self.obs_dim {
            return Err(Error::DimMismatch {
                expected: self.obs_dim,
                got: other.obs_dim,
            });
        }
        self.obs.extend_from_slice(&other.obs);
        self.labels.extend_from_slice(&other.labels);
        Ok(())
    }

    pub fn record(&self, i: usize) -> (&[f32], &[f32]) {
        (
            &self.obs[i * self.obs_dim..(i + 1) * self.obs_dim],
            &self.labels[i * LABEL_DIM..(i + 1) * LABEL_DIM],
        )
    }

    pub fn obs_matrix(&self) -> Array2<f64> {
        Array2::from_shape_vec((self.len(), self.obs_dim), self.obs.iter().map(|&v| v as f64).collect())
            .expect("consistent record length")
    }

    pub fn label_matrix(&self) -> Array2<f64> {
        Array2::from_shape_vec((self.len(), LABEL_DIM), self.labels.iter().map(|&v| v as f64).collect())
            .expect("consistent record length")
    }

    /// First `n` records.
    pub fn head(&self, n: usize) -> Dataset {
        let n = n.min(self.len());
        Dataset {
            obs_dim: self.obs_dim,
            obs: self.obs[..n * self.obs_dim].to_vec(),
            labels: self.labels[..n * LABEL_DIM].to_vec(),
        }
    }
}

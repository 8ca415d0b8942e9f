// SPDX-License-Identifier: Apache-2.0

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{bbox_features, MapperPair};
use crate::error::{Error, Result};

pub const INPUTS: usize = 4;
pub const OUTPUTS: usize = 2;
/// Hidden layer widths, input side first.
pub const HIDDEN_WIDTHS: [usize; 10] = [20, 20, 10, 10, 10, 10, 10, 10, 10, 10];

const MIN_PAIRS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
}

/// Fully connected layer; `w` is row-major `rows x cols`, mapping `cols`
/// inputs to `rows` outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub rows: usize,
    pub cols: usize,
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

impl Dense {
    fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            w: vec![0.0; rows * cols],
            b: vec![0.0; rows],
        }
    }

    fn apply(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for r in 0..self.rows {
            let row = &self.w[r * self.cols..(r + 1) * self.cols];
            out.push(self.b[r] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>());
        }
    }
}

/// Input standardization and output scaling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scales {
    pub input_mean: [f64; INPUTS],
    pub input_std: [f64; INPUTS],
    /// Meters per unit of the first output.
    pub distance: f64,
    /// Degrees per unit of the second output.
    pub angle: f64,
}

impl Default for Scales {
    fn default() -> Self {
        Self {
            input_mean: [0.0; INPUTS],
            input_std: [1.0; INPUTS],
            distance: 40.0,
            angle: 20.0,
        }
    }
}

impl Scales {
    fn standardize(&self, f: &[f64; INPUTS]) -> [f64; INPUTS] {
        let mut out = [0.0; INPUTS];
        for k in 0..INPUTS {
            out[k] = (f[k] - self.input_mean[k]) / self.input_std[k];
        }
        out
    }

    fn scale_target(&self, distance: f64, angle: f64) -> [f64; OUTPUTS] {
        [distance / self.distance, angle / self.angle]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapperNetwork {
    pub layers: Vec<Dense>,
    pub activation: Activation,
    pub scales: Scales,
}

fn widths() -> Vec<usize> {
    let mut w = vec![INPUTS];
    w.extend(HIDDEN_WIDTHS);
    w.push(OUTPUTS);
    w
}

impl MapperNetwork {
    pub fn zeros() -> Self {
        let w = widths();
        Self {
            layers: w.windows(2).map(|p| Dense::zeros(p[1], p[0])).collect(),
            activation: Activation::Tanh,
            scales: Scales::default(),
        }
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut net = Self::zeros();
        for l in &mut net.layers {
            let limit = (6.0 / (l.rows + l.cols) as f64).sqrt();
            for w in &mut l.w {
                *w = rng.random_range(-limit..limit);
            }
        }
        net
    }

    /// Checks the layer stack against the fixed architecture.
    pub fn validate(&self) -> Result<()> {
        let w = widths();
        if self.layers.len() != w.len() - 1 {
            return Err(Error::invalid(format!(
                "mapper needs {} layers, got {}",
                w.len() - 1,
                self.layers.len()
            )));
        }
        for (i, (l, p)) in self.layers.iter().zip(w.windows(2)).enumerate() {
            if l.cols != p[0] || l.rows != p[1] || l.w.len() != l.rows * l.cols || l.b.len() != l.rows {
                return Err(Error::invalid(format!(
                    "mapper layer {i} has shape {}x{}, expected {}x{}",
                    l.rows, l.cols, p[1], p[0]
                )));
            }
            if l.w.iter().chain(&l.b).any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!("mapper layer {i} has non-finite parameters")));
            }
        }
        if !(self.scales.distance > 0.0 && self.scales.angle > 0.0) || self.scales.input_std.iter().any(|s| !(*s > 0.0))
        {
            return Err(Error::invalid("mapper scales must be positive"));
        }
        Ok(())
    }

    /// Forward pass on standardized inputs; returns every layer output,
    /// activations applied on hidden layers.
    fn forward_all(&self, x: &[f64; INPUTS]) -> Vec<Vec<f64>> {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_vec());
        let last = self.layers.len() - 1;
        for (i, l) in self.layers.iter().enumerate() {
            let mut out = Vec::with_capacity(l.rows);
            l.apply(&acts[i], &mut out);
            if i < last {
                out.iter_mut().for_each(|v| *v = v.tanh());
            }
            acts.push(out);
        }
        acts
    }

    /// Scaled outputs for standardized inputs.
    pub fn forward(&self, x: &[f64; INPUTS]) -> [f64; OUTPUTS] {
        let a = self.forward_all(x);
        let y = a.last().expect("output layer");
        [y[0], y[1]]
    }

    /// `(distance m, angle deg)` for raw normalized box features.
    pub fn predict_features(&self, f: &[f64; INPUTS]) -> (f64, f64) {
        let y = self.forward(&self.scales.standardize(f));
        (y[0] * self.scales.distance, y[1] * self.scales.angle)
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    pub fn params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.num_params());
        for l in &self.layers {
            p.extend(&l.w);
            p.extend(&l.b);
        }
        p
    }

    pub fn set_params(&mut self, p: &[f64]) {
        let mut i = 0;
        for l in &mut self.layers {
            let n = l.w.len();
            l.w.copy_from_slice(&p[i..i + n]);
            i += n;
            let n = l.b.len();
            l.b.copy_from_slice(&p[i..i + n]);
            i += n;
        }
    }

    /// Loss `sum |y_hat - y|^2 / (2 n)` on standardized inputs and scaled
    /// targets, with its gradient in [`params`](Self::params) order.
    pub fn loss_and_gradient(&self, xs: &[[f64; INPUTS]], ys: &[[f64; OUTPUTS]]) -> (f64, Vec<f64>) {
        let n = xs.len() as f64;
        let mut grads: Vec<Dense> = self.layers.iter().map(|l| Dense::zeros(l.rows, l.cols)).collect();
        let mut loss = 0.0;
        for (x, y) in xs.iter().zip(ys) {
            let acts = self.forward_all(x);
            let out = acts.last().expect("output layer");
            let mut delta: Vec<f64> = out.iter().zip(y).map(|(o, t)| (o - t) / n).collect();
            loss += out.iter().zip(y).map(|(o, t)| (o - t).powi(2)).sum::<f64>() / (2.0 * n);
            for li in (0..self.layers.len()).rev() {
                let l = &self.layers[li];
                let g = &mut grads[li];
                let input = &acts[li];
                for (r, &d) in delta.iter().enumerate() {
                    g.b[r] += d;
                    let row = &mut g.w[r * l.cols..(r + 1) * l.cols];
                    for (gw, a) in row.iter_mut().zip(input) {
                        *gw += d * a;
                    }
                }
                if li > 0 {
                    let mut prev = vec![0.0; l.cols];
                    for (r, &d) in delta.iter().enumerate() {
                        let row = &l.w[r * l.cols..(r + 1) * l.cols];
                        for (p, w) in prev.iter_mut().zip(row) {
                            *p += w * d;
                        }
                    }
                    for (p, a) in prev.iter_mut().zip(input) {
                        *p *= 1.0 - a * a;
                    }
                    delta = prev;
                }
            }
        }
        let mut flat = Vec::with_capacity(self.num_params());
        for g in grads {
            flat.extend(g.w);
            flat.extend(g.b);
        }
        (loss, flat)
    }

    pub fn loss(&self, xs: &[[f64; INPUTS]], ys: &[[f64; OUTPUTS]]) -> f64 {
        let n = xs.len() as f64;
        xs.iter()
            .zip(ys)
            .map(|(x, y)| {
                let o = self.forward(x);
                ((o[0] - y[0]).powi(2) + (o[1] - y[1]).powi(2)) / (2.0 * n)
            })
            .sum()
    }
}

/// Relative error `|g_a - g_n| / (|g_a| + |g_n|)` between the analytic
/// gradient and central differences with step `h`.
pub fn gradient_check(net: &MapperNetwork, xs: &[[f64; INPUTS]], ys: &[[f64; OUTPUTS]], h: f64) -> f64 {
    let (_, analytic) = net.loss_and_gradient(xs, ys);
    let base = net.params();
    let mut probe = net.clone();
    let mut numeric = vec![0.0; base.len()];
    let mut p = base.clone();
    for i in 0..base.len() {
        p[i] = base[i] + h;
        probe.set_params(&p);
        let up = probe.loss(xs, ys);
        p[i] = base[i] - h;
        probe.set_params(&p);
        let down = probe.loss(xs, ys);
        p[i] = base[i];
        numeric[i] = (up - down) / (2.0 * h);
    }
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = analytic.iter().zip(&numeric).map(|(a, n)| a - n).collect();
    let denom = norm(&analytic) + norm(&numeric);
    if denom == 0.0 {
        0.0
    } else {
        norm(&diff) / denom
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MapperTrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Step size reached at the last epoch by geometric decay.
    pub final_learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub seed: u64,
}

impl Default for MapperTrainConfig {
    fn default() -> Self {
        Self {
            epochs: 300,
            batch_size: 32,
            learning_rate: 1e-3,
            final_learning_rate: 1e-5,
            beta1: 0.9,
            beta2: 0.999,
            seed: 0,
        }
    }
}

impl MapperTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::config("mapper epochs and batch size must be positive"));
        }
        if !(self.learning_rate > 0.0 && self.final_learning_rate > 0.0) {
            return Err(Error::config("mapper learning rates must be positive"));
        }
        if !((0.0..1.0).contains(&self.beta1) && (0.0..1.0).contains(&self.beta2)) {
            return Err(Error::config("mapper moment decay rates must lie in [0, 1)"));
        }
        Ok(())
    }
}

/// Trains the mapper with minibatch Adam on the scaled squared error.
pub fn train_mapper(pairs: &[MapperPair], cfg: &MapperTrainConfig) -> Result<MapperNetwork> {
    cfg.validate()?;
    if pairs.len() < MIN_PAIRS {
        return Err(Error::InsufficientData(format!(
            "mapper needs at least {MIN_PAIRS} pairs, got {}",
            pairs.len()
        )));
    }
    for p in pairs {
        p.bbox.validate()?;
        if !(p.distance.is_finite() && p.angle.is_finite()) {
            return Err(Error::invalid("mapper target is not finite"));
        }
    }
    let feats: Vec<[f64; INPUTS]> = pairs.iter().map(|p| bbox_features(&p.bbox)).collect();
    if feats.iter().all(|f| *f == feats[0]) {
        return Err(Error::InsufficientData("all mapper boxes are identical".into()));
    }

    let mut net = MapperNetwork::init(cfg.seed);
    let n = feats.len() as f64;
    for k in 0..INPUTS {
        let mean = feats.iter().map(|f| f[k]).sum::<f64>() / n;
        let var = feats.iter().map(|f| (f[k] - mean).powi(2)).sum::<f64>() / n;
        net.scales.input_mean[k] = mean;
        net.scales.input_std[k] = if var > 0.0 { var.sqrt() } else { 1.0 };
    }
    let xs: Vec<[f64; INPUTS]> = feats.iter().map(|f| net.scales.standardize(f)).collect();
    let ys: Vec<[f64; OUTPUTS]> = pairs.iter().map(|p| net.scales.scale_target(p.distance, p.angle)).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut params = net.params();
    let mut m = vec![0.0; params.len()];
    let mut v = vec![0.0; params.len()];
    let mut order: Vec<usize> = (0..xs.len()).collect();
    let mut step = 0i32;
    let mut bx = Vec::with_capacity(cfg.batch_size);
    let mut by = Vec::with_capacity(cfg.batch_size);
    let decay = (cfg.final_learning_rate / cfg.learning_rate).powf(1.0 / (cfg.epochs.max(2) - 1) as f64);
    let mut lr = cfg.learning_rate;
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            bx.clear();
            by.clear();
            bx.extend(chunk.iter().map(|&i| xs[i]));
            by.extend(chunk.iter().map(|&i| ys[i]));
            let (_, g) = net.loss_and_gradient(&bx, &by);
            step += 1;
            let c1 = 1.0 - cfg.beta1.powi(step);
            let c2 = 1.0 - cfg.beta2.powi(step);
            for i in 0..params.len() {
                m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
                v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
                params[i] -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + 1e-8);
            }
            net.set_params(&params);
        }
        lr *= decay;
    }
    net.validate()?;
    Ok(net)
}

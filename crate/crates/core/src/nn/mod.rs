//! Small fully-connected networks with explicit parameter and gradient
//! storage and hand-written reverse mode.
//!
//! Parameters of layer `l` are stored as an `in x out` weight block (input
//! major) followed by `out` biases, concatenated over layers in one flat
//! vector. Batches are row-major `batch x features` slices.

pub mod checkpoint;
pub mod gradcheck;
pub mod optim;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;

pub use optim::{clip_grad_norm, OptimizerState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Activation {
    Relu,
    Sigmoid,
    Identity,
    /// Row-wise `softmax(z / tau)`.
    Softmax { tau: f64 },
}

impl Activation {
    fn apply(self, row: &mut [f64]) {
        match self {
            Activation::Relu => row.iter_mut().for_each(|v| *v = v.max(0.0)),
            Activation::Sigmoid => row.iter_mut().for_each(|v| *v = sigmoid(*v)),
            Activation::Identity => {}
            Activation::Softmax { tau } => softmax_in_place(row, tau),
        }
    }

    /// Turn `grad` (dL/dy for one row) into dL/dz given the row's output `y`.
    fn backprop(self, y: &[f64], grad: &mut [f64]) {
        match self {
            Activation::Relu => {
                for (g, &v) in grad.iter_mut().zip(y) {
                    if v <= 0.0 {
                        *g = 0.0;
                    }
                }
            }
            Activation::Sigmoid => {
                for (g, &v) in grad.iter_mut().zip(y) {
                    *g *= v * (1.0 - v);
                }
            }
            Activation::Identity => {}
            Activation::Softmax { tau } => {
                let dot: f64 = grad.iter().zip(y).map(|(g, v)| g * v).sum();
                for (g, &v) in grad.iter_mut().zip(y) {
                    *g = v * (*g - dot) / tau;
                }
            }
        }
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable `softmax(z / tau)`.
pub fn softmax(logits: &[f64], tau: f64) -> Vec<f64> {
    let mut out = logits.to_vec();
    softmax_in_place(&mut out, tau);
    out
}

fn softmax_in_place(row: &mut [f64], tau: f64) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = ((*v - max) / tau).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct LayerShape {
    inputs: usize,
    outputs: usize,
    offset: usize,
}

impl LayerShape {
    fn weights(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.inputs * self.outputs
    }

    fn biases(&self) -> std::ops::Range<usize> {
        let start = self.offset + self.inputs * self.outputs;
        start..start + self.outputs
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Cache {
    batch: usize,
    /// Input of every layer followed by the network output.
    activations: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseNet {
    sizes: Vec<usize>,
    activations: Vec<Activation>,
    layers: Vec<LayerShape>,
    params: Vec<f64>,
    grads: Vec<f64>,
    cache: Option<Cache>,
}

impl DenseNet {
    /// Zero-initialized network. `sizes` lists input, hidden and output
    /// widths; `activations` has one entry per layer.
    pub fn zeros(sizes: &[usize], activations: &[Activation]) -> Result<Self> {
        if sizes.len() < 2 || activations.len() != sizes.len() - 1 {
            return Err(Error::Usage(format!(
                "{} layer sizes need {} activations, got {}",
                sizes.len(),
                sizes.len().saturating_sub(1),
                activations.len()
            )));
        }
        if sizes.contains(&0) {
            return Err(Error::Usage("layer sizes must be positive".into()));
        }
        let mut layers = Vec::with_capacity(activations.len());
        let mut offset = 0;
        for w in sizes.windows(2) {
            layers.push(LayerShape {
                inputs: w[0],
                outputs: w[1],
                offset,
            });
            offset += w[0] * w[1] + w[1];
        }
        Ok(Self {
            sizes: sizes.to_vec(),
            activations: activations.to_vec(),
            layers,
            params: vec![0.0; offset],
            grads: vec![0.0; offset],
            cache: None,
        })
    }

    /// Uniform fan-in scaled init: He for ReLU layers, Xavier otherwise.
    /// Biases start at zero.
    pub fn new(sizes: &[usize], activations: &[Activation], rng: &mut Rng) -> Result<Self> {
        let mut net = Self::zeros(sizes, activations)?;
        for (layer, act) in net.layers.clone().iter().zip(&net.activations.clone()) {
            let bound = match act {
                Activation::Relu => (6.0 / layer.inputs as f64).sqrt(),
                _ => (6.0 / (layer.inputs + layer.outputs) as f64).sqrt(),
            };
            for p in &mut net.params[layer.weights()] {
                *p = rng.gen_range(-bound..bound);
            }
        }
        Ok(net)
    }

    /// ReLU hidden layers of the given widths and a single output layer.
    pub fn mlp(input: usize, hidden: &[usize], output: usize, out_act: Activation, rng: &mut Rng) -> Result<Self> {
        let mut sizes = vec![input];
        sizes.extend_from_slice(hidden);
        sizes.push(output);
        let mut acts = vec![Activation::Relu; hidden.len()];
        acts.push(out_act);
        Self::new(&sizes, &acts, rng)
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn activations(&self) -> &[Activation] {
        &self.activations
    }

    pub fn input_size(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_size(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn grads(&self) -> &[f64] {
        &self.grads
    }

    pub fn grads_mut(&mut self) -> &mut [f64] {
        &mut self.grads
    }

    pub fn zero_grad(&mut self) {
        self.grads.iter_mut().for_each(|g| *g = 0.0);
    }

    /// Copy parameters from a network of identical shape.
    pub fn copy_params_from(&mut self, other: &DenseNet) {
        assert_eq!(self.sizes, other.sizes, "shape mismatch in parameter copy");
        self.params.copy_from_slice(&other.params);
    }

    fn run(&self, input: &[f64], batch: usize, mut keep: Option<&mut Vec<Vec<f64>>>) -> Result<Vec<f64>> {
        if input.len() != batch * self.input_size() {
            return Err(Error::Shape {
                context: "dense forward",
                expected: batch * self.input_size(),
                got: input.len(),
            });
        }
        let mut x = input.to_vec();
        for (layer, act) in self.layers.iter().zip(&self.activations) {
            let mut y = vec![0.0; batch * layer.outputs];
            for r in 0..batch {
                let out = &mut y[r * layer.outputs..(r + 1) * layer.outputs];
                self.affine(layer, &x[r * layer.inputs..(r + 1) * layer.inputs], out);
                act.apply(out);
            }
            if let Some(k) = keep.as_deref_mut() {
                k.push(std::mem::replace(&mut x, y));
            } else {
                x = y;
            }
        }
        if let Some(k) = keep {
            k.push(x.clone());
        }
        Ok(x)
    }

    /// `out = b + row W` for one sample.
    fn affine(&self, layer: &LayerShape, row: &[f64], out: &mut [f64]) {
        let w = &self.params[layer.weights()];
        out.copy_from_slice(&self.params[layer.biases()]);
        for (i, &a) in row.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            let wrow = &w[i * layer.outputs..(i + 1) * layer.outputs];
            for (o, &wv) in out.iter_mut().zip(wrow) {
                *o += a * wv;
            }
        }
    }

    /// Input and pre-activation of every layer for a single sample.
    pub(crate) fn layer_trace(&self, input: &[f64]) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
        if input.len() != self.input_size() {
            return Err(Error::Shape {
                context: "dense forward",
                expected: self.input_size(),
                got: input.len(),
            });
        }
        let mut x = input.to_vec();
        let mut out = Vec::with_capacity(self.layers.len());
        for (layer, act) in self.layers.iter().zip(&self.activations) {
            let mut z = vec![0.0; layer.outputs];
            self.affine(layer, &x, &mut z);
            let mut y = z.clone();
            act.apply(&mut y);
            out.push((std::mem::replace(&mut x, y), z));
        }
        Ok(out)
    }

    /// Output for a single sample given layer `l`'s pre-activation.
    pub(crate) fn finish_from(&self, l: usize, z: &[f64]) -> Vec<f64> {
        let mut x = z.to_vec();
        self.activations[l].apply(&mut x);
        for (layer, act) in self.layers.iter().zip(&self.activations).skip(l + 1) {
            let mut y = vec![0.0; layer.outputs];
            self.affine(layer, &x, &mut y);
            act.apply(&mut y);
            x = y;
        }
        x
    }

    /// `(layer, input index, output index)` of every parameter, `None` as the
    /// input index for biases.
    pub(crate) fn param_sites(&self) -> Vec<(usize, Option<usize>, usize)> {
        let mut sites = vec![(0, None, 0); self.params.len()];
        for (l, layer) in self.layers.iter().enumerate() {
            for i in 0..layer.inputs {
                for o in 0..layer.outputs {
                    sites[layer.weights().start + i * layer.outputs + o] = (l, Some(i), o);
                }
            }
            for o in 0..layer.outputs {
                sites[layer.biases().start + o] = (l, None, o);
            }
        }
        sites
    }

    /// Forward a batch and keep the activations for [`DenseNet::backward`].
    pub fn forward_batch(&mut self, input: &[f64], batch: usize) -> Result<Vec<f64>> {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        let out = self.run(input, batch, Some(&mut acts))?;
        self.cache = Some(Cache {
            batch,
            activations: acts,
        });
        Ok(out)
    }

    pub fn forward(&mut self, input: &[f64]) -> Result<Vec<f64>> {
        self.forward_batch(input, 1)
    }

    /// Forward without touching the cache.
    pub fn predict_batch(&self, input: &[f64], batch: usize) -> Result<Vec<f64>> {
        self.run(input, batch, None)
    }

    pub fn predict(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.run(input, 1, None)
    }

    /// Accumulate dL/dparams for the last forward pass given dL/doutput,
    /// and return dL/dinput. Consumes the cache.
    pub fn backward(&mut self, upstream: &[f64]) -> Result<Vec<f64>> {
        self.backward_impl(upstream, true)
    }

    /// Like [`DenseNet::backward`] but skips the input gradient.
    pub fn backward_params(&mut self, upstream: &[f64]) -> Result<()> {
        self.backward_impl(upstream, false).map(drop)
    }

    fn backward_impl(&mut self, upstream: &[f64], want_input: bool) -> Result<Vec<f64>> {
        let cache = self
            .cache
            .take()
            .ok_or_else(|| Error::Usage("backward called without a forward pass".into()))?;
        let batch = cache.batch;
        if upstream.len() != batch * self.output_size() {
            return Err(Error::Shape {
                context: "dense backward",
                expected: batch * self.output_size(),
                got: upstream.len(),
            });
        }
        let mut delta = upstream.to_vec();
        for (l, (layer, act)) in self.layers.iter().zip(&self.activations).enumerate().rev() {
            let x = &cache.activations[l];
            let y = &cache.activations[l + 1];
            let (nin, nout) = (layer.inputs, layer.outputs);
            for r in 0..batch {
                act.backprop(&y[r * nout..(r + 1) * nout], &mut delta[r * nout..(r + 1) * nout]);
            }
            let (wr, br) = (layer.weights(), layer.biases());
            let need_dx = want_input || l > 0;
            let mut dx = if need_dx { vec![0.0; batch * nin] } else { Vec::new() };
            {
                let (gw, rest) = self.grads[wr.start..br.end].split_at_mut(nin * nout);
                let gb = &mut rest[..nout];
                let w = &self.params[wr];
                for r in 0..batch {
                    let d = &delta[r * nout..(r + 1) * nout];
                    for (g, &dv) in gb.iter_mut().zip(d) {
                        *g += dv;
                    }
                    let xr = &x[r * nin..(r + 1) * nin];
                    for i in 0..nin {
                        if need_dx {
                            dx[r * nin + i] = dot(&w[i * nout..(i + 1) * nout], d);
                        }
                        let a = xr[i];
                        if a != 0.0 {
                            let grow = &mut gw[i * nout..(i + 1) * nout];
                            for (g, &dv) in grow.iter_mut().zip(d) {
                                *g += a * dv;
                            }
                        }
                    }
                }
            }
            delta = dx;
        }
        Ok(delta)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        for k in 0..4 {
            acc[k] += a[4 * c + k] * b[4 * c + k];
        }
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in 4 * chunks..a.len() {
        s += a[i] * b[i];
    }
    s
}

/// Mean squared error and its gradient `2 (pred - target) / n`.
pub fn mse_loss(pred: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>)> {
    if pred.len() != target.len() {
        return Err(Error::Shape {
            context: "mse",
            expected: pred.len(),
            got: target.len(),
        });
    }
    let n = pred.len().max(1) as f64;
    let mut loss = 0.0;
    let grad = pred
        .iter()
        .zip(target)
        .map(|(p, t)| {
            let d = p - t;
            loss += d * d;
            2.0 * d / n
        })
        .collect();
    Ok((loss / n, grad))
}

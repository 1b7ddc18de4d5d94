//! Step-level weight network: `softmax(f([x; g]) / tau)`, trained online
//! toward a heuristic target weight.

use super::WeightPair;
use crate::config::{NetworkConfig, WeightingConfig};
use crate::error::Result;
use crate::nn::{clip_grad_norm, Activation, DenseNet, OptimizerState};
use crate::rng::Rng;

pub const CONTEXT_DIM: usize = 7;

#[derive(Debug, Clone, PartialEq)]
pub struct StepWeightNet {
    pub net: DenseNet,
    opt: OptimizerState,
    grad_clip: f64,
}

impl StepWeightNet {
    pub fn new(local_dim: usize, net: &NetworkConfig, w: &WeightingConfig, rng: &mut Rng) -> Result<Self> {
        let dense = DenseNet::mlp(
            local_dim + CONTEXT_DIM,
            &net.step_hidden,
            2,
            Activation::Softmax { tau: w.tau },
            rng,
        )?;
        Ok(Self {
            opt: OptimizerState::new(net.optimizer, net.step_lr, &dense),
            net: dense,
            grad_clip: net.grad_clip,
        })
    }

    pub fn input(x: &[f64], g: &[f64; CONTEXT_DIM]) -> Vec<f64> {
        let mut v = Vec::with_capacity(x.len() + CONTEXT_DIM);
        v.extend_from_slice(x);
        v.extend_from_slice(g);
        v
    }

    pub fn weight(&self, x: &[f64], g: &[f64; CONTEXT_DIM]) -> Result<WeightPair> {
        let out = self.net.predict(&Self::input(x, g))?;
        Ok([out[0], out[1]])
    }

    /// One step on `||w_st - target||^2`; returns the loss before the step.
    pub fn update(&mut self, x: &[f64], g: &[f64; CONTEXT_DIM], target: WeightPair) -> Result<f64> {
        let w = self.net.forward(&Self::input(x, g))?;
        let (loss, grad) = step_loss(&[w[0], w[1]], &target);
        self.net.backward_params(&grad)?;
        clip_grad_norm(&mut [&mut self.net], self.grad_clip);
        self.opt.step(&mut self.net);
        Ok(loss)
    }
}

/// `||w - t||^2` and its gradient in `w`.
pub fn step_loss(w: &WeightPair, t: &WeightPair) -> (f64, [f64; 2]) {
    let d = [w[0] - t[0], w[1] - t[1]];
    (d[0] * d[0] + d[1] * d[1], [2.0 * d[0], 2.0 * d[1]])
}

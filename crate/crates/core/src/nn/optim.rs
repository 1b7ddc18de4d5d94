use serde::{Deserialize, Serialize};

use super::DenseNet;
use crate::config::OptimizerKind;

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPS: f64 = 1e-8;

/// Per-network optimizer state. Adam keeps first/second moments shaped like
/// the parameters; plain gradient descent keeps none.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub kind: OptimizerKind,
    pub lr: f64,
    pub step: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl OptimizerState {
    pub fn new(kind: OptimizerKind, lr: f64, net: &DenseNet) -> Self {
        let n = match kind {
            OptimizerKind::Adam => net.params().len(),
            OptimizerKind::Sgd => 0,
        };
        Self {
            kind,
            lr,
            step: 0,
            m: vec![0.0; n],
            v: vec![0.0; n],
        }
    }

    pub fn adam(lr: f64, net: &DenseNet) -> Self {
        Self::new(OptimizerKind::Adam, lr, net)
    }

    pub fn sgd(lr: f64, net: &DenseNet) -> Self {
        Self::new(OptimizerKind::Sgd, lr, net)
    }

    /// Apply the accumulated gradients and clear them.
    pub fn step(&mut self, net: &mut DenseNet) {
        self.step += 1;
        let lr = self.lr;
        match self.kind {
            OptimizerKind::Sgd => {
                let DenseNet { params, grads, .. } = net;
                for (p, g) in params.iter_mut().zip(grads.iter()) {
                    *p -= lr * g;
                }
            }
            OptimizerKind::Adam => {
                assert_eq!(self.m.len(), net.params.len(), "optimizer built for another network");
                let t = self.step as i32;
                let c1 = 1.0 - BETA1.powi(t);
                let c2 = 1.0 - BETA2.powi(t);
                let DenseNet { params, grads, .. } = net;
                for i in 0..params.len() {
                    let g = grads[i];
                    self.m[i] = BETA1 * self.m[i] + (1.0 - BETA1) * g;
                    self.v[i] = BETA2 * self.v[i] + (1.0 - BETA2) * g * g;
                    let mh = self.m[i] / c1;
                    let vh = self.v[i] / c2;
                    params[i] -= lr * mh / (vh.sqrt() + EPS);
                }
            }
        }
        net.zero_grad();
    }
}

/// Scale the gradients of all `nets` jointly so their global L2 norm is at
/// most `max_norm`. Returns the norm before clipping. `max_norm <= 0`
/// disables clipping.
pub fn clip_grad_norm(nets: &mut [&mut DenseNet], max_norm: f64) -> f64 {
    let norm = nets
        .iter()
        .flat_map(|n| n.grads().iter())
        .map(|g| g * g)
        .sum::<f64>()
        .sqrt();
    if max_norm > 0.0 && norm > max_norm {
        let s = max_norm / norm;
        for n in nets.iter_mut() {
            n.grads_mut().iter_mut().for_each(|g| *g *= s);
        }
    }
    norm
}

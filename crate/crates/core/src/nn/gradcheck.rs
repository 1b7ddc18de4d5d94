//! Central finite-difference gradient check.
//!
//! The probe loss is `L(x) = c . f(x)` with a fixed random `c`, so every
//! output contributes. Only forward passes are used for the numerical side.

use rand::Rng as _;

use super::DenseNet;
use crate::error::Result;
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    /// `||analytic - numeric|| / (||analytic|| + ||numeric||)` over all
    /// parameters and inputs, worst case across probes.
    pub max_rel_error: f64,
    pub probes: usize,
}

fn probe_loss(net: &DenseNet, x: &[f64], c: &[f64]) -> Result<f64> {
    Ok(dot_probe(&net.predict(x)?, c))
}

fn dot_probe(y: &[f64], c: &[f64]) -> f64 {
    y.iter().zip(c).map(|(y, c)| y * c).sum()
}

fn rel_error(a: &[f64], n: &[f64]) -> f64 {
    let diff = a.iter().zip(n).map(|(a, n)| (a - n) * (a - n)).sum::<f64>().sqrt();
    let na = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nn = n.iter().map(|v| v * v).sum::<f64>().sqrt();
    if na + nn == 0.0 {
        0.0
    } else {
        diff / (na + nn)
    }
}

/// Check parameter and input gradients of `net` on `inputs` random inputs
/// drawn from U(-1, 1).
pub fn check_gradients(net: &DenseNet, inputs: usize, eps: f64, rng: &mut Rng) -> Result<GradCheck> {
    let mut worst: f64 = 0.0;
    let mut work = net.clone();
    let sites = net.param_sites();
    for _ in 0..inputs {
        let x: Vec<f64> = (0..net.input_size()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let c: Vec<f64> = (0..net.output_size()).map(|_| rng.gen_range(-1.0..1.0)).collect();

        work.zero_grad();
        work.forward(&x)?;
        let dx = work.backward(&c)?;
        let analytic: Vec<f64> = work.grads().iter().copied().chain(dx).collect();

        // Nudging one weight or bias moves a single pre-activation, so only
        // that unit and the layers after it are re-evaluated.
        let trace = net.layer_trace(&x)?;
        let mut numeric = Vec::with_capacity(analytic.len());
        for (l, i, o) in sites.iter().copied() {
            let (input, z) = &trace[l];
            let scale = i.map_or(1.0, |i| input[i]);
            let mut zp = z.clone();
            zp[o] = z[o] + eps * scale;
            let hi = dot_probe(&net.finish_from(l, &zp), &c);
            zp[o] = z[o] - eps * scale;
            let lo = dot_probe(&net.finish_from(l, &zp), &c);
            numeric.push((hi - lo) / (2.0 * eps));
        }
        let mut xp = x.clone();
        for i in 0..x.len() {
            xp[i] = x[i] + eps;
            let hi = probe_loss(net, &xp, &c)?;
            xp[i] = x[i] - eps;
            let lo = probe_loss(net, &xp, &c)?;
            xp[i] = x[i];
            numeric.push((hi - lo) / (2.0 * eps));
        }
        worst = worst.max(rel_error(&analytic, &numeric));
    }
    Ok(GradCheck {
        max_rel_error: worst,
        probes: inputs,
    })
}

//! Hierarchical dynamic weighting of the coverage and communication
//! objectives.
//!
//! Once per episode an actor maps smoothed completion statistics to a scalar
//! `alpha`, giving the episode weight `[alpha, 1 - alpha]`. Every slot a
//! softmax network maps the UAV's observation plus a global progress context
//! to a step weight. The two are mixed with a coefficient that grows with
//! the gap between coverage and communication progress, and the fused pair
//! scalarizes the two Q heads for action selection.
//!
//! All weight pairs live on the 2-simplex. [`normalize`] is the one
//! normalization used everywhere: negatives clamp to zero, then L1 scaling,
//! with `[0.5, 0.5]` when nothing is left.

pub mod episode;
pub mod step;

use serde::{Deserialize, Serialize};

use crate::config::WeightingConfig;

pub use episode::EpisodeActorCritic;
pub use step::StepWeightNet;

pub type WeightPair = [f64; 2];

pub const UNIFORM: WeightPair = [0.5, 0.5];

pub fn normalize(v: WeightPair) -> WeightPair {
    let a = v[0].max(0.0);
    let b = v[1].max(0.0);
    let s = a + b;
    if !(s > 0.0) || !s.is_finite() {
        return UNIFORM;
    }
    [a / s, 1.0 - a / s]
}

/// `(1 - coef) prev + coef outcome`.
pub fn update_ema(prev: f64, outcome: f64, coef: f64) -> f64 {
    (1.0 - coef) * prev + coef * outcome
}

/// Episode-level observation `[C_ema, R_ema, zeta, alpha_prev]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlobalEpisodeState {
    pub ema_cov: f64,
    pub ema_comm: f64,
    /// `(C_ema - R_ema + 1) / 2`
    pub zeta: f64,
    pub prev_alpha: f64,
}

impl GlobalEpisodeState {
    pub fn new(ema_cov: f64, ema_comm: f64, prev_alpha: f64) -> Self {
        Self {
            ema_cov,
            ema_comm,
            zeta: (ema_cov - ema_comm + 1.0) / 2.0,
            prev_alpha,
        }
    }

    pub fn to_vec(&self) -> [f64; 4] {
        [self.ema_cov, self.ema_comm, self.zeta, self.prev_alpha]
    }
}

/// `[C, R, 1 - C, 1 - R, alpha, 1 - alpha, C - R]`.
pub fn global_context(coverage: f64, comm: f64, alpha: f64) -> [f64; 7] {
    [
        coverage,
        comm,
        1.0 - coverage,
        1.0 - comm,
        alpha,
        1.0 - alpha,
        coverage - comm,
    ]
}

/// Stage-dependent episode reward: the coverage share is `betas[0]` below
/// `thresholds[0]` coverage, `betas[1]` up to `thresholds[1]`, `betas[2]`
/// beyond.
pub fn episode_base_reward(coverage: f64, comm: f64, betas: [f64; 3], thresholds: [f64; 2]) -> f64 {
    let b = if coverage < thresholds[0] {
        betas[0]
    } else if coverage < thresholds[1] {
        betas[1]
    } else {
        betas[2]
    };
    b * coverage + (1.0 - b) * comm
}

/// Self-supervised target for the step-level weight:
/// `normalize(l1 G + l2 b + l3 w_ep)` with `G` the normalized positive
/// rewards and `b` the normalized deficiencies `[1 - C, 1 - R]`.
pub fn step_target(r_cov: f64, r_comm: f64, coverage: f64, comm: f64, w_ep: WeightPair, lambda: [f64; 3]) -> WeightPair {
    let g = normalize([r_cov.max(0.0), r_comm.max(0.0)]);
    let b = normalize([1.0 - coverage, 1.0 - comm]);
    normalize([
        lambda[0] * g[0] + lambda[1] * b[0] + lambda[2] * w_ep[0],
        lambda[0] * g[1] + lambda[1] * b[1] + lambda[2] * w_ep[1],
    ])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixingParams {
    pub delta0: f64,
    pub beta: f64,
    pub min: f64,
    pub max: f64,
}

impl From<&WeightingConfig> for MixingParams {
    fn from(c: &WeightingConfig) -> Self {
        Self {
            delta0: c.delta0,
            beta: c.delta_beta,
            min: c.delta_min,
            max: c.delta_max,
        }
    }
}

impl Default for MixingParams {
    fn default() -> Self {
        (&WeightingConfig::default()).into()
    }
}

/// `clip(delta0 + beta |(1 - C) - (1 - R)|, min, max)`.
pub fn mixing_coefficient(coverage: f64, comm: f64, p: &MixingParams) -> f64 {
    let gap = ((1.0 - coverage) - (1.0 - comm)).abs();
    (p.delta0 + p.beta * gap).clamp(p.min, p.max)
}

/// `normalize((1 - delta) w_ep + delta w_st)` and the `delta` used.
pub fn fuse_weights(w_ep: WeightPair, w_st: WeightPair, coverage: f64, comm: f64, p: &MixingParams) -> (WeightPair, f64) {
    let delta = mixing_coefficient(coverage, comm, p);
    (mix(w_ep, w_st, delta), delta)
}

pub fn mix(w_ep: WeightPair, w_st: WeightPair, delta: f64) -> WeightPair {
    normalize([
        (1.0 - delta) * w_ep[0] + delta * w_st[0],
        (1.0 - delta) * w_ep[1] + delta * w_st[1],
    ])
}

/// Cross-episode bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightState {
    pub ema_cov: f64,
    pub ema_comm: f64,
    /// Weight used in the previous episode.
    pub prev_alpha: f64,
    pub episodes: u64,
}

impl WeightState {
    /// Zero EMAs and an uninformative previous weight.
    pub fn new(initial_alpha: f64) -> Self {
        Self {
            ema_cov: 0.0,
            ema_comm: 0.0,
            prev_alpha: initial_alpha,
            episodes: 0,
        }
    }

    pub fn global_state(&self) -> GlobalEpisodeState {
        GlobalEpisodeState::new(self.ema_cov, self.ema_comm, self.prev_alpha)
    }

    /// Fold in an episode's final completion ratios and the weight it used.
    pub fn finish_episode(&mut self, coverage: f64, comm: f64, alpha: f64, coef: f64) {
        self.ema_cov = update_ema(self.ema_cov, coverage, coef);
        self.ema_comm = update_ema(self.ema_comm, comm, coef);
        self.prev_alpha = alpha;
        self.episodes += 1;
    }
}

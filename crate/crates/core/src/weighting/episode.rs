//! Episode-level actor-critic over the scalar weight `alpha`.

use std::collections::VecDeque;

use rand_distr::{Distribution, Normal};

use super::GlobalEpisodeState;
use crate::config::{NetworkConfig, WeightingConfig};
use crate::error::Result;
use crate::nn::{clip_grad_norm, mse_loss, Activation, DenseNet, OptimizerState};
use crate::rng::Rng;

pub const STATE_DIM: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
struct Sample {
    state: [f64; STATE_DIM],
    alpha: f64,
    target: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AcLoss {
    pub critic: f64,
    /// `-mean V(s, actor(s))` after the last actor step.
    pub actor: f64,
}

/// Actor `s_ep -> alpha` (sigmoid output) and critic `(s_ep, alpha) -> V`.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeActorCritic {
    pub actor: DenseNet,
    pub critic: DenseNet,
    opt_actor: OptimizerState,
    opt_critic: OptimizerState,
    memory: VecDeque<Sample>,
    memory_size: usize,
    replays: usize,
    grad_clip: f64,
}

impl EpisodeActorCritic {
    pub fn new(net: &NetworkConfig, w: &WeightingConfig, rng: &mut Rng) -> Result<Self> {
        let actor = DenseNet::mlp(STATE_DIM, &net.actor_hidden, 1, Activation::Sigmoid, rng)?;
        let critic = DenseNet::mlp(STATE_DIM + 1, &net.critic_hidden, 1, Activation::Identity, rng)?;
        Ok(Self {
            opt_actor: OptimizerState::new(net.optimizer, net.weight_ac_lr, &actor),
            opt_critic: OptimizerState::new(net.optimizer, net.weight_ac_lr, &critic),
            actor,
            critic,
            memory: VecDeque::with_capacity(w.ac_memory),
            memory_size: w.ac_memory.max(1),
            replays: w.ac_replays.max(1),
            grad_clip: net.grad_clip,
        })
    }

    /// Deterministic actor output in (0, 1).
    pub fn alpha(&self, s: &GlobalEpisodeState) -> Result<f64> {
        Ok(self.actor.predict(&s.to_vec())?[0])
    }

    /// Actor output plus `N(0, sigma^2)` exploration, clipped to `clip`.
    pub fn explore(&self, s: &GlobalEpisodeState, sigma: f64, clip: [f64; 2], rng: &mut Rng) -> Result<f64> {
        let a = self.alpha(s)?;
        if sigma <= 0.0 {
            return Ok(a);
        }
        let noise = Normal::new(0.0, sigma).expect("finite sigma").sample(rng);
        Ok((a + noise).clamp(clip[0], clip[1]))
    }

    pub fn value(&self, s: &GlobalEpisodeState, alpha: f64) -> Result<f64> {
        Ok(self.critic.predict(&critic_input(&s.to_vec(), alpha))?[0])
    }

    /// Remember `(s, alpha, y)` and take `replays` critic and actor steps on
    /// the whole memory.
    pub fn update(&mut self, s: &GlobalEpisodeState, alpha: f64, target: f64) -> Result<AcLoss> {
        if self.memory.len() == self.memory_size {
            self.memory.pop_front();
        }
        self.memory.push_back(Sample {
            state: s.to_vec(),
            alpha,
            target,
        });
        let mut loss = AcLoss::default();
        for _ in 0..self.replays {
            loss.critic = self.critic_step()?;
            loss.actor = self.actor_step()?;
        }
        Ok(loss)
    }

    fn critic_step(&mut self) -> Result<f64> {
        let n = self.memory.len();
        let mut xs = Vec::with_capacity(n * (STATE_DIM + 1));
        let mut ys = Vec::with_capacity(n);
        for m in &self.memory {
            xs.extend_from_slice(&critic_input(&m.state, m.alpha));
            ys.push(m.target);
        }
        let pred = self.critic.forward_batch(&xs, n)?;
        let (loss, grad) = mse_loss(&pred, &ys)?;
        self.critic.backward_params(&grad)?;
        clip_grad_norm(&mut [&mut self.critic], self.grad_clip);
        self.opt_critic.step(&mut self.critic);
        Ok(loss)
    }

    fn actor_step(&mut self) -> Result<f64> {
        let states: Vec<[f64; STATE_DIM]> = self.memory.iter().map(|m| m.state).collect();
        let critic = &mut self.critic;
        let mut value = 0.0;
        let mut err = None;
        ascend(&mut self.actor, &mut self.opt_actor, self.grad_clip, &states, |s, alpha| {
            let x = critic_input(s, alpha);
            let v = match critic.forward(&x) {
                Ok(v) => v[0],
                Err(e) => {
                    err = Some(e);
                    return 0.0;
                }
            };
            value += v;
            match critic.backward(&[1.0]) {
                Ok(dx) => dx[STATE_DIM],
                Err(e) => {
                    err = Some(e);
                    0.0
                }
            }
        })?;
        // The critic only provides dV/dalpha here; its own gradients are not used.
        self.critic.zero_grad();
        if let Some(e) = err {
            return Err(e);
        }
        Ok(-value / states.len() as f64)
    }

    /// One ascent step on `mean V(s, actor(s))` given `dV/dalpha`, chained
    /// through the actor.
    pub fn ascend_actor(
        &mut self,
        states: &[[f64; STATE_DIM]],
        dv_dalpha: impl FnMut(&[f64; STATE_DIM], f64) -> f64,
    ) -> Result<()> {
        ascend(&mut self.actor, &mut self.opt_actor, self.grad_clip, states, dv_dalpha)
    }
}

fn ascend(
    actor: &mut DenseNet,
    opt: &mut OptimizerState,
    grad_clip: f64,
    states: &[[f64; STATE_DIM]],
    mut dv_dalpha: impl FnMut(&[f64; STATE_DIM], f64) -> f64,
) -> Result<()> {
    let n = states.len();
    let xs: Vec<f64> = states.iter().flatten().copied().collect();
    let alphas = actor.forward_batch(&xs, n)?;
    let upstream: Vec<f64> = states
        .iter()
        .zip(&alphas)
        .map(|(s, &a)| -dv_dalpha(s, a) / n as f64)
        .collect();
    actor.backward_params(&upstream)?;
    clip_grad_norm(&mut [actor], grad_clip);
    opt.step(actor);
    Ok(())
}

fn critic_input(s: &[f64; STATE_DIM], alpha: f64) -> [f64; STATE_DIM + 1] {
    [s[0], s[1], s[2], s[3], alpha]
}

/// `r_base - mu |alpha - alpha_prev|`.
pub fn critic_target(base_reward: f64, alpha: f64, prev_alpha: f64, mu: f64) -> f64 {
    base_reward - mu * (alpha - prev_alpha).abs()
}

/// Linearly annealed exploration scale for episode `k`.
pub fn exploration_sigma(w: &WeightingConfig, k: usize) -> f64 {
    if w.actor_noise_episodes == 0 {
        return w.actor_noise_final;
    }
    let f = (k as f64 / w.actor_noise_episodes as f64).min(1.0);
    w.actor_noise + (w.actor_noise_final - w.actor_noise) * f
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Stream};

    fn ac() -> EpisodeActorCritic {
        EpisodeActorCritic::new(&NetworkConfig::default(), &WeightingConfig::default(), &mut stream(3, Stream::NetInit, 0)).unwrap()
    }

    #[test]
    fn alpha_in_open_unit_interval() {
        let ac = ac();
        let mut rng = stream(3, Stream::ActorNoise, 0);
        for s in [
            GlobalEpisodeState::new(0.0, 0.0, 0.5),
            GlobalEpisodeState::new(1.0, 0.2, 0.99),
        ] {
            let a = ac.alpha(&s).unwrap();
            assert!(a > 0.0 && a < 1.0);
            assert_eq!(a, ac.alpha(&s).unwrap());
            let e = ac.explore(&s, 0.5, [0.01, 0.99], &mut rng).unwrap();
            assert!((0.01..=0.99).contains(&e));
        }
    }

    #[test]
    fn smoothing_penalty() {
        assert_eq!(critic_target(0.6, 0.4, 0.4, 0.1), 0.6);
        assert!((critic_target(0.6, 0.7, 0.4, 0.1) - 0.57).abs() < 1e-12);
    }

    #[test]
    fn critic_at_target_has_zero_loss() {
        let mut ac = ac();
        let s = GlobalEpisodeState::new(0.3, 0.2, 0.5);
        let v = ac.value(&s, 0.6).unwrap();
        let loss = ac.update(&s, 0.6, v).unwrap();
        // First replay sees an exact fit.
        let mut fresh = self::ac();
        fresh.memory.push_back(Sample { state: s.to_vec(), alpha: 0.6, target: v });
        assert_eq!(fresh.critic_step().unwrap(), 0.0);
        assert!(loss.critic.is_finite());
    }

    #[test]
    fn scripted_critic_pulls_alpha_toward_optimum() {
        // V(s, a) = -(a - 0.7)^2  =>  dV/da = -2 (a - 0.7)
        for start_bias in [-3.0, 3.0] {
            let mut ac = ac();
            let s = GlobalEpisodeState::new(0.4, 0.6, 0.5);
            let last = ac.actor.params().len() - 1;
            ac.actor.params_mut()[last] = start_bias;
            let before = ac.alpha(&s).unwrap();
            for _ in 0..50 {
                ac.ascend_actor(&[s.to_vec()], |_, a| -2.0 * (a - 0.7)).unwrap();
            }
            let after = ac.alpha(&s).unwrap();
            assert!((after - 0.7).abs() < (before - 0.7).abs(), "{before} -> {after}");
        }
    }

    #[test]
    fn critic_learns_constant_target() {
        let mut ac = ac();
        let s = GlobalEpisodeState::new(0.5, 0.5, 0.5);
        let mut last = f64::INFINITY;
        for _ in 0..200 {
            last = ac.update(&s, 0.5, 0.8).unwrap().critic;
        }
        assert!(last < 1e-4, "{last}");
        assert!((ac.value(&s, 0.5).unwrap() - 0.8).abs() < 1e-2);
    }

    #[test]
    fn sigma_anneals() {
        let w = WeightingConfig::default();
        assert_eq!(exploration_sigma(&w, 0), 0.1);
        assert!((exploration_sigma(&w, 150) - 0.055).abs() < 1e-12);
        assert!((exploration_sigma(&w, 300) - 0.01).abs() < 1e-15);
        assert!((exploration_sigma(&w, 1000) - 0.01).abs() < 1e-15);
    }
}

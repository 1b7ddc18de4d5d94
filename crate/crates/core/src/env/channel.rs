//! Rician block-fading air-to-ground channel and OFDMA rate.

use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::config::ScenarioConfig;
use crate::rng::Rng;

/// One channel realization between a UAV and a user.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelGain {
    /// Power gain |h|^2.
    pub power: f64,
}

impl ChannelGain {
    /// Amplitude |h|, the quantity compared against the QoS threshold.
    pub fn amplitude(&self) -> f64 {
        self.power.sqrt()
    }
}

/// Large-scale gain `ref_gain / (h^2 + d^2)^(K_ps / 2)` for horizontal
/// distance `horizontal` between UAV and user.
pub fn large_scale_gain(cfg: &ScenarioConfig, horizontal: f64) -> f64 {
    let d2 = cfg.altitude * cfg.altitude + horizontal * horizontal;
    cfg.ref_gain / d2.powf(cfg.path_loss_exp / 2.0)
}

/// `|sqrt(K/(K+1)) h_L + sqrt(1/(K+1)) h_N|^2` with `h_L = 1 + 0j` and the
/// scattered part `h_N = (n_re + j n_im)` given explicitly.
pub fn small_scale_power(rician_k: f64, n_re: f64, n_im: f64) -> f64 {
    let los = (rician_k / (rician_k + 1.0)).sqrt();
    let nlos = (1.0 / (rician_k + 1.0)).sqrt();
    let re = los + nlos * n_re;
    let im = nlos * n_im;
    re * re + im * im
}

/// Draw `|h~|^2` with `h_N ~ CN(0, 1)`.
pub fn draw_small_scale_power(rician_k: f64, rng: &mut Rng) -> f64 {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    small_scale_power(rician_k, s * re, s * im)
}

pub fn horizontal_distance(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).hypot(a.1 - b.1)
}

/// One fading draw for a UAV at `uav` and a user at `user` (ground
/// coordinates, m).
pub fn channel_gain(cfg: &ScenarioConfig, uav: (f64, f64), user: (f64, f64), rng: &mut Rng) -> ChannelGain {
    let beta = large_scale_gain(cfg, horizontal_distance(uav, user));
    ChannelGain {
        power: beta * draw_small_scale_power(cfg.rician_k, rng),
    }
}

/// Achievable rate on one subchannel, bit/s.
pub fn achievable_rate(power_gain: f64, cfg: &ScenarioConfig) -> f64 {
    cfg.subchannel_bandwidth() * (power_gain * cfg.tx_power / cfg.noise_power).ln_1p() / std::f64::consts::LN_2
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Stream};

    #[test]
    fn beta_directly_below() {
        let cfg = ScenarioConfig::default();
        let beta = large_scale_gain(&cfg, 0.0);
        assert!((beta - 2e-8).abs() < 1e-20);
        // Pure line of sight: K -> infinity, scattered part zero.
        assert!((small_scale_power(1e12, 0.0, 0.0) - 1.0).abs() < 1e-9);
        assert!((small_scale_power(1.0, 0.0, 0.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn far_users_lose_gain() {
        let cfg = ScenarioConfig::default();
        assert!(large_scale_gain(&cfg, 1e9) < 1e-20);
    }

    #[test]
    fn rate_reference_values() {
        let cfg = ScenarioConfig::default();
        assert_eq!(achievable_rate(0.0, &cfg), 0.0);
        let r = achievable_rate(2e-8, &cfg);
        // 1.6e6 * log2(1 + 360000), evaluated at 40 digits
        assert!((r / 29_532_226.221_555_87 - 1.0).abs() < 1e-9, "{r}");
        let mut wide = cfg.clone();
        wide.bandwidth *= 2.0;
        assert!((achievable_rate(2e-8, &wide) - 2.0 * r).abs() < 1e-6);
    }

    #[test]
    fn rician_mean_power_is_unit() {
        let mut rng = stream(11, Stream::Channel, 0);
        let n = 100_000;
        let mean: f64 = (0..n).map(|_| draw_small_scale_power(1.0, &mut rng)).sum::<f64>() / n as f64;
        assert!((mean - 1.0).abs() < 0.02, "{mean}");
    }
}

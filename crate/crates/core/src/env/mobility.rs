//! Gauss-Markov ground-user mobility.

use std::f64::consts::PI;

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::config::ScenarioConfig;
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserState {
    /// Position, m. `x` grows with the column index, `y` with the row index.
    pub x: f64,
    pub y: f64,
    /// Speed, m/s.
    pub speed: f64,
    /// Heading, rad. Not wrapped: the mean-reverting recursion is linear in it.
    pub heading: f64,
    /// Remaining upload demand, bits.
    pub queue: f64,
}

/// Advance one slot with explicit noise terms `w_v`, `w_theta`.
pub fn advance_user(user: &UserState, cfg: &ScenarioConfig, w_v: f64, w_theta: f64) -> UserState {
    let a = cfg.memory;
    let speed = (a * user.speed + (1.0 - a) * cfg.mean_speed + w_v).clamp(0.0, 3.0 * cfg.mean_speed);
    let heading = a * user.heading + (1.0 - a) * cfg.mean_heading + w_theta;

    let dt = cfg.slot_duration;
    let (w, h) = (cfg.area_width(), cfg.area_height());
    let mut x = user.x + speed * heading.cos() * dt;
    let mut y = user.y + speed * heading.sin() * dt;
    let mut heading = heading;

    if x < 0.0 {
        x = -x;
        heading = PI - heading;
    } else if x > w {
        x = 2.0 * w - x;
        heading = PI - heading;
    }
    if y < 0.0 {
        y = -y;
        heading = -heading;
    } else if y > h {
        y = 2.0 * h - y;
        heading = -heading;
    }

    UserState {
        // A single step never spans the area, but stay inside regardless.
        x: x.clamp(0.0, w),
        y: y.clamp(0.0, h),
        speed,
        heading,
        queue: user.queue,
    }
}

/// Advance one slot, drawing `w_v ~ N(0, speed_std^2)` and
/// `w_theta ~ N(0, heading_std^2)` from `rng`.
pub fn step_user_mobility(user: &UserState, cfg: &ScenarioConfig, rng: &mut Rng) -> UserState {
    let zv: f64 = rng.sample(StandardNormal);
    let zt: f64 = rng.sample(StandardNormal);
    advance_user(user, cfg, cfg.speed_std * zv, cfg.heading_std * zt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Stream};

    fn user(speed: f64, heading: f64) -> UserState {
        UserState {
            x: 500.0,
            y: 500.0,
            speed,
            heading,
            queue: 1.0,
        }
    }

    #[test]
    fn full_memory_without_noise_keeps_kinematics() {
        let mut cfg = ScenarioConfig::default();
        cfg.memory = 1.0;
        let u = user(1.1, 0.3);
        let n = advance_user(&u, &cfg, 0.0, 0.0);
        assert_eq!(n.speed, 1.1);
        assert_eq!(n.heading, 0.3);
    }

    #[test]
    fn zero_memory_snaps_to_means() {
        let mut cfg = ScenarioConfig::default();
        cfg.memory = 0.0;
        let n = advance_user(&user(1.4, 0.1), &cfg, 0.0, 0.0);
        assert_eq!(n.speed, 0.6);
        assert_eq!(n.heading, std::f64::consts::FRAC_PI_2);
    }

    #[test]
    fn recursion_value() {
        let cfg = ScenarioConfig::default();
        let n = advance_user(&user(1.0, cfg.mean_heading), &cfg, 0.0, 0.0);
        assert!((n.speed - 0.96).abs() < 1e-12);
    }

    #[test]
    fn speed_clamped() {
        let cfg = ScenarioConfig::default();
        assert_eq!(advance_user(&user(0.0, 0.0), &cfg, -5.0, 0.0).speed, 0.0);
        assert_eq!(advance_user(&user(1.8, 0.0), &cfg, 5.0, 0.0).speed, 3.0 * cfg.mean_speed);
    }

    #[test]
    fn reflects_at_boundary() {
        let mut cfg = ScenarioConfig::default();
        cfg.memory = 1.0;
        // Heading straight at the y = 0 edge, 1 m away, moving 3 m.
        let u = UserState {
            x: 10.0,
            y: 1.0,
            speed: 0.6,
            heading: -std::f64::consts::FRAC_PI_2,
            queue: 0.0,
        };
        let n = advance_user(&u, &cfg, 0.0, 0.0);
        assert!((n.y - 2.0).abs() < 1e-9, "{}", n.y);
        assert!((n.x - 10.0).abs() < 1e-9);
        assert!((n.heading - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn stays_in_area_under_noise() {
        let mut cfg = ScenarioConfig::default();
        cfg.grid_h = 2;
        cfg.grid_w = 2;
        cfg.heading_std = 2.0;
        cfg.speed_std = 1.0;
        let mut rng = stream(3, Stream::Mobility, 0);
        let mut u = user(0.6, 0.0);
        u.x = 1.0;
        u.y = 199.0;
        for _ in 0..10_000 {
            u = step_user_mobility(&u, &cfg, &mut rng);
            assert!((0.0..=200.0).contains(&u.x) && (0.0..=200.0).contains(&u.y));
            assert!(u.speed >= 0.0);
        }
    }
}

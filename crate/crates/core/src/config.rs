//! Experiment configuration.
//!
//! The on-disk format is TOML with one table per section (`scenario`,
//! `network`, `agent`, `weighting`, `training`). Every key has a built-in
//! default, so an empty file yields the reference setup: 6 UAVs and 50 users
//! over a 10x10 grid of 100 m cells. Dotted `section.key=value` overrides are
//! applied after the file. Unknown keys and type mismatches are rejected with
//! the offending key path.

use std::f64::consts::FRAC_PI_2;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use toml::{Table, Value};

use crate::error::{Error, Result};

/// How an episode is judged successful.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuccessMode {
    /// `C >= coverage_threshold` and `R >= comm_threshold`.
    Thresholds,
    /// Every cell captured and every queue drained.
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub grid_h: usize,
    pub grid_w: usize,
    /// Cell side length, m.
    pub cell_side: f64,
    pub uav_count: usize,
    pub user_count: usize,
    /// OFDMA subchannels per UAV; also the per-UAV service cap.
    pub subchannels: usize,
    /// Flight altitude, m.
    pub altitude: f64,
    /// Cruise speed, m/s. Informational: one cell per slot is always reachable.
    pub uav_speed: f64,
    /// Camera field of view (both axes), degrees.
    pub fov_deg: f64,
    /// Total bandwidth, Hz.
    pub bandwidth: f64,
    /// Transmit power, W.
    pub tx_power: f64,
    /// Noise power, W.
    pub noise_power: f64,
    pub path_loss_exp: f64,
    pub rician_k: f64,
    /// Channel power gain at 1 m.
    pub ref_gain: f64,
    /// QoS threshold on the channel amplitude |h|.
    pub gain_threshold: f64,
    /// Initial queue per user, bits.
    pub init_demand: f64,
    /// Slot length t_f, s.
    pub slot_duration: f64,
    pub decision_time: f64,
    pub capture_time: f64,
    /// Upload duration within a slot, s.
    pub comm_time: f64,
    /// Propulsion power, W.
    pub prop_power: f64,
    /// Per-UAV energy budget, J.
    pub energy_budget: f64,
    pub coverage_threshold: f64,
    pub comm_threshold: f64,
    pub success_mode: SuccessMode,
    /// Gauss-Markov mean speed, m/s.
    pub mean_speed: f64,
    /// Gauss-Markov mean heading, rad.
    pub mean_heading: f64,
    /// Gauss-Markov memory factor.
    pub memory: f64,
    pub speed_std: f64,
    pub heading_std: f64,
    pub rng_seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            grid_h: 10,
            grid_w: 10,
            cell_side: 100.0,
            uav_count: 6,
            user_count: 50,
            subchannels: 10,
            altitude: 50.0,
            uav_speed: 20.0,
            fov_deg: 90.0,
            bandwidth: 16e6,
            tx_power: 0.18,
            noise_power: 1e-14,
            path_loss_exp: 2.0,
            rician_k: 1.0,
            ref_gain: 5e-5,
            gain_threshold: 2e-5,
            init_demand: 100e6,
            slot_duration: 5.0,
            decision_time: 0.01,
            capture_time: 0.1,
            comm_time: 0.75,
            prop_power: 497.25,
            energy_budget: 250_000.0,
            coverage_threshold: 0.8,
            comm_threshold: 0.98,
            success_mode: SuccessMode::Thresholds,
            mean_speed: 0.6,
            mean_heading: FRAC_PI_2,
            memory: 0.9,
            speed_std: 0.1,
            heading_std: 0.2,
            rng_seed: 0,
        }
    }
}

impl ScenarioConfig {
    pub fn cell_count(&self) -> usize {
        self.grid_h * self.grid_w
    }

    /// Area extent along x (columns), m.
    pub fn area_width(&self) -> f64 {
        self.grid_w as f64 * self.cell_side
    }

    /// Area extent along y (rows), m.
    pub fn area_height(&self) -> f64 {
        self.grid_h as f64 * self.cell_side
    }

    pub fn subchannel_bandwidth(&self) -> f64 {
        self.bandwidth / self.subchannels as f64
    }

    /// Ground footprint side of the camera, `2 h tan(fov / 2)`.
    pub fn footprint_side(&self) -> f64 {
        2.0 * self.altitude * (self.fov_deg.to_radians() / 2.0).tan()
    }

    pub fn slot_energy(&self) -> f64 {
        self.prop_power * self.slot_duration
    }

    /// Number of full slots a UAV can fly on its budget.
    pub fn max_slots(&self) -> usize {
        (self.energy_budget / self.slot_energy()).floor() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("cell_side", self.cell_side),
            ("altitude", self.altitude),
            ("uav_speed", self.uav_speed),
            ("fov_deg", self.fov_deg),
            ("bandwidth", self.bandwidth),
            ("tx_power", self.tx_power),
            ("noise_power", self.noise_power),
            ("path_loss_exp", self.path_loss_exp),
            ("rician_k", self.rician_k),
            ("ref_gain", self.ref_gain),
            ("gain_threshold", self.gain_threshold),
            ("init_demand", self.init_demand),
            ("slot_duration", self.slot_duration),
            ("decision_time", self.decision_time),
            ("capture_time", self.capture_time),
            ("comm_time", self.comm_time),
            ("prop_power", self.prop_power),
            ("mean_speed", self.mean_speed),
        ];
        for (key, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(
                    format!("scenario.{key}"),
                    format!("must be finite and > 0, got {v}"),
                ));
            }
        }
        for (key, v) in [
            ("grid_h", self.grid_h),
            ("grid_w", self.grid_w),
            ("uav_count", self.uav_count),
            ("subchannels", self.subchannels),
        ] {
            if v == 0 {
                return Err(Error::config(format!("scenario.{key}"), "must be >= 1"));
            }
        }
        if self.fov_deg >= 180.0 {
            return Err(Error::config("scenario.fov_deg", "must be < 180"));
        }
        if self.uav_count > self.cell_count() {
            return Err(Error::config(
                "scenario.uav_count",
                format!(
                    "{} UAVs do not fit on {} cells",
                    self.uav_count,
                    self.cell_count()
                ),
            ));
        }
        if self.decision_time + self.capture_time + self.comm_time > self.slot_duration {
            return Err(Error::config(
                "scenario.slot_duration",
                "decision_time + capture_time + comm_time exceeds the slot",
            ));
        }
        if !(self.energy_budget.is_finite() && self.energy_budget >= 0.0) {
            return Err(Error::config("scenario.energy_budget", "must be >= 0"));
        }
        for (key, v) in [
            ("coverage_threshold", self.coverage_threshold),
            ("comm_threshold", self.comm_threshold),
        ] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::config(
                    format!("scenario.{key}"),
                    format!("must lie in (0, 1], got {v}"),
                ));
            }
        }
        if !(0.0..=1.0).contains(&self.memory) {
            return Err(Error::config("scenario.memory", "must lie in [0, 1]"));
        }
        for (key, v) in [
            ("speed_std", self.speed_std),
            ("heading_std", self.heading_std),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::config(format!("scenario.{key}"), "must be >= 0"));
            }
        }
        if !self.mean_heading.is_finite() {
            return Err(Error::config("scenario.mean_heading", "must be finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Adam,
    Sgd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkConfig {
    pub backbone_hidden: Vec<usize>,
    pub head_hidden: Vec<usize>,
    pub actor_hidden: Vec<usize>,
    pub critic_hidden: Vec<usize>,
    pub step_hidden: Vec<usize>,
    pub optimizer: OptimizerKind,
    pub dqn_lr: f64,
    pub weight_ac_lr: f64,
    pub step_lr: f64,
    /// Global gradient-norm clip; 0 disables.
    pub grad_clip: f64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            backbone_hidden: vec![128, 128],
            head_hidden: vec![64],
            actor_hidden: vec![64, 64],
            critic_hidden: vec![64, 64],
            step_hidden: vec![64, 64],
            optimizer: OptimizerKind::Adam,
            dqn_lr: 1e-3,
            weight_ac_lr: 1e-3,
            step_lr: 5e-4,
            grad_clip: 10.0,
        }
    }
}

/// Which next action the per-head TD targets bootstrap from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetMode {
    /// Each head maximizes its own target values independently.
    PerHead,
    /// Both heads evaluate the action greedy under the stored fused weight.
    Scalarized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AgentConfig {
    pub gamma: f64,
    pub buffer_capacity: usize,
    pub batch_size: usize,
    /// Updates start once the buffer holds this many transitions.
    pub learn_start: usize,
    /// Hard target sync period, in updates.
    pub target_period: usize,
    pub epsilon_horizon: usize,
    pub epsilon_floor: f64,
    pub target_mode: TargetMode,
    /// One network and buffer for all UAVs.
    pub shared_network: bool,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            gamma: 0.9,
            buffer_capacity: 8000,
            batch_size: 64,
            learn_start: 500,
            target_period: 5,
            epsilon_horizon: 7500,
            epsilon_floor: 0.0025,
            target_mode: TargetMode::PerHead,
            shared_network: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WeightingConfig {
    /// Softmax temperature of the step-level weight net.
    pub tau: f64,
    pub ema: f64,
    pub delta0: f64,
    pub delta_beta: f64,
    pub delta_min: f64,
    pub delta_max: f64,
    /// Mixing of reward, deficiency and episode prior in the step target.
    pub lambda: [f64; 3],
    /// Penalty on episode-to-episode weight changes in the critic target.
    pub smoothing_penalty: f64,
    pub stage_betas: [f64; 3],
    pub stage_thresholds: [f64; 2],
    pub actor_noise: f64,
    pub actor_noise_final: f64,
    /// Episodes over which the actor noise anneals.
    pub actor_noise_episodes: usize,
    pub actor_clip: [f64; 2],
    pub ac_memory: usize,
    pub ac_replays: usize,
    /// alpha used as the "previous" weight before the first episode.
    pub initial_alpha: f64,
    /// `[w_cov, w_comm]` of the static-weight baseline.
    pub static_weight: [f64; 2],
}

impl Default for WeightingConfig {
    fn default() -> Self {
        Self {
            tau: 0.5,
            ema: 0.25,
            delta0: 0.45,
            delta_beta: 0.20,
            delta_min: 0.15,
            delta_max: 0.45,
            lambda: [0.4, 0.4, 0.2],
            smoothing_penalty: 0.1,
            stage_betas: [0.7, 0.5, 0.3],
            stage_thresholds: [0.5, 0.8],
            actor_noise: 0.1,
            actor_noise_final: 0.01,
            actor_noise_episodes: 300,
            actor_clip: [0.01, 0.99],
            ac_memory: 32,
            ac_replays: 4,
            initial_alpha: 0.5,
            static_weight: [0.5, 0.5],
        }
    }
}

impl WeightingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0) {
            return Err(Error::config("weighting.tau", "must be > 0"));
        }
        if !(0.0..=1.0).contains(&self.ema) {
            return Err(Error::config("weighting.ema", "must lie in [0, 1]"));
        }
        if !(0.0 <= self.delta_min && self.delta_min <= self.delta_max && self.delta_max <= 1.0) {
            return Err(Error::config(
                "weighting.delta_min",
                "need 0 <= delta_min <= delta_max <= 1",
            ));
        }
        if self.lambda.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
            return Err(Error::config("weighting.lambda", "entries must be >= 0"));
        }
        if self.stage_betas.iter().any(|b| !(0.0..=1.0).contains(b)) {
            return Err(Error::config(
                "weighting.stage_betas",
                "entries must lie in [0, 1]",
            ));
        }
        if self.stage_thresholds[0] > self.stage_thresholds[1] {
            return Err(Error::config(
                "weighting.stage_thresholds",
                "must be non-decreasing",
            ));
        }
        let [lo, hi] = self.actor_clip;
        if !(0.0 < lo && lo < hi && hi < 1.0) {
            return Err(Error::config(
                "weighting.actor_clip",
                "need 0 < lo < hi < 1",
            ));
        }
        if !(0.0..=1.0).contains(&self.initial_alpha) {
            return Err(Error::config(
                "weighting.initial_alpha",
                "must lie in [0, 1]",
            ));
        }
        let [a, b] = self.static_weight;
        if !(a >= 0.0 && b >= 0.0 && (a + b - 1.0).abs() <= 1e-9) {
            return Err(Error::config(
                "weighting.static_weight",
                "must be non-negative and sum to 1",
            ));
        }
        if self.ac_memory == 0 {
            return Err(Error::config("weighting.ac_memory", "must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingConfig {
    pub episodes: usize,
    /// Greedy evaluation every this many training episodes; 0 disables.
    pub eval_interval: usize,
    pub eval_episodes: usize,
    pub seeds: Vec<u64>,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            episodes: 300,
            eval_interval: 10,
            eval_episodes: 3,
            seeds: vec![0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub scenario: ScenarioConfig,
    pub network: NetworkConfig,
    pub agent: AgentConfig,
    pub weighting: WeightingConfig,
    pub training: TrainingConfig,
}

impl Config {
    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        self.weighting.validate()?;
        let a = &self.agent;
        if !(0.0..=1.0).contains(&a.gamma) {
            return Err(Error::config("agent.gamma", "must lie in [0, 1]"));
        }
        for (key, v) in [
            ("agent.buffer_capacity", a.buffer_capacity),
            ("agent.batch_size", a.batch_size),
            ("agent.target_period", a.target_period),
        ] {
            if v == 0 {
                return Err(Error::config(key, "must be >= 1"));
            }
        }
        if !(0.0..=1.0).contains(&a.epsilon_floor) {
            return Err(Error::config("agent.epsilon_floor", "must lie in [0, 1]"));
        }
        let n = &self.network;
        for (key, v) in [
            ("network.dqn_lr", n.dqn_lr),
            ("network.weight_ac_lr", n.weight_ac_lr),
            ("network.step_lr", n.step_lr),
            ("network.grad_clip", n.grad_clip),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::config(key, "must be >= 0"));
            }
        }
        for (key, sizes) in [
            ("network.backbone_hidden", &n.backbone_hidden),
            ("network.head_hidden", &n.head_hidden),
            ("network.actor_hidden", &n.actor_hidden),
            ("network.critic_hidden", &n.critic_hidden),
            ("network.step_hidden", &n.step_hidden),
        ] {
            if sizes.contains(&0) {
                return Err(Error::config(key, "layer sizes must be >= 1"));
            }
        }
        if self.training.seeds.is_empty() {
            return Err(Error::config("training.seeds", "need at least one seed"));
        }
        Ok(())
    }

    /// Parse TOML text, apply dotted overrides, validate.
    pub fn from_toml_str(text: &str, overrides: &[String]) -> Result<Self> {
        let user: Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::config("<file>", e.message().to_string()))?;
        let mut merged = Self::default().to_table();
        merge_checked(&mut merged, user, "")?;
        for ov in overrides {
            apply_override(&mut merged, ov)?;
        }
        let config: Config = Value::Table(merged)
            .try_into()
            .map_err(|e: toml::de::Error| Error::config("<config>", e.message().to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?,
            None => String::new(),
        };
        Self::from_toml_str(&text, overrides)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config always serializes")
    }

    fn to_table(&self) -> Table {
        match Value::try_from(self).expect("config always serializes") {
            Value::Table(t) => t,
            _ => unreachable!(),
        }
    }

    /// Hex SHA-256 of the resolved TOML echo.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_toml_string().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn join_key(prefix: &str, key: &str) -> String {
    if prefix.is_empty() {
        key.to_string()
    } else {
        format!("{prefix}.{key}")
    }
}

fn type_name(v: &Value) -> &'static str {
    match v {
        Value::String(_) => "string",
        Value::Integer(_) => "integer",
        Value::Float(_) => "float",
        Value::Boolean(_) => "boolean",
        Value::Datetime(_) => "datetime",
        Value::Array(_) => "array",
        Value::Table(_) => "table",
    }
}

/// Coerce `new` to the type of `old`, or fail naming `key`.
fn coerce(old: &Value, new: Value, key: &str) -> Result<Value> {
    match (old, new) {
        (Value::Float(_), Value::Integer(i)) => Ok(Value::Float(i as f64)),
        (Value::Array(olds), Value::Array(news)) => {
            let Some(proto) = olds.first() else {
                return Ok(Value::Array(news));
            };
            news.into_iter()
                .enumerate()
                .map(|(i, v)| coerce(proto, v, &format!("{key}[{i}]")))
                .collect::<Result<Vec<_>>>()
                .map(Value::Array)
        }
        (old, new) if std::mem::discriminant(old) == std::mem::discriminant(&new) => Ok(new),
        (old, new) => Err(Error::config(
            key,
            format!("expected {}, got {}", type_name(old), type_name(&new)),
        )),
    }
}

fn merge_checked(base: &mut Table, user: Table, prefix: &str) -> Result<()> {
    for (k, v) in user {
        let key = join_key(prefix, &k);
        let Some(slot) = base.get_mut(&k) else {
            return Err(Error::config(key, "unknown key"));
        };
        match (slot, v) {
            (Value::Table(b), Value::Table(u)) => merge_checked(b, u, &key)?,
            (slot, v) => *slot = coerce(slot, v, &key)?,
        }
    }
    Ok(())
}

fn apply_override(base: &mut Table, spec: &str) -> Result<()> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::config(spec, "override must be `key=value`"))?;
    let path = path.trim();
    let raw = raw.trim();
    let value = parse_override_value(raw);
    let mut parts = path.split('.').peekable();
    let mut table = base;
    let mut walked = String::new();
    while let Some(part) = parts.next() {
        walked = join_key(&walked, part);
        let Some(slot) = table.get_mut(part) else {
            return Err(Error::config(walked, "unknown key"));
        };
        if parts.peek().is_none() {
            if slot.is_table() {
                return Err(Error::config(walked, "cannot override a whole section"));
            }
            *slot = coerce(slot, value, &walked)?;
            return Ok(());
        }
        match slot {
            Value::Table(t) => table = t,
            _ => return Err(Error::config(walked, "not a section")),
        }
    }
    Err(Error::config(path, "empty key"))
}

fn parse_override_value(raw: &str) -> Value {
    format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_yields_reference_defaults() {
        let c = Config::from_toml_str("", &[]).unwrap();
        assert_eq!(c, Config::default());
        let s = &c.scenario;
        assert_eq!((s.uav_count, s.user_count, s.grid_h, s.grid_w), (6, 50, 10, 10));
        assert_eq!(s.bandwidth, 16e6);
        assert_eq!(s.coverage_threshold, 0.8);
        assert_eq!(s.comm_threshold, 0.98);
        assert_eq!(c.agent.gamma, 0.9);
        assert_eq!(c.agent.buffer_capacity, 8000);
        assert_eq!(c.agent.target_period, 5);
        assert_eq!(c.weighting.ema, 0.25);
        assert_eq!(c.weighting.tau, 0.5);
        assert_eq!(
            (c.network.dqn_lr, c.network.weight_ac_lr, c.network.step_lr),
            (1e-3, 1e-3, 5e-4)
        );
        assert_eq!(c.training.episodes, 300);
        // 5000 Mbit aggregate demand.
        assert_eq!(s.init_demand * s.user_count as f64, 5e9);
    }

    #[test]
    fn footprint_matches_cell_side() {
        let s = ScenarioConfig::default();
        assert!((s.footprint_side() - 100.0).abs() < 1e-9);
    }

    #[test]
    fn grid_override_changes_only_grid() {
        let c = Config::from_toml_str(
            "",
            &["scenario.grid_h=6".into(), "scenario.grid_w=6".into()],
        )
        .unwrap();
        let mut expected = Config::default();
        expected.scenario.grid_h = 6;
        expected.scenario.grid_w = 6;
        assert_eq!(c, expected);
    }

    #[test]
    fn out_of_range_threshold_rejected() {
        let err = Config::from_toml_str("[scenario]\ncoverage_threshold = 1.5\n", &[]).unwrap_err();
        match err {
            Error::Config { key, .. } => assert_eq!(key, "scenario.coverage_threshold"),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn static_weight_on_simplex() {
        let c = Config::from_toml_str("", &["weighting.static_weight=[1.0, 0.0]".into()]).unwrap();
        assert_eq!(c.weighting.static_weight, [1.0, 0.0]);
        for bad in ["[0.7, 0.7]", "[1.5, -0.5]"] {
            let err = Config::from_toml_str("", &[format!("weighting.static_weight={bad}")]).unwrap_err();
            assert!(matches!(err, Error::Config { ref key, .. } if key == "weighting.static_weight"), "{err}");
        }
    }

    #[test]
    fn unknown_key_named() {
        let err = Config::from_toml_str("[agent]\ngama = 0.5\n", &[]).unwrap_err();
        assert!(matches!(err, Error::Config { ref key, .. } if key == "agent.gama"), "{err}");
        let err = Config::from_toml_str("", &["nope.x=1".into()]).unwrap_err();
        assert!(matches!(err, Error::Config { ref key, .. } if key == "nope"), "{err}");
    }

    #[test]
    fn type_mismatch_named() {
        let err = Config::from_toml_str("[scenario]\ngrid_h = \"ten\"\n", &[]).unwrap_err();
        assert!(matches!(err, Error::Config { ref key, .. } if key == "scenario.grid_h"), "{err}");
        let err = Config::from_toml_str("", &["network.step_hidden=[1, true]".into()]).unwrap_err();
        assert!(
            matches!(err, Error::Config { ref key, .. } if key == "network.step_hidden[1]"),
            "{err}"
        );
    }

    #[test]
    fn integer_promotes_to_float() {
        let c = Config::from_toml_str("[scenario]\naltitude = 60\n", &[]).unwrap();
        assert_eq!(c.scenario.altitude, 60.0);
    }

    #[test]
    fn enum_override() {
        let c = Config::from_toml_str("", &["scenario.success_mode=full".into()]).unwrap();
        assert_eq!(c.scenario.success_mode, SuccessMode::Full);
        assert!(Config::from_toml_str("", &["scenario.success_mode=partial".into()]).is_err());
    }

    #[test]
    fn too_many_uavs_rejected() {
        let err = Config::from_toml_str(
            "",
            &["scenario.grid_h=2".into(), "scenario.grid_w=2".into()],
        )
        .unwrap_err();
        assert!(matches!(err, Error::Config { ref key, .. } if key == "scenario.uav_count"));
    }

    #[test]
    fn resolved_echo_round_trips() {
        let c = Config::from_toml_str(
            "[weighting]\nlambda = [0.5, 0.3, 0.2]\n",
            &["scenario.rng_seed=17".into(), "scenario.mean_heading=0.3".into()],
        )
        .unwrap();
        let echo = c.to_toml_string();
        let back = Config::from_toml_str(&echo, &[]).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
    }
}

//! Experiment driver: wires the simulator to the Q-learners and the weight
//! hierarchy, runs training and greedy evaluation episodes, and writes
//! metrics and checkpoints.

pub mod metrics;
pub mod validate;

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::agent::{encode_local_state, epsilon, local_state_dim, select_action, MultiHeadQNet, ReplayBuffer, Transition};
use crate::config::Config;
use crate::env::{step_rewards, Action, Status, World, ACTION_COUNT};
use crate::error::{Error, Result};
use crate::nn::gradcheck::check_gradients;
use crate::nn::DenseNet;
use crate::rng::{stream, Rng, Stream};
use crate::weighting::episode::{critic_target, exploration_sigma};
use crate::weighting::{
    episode_base_reward, fuse_weights, global_context, step_target, EpisodeActorCritic, MixingParams, StepWeightNet,
    WeightPair, WeightState, UNIFORM,
};

pub use metrics::{aggregate, export_plots, first_threshold_episode, metrics_csv, parse_metrics, read_metrics, MetricsRow, Summary};
pub use validate::{validate_env, EnvReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Episode actor-critic plus step network, fused.
    Hdwdrl,
    /// Episode weight pinned to uniform.
    NoEac,
    /// Episode weight only.
    NoSws,
    /// Uniform weight throughout.
    StaticWeight,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Hdwdrl, Variant::NoEac, Variant::NoSws, Variant::StaticWeight];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Hdwdrl => "hdwdrl",
            Variant::NoEac => "no_eac",
            Variant::NoSws => "no_sws",
            Variant::StaticWeight => "static_weight",
        }
    }

    fn uses_actor_critic(self) -> bool {
        matches!(self, Variant::Hdwdrl | Variant::NoSws)
    }

    fn uses_step_net(self) -> bool {
        matches!(self, Variant::Hdwdrl | Variant::NoEac)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s.to_ascii_lowercase().replace('-', "_"))
            .ok_or_else(|| {
                Error::Usage(format!(
                    "unknown variant {s:?}; expected one of hdwdrl, no_eac, no_sws, static_weight"
                ))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Train,
    Eval,
}

impl Phase {
    pub fn name(self) -> &'static str {
        match self {
            Phase::Train => "train",
            Phase::Eval => "eval",
        }
    }
}

/// One variant trained over the configured seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub config: Config,
    pub variant: Variant,
    /// Where metrics, summary and checkpoints go; nothing is written when
    /// `None`.
    pub output: Option<PathBuf>,
}

impl ExperimentSpec {
    pub fn new(config: Config, variant: Variant) -> Self {
        Self {
            config,
            variant,
            output: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.config.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeStats {
    pub phase: Phase,
    /// Training episode index, or for evaluation the number of training
    /// episodes completed beforehand.
    pub k: usize,
    /// Position within an evaluation block; 0 for training.
    pub index: usize,
    pub coverage: f64,
    pub comm: f64,
    pub slots: usize,
    pub success: bool,
    /// Propulsion energy summed over UAVs, J.
    pub energy: f64,
    pub alpha: f64,
    pub mean_delta: f64,
    pub mean_w_cov: f64,
    pub loss_cov: f64,
    pub loss_comm: f64,
    pub loss_step: f64,
    pub loss_critic: f64,
    pub loss_actor: f64,
    pub epsilon: f64,
    pub wall_secs: f64,
}

/// Everything one (variant, seed) job produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunLog {
    pub seed: u64,
    pub variant: Variant,
    pub episodes: Vec<EpisodeStats>,
    /// Slots that passed the per-slot constraint audit.
    pub audited_slots: u64,
}

impl RunLog {
    pub fn training(&self) -> impl Iterator<Item = &EpisodeStats> {
        self.episodes.iter().filter(|e| e.phase == Phase::Train)
    }

    pub fn evaluation(&self) -> impl Iterator<Item = &EpisodeStats> {
        self.episodes.iter().filter(|e| e.phase == Phase::Eval)
    }
}

/// Emitted after each completed episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Progress {
    pub seed: u64,
    pub variant: Variant,
    pub episodes: usize,
    pub stats: EpisodeStats,
}

impl fmt::Display for Progress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = &self.stats;
        write!(
            f,
            "{} seed={} {} {}/{} C={:.3} R={:.3} T={} success={} alpha={:.3} eps={:.4}",
            self.variant,
            self.seed,
            s.phase.name(),
            s.k + usize::from(s.phase == Phase::Train),
            self.episodes,
            s.coverage,
            s.comm,
            s.slots,
            s.success,
            s.alpha,
            s.epsilon
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Learner {
    qnet: MultiHeadQNet,
    buffer: ReplayBuffer,
    step_net: StepWeightNet,
}

#[derive(Debug, Clone)]
struct Pending {
    state: Vec<f64>,
    action: usize,
    r_cov: f64,
    r_comm: f64,
    weight: WeightPair,
}

impl Pending {
    fn complete(self, next_state: Vec<f64>, next_mask: [bool; ACTION_COUNT], terminal: bool) -> Transition {
        Transition {
            state: self.state,
            action: self.action,
            r_cov: self.r_cov,
            r_comm: self.r_comm,
            next_state,
            terminal,
            next_mask,
            weight: self.weight,
        }
    }
}

struct Decision {
    uav: usize,
    state: Vec<f64>,
    action: usize,
    weight: WeightPair,
}

#[derive(Default)]
struct Mean {
    sum: f64,
    n: usize,
}

impl Mean {
    fn add(&mut self, v: f64) {
        self.sum += v;
        self.n += 1;
    }

    fn get(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.sum / self.n as f64
        }
    }
}

/// Learning state for one (config, variant, seed) job.
#[derive(Debug, Clone, PartialEq)]
pub struct Trainer {
    cfg: Config,
    variant: Variant,
    seed: u64,
    learners: Vec<Learner>,
    ac: EpisodeActorCritic,
    weights: WeightState,
    mixing: MixingParams,
    /// Environment slots seen in training; drives the epsilon schedule.
    env_slots: u64,
    episodes_done: usize,
    audited_slots: u64,
    explore_rng: Rng,
    replay_rng: Rng,
    noise_rng: Rng,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: u32,
    pub config_hash: String,
    pub variant: Variant,
    pub seed: u64,
    pub episodes: usize,
    pub env_slots: u64,
    pub epsilon: f64,
    pub td_updates: Vec<u64>,
    pub learners: usize,
    pub weights: WeightState,
}

const MANIFEST_FORMAT: u32 = 1;

impl Trainer {
    pub fn new(cfg: &Config, variant: Variant, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let sc = &cfg.scenario;
        let dim = local_state_dim(sc.uav_count, sc.subchannels);
        let count = if cfg.agent.shared_network { 1 } else { sc.uav_count };
        let mut learners = Vec::with_capacity(count);
        for l in 0..count as u64 {
            let qnet = MultiHeadQNet::from_config(
                dim,
                &cfg.network,
                cfg.agent.target_period,
                &mut stream(seed, Stream::NetInit, l),
            )?;
            let step_net = StepWeightNet::new(
                dim,
                &cfg.network,
                &cfg.weighting,
                &mut stream(seed, Stream::NetInit, 1000 + l),
            )?;
            learners.push(Learner {
                qnet,
                buffer: ReplayBuffer::new(cfg.agent.buffer_capacity),
                step_net,
            });
        }
        let ac = EpisodeActorCritic::new(&cfg.network, &cfg.weighting, &mut stream(seed, Stream::NetInit, 2000))?;
        Ok(Self {
            cfg: cfg.clone(),
            variant,
            seed,
            learners,
            ac,
            weights: WeightState::new(cfg.weighting.initial_alpha),
            mixing: MixingParams::from(&cfg.weighting),
            env_slots: 0,
            episodes_done: 0,
            audited_slots: 0,
            explore_rng: stream(seed, Stream::Exploration, 0),
            replay_rng: stream(seed, Stream::Replay, 0),
            noise_rng: stream(seed, Stream::ActorNoise, 0),
        })
    }

    pub fn config(&self) -> &Config {
        &self.cfg
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn episodes_done(&self) -> usize {
        self.episodes_done
    }

    pub fn audited_slots(&self) -> u64 {
        self.audited_slots
    }

    pub fn weight_state(&self) -> &WeightState {
        &self.weights
    }

    pub fn current_epsilon(&self) -> f64 {
        epsilon(self.env_slots as usize, self.cfg.agent.epsilon_horizon, self.cfg.agent.epsilon_floor)
    }

    /// Every network this trainer instantiates, with a label.
    pub fn networks(&self) -> Vec<(String, &DenseNet)> {
        let mut out = Vec::new();
        for (l, learner) in self.learners.iter().enumerate() {
            let [b, c, m] = learner.qnet.online_nets();
            out.push((format!("learner{l}.backbone"), b));
            out.push((format!("learner{l}.head_cov"), c));
            out.push((format!("learner{l}.head_comm"), m));
            out.push((format!("learner{l}.step"), &learner.step_net.net));
        }
        out.push(("actor".into(), &self.ac.actor));
        out.push(("critic".into(), &self.ac.critic));
        out
    }

    fn learner_of(&self, uav: usize) -> usize {
        if self.learners.len() == 1 {
            0
        } else {
            uav
        }
    }

    /// Seed of the world used for training episode `k`.
    pub fn train_world_seed(&self, k: usize) -> u64 {
        stream(self.seed, Stream::TrainEnv, k as u64).next_u64()
    }

    /// Seed of the `i`-th fixed evaluation world.
    pub fn eval_world_seed(&self, i: usize) -> u64 {
        stream(self.seed, Stream::EvalEnv, i as u64).next_u64()
    }

    fn world(&self, seed: u64) -> Result<World> {
        let mut sc = self.cfg.scenario.clone();
        sc.rng_seed = seed;
        World::new(&sc)
    }

    pub fn train_episode(&mut self) -> Result<EpisodeStats> {
        let mut world = self.world(self.train_world_seed(self.episodes_done))?;
        let stats = self.run_episode(&mut world, Phase::Train)?;
        self.episodes_done += 1;
        Ok(stats)
    }

    /// Greedy episodes on the fixed evaluation worlds; learning state is
    /// left untouched.
    pub fn evaluate(&mut self, episodes: usize) -> Result<Vec<EpisodeStats>> {
        (0..episodes)
            .map(|i| {
                let mut world = self.world(self.eval_world_seed(i))?;
                let mut s = self.run_episode(&mut world, Phase::Eval)?;
                s.index = i;
                Ok(s)
            })
            .collect()
    }

    fn episode_alpha(&mut self, train: bool) -> Result<f64> {
        if !self.variant.uses_actor_critic() {
            return Ok(UNIFORM[0]);
        }
        let s = self.weights.global_state();
        if train {
            let sigma = exploration_sigma(&self.cfg.weighting, self.episodes_done);
            self.ac.explore(&s, sigma, self.cfg.weighting.actor_clip, &mut self.noise_rng)
        } else {
            self.ac.alpha(&s)
        }
    }

    /// Play one episode on `world`. Training episodes store transitions and
    /// update every learner; evaluation episodes act greedily and mutate
    /// nothing but the world.
    pub fn run_episode(&mut self, world: &mut World, phase: Phase) -> Result<EpisodeStats> {
        let started = Instant::now();
        let train = phase == Phase::Train;
        let uavs = world.uavs.len();
        let variant = self.variant;
        let wcfg = self.cfg.weighting.clone();
        let acfg = self.cfg.agent.clone();

        let s_ep = self.weights.global_state();
        let alpha = self.episode_alpha(train)?;
        let w_ep = [alpha, 1.0 - alpha];

        let mut pending: Vec<Option<Pending>> = vec![None; uavs];
        let mut delta_mean = Mean::default();
        let mut w_cov_mean = Mean::default();
        let mut loss_cov = Mean::default();
        let mut loss_comm = Mean::default();
        let mut loss_step = Mean::default();
        let mut prev = world.completion_ratios();
        let mut queues: Vec<f64> = world.users.iter().map(|u| u.queue).collect();
        let slot_cap = world.config().max_slots() + 1;
        let eps_at_start = if train { self.current_epsilon() } else { 0.0 };

        while world.status() == Status::Running {
            if world.t >= slot_cap {
                return Err(self.violation(world, phase, "episode outlived its energy budget"));
            }
            let assoc = world.begin_slot();
            assoc
                .audit(world.config(), world.users.len())
                .map_err(|e| self.violation(world, phase, &e.to_string()))?;
            let (c0, r0) = prev;
            let g = global_context(c0, r0, alpha);
            let eps = if train { self.current_epsilon() } else { 0.0 };

            let mut decisions = Vec::with_capacity(uavs);
            for m in 0..uavs {
                if !world.uavs[m].alive {
                    continue;
                }
                let x = encode_local_state(world, m, &assoc);
                let mask = world.action_mask(m);
                let l = self.learner_of(m);
                if let Some(p) = pending[m].take() {
                    self.learners[l].buffer.push(p.complete(x.clone(), mask, false));
                }
                let (w, delta) = match variant {
                    Variant::StaticWeight => (wcfg.static_weight, 0.0),
                    Variant::NoSws => (w_ep, 0.0),
                    Variant::Hdwdrl | Variant::NoEac => {
                        let w_st = self.learners[l].step_net.weight(&x, &g)?;
                        fuse_weights(w_ep, w_st, c0, r0, &self.mixing)
                    }
                };
                delta_mean.add(delta);
                w_cov_mean.add(w[0]);
                let (q_cov, q_comm) = self.learners[l].qnet.q_values(&x)?;
                let a = select_action(&q_cov, &q_comm, w, &mask, eps, &mut self.explore_rng);
                world.act(m, Action::ALL[a]);
                decisions.push(Decision {
                    uav: m,
                    state: x,
                    action: a,
                    weight: w,
                });
            }

            world.end_slot(&assoc);
            self.check_slot(world, phase, prev, &mut queues)?;
            let now = world.completion_ratios();
            let (r_cov, r_comm) = step_rewards(prev, now);
            prev = now;

            if !train {
                continue;
            }
            self.env_slots += 1;
            let terminal = world.status().is_terminal();
            for d in &decisions {
                let p = Pending {
                    state: d.state.clone(),
                    action: d.action,
                    r_cov,
                    r_comm,
                    weight: d.weight,
                };
                if terminal || !world.uavs[d.uav].alive {
                    let next = d.state.clone();
                    let l = self.learner_of(d.uav);
                    self.learners[l].buffer.push(p.complete(next, [true; ACTION_COUNT], true));
                } else {
                    pending[d.uav] = Some(p);
                }
            }
            for d in &decisions {
                let l = self.learner_of(d.uav);
                let learner = &mut self.learners[l];
                if learner.buffer.len() >= acfg.learn_start.max(1) {
                    let batch = learner.buffer.sample(acfg.batch_size, &mut self.replay_rng);
                    let loss = learner.qnet.td_update(&batch, acfg.gamma, acfg.target_mode)?;
                    loss_cov.add(loss.cov);
                    loss_comm.add(loss.comm);
                }
            }
            if variant.uses_step_net() {
                let (c, r) = now;
                let target = step_target(r_cov, r_comm, c, r, w_ep, wcfg.lambda);
                let g = global_context(c0, r0, alpha);
                for d in &decisions {
                    let l = self.learner_of(d.uav);
                    loss_step.add(self.learners[l].step_net.update(&d.state, &g, target)?);
                }
            }
        }

        let (coverage, comm) = world.completion_ratios();
        let mut stats = EpisodeStats {
            phase,
            k: self.episodes_done,
            index: 0,
            coverage,
            comm,
            slots: world.t,
            success: world.status() == Status::Success,
            energy: world.uavs.iter().map(|u| u.energy_used).sum(),
            alpha,
            mean_delta: delta_mean.get(),
            mean_w_cov: w_cov_mean.get(),
            loss_cov: loss_cov.get(),
            loss_comm: loss_comm.get(),
            loss_step: loss_step.get(),
            loss_critic: 0.0,
            loss_actor: 0.0,
            epsilon: eps_at_start,
            wall_secs: 0.0,
        };

        if train && variant != Variant::StaticWeight {
            if variant.uses_actor_critic() {
                let base = episode_base_reward(coverage, comm, wcfg.stage_betas, wcfg.stage_thresholds);
                let y = critic_target(base, alpha, self.weights.prev_alpha, wcfg.smoothing_penalty);
                let loss = self.ac.update(&s_ep, alpha, y)?;
                stats.loss_critic = loss.critic;
                stats.loss_actor = loss.actor;
            }
            self.weights.finish_episode(coverage, comm, alpha, wcfg.ema);
        }
        stats.wall_secs = started.elapsed().as_secs_f64();
        Ok(stats)
    }

    /// Post-slot audit: energy budget, collisions, coverage bookkeeping and
    /// monotone progress.
    fn check_slot(&mut self, world: &World, phase: Phase, prev: (f64, f64), queues: &mut [f64]) -> Result<()> {
        world.audit().map_err(|e| self.violation(world, phase, &e.to_string()))?;
        let (c, r) = world.completion_ratios();
        if c < prev.0 || r < prev.1 {
            return Err(self.violation(world, phase, &format!("progress decreased: {prev:?} -> {:?}", (c, r))));
        }
        for (n, (q, u)) in queues.iter_mut().zip(&world.users).enumerate() {
            if u.queue > *q {
                return Err(self.violation(world, phase, &format!("user {n} queue grew from {q} to {}", u.queue)));
            }
            *q = u.queue;
        }
        self.audited_slots += 1;
        Ok(())
    }

    fn violation(&self, world: &World, phase: Phase, what: &str) -> Error {
        Error::Invariant(format!(
            "{what} (variant {}, seed {}, {} episode {}, slot {}, state {})",
            self.variant,
            self.seed,
            phase.name(),
            self.episodes_done,
            world.t,
            serde_json::to_string(&world.trace()).unwrap_or_default()
        ))
    }

    pub fn manifest(&self) -> Manifest {
        Manifest {
            format: MANIFEST_FORMAT,
            config_hash: self.cfg.hash(),
            variant: self.variant,
            seed: self.seed,
            episodes: self.episodes_done,
            env_slots: self.env_slots,
            epsilon: self.current_epsilon(),
            td_updates: self.learners.iter().map(|l| l.qnet.updates()).collect(),
            learners: self.learners.len(),
            weights: self.weights,
        }
    }

    /// Write every online network, the resolved config and a manifest.
    pub fn save_checkpoint(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (name, net) in self.networks() {
            net.save(&dir.join(format!("{name}.hdwn")))?;
        }
        let cfg_path = dir.join("config.toml");
        std::fs::write(&cfg_path, self.cfg.to_toml_string()).map_err(|e| Error::io(&cfg_path, e))?;
        let path = dir.join("manifest.json");
        let text = serde_json::to_string_pretty(&self.manifest()).expect("manifest serializes");
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }

    /// Rebuild a trainer from [`Trainer::save_checkpoint`] output. Replay
    /// memories, optimizer moments and random streams start fresh.
    pub fn load_checkpoint(dir: &Path, overrides: &[String]) -> Result<Self> {
        let path = dir.join("manifest.json");
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let manifest: Manifest =
            serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        if manifest.format != MANIFEST_FORMAT {
            return Err(Error::Format(format!("{}: unsupported format {}", path.display(), manifest.format)));
        }
        let cfg_path = dir.join("config.toml");
        let saved = Config::load(Some(&cfg_path), &[])?;
        if saved.hash() != manifest.config_hash {
            return Err(Error::Format(format!("{}: config hash does not match manifest", cfg_path.display())));
        }
        let cfg = if overrides.is_empty() {
            saved
        } else {
            Config::load(Some(&cfg_path), overrides)?
        };
        let mut t = Trainer::new(&cfg, manifest.variant, manifest.seed)?;
        if t.learners.len() != manifest.learners {
            return Err(Error::config("agent.shared_network", "override changes the number of learners"));
        }
        let load = |name: &str| DenseNet::load(&dir.join(format!("{name}.hdwn")));
        for (l, learner) in t.learners.iter_mut().enumerate() {
            learner.qnet.load_online(
                load(&format!("learner{l}.backbone"))?,
                load(&format!("learner{l}.head_cov"))?,
                load(&format!("learner{l}.head_comm"))?,
            )?;
            replace_net(&mut learner.step_net.net, load(&format!("learner{l}.step"))?, "step")?;
        }
        replace_net(&mut t.ac.actor, load("actor")?, "actor")?;
        replace_net(&mut t.ac.critic, load("critic")?, "critic")?;
        t.env_slots = manifest.env_slots;
        t.episodes_done = manifest.episodes;
        t.weights = manifest.weights;
        Ok(t)
    }
}

fn replace_net(slot: &mut DenseNet, net: DenseNet, what: &'static str) -> Result<()> {
    if slot.sizes() != net.sizes() || slot.activations() != net.activations() {
        return Err(Error::Shape {
            context: what,
            expected: slot.params().len(),
            got: net.params().len(),
        });
    }
    *slot = net;
    Ok(())
}

/// Finite-difference check of every network a trainer for `cfg` builds.
pub fn check_networks(
    cfg: &Config,
    seed: u64,
    inputs: usize,
    eps: f64,
    tolerance: f64,
) -> Result<Vec<crate::api::NetworkCheck>> {
    let trainer = Trainer::new(cfg, Variant::Hdwdrl, seed)?;
    let mut rng = stream(seed, Stream::Exploration, u64::MAX);
    trainer
        .networks()
        .into_iter()
        .map(|(name, net)| {
            let r = check_gradients(net, inputs, eps, &mut rng)?;
            Ok(crate::api::NetworkCheck {
                name,
                parameters: net.params().len(),
                max_rel_error: r.max_rel_error,
                passed: r.max_rel_error <= tolerance,
            })
        })
        .collect()
}

/// Greedy episodes from a saved checkpoint.
pub fn evaluate_checkpoint(dir: &Path, episodes: usize, overrides: &[String]) -> Result<(Variant, u64, Vec<EpisodeStats>)> {
    let mut t = Trainer::load_checkpoint(dir, overrides)?;
    let stats = t.evaluate(episodes)?;
    Ok((t.variant, t.seed, stats))
}

/// Train one seed, evaluating greedily every `eval_interval` episodes.
pub fn train_seed(
    cfg: &Config,
    variant: Variant,
    seed: u64,
    checkpoint_dir: Option<&Path>,
    progress: &mut dyn FnMut(&Progress),
) -> Result<RunLog> {
    let mut trainer = Trainer::new(cfg, variant, seed)?;
    let t = &cfg.training;
    let mut episodes = Vec::new();
    let mut report = |stats: EpisodeStats, episodes: &mut Vec<EpisodeStats>| {
        progress(&Progress {
            seed,
            variant,
            episodes: t.episodes,
            stats: stats.clone(),
        });
        episodes.push(stats);
    };
    for k in 0..t.episodes {
        let stats = trainer.train_episode()?;
        report(stats, &mut episodes);
        if t.eval_interval > 0 && t.eval_episodes > 0 && (k + 1) % t.eval_interval == 0 {
            for stats in trainer.evaluate(t.eval_episodes)? {
                report(stats, &mut episodes);
            }
        }
    }
    if let Some(dir) = checkpoint_dir {
        trainer.save_checkpoint(dir)?;
    }
    Ok(RunLog {
        seed,
        variant,
        episodes,
        audited_slots: trainer.audited_slots(),
    })
}

/// Directory holding the checkpoint of one (variant, seed) job.
pub fn checkpoint_dir(root: &Path, variant: Variant, seed: u64) -> PathBuf {
    root.join("checkpoints").join(format!("{variant}-seed{seed}"))
}

/// Run every (variant, seed) job on up to `workers` threads. Results come
/// back in job order regardless of scheduling.
pub fn run_jobs(
    cfg: &Config,
    jobs: &[(Variant, u64)],
    output: Option<&Path>,
    workers: usize,
    progress: &(dyn Fn(&Progress) + Sync),
) -> Result<Vec<RunLog>> {
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Mutex;

    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<RunLog>>>> = Mutex::new(jobs.iter().map(|_| None).collect());
    let workers = workers.clamp(1, jobs.len().max(1));
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(&(variant, seed)) = jobs.get(i) else {
                    break;
                };
                let dir = output.map(|o| checkpoint_dir(o, variant, seed));
                let r = train_seed(cfg, variant, seed, dir.as_deref(), &mut |p| progress(p));
                let failed = r.is_err();
                results.lock().expect("result lock")[i] = Some(r);
                if failed {
                    next.store(jobs.len(), Ordering::SeqCst);
                }
            });
        }
    });
    let mut logs = Vec::with_capacity(jobs.len());
    for r in results.into_inner().expect("result lock") {
        match r {
            Some(r) => logs.push(r?),
            None => return Err(Error::Usage("job skipped after an earlier failure".into())),
        }
    }
    Ok(logs)
}

/// Train `spec.variant` on every configured seed and, when an output
/// directory is set, write `config.toml`, `metrics.csv`, `summary.json` and
/// checkpoints there.
pub fn train(spec: &ExperimentSpec, workers: usize, progress: &(dyn Fn(&Progress) + Sync)) -> Result<Vec<RunLog>> {
    spec.validate()?;
    let jobs: Vec<_> = spec.config.training.seeds.iter().map(|&s| (spec.variant, s)).collect();
    run_and_write(&spec.config, &jobs, spec.output.as_deref(), workers, progress)
}

/// Every listed variant on every configured seed.
pub fn sweep(
    cfg: &Config,
    variants: &[Variant],
    output: Option<&Path>,
    workers: usize,
    progress: &(dyn Fn(&Progress) + Sync),
) -> Result<Vec<RunLog>> {
    cfg.validate()?;
    if variants.is_empty() {
        return Err(Error::Usage("sweep needs at least one variant".into()));
    }
    let jobs: Vec<_> = variants
        .iter()
        .flat_map(|&v| cfg.training.seeds.iter().map(move |&s| (v, s)))
        .collect();
    run_and_write(cfg, &jobs, output, workers, progress)
}

fn run_and_write(
    cfg: &Config,
    jobs: &[(Variant, u64)],
    output: Option<&Path>,
    workers: usize,
    progress: &(dyn Fn(&Progress) + Sync),
) -> Result<Vec<RunLog>> {
    if let Some(dir) = output {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join("config.toml");
        std::fs::write(&path, cfg.to_toml_string()).map_err(|e| Error::io(&path, e))?;
    }
    let logs = run_jobs(cfg, jobs, output, workers, progress)?;
    if let Some(dir) = output {
        write_outputs(cfg, &logs, dir)?;
    }
    Ok(logs)
}

pub fn write_outputs(cfg: &Config, logs: &[RunLog], dir: &Path) -> Result<()> {
    let path = dir.join("metrics.csv");
    std::fs::write(&path, metrics_csv(logs)?).map_err(|e| Error::io(&path, e))?;
    let summary = aggregate(logs, &cfg.scenario)?;
    let path = dir.join("summary.json");
    let text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

//! Per-UAV decision making: local observation encoding, the two-head
//! Q-network, weighted epsilon-greedy selection and per-head TD learning.

pub mod replay;

use rand::Rng as _;

use crate::config::{NetworkConfig, OptimizerKind, TargetMode};
use crate::env::{Association, World, ACTION_COUNT};
use crate::error::{Error, Result};
use crate::nn::{clip_grad_norm, Activation, DenseNet, OptimizerState};
use crate::rng::Rng;

pub use replay::{ReplayBuffer, Transition};

pub type QRow = [f64; ACTION_COUNT];

/// Length of the local observation for `uavs` UAVs with `subchannels`
/// user slots each: own position, own users, other positions, other users,
/// 3x3 coverage patch.
pub fn local_state_dim(uavs: usize, subchannels: usize) -> usize {
    let users = subchannels * 3;
    2 + users + (uavs - 1) * 2 + (uavs - 1) * users + 9
}

/// Encode UAV `m`'s observation. Positions are divided by the area extent,
/// queues by the initial per-user demand; unused user slots are zero and
/// off-grid patch cells read as covered.
pub fn encode_local_state(world: &World, m: usize, assoc: &Association) -> Vec<f64> {
    let cfg = world.config();
    let (aw, ah) = (cfg.area_width(), cfg.area_height());
    let mut x = Vec::with_capacity(local_state_dim(cfg.uav_count, cfg.subchannels));

    let push_uav = |x: &mut Vec<f64>, i: usize| {
        let (px, py) = world.uavs[i].position(cfg);
        x.push(px / aw);
        x.push(py / ah);
    };
    let push_users = |x: &mut Vec<f64>, i: usize| {
        let links = assoc.per_uav.get(i).map(Vec::as_slice).unwrap_or(&[]);
        for slot in 0..cfg.subchannels {
            match links.get(slot) {
                Some(l) => {
                    let u = &world.users[l.user];
                    x.push(u.x / aw);
                    x.push(u.y / ah);
                    x.push((u.queue / cfg.init_demand).clamp(0.0, 1.0));
                }
                None => x.extend_from_slice(&[0.0; 3]),
            }
        }
    };

    push_uav(&mut x, m);
    push_users(&mut x, m);
    let others: Vec<usize> = (0..world.uavs.len()).filter(|&o| o != m).collect();
    for &o in &others {
        push_uav(&mut x, o);
    }
    for &o in &others {
        push_users(&mut x, o);
    }
    let c = world.uavs[m].cell;
    for dr in -1..=1 {
        for dc in -1..=1 {
            let v = world.coverage.get_or_covered(c.row as isize + dr, c.col as isize + dc);
            x.push(v as f64);
        }
    }
    x
}

/// `max(floor, 1 - (t / horizon) (1 - floor))`.
pub fn epsilon(t: usize, horizon: usize, floor: f64) -> f64 {
    if horizon == 0 {
        return floor;
    }
    (1.0 - (t as f64 / horizon as f64) * (1.0 - floor)).max(floor)
}

/// Index of the largest `score` among legal actions, lowest index on ties.
pub fn masked_argmax(score: impl Fn(usize) -> f64, mask: &[bool; ACTION_COUNT]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for a in (0..ACTION_COUNT).filter(|&a| mask[a]) {
        let s = score(a);
        if best.map_or(true, |(_, b)| s > b) {
            best = Some((a, s));
        }
    }
    best.map(|(a, _)| a)
}

/// Epsilon-greedy over the scalarized value `w_cov Q_cov + w_comm Q_comm`.
pub fn select_action(
    q_cov: &QRow,
    q_comm: &QRow,
    weight: [f64; 2],
    mask: &[bool; ACTION_COUNT],
    eps: f64,
    rng: &mut Rng,
) -> usize {
    let legal: Vec<usize> = (0..ACTION_COUNT).filter(|&a| mask[a]).collect();
    assert!(!legal.is_empty(), "action mask has no legal action");
    if eps > 0.0 && rng.gen::<f64>() < eps {
        return legal[rng.gen_range(0..legal.len())];
    }
    masked_argmax(|a| weight[0] * q_cov[a] + weight[1] * q_comm[a], mask).unwrap()
}

/// Shared backbone with coverage and communication value heads, plus hard
/// target copies.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiHeadQNet {
    pub backbone: DenseNet,
    pub head_cov: DenseNet,
    pub head_comm: DenseNet,
    target_backbone: DenseNet,
    target_cov: DenseNet,
    target_comm: DenseNet,
    opt_backbone: OptimizerState,
    opt_cov: OptimizerState,
    opt_comm: OptimizerState,
    grad_clip: f64,
    target_period: usize,
    updates: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TdLoss {
    pub cov: f64,
    pub comm: f64,
}

impl MultiHeadQNet {
    pub fn new(
        input: usize,
        backbone_hidden: &[usize],
        head_hidden: &[usize],
        optimizer: OptimizerKind,
        lr: f64,
        grad_clip: f64,
        target_period: usize,
        rng: &mut Rng,
    ) -> Result<Self> {
        if backbone_hidden.is_empty() {
            return Err(Error::Usage("backbone needs at least one hidden layer".into()));
        }
        let mut sizes = vec![input];
        sizes.extend_from_slice(backbone_hidden);
        let backbone = DenseNet::new(&sizes, &vec![Activation::Relu; backbone_hidden.len()], rng)?;
        let feat = *backbone_hidden.last().unwrap();
        let head_cov = DenseNet::mlp(feat, head_hidden, ACTION_COUNT, Activation::Identity, rng)?;
        let head_comm = DenseNet::mlp(feat, head_hidden, ACTION_COUNT, Activation::Identity, rng)?;
        Ok(Self {
            opt_backbone: OptimizerState::new(optimizer, lr, &backbone),
            opt_cov: OptimizerState::new(optimizer, lr, &head_cov),
            opt_comm: OptimizerState::new(optimizer, lr, &head_comm),
            target_backbone: backbone.clone(),
            target_cov: head_cov.clone(),
            target_comm: head_comm.clone(),
            backbone,
            head_cov,
            head_comm,
            grad_clip,
            target_period: target_period.max(1),
            updates: 0,
        })
    }

    pub fn from_config(input: usize, net: &NetworkConfig, target_period: usize, rng: &mut Rng) -> Result<Self> {
        Self::new(
            input,
            &net.backbone_hidden,
            &net.head_hidden,
            net.optimizer,
            net.dqn_lr,
            net.grad_clip,
            target_period,
            rng,
        )
    }

    pub fn input_size(&self) -> usize {
        self.backbone.input_size()
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub fn features(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.backbone.predict(x)
    }

    /// Online `(Q_cov, Q_comm)` for one observation.
    pub fn q_values(&self, x: &[f64]) -> Result<(QRow, QRow)> {
        let h = self.backbone.predict(x)?;
        Ok((to_row(&self.head_cov.predict(&h)?), to_row(&self.head_comm.predict(&h)?)))
    }

    pub fn target_q_values(&self, x: &[f64]) -> Result<(QRow, QRow)> {
        let h = self.target_backbone.predict(x)?;
        Ok((to_row(&self.target_cov.predict(&h)?), to_row(&self.target_comm.predict(&h)?)))
    }

    /// Hard copy online parameters into the targets.
    pub fn sync_target(&mut self) {
        self.target_backbone.copy_params_from(&self.backbone);
        self.target_cov.copy_params_from(&self.head_cov);
        self.target_comm.copy_params_from(&self.head_comm);
    }

    /// One gradient step on `sum_o mean_b (Q_o(s, a) - y_o)^2` with
    /// `y_o = r_o + (1 - done) gamma Q_target,o(s', a'_o)`, where `a'_o`
    /// maximizes head `o` over legal next actions (per-head mode) or the
    /// scalarized target value under the stored weight (scalarized mode).
    /// Targets are re-synced every `target_period` updates.
    pub fn td_update(&mut self, batch: &[&Transition], gamma: f64, mode: TargetMode) -> Result<TdLoss> {
        let n = batch.len();
        if n == 0 {
            return Err(Error::Usage("empty TD batch".into()));
        }
        let d = self.input_size();
        let mut xs = Vec::with_capacity(n * d);
        let mut next = Vec::with_capacity(n * d);
        for t in batch {
            if t.state.len() != d || t.next_state.len() != d {
                return Err(Error::Shape {
                    context: "td_update",
                    expected: d,
                    got: t.state.len().min(t.next_state.len()),
                });
            }
            xs.extend_from_slice(&t.state);
            next.extend_from_slice(&t.next_state);
        }

        let h_next = self.target_backbone.predict_batch(&next, n)?;
        let qc_next = self.target_cov.predict_batch(&h_next, n)?;
        let qr_next = self.target_comm.predict_batch(&h_next, n)?;
        let mut y_cov = vec![0.0; n];
        let mut y_comm = vec![0.0; n];
        for (b, t) in batch.iter().enumerate() {
            let qc = &qc_next[b * ACTION_COUNT..(b + 1) * ACTION_COUNT];
            let qr = &qr_next[b * ACTION_COUNT..(b + 1) * ACTION_COUNT];
            let (bc, br) = if t.terminal {
                (0.0, 0.0)
            } else {
                match mode {
                    TargetMode::PerHead => (
                        masked_argmax(|a| qc[a], &t.next_mask).map_or(0.0, |a| qc[a]),
                        masked_argmax(|a| qr[a], &t.next_mask).map_or(0.0, |a| qr[a]),
                    ),
                    TargetMode::Scalarized => {
                        let w = t.weight;
                        masked_argmax(|a| w[0] * qc[a] + w[1] * qr[a], &t.next_mask)
                            .map_or((0.0, 0.0), |a| (qc[a], qr[a]))
                    }
                }
            };
            y_cov[b] = t.r_cov + gamma * bc;
            y_comm[b] = t.r_comm + gamma * br;
        }

        let h = self.backbone.forward_batch(&xs, n)?;
        let qc = self.head_cov.forward_batch(&h, n)?;
        let qr = self.head_comm.forward_batch(&h, n)?;
        let mut gc = vec![0.0; n * ACTION_COUNT];
        let mut gr = vec![0.0; n * ACTION_COUNT];
        let mut loss = TdLoss::default();
        let scale = 1.0 / n as f64;
        for (b, t) in batch.iter().enumerate() {
            let i = b * ACTION_COUNT + t.action;
            let ec = qc[i] - y_cov[b];
            let er = qr[i] - y_comm[b];
            loss.cov += ec * ec * scale;
            loss.comm += er * er * scale;
            gc[i] = 2.0 * ec * scale;
            gr[i] = 2.0 * er * scale;
        }
        let mut dh = self.head_cov.backward(&gc)?;
        for (a, b) in dh.iter_mut().zip(self.head_comm.backward(&gr)?) {
            *a += b;
        }
        self.backbone.backward_params(&dh)?;
        clip_grad_norm(
            &mut [&mut self.backbone, &mut self.head_cov, &mut self.head_comm],
            self.grad_clip,
        );
        self.opt_backbone.step(&mut self.backbone);
        self.opt_cov.step(&mut self.head_cov);
        self.opt_comm.step(&mut self.head_comm);

        self.updates += 1;
        if self.updates % self.target_period as u64 == 0 {
            self.sync_target();
        }
        Ok(loss)
    }

    /// Online networks in backbone, coverage head, communication head order.
    pub fn online_nets(&self) -> [&DenseNet; 3] {
        [&self.backbone, &self.head_cov, &self.head_comm]
    }

    pub fn target_nets(&self) -> [&DenseNet; 3] {
        [&self.target_backbone, &self.target_cov, &self.target_comm]
    }

    /// Restore online parameters (targets follow) from checkpointed nets.
    pub fn load_online(&mut self, backbone: DenseNet, cov: DenseNet, comm: DenseNet) -> Result<()> {
        for (have, got) in [(&self.backbone, &backbone), (&self.head_cov, &cov), (&self.head_comm, &comm)] {
            if have.sizes() != got.sizes() {
                return Err(Error::Format(format!(
                    "checkpoint layer sizes {:?} do not match {:?}",
                    got.sizes(),
                    have.sizes()
                )));
            }
        }
        self.backbone = backbone;
        self.head_cov = cov;
        self.head_comm = comm;
        self.sync_target();
        Ok(())
    }
}

fn to_row(v: &[f64]) -> QRow {
    let mut r = [0.0; ACTION_COUNT];
    r.copy_from_slice(v);
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ScenarioConfig;
    use crate::env::{Cell, Link, ChannelGain};
    use crate::rng::{stream, Stream};

    fn rng() -> Rng {
        stream(9, Stream::NetInit, 0)
    }

    #[test]
    fn reference_dimension() {
        assert_eq!(local_state_dim(6, 10), 201);
        let w = World::new(&ScenarioConfig::default()).unwrap();
        let x = encode_local_state(&w, 0, &Association::empty(6));
        assert_eq!(x.len(), 201);
    }

    #[test]
    fn encoding_layout() {
        let mut cfg = ScenarioConfig::default();
        cfg.uav_count = 2;
        cfg.user_count = 3;
        let mut w = World::new(&cfg).unwrap();
        w.coverage.capture(Cell::new(1, 1));
        let assoc = Association {
            per_uav: vec![
                vec![],
                vec![
                    Link { user: 0, gain: ChannelGain { power: 1e-8 }, rate: 1.0 },
                    Link { user: 2, gain: ChannelGain { power: 1e-8 }, rate: 1.0 },
                ],
            ],
        };
        let x = encode_local_state(&w, 0, &assoc);
        assert_eq!(x.len(), local_state_dim(2, 10));
        assert_eq!(&x[..2], &[0.05, 0.05]);
        // No served users: padding is exact zeros.
        assert!(x[2..32].iter().all(|&v| v == 0.0));
        // Other UAV at (0, 1).
        assert_eq!(&x[32..34], &[0.15, 0.05]);
        let u0 = &w.users[0];
        assert_eq!(&x[34..37], &[u0.x / 1000.0, u0.y / 1000.0, 1.0]);
        assert_eq!(w.users[2].x / 1000.0, x[37]);
        assert!(x[40..64].iter().all(|&v| v == 0.0));
        // Corner patch: 5 off-grid cells plus the captured (1, 1).
        let patch = &x[64..];
        assert_eq!(patch, &[1.0, 1.0, 1.0, 1.0, 0.0, 0.0, 1.0, 0.0, 1.0]);
    }

    #[test]
    fn epsilon_schedule() {
        assert_eq!(epsilon(0, 7500, 0.0025), 1.0);
        assert_eq!(epsilon(7500, 7500, 0.0025), 0.0025);
        assert!((epsilon(3750, 7500, 0.0025) - 0.50125).abs() < 1e-12);
        assert_eq!(epsilon(100_000, 7500, 0.0025), 0.0025);
        let mut prev = 1.0;
        for t in 0..8000 {
            let e = epsilon(t, 7500, 0.0025);
            assert!(e <= prev);
            prev = e;
        }
    }

    #[test]
    fn greedy_with_degenerate_weight() {
        let qc = [0.1, 0.9, 0.3, 0.2];
        let qr = [5.0, 0.0, 0.0, 0.0];
        let mask = [true; 4];
        let mut r = rng();
        assert_eq!(select_action(&qc, &qr, [1.0, 0.0], &mask, 0.0, &mut r), 1);
        assert_eq!(select_action(&qc, &qr, [0.0, 1.0], &mask, 0.0, &mut r), 0);
        // Masked best action is skipped.
        assert_eq!(select_action(&qc, &qr, [1.0, 0.0], &[true, false, true, true], 0.0, &mut r), 2);
        // Ties go to the lowest index.
        assert_eq!(select_action(&[1.0; 4], &[0.0; 4], [0.5, 0.5], &mask, 0.0, &mut r), 0);
    }

    #[test]
    fn uniform_exploration_chi_square() {
        let mask = [true, false, true, true];
        let mut r = rng();
        let mut counts = [0usize; 4];
        let n = 10_000;
        for _ in 0..n {
            counts[select_action(&[0.0; 4], &[0.0; 4], [0.5, 0.5], &mask, 1.0, &mut r)] += 1;
        }
        assert_eq!(counts[1], 0);
        let e = n as f64 / 3.0;
        let chi2: f64 = [0, 2, 3].iter().map(|&a| (counts[a] as f64 - e).powi(2) / e).sum();
        // 2 dof, p = 0.001
        assert!(chi2 < 13.82, "{chi2}");
    }

    #[test]
    fn shift_invariance() {
        let qc = [0.3, -0.2, 0.7, 0.1];
        let qr = [0.5, 0.9, -0.1, 0.2];
        let w = [0.3, 0.7];
        let mask = [true; 4];
        let mut r = rng();
        let base = select_action(&qc, &qr, w, &mask, 0.0, &mut r);
        let shift = |q: &QRow| q.map(|v| v + 12.5);
        assert_eq!(select_action(&shift(&qc), &shift(&qr), w, &mask, 0.0, &mut r), base);
    }

    fn small_net(period: usize) -> MultiHeadQNet {
        MultiHeadQNet::new(6, &[16, 16], &[8], OptimizerKind::Adam, 1e-3, 10.0, period, &mut rng()).unwrap()
    }

    #[test]
    fn fresh_net_is_finite_and_deterministic() {
        let net = small_net(5);
        let (a, b) = net.q_values(&[0.0; 6]).unwrap();
        assert!(a.iter().chain(&b).all(|v| v.is_finite()));
        assert_eq!(net.q_values(&[0.1; 6]).unwrap(), net.q_values(&[0.1; 6]).unwrap());
        assert!(matches!(net.q_values(&[0.0; 5]), Err(Error::Shape { .. })));
    }

    #[test]
    fn heads_share_backbone_features() {
        let net = small_net(5);
        let x = [0.2, 0.4, 0.1, 0.0, 1.0, 0.3];
        let h = net.features(&x).unwrap();
        let (qc, qr) = net.q_values(&x).unwrap();
        assert_eq!(to_row(&net.head_cov.predict(&h).unwrap()), qc);
        assert_eq!(to_row(&net.head_comm.predict(&h).unwrap()), qr);
    }

    fn transition(terminal: bool, r: (f64, f64)) -> Transition {
        Transition {
            state: vec![0.5, 0.1, 0.0, 0.3, 0.2, 0.9],
            action: 2,
            r_cov: r.0,
            r_comm: r.1,
            next_state: vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6],
            terminal,
            next_mask: [true; 4],
            weight: [0.5, 0.5],
        }
    }

    #[test]
    fn terminal_and_myopic_targets_are_rewards() {
        for (terminal, gamma) in [(true, 0.9), (false, 0.0)] {
            let mut net = small_net(1000);
            let t = transition(terminal, (0.3, -0.2));
            let (qc, qr) = net.q_values(&t.state).unwrap();
            let loss = net.td_update(&[&t], gamma, TargetMode::PerHead).unwrap();
            assert!((loss.cov - (qc[2] - 0.3).powi(2)).abs() < 1e-12);
            assert!((loss.comm - (qr[2] + 0.2).powi(2)).abs() < 1e-12);
        }
    }

    #[test]
    fn target_sync_cadence() {
        let mut net = small_net(5);
        let x = [0.3; 6];
        let t = transition(false, (1.0, 0.5));
        let frozen = net.target_q_values(&x).unwrap();
        for i in 1..=4 {
            net.td_update(&[&t], 0.9, TargetMode::PerHead).unwrap();
            assert_eq!(net.target_q_values(&x).unwrap(), frozen, "update {i}");
        }
        net.td_update(&[&t], 0.9, TargetMode::PerHead).unwrap();
        assert_eq!(net.target_q_values(&x).unwrap(), net.q_values(&x).unwrap());

        let mut every = small_net(1);
        every.td_update(&[&t], 0.9, TargetMode::PerHead).unwrap();
        assert_eq!(every.target_q_values(&x).unwrap(), every.q_values(&x).unwrap());
    }

    #[test]
    fn masked_next_actions_never_enter_targets() {
        let mut net = small_net(1000);
        let mut t = transition(false, (0.0, 0.0));
        let (qc, _) = net.target_q_values(&t.next_state).unwrap();
        let best = masked_argmax(|a| qc[a], &[true; 4]).unwrap();
        t.next_mask = [true; 4];
        t.next_mask[best] = false;
        let allowed = masked_argmax(|a| qc[a], &t.next_mask).unwrap();
        let (q_now, _) = net.q_values(&t.state).unwrap();
        let loss = net.td_update(&[&t], 1.0, TargetMode::PerHead).unwrap();
        assert!((loss.cov - (q_now[2] - qc[allowed]).powi(2)).abs() < 1e-12);
    }
}

//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails. Pass criterion numbers as arguments to run a
//! subset, e.g. `cargo test -p hdwdrl-core --test acceptance -- 1 4`.

use std::collections::{HashSet, VecDeque};
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use rand::Rng as _;

use hdwdrl_core::agent::{epsilon, MultiHeadQNet, Transition};
use hdwdrl_core::config::{OptimizerKind, ScenarioConfig, SuccessMode, TargetMode};
use hdwdrl_core::env::channel::{draw_small_scale_power, small_scale_power};
use hdwdrl_core::env::{achievable_rate, step_user_mobility, Status, UserState, World, ACTION_COUNT};
use hdwdrl_core::harness::{
    aggregate, check_networks, first_threshold_episode, sweep, RunLog, Trainer, Variant,
};
use hdwdrl_core::nn::softmax;
use hdwdrl_core::rng::{stream, Rng, Stream};
use hdwdrl_core::weighting::{fuse_weights, mixing_coefficient, normalize, step_target, MixingParams, WeightPair};
use hdwdrl_core::Config;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

/// Runs collected for the constraint audit.
#[derive(Default)]
struct Audit {
    runs: usize,
    slots: u64,
    max_episode_slots: usize,
    errors: Vec<String>,
}

impl Audit {
    fn absorb(&mut self, logs: &[RunLog]) {
        for l in logs {
            self.runs += 1;
            self.slots += l.audited_slots;
            self.max_episode_slots = self.max_episode_slots.max(l.episodes.iter().map(|e| e.slots).max().unwrap_or(0));
        }
    }
}

fn main() -> ExitCode {
    let only: HashSet<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let wanted = |n: u32| only.is_empty() || only.contains(&n);
    let mut audit = Audit::default();
    let mut failed = 0;
    let mut report = |n: u32, name: &str, start: Instant, o: Outcome| {
        let tag = if o.passed { "PASS" } else { "FAIL" };
        println!("{tag} criterion {n} ({name}, {:.1}s): {}", start.elapsed().as_secs_f64(), o.detail);
        if !o.passed {
            failed += 1;
        }
    };

    if wanted(1) {
        let t = Instant::now();
        report(1, "physics oracles", t, physics());
    }
    if wanted(2) {
        let t = Instant::now();
        report(2, "gradient integrity", t, gradients());
    }
    if wanted(3) {
        let t = Instant::now();
        report(3, "weighting algebra", t, weighting());
    }
    if wanted(4) {
        let t = Instant::now();
        report(4, "Bellman fixed point", t, bellman());
    }
    if wanted(5) {
        let t = Instant::now();
        report(5, "toy optimality", t, toy(&mut audit));
    }
    let scaled_dir = tempfile::tempdir().expect("tempdir");
    let mut scaled: Option<Vec<RunLog>> = None;
    if wanted(6) || wanted(7) || wanted(9) {
        let t = Instant::now();
        let r = scaled_runs(&scaled_dir.path().join("first"), &[Variant::Hdwdrl, Variant::StaticWeight]);
        match r {
            Ok(logs) => {
                audit.absorb(&logs);
                println!("  scaled HDWDRL and StaticWeight runs took {:.1}s", t.elapsed().as_secs_f64());
                scaled = Some(logs);
            }
            Err(e) => audit.errors.push(format!("scaled runs: {e}")),
        }
    }
    if wanted(6) {
        let t = Instant::now();
        let o = match &scaled {
            Some(logs) => scaled_claim(logs),
            None => outcome(false, "scaled runs failed"),
        };
        report(6, "scaled ordering", t, o);
    }
    if wanted(7) {
        let t = Instant::now();
        let o = match (&scaled, scaled_runs(&scaled_dir.path().join("ablations"), &[Variant::NoEac, Variant::NoSws])) {
            (Some(base), Ok(abl)) => {
                audit.absorb(&abl);
                ablations(base, &abl)
            }
            (_, Err(e)) => {
                audit.errors.push(format!("ablation runs: {e}"));
                outcome(false, format!("ablation runs failed: {e}"))
            }
            (None, _) => outcome(false, "scaled runs failed"),
        };
        report(7, "ablation sanity", t, o);
    }
    if wanted(9) {
        let t = Instant::now();
        let o = match scaled_runs(&scaled_dir.path().join("second"), &[Variant::Hdwdrl, Variant::StaticWeight]) {
            Ok(logs) => {
                audit.absorb(&logs);
                determinism(scaled_dir.path())
            }
            Err(e) => {
                audit.errors.push(format!("rerun: {e}"));
                outcome(false, format!("rerun failed: {e}"))
            }
        };
        report(9, "determinism", t, o);
    }
    if wanted(8) {
        let t = Instant::now();
        report(8, "constraint compliance", t, constraints(&audit));
    }

    if failed == 0 {
        println!("acceptance: all selected criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failed} criterion(s) failed");
        ExitCode::FAILURE
    }
}

// ---------------------------------------------------------------------------
// 1. Physics

/// `(B / n) log2(1 + snr)` through `log2(u) - ((u - 1) - snr) / (u ln 2)`,
/// which cancels the rounding of `u = 1 + snr`.
fn rate_oracle(gain: f64, bandwidth: f64, subchannels: usize, p: f64, noise: f64) -> f64 {
    let snr = gain * p / noise;
    let u = 1.0 + snr;
    let log2 = if u == 1.0 {
        snr / std::f64::consts::LN_2
    } else {
        u.log2() - ((u - 1.0) - snr) / (u * std::f64::consts::LN_2)
    };
    bandwidth / subchannels as f64 * log2
}

fn physics() -> Outcome {
    let mut rng = stream(1, Stream::Exploration, 0);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let cfg = ScenarioConfig {
            bandwidth: 10f64.powf(rng.gen_range(5.0..8.0)),
            subchannels: rng.gen_range(1..=20),
            tx_power: 10f64.powf(rng.gen_range(-3.0..0.0)),
            noise_power: 10f64.powf(rng.gen_range(-15.0..-12.0)),
            ..ScenarioConfig::default()
        };
        let gain = 10f64.powf(rng.gen_range(-16.0..-5.0));
        let got = achievable_rate(gain, &cfg);
        let want = rate_oracle(gain, cfg.bandwidth, cfg.subchannels, cfg.tx_power, cfg.noise_power);
        worst = worst.max((got - want).abs() / want);
    }
    let rate_ok = worst <= 1e-9;

    let k = ScenarioConfig::default().rician_k;
    let n = 100_000;
    let mean_power = (0..n).map(|_| draw_small_scale_power(k, &mut rng)).sum::<f64>() / n as f64;
    let rician_ok = (0.98..=1.02).contains(&mean_power) && (small_scale_power(k, 0.0, 0.0) - k / (k + 1.0)).abs() < 1e-15;

    let cfg = ScenarioConfig::default();
    assert_eq!(cfg.memory, 0.9);
    let mut u = UserState {
        x: cfg.area_width() / 2.0,
        y: cfg.area_height() / 2.0,
        speed: cfg.mean_speed,
        heading: cfg.mean_heading,
        queue: 0.0,
    };
    let steps = 10_000;
    let mut speed_sum = 0.0;
    for _ in 0..steps {
        u = step_user_mobility(&u, &cfg, &mut rng);
        speed_sum += u.speed;
    }
    let mean_speed = speed_sum / steps as f64;
    let gm_ok = ((mean_speed - cfg.mean_speed) / cfg.mean_speed).abs() <= 0.05;

    outcome(
        rate_ok && rician_ok && gm_ok,
        format!(
            "rate max rel err {worst:.2e} (<= 1e-9), Rician E|h|^2 = {mean_power:.4} (in [0.98, 1.02]), \
             mean speed {mean_speed:.4} vs {} (within 5%)",
            cfg.mean_speed
        ),
    )
}

// ---------------------------------------------------------------------------
// 2. Gradients

fn gradients() -> Outcome {
    match check_networks(&Config::default(), 0, 20, 1e-5, 1e-4) {
        Ok(checks) => {
            let worst = checks.iter().map(|c| c.max_rel_error).fold(0.0, f64::max);
            let detail = checks
                .iter()
                .map(|c| format!("{} {:.1e}", c.name, c.max_rel_error))
                .collect::<Vec<_>>()
                .join(", ");
            outcome(
                checks.iter().all(|c| c.passed) && checks.len() >= 4,
                format!("{} networks, worst rel err {worst:.2e} (<= 1e-4): {detail}", checks.len()),
            )
        }
        Err(e) => outcome(false, e.to_string()),
    }
}

// ---------------------------------------------------------------------------
// 3. Weighting

fn simplex(rng: &mut Rng) -> WeightPair {
    let a: f64 = rng.gen();
    [a, 1.0 - a]
}

fn on_simplex(w: WeightPair) -> bool {
    w[0] >= -1e-9 && w[1] >= -1e-9 && (w[0] + w[1] - 1.0).abs() <= 1e-9
}

fn weighting() -> Outcome {
    let mut rng = stream(3, Stream::Exploration, 0);
    let defaults = MixingParams::default();
    let (mut simplex_bad, mut delta_bad, mut between_bad, mut default_bad) = (0, 0, 0, 0);
    let (mut dmin, mut dmax) = (f64::INFINITY, f64::NEG_INFINITY);
    for _ in 0..10_000 {
        let c: f64 = rng.gen();
        let r: f64 = rng.gen();
        let w_ep = simplex(&mut rng);
        let logits = [rng.gen_range(-20.0..20.0), rng.gen_range(-20.0..20.0)];
        let s = softmax(&logits, rng.gen_range(0.05..2.0));
        let w_st = [s[0], s[1]];
        let lambda = [rng.gen::<f64>(), rng.gen::<f64>(), rng.gen::<f64>()];
        let target = step_target(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), c, r, w_ep, lambda);
        let raw = normalize([rng.gen_range(-1.0..2.0), rng.gen_range(-1.0..2.0)]);

        let params = MixingParams {
            delta0: rng.gen_range(0.0..1.0),
            beta: rng.gen_range(0.0..1.0),
            min: 0.15,
            max: 0.45,
        };
        let (fused, delta) = fuse_weights(w_ep, w_st, c, r, &params);

        for w in [w_ep, w_st, target, raw, fused] {
            if !on_simplex(w) {
                simplex_bad += 1;
            }
        }
        if !(0.15..=0.45).contains(&delta) {
            delta_bad += 1;
        }
        dmin = dmin.min(delta);
        dmax = dmax.max(delta);
        for i in 0..2 {
            let lo = w_ep[i].min(w_st[i]) - 1e-12;
            let hi = w_ep[i].max(w_st[i]) + 1e-12;
            if !(lo..=hi).contains(&fused[i]) {
                between_bad += 1;
            }
        }
        if mixing_coefficient(c, r, &defaults) != 0.45 {
            default_bad += 1;
        }
    }
    let a = Config::default().agent;
    let e0 = epsilon(0, a.epsilon_horizon, a.epsilon_floor);
    let e_end = epsilon(7500, a.epsilon_horizon, a.epsilon_floor);
    let eps_ok = e0 == 1.0 && (e_end - 0.0025).abs() < 1e-15;
    outcome(
        simplex_bad == 0 && delta_bad == 0 && between_bad == 0 && default_bad == 0 && eps_ok,
        format!(
            "1e4 inputs: off-simplex {simplex_bad}, delta outside [0.15, 0.45] {delta_bad} (seen [{dmin:.3}, {dmax:.3}]), \
             fusion outside inputs {between_bad}, default delta != 0.45 {default_bad}; eps(0) = {e0}, eps(7500) = {e_end}"
        ),
    )
}

// ---------------------------------------------------------------------------
// 4. Bellman fixed point

const GAMMA: f64 = 0.9;

/// Two states, two legal actions: `(next state, r_cov, r_comm)`.
const MDP: [[(usize, f64, f64); 2]; 2] = [
    [(0, 1.0, 0.0), (1, 0.0, 0.5)],
    [(0, 0.0, 1.0), (1, 0.5, 0.0)],
];

/// Per-head optimal values by value iteration: `[head][state][action]`.
fn value_iteration() -> [[[f64; 2]; 2]; 2] {
    let mut q = [[[0.0f64; 2]; 2]; 2];
    for _ in 0..2000 {
        let mut next = q;
        for (o, head) in next.iter_mut().enumerate() {
            for s in 0..2 {
                for a in 0..2 {
                    let (s2, rc, rr) = MDP[s][a];
                    let r = if o == 0 { rc } else { rr };
                    head[s][a] = r + GAMMA * q[o][s2][0].max(q[o][s2][1]);
                }
            }
        }
        q = next;
    }
    q
}

fn one_hot(s: usize) -> Vec<f64> {
    let mut v = vec![0.0; 2];
    v[s] = 1.0;
    v
}

fn bellman() -> Outcome {
    let oracle = value_iteration();
    let mut rng = stream(4, Stream::NetInit, 0);
    let mut net = match MultiHeadQNet::new(2, &[32], &[32], OptimizerKind::Sgd, 1e-2, 0.0, 5, &mut rng) {
        Ok(n) => n,
        Err(e) => return outcome(false, e.to_string()),
    };
    let mask = {
        let mut m = [false; ACTION_COUNT];
        m[0] = true;
        m[1] = true;
        m
    };
    let batch: Vec<Transition> = (0..2)
        .flat_map(|s| (0..2).map(move |a| (s, a)))
        .map(|(s, a)| {
            let (s2, rc, rr) = MDP[s][a];
            Transition {
                state: one_hot(s),
                action: a,
                r_cov: rc,
                r_comm: rr,
                next_state: one_hot(s2),
                terminal: false,
                next_mask: mask,
                weight: [0.5, 0.5],
            }
        })
        .collect();
    let refs: Vec<&Transition> = batch.iter().collect();
    let error = |net: &MultiHeadQNet| {
        let mut worst = 0.0f64;
        for s in 0..2 {
            let (qc, qr) = net.q_values(&one_hot(s)).unwrap();
            for a in 0..2 {
                worst = worst.max((qc[a] - oracle[0][s][a]).abs()).max((qr[a] - oracle[1][s][a]).abs());
            }
        }
        worst
    };
    let updates = 5000;
    for _ in 0..updates {
        if let Err(e) = net.td_update(&refs, GAMMA, TargetMode::PerHead) {
            return outcome(false, e.to_string());
        }
    }
    let err = error(&net);
    outcome(
        err <= 1e-2,
        format!("||Q - Q*||_inf = {err:.2e} after {updates} updates (<= 1e-2), Q*_cov(0, 0) = {:.4}", oracle[0][0][0]),
    )
}

// ---------------------------------------------------------------------------
// 5. Toy optimality

/// Fewest moves that capture every cell of an `h x w` grid from `start`,
/// where each move captures the cell it enters and hovering is impossible.
fn bfs_tour(h: usize, w: usize, start: (usize, usize)) -> usize {
    let full: u32 = (1 << (h * w)) - 1;
    let idx = |r: usize, c: usize| r * w + c;
    let mut seen = HashSet::new();
    let mut queue = VecDeque::new();
    queue.push_back((start, 0u32, 0usize));
    seen.insert((start, 0u32));
    while let Some(((r, c), mask, d)) = queue.pop_front() {
        if mask == full {
            return d;
        }
        let steps = [(-1isize, 0isize), (1, 0), (0, 1), (0, -1)];
        for (dr, dc) in steps {
            let (nr, nc) = (r as isize + dr, c as isize + dc);
            if nr < 0 || nc < 0 || nr >= h as isize || nc >= w as isize {
                continue;
            }
            let next = (nr as usize, nc as usize);
            let m = mask | 1 << idx(next.0, next.1);
            if seen.insert((next, m)) {
                queue.push_back((next, m, d + 1));
            }
        }
    }
    unreachable!("every grid is connected")
}

fn toy_config() -> Config {
    let overrides: Vec<String> = [
        "scenario.grid_h=3",
        "scenario.grid_w=3",
        "scenario.uav_count=1",
        "scenario.user_count=0",
        "scenario.success_mode=\"full\"",
        "weighting.static_weight=[1.0, 0.0]",
        "network.backbone_hidden=[64, 64]",
        "network.head_hidden=[32]",
        "network.step_hidden=[16]",
        "network.actor_hidden=[16]",
        "network.critic_hidden=[16]",
        "agent.learn_start=200",
        "agent.target_period=100",
        "agent.epsilon_horizon=3000",
        "training.episodes=300",
        "training.eval_interval=0",
    ]
    .into_iter()
    .map(String::from)
    .collect();
    Config::from_toml_str("", &overrides).expect("toy config")
}

fn toy(audit: &mut Audit) -> Outcome {
    let cfg = toy_config();
    let optimum = bfs_tour(3, 3, (0, 0));
    let seeds = 10u64;
    let mut hits = 0;
    let mut lengths = Vec::new();
    for seed in 0..seeds {
        let run = (|| {
            let mut trainer = Trainer::new(&cfg, Variant::StaticWeight, seed)?;
            let mut episodes = Vec::new();
            for _ in 0..cfg.training.episodes {
                episodes.push(trainer.train_episode()?);
            }
            let eval = trainer.evaluate(1)?;
            episodes.extend(eval.iter().cloned());
            Ok::<_, hdwdrl_core::Error>((eval[0].clone(), RunLog {
                seed,
                variant: Variant::StaticWeight,
                episodes,
                audited_slots: trainer.audited_slots(),
            }))
        })();
        match run {
            Ok((e, log)) => {
                audit.absorb(std::slice::from_ref(&log));
                if e.success && e.slots <= optimum + 1 {
                    hits += 1;
                }
                lengths.push(if e.success { e.slots.to_string() } else { "unfinished".into() });
            }
            Err(err) => {
                audit.errors.push(format!("toy seed {seed}: {err}"));
                lengths.push("error".into());
            }
        }
    }
    outcome(
        hits >= 8,
        format!(
            "BFS optimum {optimum} moves; greedy tours [{}]; {hits}/{seeds} within +1 (need >= 8)",
            lengths.join(", ")
        ),
    )
}

// ---------------------------------------------------------------------------
// 6, 7, 9. Scaled scenario

const SCALED_SEEDS: [u64; 5] = [0, 1, 2, 3, 4];

fn scaled_config() -> Config {
    let overrides: Vec<String> = [
        "scenario.grid_h=6",
        "scenario.grid_w=6",
        "scenario.uav_count=2",
        "scenario.user_count=10",
        "scenario.init_demand=20e6",
        "training.episodes=120",
        "training.seeds=[0, 1, 2, 3, 4]",
    ]
    .into_iter()
    .map(String::from)
    .collect();
    Config::from_toml_str("", &overrides).expect("scaled config")
}

fn scaled_runs(dir: &Path, variants: &[Variant]) -> hdwdrl_core::Result<Vec<RunLog>> {
    let cfg = scaled_config();
    assert_eq!(cfg.training.seeds, SCALED_SEEDS);
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    sweep(&cfg, variants, Some(dir), workers, &|_| {})
}

fn fmt_opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map_or_else(|| "never".into(), |v| v.to_string())
}

fn scaled_claim(logs: &[RunLog]) -> Outcome {
    let cfg = scaled_config();
    let summary = match aggregate(logs, &cfg.scenario) {
        Ok(s) => s,
        Err(e) => return outcome(false, e.to_string()),
    };
    let find = |v: Variant| summary.variants.iter().find(|s| s.variant == v).expect("variant present");
    let (h, s) = (find(Variant::Hdwdrl), find(Variant::StaticWeight));
    let inf = f64::INFINITY;
    let (hk, sk) = (
        h.median_first_threshold_episode.unwrap_or(inf),
        s.median_first_threshold_episode.unwrap_or(inf),
    );
    let earlier = hk < sk;
    let (ht, st) = (
        h.final_eval_median_slots.unwrap_or(inf),
        s.final_eval_median_slots.unwrap_or(inf),
    );
    let faster = ht <= st;
    let per_seed = |v: &hdwdrl_core::harness::metrics::VariantSummary| {
        v.first_threshold_episode.iter().map(|k| fmt_opt(*k)).collect::<Vec<_>>().join(" ")
    };
    outcome(
        earlier && faster,
        format!(
            "median first threshold episode HDWDRL {} [{}] vs StaticWeight {} [{}] (need strictly smaller: {}); \
             final eval median T HDWDRL {} vs StaticWeight {} (need <=: {})",
            fmt_opt(h.median_first_threshold_episode),
            per_seed(h),
            fmt_opt(s.median_first_threshold_episode),
            per_seed(s),
            if earlier { "yes" } else { "no" },
            fmt_opt(h.final_eval_median_slots),
            fmt_opt(s.final_eval_median_slots),
            if faster { "yes" } else { "no" },
        ),
    )
}

fn ablations(base: &[RunLog], abl: &[RunLog]) -> Outcome {
    let cfg = scaled_config();
    let of = |logs: &[RunLog], v: Variant, seed: u64| {
        logs.iter().find(|l| l.variant == v && l.seed == seed).cloned().expect("run present")
    };
    let alpha0 = cfg.weighting.initial_alpha;
    let no_eac_constant = abl
        .iter()
        .filter(|l| l.variant == Variant::NoEac)
        .all(|l| l.episodes.iter().all(|e| e.alpha == alpha0));
    let no_sws_zero = abl
        .iter()
        .filter(|l| l.variant == Variant::NoSws)
        .all(|l| l.episodes.iter().all(|e| e.mean_delta == 0.0));
    let hdwdrl_alpha_moves = base
        .iter()
        .filter(|l| l.variant == Variant::Hdwdrl)
        .any(|l| l.training().any(|e| e.alpha != alpha0));

    let key = |k: Option<usize>| k.map_or(usize::MAX, |k| k);
    let mut not_earlier = [0usize; 2];
    let mut cells = Vec::new();
    for &seed in &SCALED_SEEDS {
        let h = key(first_threshold_episode(&of(base, Variant::Hdwdrl, seed), &cfg.scenario));
        for (i, v) in [Variant::NoEac, Variant::NoSws].into_iter().enumerate() {
            let a = key(first_threshold_episode(&of(abl, v, seed), &cfg.scenario));
            if a >= h {
                not_earlier[i] += 1;
            }
        }
        let show = |k: usize| if k == usize::MAX { "never".to_string() } else { k.to_string() };
        let e = key(first_threshold_episode(&of(abl, Variant::NoEac, seed), &cfg.scenario));
        let s = key(first_threshold_episode(&of(abl, Variant::NoSws, seed), &cfg.scenario));
        cells.push(format!("seed {seed}: {}/{}/{}", show(h), show(e), show(s)));
    }
    let ordering = not_earlier.iter().all(|&n| n >= 3);
    outcome(
        no_eac_constant && no_sws_zero && ordering,
        format!(
            "NoEAC alpha constant {alpha0}: {no_eac_constant} (HDWDRL alpha varies: {hdwdrl_alpha_moves}); \
             NoSWS delta constant 0: {no_sws_zero}; first threshold episode HDWDRL/NoEAC/NoSWS [{}]; \
             ablation not earlier in {}/5 (NoEAC) and {}/5 (NoSWS) seeds (need >= 3)",
            cells.join(", "),
            not_earlier[0],
            not_earlier[1],
        ),
    )
}

fn determinism(root: &Path) -> Outcome {
    let read = |p: &Path| std::fs::read(p).map_err(|e| format!("{}: {e}", p.display()));
    match (read(&root.join("first/metrics.csv")), read(&root.join("second/metrics.csv"))) {
        (Ok(a), Ok(b)) => outcome(
            a == b && !a.is_empty(),
            format!("metrics.csv {} bytes vs {} bytes, identical: {}", a.len(), b.len(), a == b),
        ),
        (Err(e), _) | (_, Err(e)) => outcome(false, e),
    }
}

// ---------------------------------------------------------------------------
// 8. Constraints

/// Slots a lone UAV flies on a grid it cannot finish, under the default
/// power and budget.
fn energy_cap() -> hdwdrl_core::Result<(usize, Status)> {
    let cfg = ScenarioConfig {
        grid_h: 20,
        grid_w: 20,
        uav_count: 1,
        user_count: 0,
        success_mode: SuccessMode::Full,
        ..ScenarioConfig::default()
    };
    let mut world = World::new(&cfg)?;
    let mut rng = stream(8, Stream::Exploration, 0);
    let mut flown = 0;
    while world.status() == Status::Running {
        let (_, outcomes, _) = world.step_with(|w, _, m| w.random_action(m, &mut rng));
        flown += outcomes.iter().filter(|o| o.is_some()).count();
        world.audit()?;
        if flown > 1000 {
            break;
        }
    }
    Ok((flown, world.status()))
}

fn constraints(audit: &Audit) -> Outcome {
    let defaults = ScenarioConfig::default();
    let (flown, status) = match energy_cap() {
        Ok(r) => r,
        Err(e) => return outcome(false, e.to_string()),
    };
    let cap_ok = defaults.max_slots() == 100 && flown == 100 && status == Status::EnergyExhausted;
    let runs_ok = audit.errors.is_empty() && audit.max_episode_slots <= 100;
    outcome(
        cap_ok && runs_ok,
        format!(
            "{} runs, {} audited slots, {} violations, longest episode {} slots; \
             budget allows {} slots, lone UAV flew {flown} before {status:?}{}",
            audit.runs,
            audit.slots,
            audit.errors.len(),
            audit.max_episode_slots,
            defaults.max_slots(),
            if audit.errors.is_empty() { String::new() } else { format!("; errors: {}", audit.errors.join("; ")) }
        ),
    )
}

//! Random-policy rollouts with every simulator invariant checked per slot.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::config::ScenarioConfig;
use crate::env::{Status, World};
use crate::error::{Error, Result};
use crate::rng::{mix, stream, Stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvReport {
    pub seed: u64,
    pub slots: usize,
    pub episodes: usize,
    pub successes: usize,
    pub exhausted: usize,
    pub served_links: usize,
    pub mean_final_coverage: f64,
    pub mean_final_comm: f64,
    pub max_episode_slots: usize,
    pub uploaded_bits: f64,
}

/// Roll out uniformly random moves for `slots` slots in total, starting a
/// fresh world whenever an episode ends. Each slot is audited for QoS,
/// subchannel caps, energy, collisions, coverage bookkeeping and monotone
/// progress. With `trace`, one JSON object per slot is written.
pub fn validate_env(
    cfg: &ScenarioConfig,
    seed: u64,
    slots: usize,
    mut trace: Option<&mut dyn Write>,
) -> Result<EnvReport> {
    cfg.validate()?;
    let mut rng = stream(seed, Stream::Exploration, 0);
    let mut report = EnvReport {
        seed,
        slots: 0,
        episodes: 0,
        successes: 0,
        exhausted: 0,
        served_links: 0,
        mean_final_coverage: 0.0,
        mean_final_comm: 0.0,
        max_episode_slots: 0,
        uploaded_bits: 0.0,
    };
    let mut finals = Vec::new();
    while report.slots < slots {
        let mut sc = cfg.clone();
        sc.rng_seed = mix(seed, report.episodes as u64);
        let mut world = World::new(&sc)?;
        let mut prev = world.completion_ratios();
        let mut queues: Vec<f64> = world.users.iter().map(|u| u.queue).collect();
        while world.status() == Status::Running && report.slots < slots {
            let (assoc, _, bits) = world.step_with(|w, _, m| w.random_action(m, &mut rng));
            let fail = |what: String| Error::Invariant(format!("episode {} slot {}: {what}", report.episodes, world.t));
            assoc.audit(&sc, world.users.len()).map_err(|e| fail(e.to_string()))?;
            world.audit().map_err(|e| fail(e.to_string()))?;
            let now = world.completion_ratios();
            if now.0 < prev.0 || now.1 < prev.1 {
                return Err(fail(format!("progress decreased from {prev:?} to {now:?}")));
            }
            for (n, u) in world.users.iter().enumerate() {
                if u.queue > queues[n] {
                    return Err(fail(format!("user {n} queue grew")));
                }
                queues[n] = u.queue;
            }
            if world.t > sc.max_slots() {
                return Err(fail("UAV flew past its energy budget".into()));
            }
            prev = now;
            report.slots += 1;
            report.served_links += assoc.served_count();
            report.uploaded_bits += bits;
            if let Some(w) = trace.as_deref_mut() {
                serde_json::to_writer(&mut *w, &world.trace()).map_err(|e| Error::Format(e.to_string()))?;
                w.write_all(b"\n").map_err(|e| Error::io("<trace>", e))?;
            }
        }
        match world.status() {
            Status::Success => report.successes += 1,
            Status::EnergyExhausted => report.exhausted += 1,
            Status::Running => {}
        }
        report.max_episode_slots = report.max_episode_slots.max(world.t);
        finals.push(prev);
        report.episodes += 1;
    }
    if !finals.is_empty() {
        let n = finals.len() as f64;
        report.mean_final_coverage = finals.iter().map(|f| f.0).sum::<f64>() / n;
        report.mean_final_comm = finals.iter().map(|f| f.1).sum::<f64>() / n;
    }
    Ok(report)
}

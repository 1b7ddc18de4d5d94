//! Metrics table, cross-seed aggregation and plot-ready series.
//!
//! `metrics.csv` (format 1) has one row per episode with the columns of
//! [`MetricsRow`]. Wall time is deliberately absent so that identical runs
//! give identical bytes.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{EpisodeStats, Phase, RunLog, Variant};
use crate::config::ScenarioConfig;
use crate::error::{Error, Result};

pub const METRICS_FORMAT: u32 = 1;
pub const SUMMARY_FORMAT: u32 = 1;
/// Evaluation episodes per run that feed the final completion-time figure.
pub const FINAL_EVAL_WINDOW: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub seed: u64,
    pub variant: Variant,
    pub phase: Phase,
    pub k: usize,
    pub index: usize,
    pub coverage: f64,
    pub comm: f64,
    pub slots: usize,
    pub success: bool,
    pub energy: f64,
    pub mean_alpha: f64,
    pub mean_delta: f64,
    pub mean_w_cov: f64,
    pub loss_cov: f64,
    pub loss_comm: f64,
    pub loss_step: f64,
    pub loss_critic: f64,
    pub loss_actor: f64,
    pub epsilon: f64,
}

impl MetricsRow {
    pub fn new(seed: u64, variant: Variant, e: &EpisodeStats) -> Self {
        Self {
            seed,
            variant,
            phase: e.phase,
            k: e.k,
            index: e.index,
            coverage: e.coverage,
            comm: e.comm,
            slots: e.slots,
            success: e.success,
            energy: e.energy,
            mean_alpha: e.alpha,
            mean_delta: e.mean_delta,
            mean_w_cov: e.mean_w_cov,
            loss_cov: e.loss_cov,
            loss_comm: e.loss_comm,
            loss_step: e.loss_step,
            loss_critic: e.loss_critic,
            loss_actor: e.loss_actor,
            epsilon: e.epsilon,
        }
    }
}

/// Render every episode of `logs`, in order, as CSV with a header.
pub fn metrics_csv(logs: &[RunLog]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for log in logs {
        for e in &log.episodes {
            w.serialize(MetricsRow::new(log.seed, log.variant, e))
                .map_err(|e| Error::Format(e.to_string()))?;
        }
    }
    if logs.iter().all(|l| l.episodes.is_empty()) {
        return Ok(header_line());
    }
    let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn header_line() -> String {
    "seed,variant,phase,k,index,coverage,comm,slots,success,energy,mean_alpha,mean_delta,mean_w_cov,\
     loss_cov,loss_comm,loss_step,loss_critic,loss_actor,epsilon\n"
        .to_string()
}

/// Parse `metrics.csv`; errors carry the 1-based line number.
pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRow>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_metrics(&text).map_err(|e| match e {
        Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn parse_metrics(text: &str) -> Result<Vec<MetricsRow>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let headers = r.headers().map_err(|e| Error::Format(format!("line 1: {e}")))?.clone();
    let expected: Vec<String> = header_line().trim_end().split(',').map(str::to_string).collect();
    if headers.iter().collect::<Vec<_>>() != expected.iter().map(String::as_str).collect::<Vec<_>>() {
        return Err(Error::Format("line 1: unexpected header".into()));
    }
    let mut rows = Vec::new();
    for (i, rec) in r.deserialize::<MetricsRow>().enumerate() {
        let row = rec.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(i as u64 + 2);
            Error::Format(format!("line {line}: {}", describe(&e)))
        })?;
        rows.push(row);
    }
    Ok(rows)
}

fn describe(e: &csv::Error) -> String {
    match e.kind() {
        csv::ErrorKind::Deserialize { err, .. } => match err.field() {
            Some(f) => format!("column {}: {}", f + 1, err.kind()),
            None => err.kind().to_string(),
        },
        _ => e.to_string(),
    }
}

/// Linear-interpolation quantile of sorted data; infinities propagate.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty data");
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    if sorted[lo] == sorted[hi] {
        return sorted[lo];
    }
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

pub fn median(values: &[f64]) -> f64 {
    quantile(&sorted(values.to_vec()), 0.5)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
}

impl Band {
    pub fn of(values: &[f64]) -> Self {
        let s = sorted(values.to_vec());
        Self {
            median: quantile(&s, 0.5),
            q25: quantile(&s, 0.25),
            q75: quantile(&s, 0.75),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub k: usize,
    pub coverage: Band,
    pub comm: Band,
    pub slots: Band,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantSummary {
    pub variant: Variant,
    pub seeds: Vec<u64>,
    /// Per seed, the first training episode meeting both thresholds.
    pub first_threshold_episode: Vec<Option<usize>>,
    /// `None` when at least half the seeds never met the thresholds.
    pub median_first_threshold_episode: Option<f64>,
    /// Median completion time over each seed's final evaluation episodes.
    pub final_eval_median_slots: Option<f64>,
    pub training: Vec<CurvePoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub format: u32,
    pub coverage_threshold: f64,
    pub comm_threshold: f64,
    pub variants: Vec<VariantSummary>,
}

impl Summary {
    pub fn variant(&self, v: Variant) -> Option<&VariantSummary> {
        self.variants.iter().find(|s| s.variant == v)
    }
}

/// First training episode with `C >= rho_c` and `R >= rho_r`.
pub fn first_threshold_episode(log: &RunLog, sc: &ScenarioConfig) -> Option<usize> {
    log.training()
        .find(|e| e.coverage >= sc.coverage_threshold && e.comm >= sc.comm_threshold)
        .map(|e| e.k)
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

/// Per-variant cross-seed statistics. Run order does not matter.
pub fn aggregate(logs: &[RunLog], sc: &ScenarioConfig) -> Result<Summary> {
    if logs.is_empty() {
        return Err(Error::Usage("nothing to aggregate".into()));
    }
    let mut by_variant: BTreeMap<Variant, Vec<&RunLog>> = BTreeMap::new();
    for log in logs {
        by_variant.entry(log.variant).or_default().push(log);
    }
    let mut variants = Vec::new();
    for (variant, mut runs) in by_variant {
        runs.sort_by_key(|r| r.seed);
        let firsts: Vec<Option<usize>> = runs.iter().map(|r| first_threshold_episode(r, sc)).collect();
        let as_f64: Vec<f64> = firsts.iter().map(|f| f.map_or(f64::INFINITY, |k| k as f64)).collect();

        let mut tails = Vec::new();
        for r in &runs {
            let evals: Vec<f64> = r.evaluation().map(|e| e.slots as f64).collect();
            tails.extend_from_slice(&evals[evals.len().saturating_sub(FINAL_EVAL_WINDOW)..]);
        }

        let mut per_k: BTreeMap<usize, [Vec<f64>; 3]> = BTreeMap::new();
        for r in &runs {
            for e in r.training() {
                let slot = per_k.entry(e.k).or_default();
                slot[0].push(e.coverage);
                slot[1].push(e.comm);
                slot[2].push(e.slots as f64);
            }
        }
        variants.push(VariantSummary {
            variant,
            seeds: runs.iter().map(|r| r.seed).collect(),
            median_first_threshold_episode: finite(median(&as_f64)),
            first_threshold_episode: firsts,
            final_eval_median_slots: (!tails.is_empty()).then(|| median(&tails)),
            training: per_k
                .into_iter()
                .map(|(k, [c, r, t])| CurvePoint {
                    k,
                    coverage: Band::of(&c),
                    comm: Band::of(&r),
                    slots: Band::of(&t),
                })
                .collect(),
        });
    }
    Ok(Summary {
        format: SUMMARY_FORMAT,
        coverage_threshold: sc.coverage_threshold,
        comm_threshold: sc.comm_threshold,
        variants,
    })
}

/// Write `<variant>_{coverage,comm,slots}.csv` with columns
/// `episode,median,q25,q75` from the training rows of a metrics file.
pub fn export_plots(metrics: &Path, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let rows = read_metrics(metrics)?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut by_variant: BTreeMap<Variant, BTreeMap<usize, [Vec<f64>; 3]>> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.phase == Phase::Train) {
        let slot = by_variant.entry(r.variant).or_default().entry(r.k).or_default();
        slot[0].push(r.coverage);
        slot[1].push(r.comm);
        slot[2].push(r.slots as f64);
    }
    let mut written = Vec::new();
    for (variant, per_k) in by_variant {
        for (i, metric) in ["coverage", "comm", "slots"].into_iter().enumerate() {
            let path = out_dir.join(format!("{variant}_{metric}.csv"));
            let mut w = csv::Writer::from_writer(Vec::new());
            let io = |e: csv::Error| Error::Format(e.to_string());
            w.write_record(["episode", "median", "q25", "q75"]).map_err(io)?;
            for (k, values) in &per_k {
                let b = Band::of(&values[i]);
                w.serialize((k, b.median, b.q25, b.q75)).map_err(io)?;
            }
            let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
            std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
            written.push(path);
        }
    }
    Ok(written)
}

//! Benchmark harness: query workloads, accuracy metrics, and experiment
//! drivers.
//!
//! A workload samples a fraction of the timestamps in `[w, n]`; each sampled
//! timestamp carries 50 high-frequency query items (the window's top 50 by
//! exact frequency, ties to the smaller id) and up to 50 low-frequency items
//! (drawn from the remaining items with window frequency at least 100). An
//! experiment replays the stream into the sketch and the exact oracle
//! side by side, answers the workload at each sampled timestamp, and reduces
//! the raw query log to MAE/MRE, heavy-hitter precision/recall/F1,
//! throughput, and memory footprint.

use std::collections::HashSet;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dpsw::WindowSketch;
use crate::error::{Error, Result};
use crate::oracle::ExactWindow;
use crate::params::{FrameworkConfig, PrivacyBudget};

/// Minimum exact window frequency for an item to qualify as a low-frequency
/// query target.
pub const LOW_FREQUENCY_FLOOR: u64 = 100;
/// Query-group size: 50 high plus up to 50 low items per timestamp.
pub const GROUP_SIZE: usize = 50;

/// The queries to run at one sampled timestamp.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WorkloadEntry {
    pub t: u64,
    pub high: Vec<u64>,
    pub low: Vec<u64>,
}

/// A full query workload over one stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Workload {
    pub w: u64,
    pub entries: Vec<WorkloadEntry>,
    /// Total number of low-frequency slots that could not be filled because
    /// too few items passed the frequency floor.
    pub low_shortfall: u64,
}

/// Builds the query workload for `items` under window size `w`.
///
/// Timestamps are a uniform without-replacement sample of
/// `max(1, floor(sample_fraction * (n - w + 1)))` positions in `[w, n]`.
/// Ground truth comes from the exact oracle replayed alongside.
pub fn build_workload(items: &[u64], w: u64, sample_fraction: f64, seed: u64) -> Result<Workload> {
    let n = items.len() as u64;
    if n == 0 {
        return Err(Error::EmptyInput("stream"));
    }
    if w < 1 || w > n {
        return Err(Error::InvalidConfig(format!(
            "workload needs 1 <= w <= n, got w = {w}, n = {n}"
        )));
    }
    if !(sample_fraction > 0.0 && sample_fraction <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "sample fraction must lie in (0, 1], got {sample_fraction}"
        )));
    }
    let candidates = n - w + 1;
    let num_timestamps = ((sample_fraction * candidates as f64).floor() as u64)
        .max(1)
        .min(candidates);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut timestamps: Vec<u64> =
        rand::seq::index::sample(&mut rng, candidates as usize, num_timestamps as usize)
            .into_iter()
            .map(|offset| w + offset as u64)
            .collect();
    timestamps.sort_unstable();

    let freq_desc_id_asc = |a: &(u64, u64), b: &(u64, u64)| b.1.cmp(&a.1).then(a.0.cmp(&b.0));
    let mut oracle = ExactWindow::new(w);
    let mut entries = Vec::with_capacity(timestamps.len());
    let mut low_shortfall = 0u64;
    let mut next = 0usize;
    for (i, &item) in items.iter().enumerate() {
        oracle.observe(item);
        let t = i as u64 + 1;
        while next < timestamps.len() && timestamps[next] == t {
            let mut counted: Vec<(u64, u64)> = oracle.counts().collect();
            let split = GROUP_SIZE.min(counted.len());
            if split > 0 && split < counted.len() {
                counted.select_nth_unstable_by(split - 1, freq_desc_id_asc);
            }
            let (top, rest) = counted.split_at_mut(split);
            top.sort_unstable_by(freq_desc_id_asc);
            let high: Vec<u64> = top.iter().map(|&(item, _)| item).collect();

            let mut low_candidates: Vec<u64> = rest
                .iter()
                .filter(|&&(_, f)| f >= LOW_FREQUENCY_FLOOR)
                .map(|&(item, _)| item)
                .collect();
            low_candidates.sort_unstable();
            let low: Vec<u64> = if low_candidates.len() <= GROUP_SIZE {
                low_shortfall += (GROUP_SIZE - low_candidates.len()) as u64;
                low_candidates
            } else {
                let mut chosen: Vec<u64> =
                    rand::seq::index::sample(&mut rng, low_candidates.len(), GROUP_SIZE)
                        .into_iter()
                        .map(|idx| low_candidates[idx])
                        .collect();
                chosen.sort_unstable();
                chosen
            };
            entries.push(WorkloadEntry { t, high, low });
            next += 1;
        }
    }
    Ok(Workload {
        w,
        entries,
        low_shortfall,
    })
}

#[derive(Serialize, Deserialize)]
struct WorkloadRow {
    t: u64,
    group: String,
    item: u64,
}

/// Persists a workload as CSV with columns `t,group,item`.
pub fn write_workload<W: Write>(out: W, workload: &Workload) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    for entry in &workload.entries {
        for (group, items) in [("high", &entry.high), ("low", &entry.low)] {
            for &item in items {
                writer.serialize(WorkloadRow {
                    t: entry.t,
                    group: group.into(),
                    item,
                })?;
            }
        }
    }
    writer.flush()?;
    Ok(())
}

/// Reads a workload written by [`write_workload`]. `w` is not stored in the
/// file and must be supplied by the caller.
pub fn read_workload<R: std::io::Read>(input: R, w: u64) -> Result<Workload> {
    let mut reader = csv::Reader::from_reader(input);
    let mut entries: Vec<WorkloadEntry> = Vec::new();
    let mut low_shortfall = 0u64;
    for row in reader.deserialize() {
        let row: WorkloadRow = row?;
        if entries.last().map(|e: &WorkloadEntry| e.t) != Some(row.t) {
            if let Some(done) = entries.last() {
                low_shortfall += (GROUP_SIZE as u64).saturating_sub(done.low.len() as u64);
            }
            entries.push(WorkloadEntry {
                t: row.t,
                high: Vec::new(),
                low: Vec::new(),
            });
        }
        let entry = entries.last_mut().expect("pushed above");
        match row.group.as_str() {
            "high" => entry.high.push(row.item),
            "low" => entry.low.push(row.item),
            other => {
                return Err(Error::InvalidConfig(format!(
                    "unknown workload group {other:?}"
                )))
            }
        }
    }
    if let Some(done) = entries.last() {
        low_shortfall += (GROUP_SIZE as u64).saturating_sub(done.low.len() as u64);
    }
    Ok(Workload {
        w,
        entries,
        low_shortfall,
    })
}

/// Mean absolute error over `(estimate, truth)` pairs.
pub fn mae(pairs: &[(f64, f64)]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::EmptyInput("mae"));
    }
    Ok(pairs.iter().map(|(est, truth)| (est - truth).abs()).sum::<f64>() / pairs.len() as f64)
}

/// Mean relative error over `(estimate, truth)` pairs; every truth must be
/// positive.
pub fn mre(pairs: &[(f64, f64)]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::EmptyInput("mre"));
    }
    let mut acc = 0.0;
    for &(est, truth) in pairs {
        if truth == 0.0 {
            return Err(Error::ZeroTruthFrequency);
        }
        acc += (est - truth).abs() / truth;
    }
    Ok(acc / pairs.len() as f64)
}

/// Precision, recall, and F1 of a predicted heavy-hitter set against the
/// exact one. An empty prediction scores precision 1 only when the truth is
/// empty too; an empty truth scores recall 1. F1 is the harmonic mean, 0 when
/// both sides are 0.
pub fn prf1(predicted: &HashSet<u64>, truth: &HashSet<u64>) -> (f64, f64, f64) {
    let hits = predicted.intersection(truth).count() as f64;
    let precision = if predicted.is_empty() {
        if truth.is_empty() {
            1.0
        } else {
            0.0
        }
    } else {
        hits / predicted.len() as f64
    };
    let recall = if truth.is_empty() {
        1.0
    } else {
        hits / truth.len() as f64
    };
    let f1 = harmonic_mean(precision, recall);
    (precision, recall, f1)
}

fn harmonic_mean(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// One frequency query outcome.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FreqQueryRecord {
    pub t: u64,
    pub group_high: bool,
    pub item: u64,
    pub estimate: f64,
    pub truth: u64,
}

/// One item's membership outcome in a heavy-hitter query. Rows exist for
/// every item in the union of the predicted and exact sets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HhQueryRecord {
    pub t: u64,
    pub item: u64,
    pub estimate: f64,
    pub predicted: bool,
    pub truth: bool,
}

/// Aggregate result of one experiment run.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub dataset: String,
    pub n: u64,
    pub m: u64,
    pub w: u64,
    pub sub_len: u64,
    pub alpha: f64,
    pub num_checkpoints: usize,
    pub rows: usize,
    pub width: usize,
    pub epsilon: f64,
    pub delta: f64,
    pub rho: f64,
    pub gamma: f64,
    pub mae_high: f64,
    pub mae_low: f64,
    pub mre_high: f64,
    pub mre_low: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub throughput_ips: f64,
    pub footprint_bytes: u64,
    pub seed: u64,
    /// Diagnostic additive-error scale from the frequency-approximation
    /// analysis, instantiated with this run's constants. Reported, never
    /// asserted.
    pub theoretical_xi: f64,
}

#[derive(Serialize)]
struct MetricsRow<'a> {
    dataset: &'a str,
    n: u64,
    m: u64,
    w: u64,
    #[serde(rename = "L")]
    sub_len: u64,
    alpha: f64,
    num_checkpoints: usize,
    #[serde(rename = "a")]
    rows: usize,
    #[serde(rename = "b")]
    width: usize,
    epsilon: f64,
    delta: f64,
    rho: f64,
    gamma: f64,
    mae_high: f64,
    mae_low: f64,
    mre_high: f64,
    mre_low: f64,
    precision: f64,
    recall: f64,
    f1: f64,
    throughput_ips: f64,
    footprint_bytes: u64,
    seed: u64,
}

/// Writes reports in the exchange format:
/// `dataset,n,m,w,L,alpha,num_checkpoints,a,b,epsilon,delta,rho,gamma,`
/// `mae_high,mae_low,mre_high,mre_low,precision,recall,f1,throughput_ips,`
/// `footprint_bytes,seed`.
pub fn write_metrics_csv<W: Write>(out: W, reports: &[MetricsReport]) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    for r in reports {
        writer.serialize(MetricsRow {
            dataset: &r.dataset,
            n: r.n,
            m: r.m,
            w: r.w,
            sub_len: r.sub_len,
            alpha: r.alpha,
            num_checkpoints: r.num_checkpoints,
            rows: r.rows,
            width: r.width,
            epsilon: r.epsilon,
            delta: r.delta,
            rho: r.rho,
            gamma: r.gamma,
            mae_high: r.mae_high,
            mae_low: r.mae_low,
            mre_high: r.mre_high,
            mre_low: r.mre_low,
            precision: r.precision,
            recall: r.recall,
            f1: r.f1,
            throughput_ips: r.throughput_ips,
            footprint_bytes: r.footprint_bytes,
            seed: r.seed,
        })?;
    }
    writer.flush()?;
    Ok(())
}

/// Appends metrics rows to `path`, writing the header only when the file is
/// new or empty.
pub fn append_metrics_csv<P: AsRef<Path>>(path: P, reports: &[MetricsReport]) -> Result<()> {
    use std::fs::OpenOptions;
    let fresh = std::fs::metadata(path.as_ref()).map(|m| m.len() == 0).unwrap_or(true);
    let file = OpenOptions::new().create(true).append(true).open(path.as_ref())?;
    if fresh {
        write_metrics_csv(file, reports)
    } else {
        let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(file);
        for r in reports {
            writer.serialize(MetricsRow {
                dataset: &r.dataset,
                n: r.n,
                m: r.m,
                w: r.w,
                sub_len: r.sub_len,
                alpha: r.alpha,
                num_checkpoints: r.num_checkpoints,
                rows: r.rows,
                width: r.width,
                epsilon: r.epsilon,
                delta: r.delta,
                rho: r.rho,
                gamma: r.gamma,
                mae_high: r.mae_high,
                mae_low: r.mae_low,
                mre_high: r.mre_high,
                mre_low: r.mre_low,
                precision: r.precision,
                recall: r.recall,
                f1: r.f1,
                throughput_ips: r.throughput_ips,
                footprint_bytes: r.footprint_bytes,
                seed: r.seed,
            })?;
        }
        writer.flush()?;
        Ok(())
    }
}

/// Writes the raw per-query frequency log as CSV.
pub fn write_freq_log_csv<W: Write>(out: W, log: &[FreqQueryRecord]) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    for record in log {
        writer.serialize(record)?;
    }
    writer.flush()?;
    Ok(())
}

/// Writes the raw per-query heavy-hitter log as CSV.
pub fn write_hh_log_csv<W: Write>(out: W, log: &[HhQueryRecord]) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    for record in log {
        writer.serialize(record)?;
    }
    writer.flush()?;
    Ok(())
}

/// Frequency metrics `(mae_high, mae_low, mre_high, mre_low)` from a raw
/// query log; groups without queries yield NaN.
pub fn recompute_frequency_metrics(log: &[FreqQueryRecord]) -> (f64, f64, f64, f64) {
    let split = |high: bool| -> Vec<(f64, f64)> {
        log.iter()
            .filter(|r| r.group_high == high)
            .map(|r| (r.estimate, r.truth as f64))
            .collect()
    };
    let high = split(true);
    let low = split(false);
    let or_nan = |r: Result<f64>| r.unwrap_or(f64::NAN);
    (
        or_nan(mae(&high)),
        or_nan(mae(&low)),
        or_nan(mre(&high)),
        or_nan(mre(&low)),
    )
}

/// Heavy-hitter metrics `(precision, recall, f1)` from a raw query log:
/// per-timestamp precision and recall averaged over timestamps, F1 the
/// harmonic mean of the two averages.
pub fn recompute_hh_metrics(log: &[HhQueryRecord]) -> (f64, f64, f64) {
    let mut timestamps: Vec<u64> = log.iter().map(|r| r.t).collect();
    timestamps.sort_unstable();
    timestamps.dedup();
    if timestamps.is_empty() {
        return (f64::NAN, f64::NAN, f64::NAN);
    }
    let mut precision_sum = 0.0;
    let mut recall_sum = 0.0;
    for &t in &timestamps {
        let predicted: HashSet<u64> =
            log.iter().filter(|r| r.t == t && r.predicted).map(|r| r.item).collect();
        let truth: HashSet<u64> =
            log.iter().filter(|r| r.t == t && r.truth).map(|r| r.item).collect();
        let (p, r, _) = prf1(&predicted, &truth);
        precision_sum += p;
        recall_sum += r;
    }
    let precision = precision_sum / timestamps.len() as f64;
    let recall = recall_sum / timestamps.len() as f64;
    (precision, recall, harmonic_mean(precision, recall))
}

/// Additive-error scale `sqrt(w) (zeta + log(1 / (zeta eta)) / sqrt(rho))`
/// with unit constants; collapses to the collision term when noise is off.
pub fn theoretical_xi(w: u64, zeta: f64, eta: f64, rho: f64) -> f64 {
    let noise = if rho.is_finite() {
        (1.0 / (zeta * eta)).ln() / rho.sqrt()
    } else {
        0.0
    };
    (w as f64).sqrt() * (zeta + noise)
}

/// Everything that identifies one experiment besides the privacy budget.
#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    /// Label copied into the metrics rows.
    pub dataset: String,
    pub config: FrameworkConfig,
    /// Heavy-hitter threshold queried at each sampled timestamp.
    pub gamma: f64,
    /// Overrides the derived `zeta = e / width` in the heavy-hitter
    /// threshold when set.
    pub zeta_override: Option<f64>,
    /// Collect per-item heavy-hitter rows. Under heavy noise the predicted
    /// sets can hold thousands of items per timestamp, so large sweeps
    /// usually turn this off; precision/recall/F1 are computed either way.
    pub collect_hh_log: bool,
}

/// Result of one experiment: the aggregate report plus the raw query logs it
/// was reduced from.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: MetricsReport,
    pub freq_log: Vec<FreqQueryRecord>,
    pub hh_log: Vec<HhQueryRecord>,
}

/// Wall-clock throughput of the observe loop alone, in items per second.
/// Returns 0 for an empty stream.
pub fn measure_throughput(
    config: &FrameworkConfig,
    budget: &PrivacyBudget,
    items: &[u64],
) -> Result<f64> {
    if items.is_empty() {
        return Ok(0.0);
    }
    let mut sketch = WindowSketch::new(config.clone(), *budget)?;
    let started = Instant::now();
    for &item in items {
        sketch.observe(item);
    }
    let elapsed = started.elapsed().as_secs_f64();
    if elapsed <= 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(items.len() as f64 / elapsed)
}

/// Runs one experiment: a timed observe-only pass for throughput, then a
/// replay that answers the workload against the exact oracle at every
/// sampled timestamp. Estimates enter the metrics raw; negative estimates
/// contribute their full absolute error.
pub fn run_experiment(
    items: &[u64],
    spec: &ExperimentSpec,
    budget: &PrivacyBudget,
    workload: &Workload,
) -> Result<RunOutput> {
    let config = &spec.config;
    config.validate()?;
    if let Some(position) = items.iter().position(|&s| s < 1 || s > config.domain_size) {
        return Err(Error::InvalidStreamSpec(format!(
            "stream item {} at position {} outside domain [1, {}]",
            items[position],
            position + 1,
            config.domain_size
        )));
    }
    if workload.w != config.w {
        return Err(Error::InvalidConfig(format!(
            "workload was built for w = {}, experiment uses w = {}",
            workload.w, config.w
        )));
    }
    let zeta = spec.zeta_override.unwrap_or_else(|| config.zeta());

    let throughput_ips = measure_throughput(config, budget, items)?;

    let mut sketch = WindowSketch::new(config.clone(), *budget)?;
    let mut oracle = ExactWindow::new(config.w);
    let mut freq_log = Vec::new();
    let mut hh_log = Vec::new();
    let mut precision_sum = 0.0;
    let mut recall_sum = 0.0;
    let mut hh_queries = 0u64;
    let mut next = 0usize;
    for (i, &item) in items.iter().enumerate() {
        sketch.observe(item);
        oracle.observe(item);
        let t = i as u64 + 1;
        while next < workload.entries.len() && workload.entries[next].t == t {
            let entry = &workload.entries[next];
            let selection = sketch.select_sketches();
            for (group_high, group) in [(true, &entry.high), (false, &entry.low)] {
                for &query in group {
                    freq_log.push(FreqQueryRecord {
                        t,
                        group_high,
                        item: query,
                        estimate: selection.estimate(query),
                        truth: oracle.frequency(query),
                    });
                }
            }
            let predicted: std::collections::HashMap<u64, f64> =
                sketch.heavy_hitters_with_zeta(spec.gamma, zeta).into_iter().collect();
            let predicted_set: HashSet<u64> = predicted.keys().copied().collect();
            let truth_set = oracle.heavy_hitters(spec.gamma);
            let (p, r, _) = prf1(&predicted_set, &truth_set);
            precision_sum += p;
            recall_sum += r;
            hh_queries += 1;
            if spec.collect_hh_log {
                let mut union: Vec<u64> = predicted_set.union(&truth_set).copied().collect();
                union.sort_unstable();
                for member in union {
                    hh_log.push(HhQueryRecord {
                        t,
                        item: member,
                        estimate: predicted
                            .get(&member)
                            .copied()
                            .unwrap_or_else(|| selection.estimate(member)),
                        predicted: predicted_set.contains(&member),
                        truth: truth_set.contains(&member),
                    });
                }
            }
            next += 1;
        }
    }

    let (mae_high, mae_low, mre_high, mre_low) = recompute_frequency_metrics(&freq_log);
    let (precision, recall, f1) = if hh_queries == 0 {
        (f64::NAN, f64::NAN, f64::NAN)
    } else {
        let precision = precision_sum / hh_queries as f64;
        let recall = recall_sum / hh_queries as f64;
        (precision, recall, harmonic_mean(precision, recall))
    };
    let report = MetricsReport {
        dataset: spec.dataset.clone(),
        n: items.len() as u64,
        m: config.domain_size,
        w: config.w,
        sub_len: config.sub_len,
        alpha: config.alpha,
        num_checkpoints: sketch.checkpoints().len(),
        rows: config.rows,
        width: config.width,
        epsilon: budget.epsilon(),
        delta: budget.delta(),
        rho: budget.rho(),
        gamma: spec.gamma,
        mae_high,
        mae_low,
        mre_high,
        mre_low,
        precision,
        recall,
        f1,
        throughput_ips,
        footprint_bytes: sketch.footprint().bytes as u64,
        seed: config.seed,
        theoretical_xi: theoretical_xi(config.w, config.zeta(), config.eta(), budget.rho()),
    };
    Ok(RunOutput {
        report,
        freq_log,
        hh_log,
    })
}

/// Runs [`run_experiment`] once per epsilon, deriving each budget from the
/// shared `delta`.
pub fn run_grid(
    items: &[u64],
    spec: &ExperimentSpec,
    epsilons: &[f64],
    delta: f64,
    workload: &Workload,
) -> Result<Vec<RunOutput>> {
    epsilons
        .iter()
        .map(|&epsilon| {
            let budget = PrivacyBudget::new(epsilon, delta)?;
            run_experiment(items, spec, &budget, workload)
        })
        .collect()
}

//! Executable checks for the window sketch's structural and statistical
//! guarantees. Kept out of the core library so the shipping crate carries no
//! test-only oracles.
//!
//! Three checks cover the load-bearing claims:
//! - budget accounting: every materialized substream spends exactly the
//!   closed-form fraction of the zCDP budget;
//! - noiseless equivalence: with noise off and collision-free hashing, a
//!   window query equals the exact count over the selected interval;
//! - heavy-hitter behaviour: items far enough above the threshold are
//!   reported and items far enough below are not, at rates matching the
//!   empirically calibrated error quantile.
//!
//! All checks are deterministic functions of their plan, seeds included.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::Write;

use dpsw_core::checkpoints::checkpoint_count;
use dpsw_core::datagen::{generate, StreamSpec};
use dpsw_core::error::{Error, Result};
use dpsw_core::oracle::ExactWindow;
use dpsw_core::params::{BudgetSchedule, FrameworkConfig, PrivacyBudget};
use dpsw_core::pcms::HashKind;
use dpsw_core::dpsw::WindowSketch;

/// One measured quantity with its acceptance bound.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckRecord {
    pub label: String,
    pub value: f64,
    pub bound: f64,
    pub pass: bool,
}

/// Outcome of one check: per-case records plus free-form counterexamples.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub name: &'static str,
    pub records: Vec<CheckRecord>,
    pub counterexamples: Vec<String>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.counterexamples.is_empty() && self.records.iter().all(|r| r.pass)
    }

    /// Human-readable summary, one line per record.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let verdict = if self.passed() { "PASS" } else { "FAIL" };
        let _ = writeln!(out, "[{verdict}] {}", self.name);
        for record in &self.records {
            let _ = writeln!(
                out,
                "  {} {}: value {:.6e} vs bound {:.6e}",
                if record.pass { "ok  " } else { "FAIL" },
                record.label,
                record.value,
                record.bound
            );
        }
        for example in &self.counterexamples {
            let _ = writeln!(out, "  counterexample: {example}");
        }
        out
    }

    /// Machine-readable rows: `check,label,value,bound,pass`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut writer = csv::Writer::from_writer(out);
        writer.write_record(["check", "label", "value", "bound", "pass"])?;
        for r in &self.records {
            writer.write_record([
                self.name,
                &r.label,
                &r.value.to_string(),
                &r.bound.to_string(),
                &r.pass.to_string(),
            ])?;
        }
        writer.flush()?;
        Ok(())
    }
}

/// Plants `item` at every `every`-th stream position on top of the base
/// distribution, pinning its window frequency near `w / every`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PlantedItem {
    pub item: u64,
    pub every: u64,
}

/// Shared trial parameters for the statistical checks.
#[derive(Debug, Clone)]
pub struct TrialPlan {
    /// One trial per seed; seeds must be distinct.
    pub seeds: Vec<u64>,
    pub n: u64,
    pub w: u64,
    pub sub_len: u64,
    pub alpha: f64,
    pub rows: usize,
    pub width: usize,
    pub m: u64,
    pub epsilon: f64,
    pub delta: f64,
    pub gamma: f64,
    /// Nominal failure rate for the calibrated quantile checks.
    pub eta_hat: f64,
    /// Optional planted heavy item.
    pub planted: Option<PlantedItem>,
    /// Distance between query times in the equivalence check.
    pub query_stride: u64,
}

impl TrialPlan {
    /// `statistical` checks additionally require at least 20 trials.
    pub fn validate(&self, statistical: bool) -> Result<()> {
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.seeds.len() {
            return Err(Error::InvalidConfig("trial seeds must be distinct".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::EmptyInput("trial seeds"));
        }
        if statistical && self.seeds.len() < 20 {
            return Err(Error::InvalidConfig(format!(
                "statistical checks need at least 20 trials, got {}",
                self.seeds.len()
            )));
        }
        if !(self.eta_hat > 0.0 && self.eta_hat < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "eta_hat must lie in (0, 1), got {}",
                self.eta_hat
            )));
        }
        Ok(())
    }

    fn stream(&self, seed: u64) -> Result<Vec<u64>> {
        let mut items = generate(&StreamSpec::zipf(self.n, self.m, seed))?;
        if let Some(planted) = self.planted {
            let every = planted.every.max(1) as usize;
            for slot in items.iter_mut().step_by(every) {
                *slot = planted.item;
            }
        }
        Ok(items)
    }
}

/// Smallest substream length whose checkpoint list has exactly `target`
/// entries, if one exists up to `max_sub_len`. The count is non-decreasing
/// in the length, so an exponential bracket plus bisection finds the
/// boundary.
pub fn find_sub_len(alpha: f64, target: usize, max_sub_len: u64) -> Option<u64> {
    let count = |sub_len: u64| checkpoint_count(sub_len, alpha).expect("valid alpha");
    let mut hi = 1u64;
    while count(hi) < target {
        hi = hi.saturating_mul(2);
        if hi > max_sub_len {
            return None;
        }
    }
    let mut lo = (hi / 2).max(1);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if count(mid) >= target {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    (count(lo) == target).then_some(lo)
}

/// Empirical `q`-quantile (nearest-rank) of an unsorted sample.
pub fn quantile(samples: &[f64], q: f64) -> f64 {
    assert!(!samples.is_empty(), "quantile of an empty sample");
    assert!((0.0..=1.0).contains(&q));
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("no NaNs in samples"));
    let rank = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1]
}

/// Median shorthand for [`quantile`].
pub fn median(samples: &[f64]) -> f64 {
    quantile(samples, 0.5)
}

/// Verifies the per-substream budget identity on every substream ever
/// materialized: the spend must equal `rho (1 - (1-alpha)^2 alpha^(K-1))`
/// within `1e-12` relative error. One grid entry per `(alpha, K)` pair.
pub fn check_budget_conservation(grid: &[(f64, usize)], budget: PrivacyBudget) -> CheckReport {
    const REL_TOL: f64 = 1e-12;
    let mut records = Vec::new();
    let mut counterexamples = Vec::new();
    if !budget.rho().is_finite() {
        counterexamples.push("budget accounting needs a finite rho".into());
        return CheckReport {
            name: "budget-conservation",
            records,
            counterexamples,
        };
    }
    for &(alpha, target) in grid {
        let Some(sub_len) = find_sub_len(alpha, target, 1 << 22) else {
            counterexamples.push(format!(
                "no substream length up to 2^22 yields {target} checkpoints at alpha = {alpha}"
            ));
            continue;
        };
        let config = FrameworkConfig::new(2 * sub_len, sub_len, alpha, 1, 4, 16, 11);
        let mut sketch = match WindowSketch::new(config, budget) {
            Ok(sketch) => sketch,
            Err(err) => {
                counterexamples.push(format!("alpha = {alpha}, K = {target}: {err}"));
                continue;
            }
        };
        let expected = BudgetSchedule::closed_form_total(budget.rho(), alpha, target);
        let mut max_rel = 0.0f64;
        let mut seen = 0;
        let items = 5 * sub_len;
        for t in 0..items {
            sketch.observe(t % 16 + 1);
            if sketch.substreams_created() > seen {
                seen = sketch.substreams_created();
                let newest = sketch.substreams().last().expect("just created");
                let spent = newest.spent_budget();
                let rel = ((spent - expected) / expected).abs();
                max_rel = max_rel.max(rel);
                if spent > budget.rho() * (1.0 + REL_TOL) {
                    counterexamples.push(format!(
                        "alpha = {alpha}, K = {target}: substream {} spends {spent} > rho {}",
                        newest.ordinal(),
                        budget.rho()
                    ));
                }
            }
        }
        records.push(CheckRecord {
            label: format!("alpha = {alpha}, K = {target}, L = {sub_len}, substreams = {seen}"),
            value: max_rel,
            bound: REL_TOL,
            pass: max_rel <= REL_TOL && seen >= 4,
        });
    }
    CheckReport {
        name: "budget-conservation",
        records,
        counterexamples,
    }
}

/// With infinite budget and collision-free hashing, every window query must
/// equal the exact count over the selection's covered interval — the only
/// framework error left is window misalignment, which the covered interval
/// absorbs by definition. Any discrepancy is dumped with its full trace.
pub fn check_noiseless_equivalence(plan: &TrialPlan) -> Result<CheckReport> {
    plan.validate(false)?;
    let mut records = Vec::new();
    let mut counterexamples = Vec::new();
    for &seed in &plan.seeds {
        let items = plan.stream(seed)?;
        let config = FrameworkConfig::new(
            plan.w,
            plan.sub_len,
            plan.alpha,
            plan.rows,
            plan.m as usize,
            plan.m,
            seed ^ 0x5EED,
        )
        .with_hashing(HashKind::Identity);
        let mut sketch = WindowSketch::new(config, PrivacyBudget::noiseless())?;
        let mut oracle = ExactWindow::with_history(plan.w);
        let mut checked = 0u64;
        let mut mismatches = 0u64;
        let mut spot_item = 1u64;
        for (i, &item) in items.iter().enumerate() {
            sketch.observe(item);
            oracle.observe(item);
            let t = i as u64 + 1;
            if !t.is_multiple_of(plan.query_stride) && t != plan.n {
                continue;
            }
            let selection = sketch.select_sketches();
            let (lo, hi) = selection.covered();
            for pair in selection.parts().windows(2) {
                if pair[1].sketch.start() != pair[0].sketch.end() + 1 {
                    counterexamples.push(format!(
                        "seed {seed}, t = {t}: ranges {:?} and {:?} not contiguous",
                        pair[0].sketch.range(),
                        pair[1].sketch.range()
                    ));
                }
            }
            for part in selection.parts() {
                if !(part.sketch.frozen() || part.sketch.end() == t) {
                    counterexamples.push(format!(
                        "seed {seed}, t = {t}: selected sketch {:?} not complete",
                        part.sketch.range()
                    ));
                }
            }
            // One bulk recount over [lo, hi] stands in for per-item range
            // queries; a rotating item still goes through the oracle's own
            // range_frequency path.
            let mut exact = vec![0u64; plan.m as usize + 1];
            for pos in lo..=hi {
                exact[items[(pos - 1) as usize] as usize] += 1;
            }
            if oracle.range_frequency(spot_item, lo, hi)? != exact[spot_item as usize] {
                counterexamples.push(format!(
                    "seed {seed}, t = {t}: bulk recount disagrees with range_frequency \
                     for item {spot_item}"
                ));
            }
            spot_item = spot_item % plan.m + 1;
            for item in 1..=plan.m {
                let estimate = selection.estimate(item);
                let expected = exact[item as usize] as f64;
                checked += 1;
                if estimate != expected {
                    mismatches += 1;
                    if counterexamples.len() < 5 {
                        counterexamples.push(format!(
                            "seed {seed}, t = {t}, item {item}: estimate {estimate} vs exact \
                             {expected} over [{lo}, {hi}], window [{}, {t}], parts {:?}",
                            sketch.window_start(),
                            selection
                                .parts()
                                .iter()
                                .map(|p| p.sketch.range())
                                .collect::<Vec<_>>()
                        ));
                    }
                }
            }
        }
        records.push(CheckRecord {
            label: format!("seed = {seed}, queries checked = {checked}"),
            value: mismatches as f64,
            bound: 0.0,
            pass: mismatches == 0,
        });
    }
    Ok(CheckReport {
        name: "noiseless-equivalence",
        records,
        counterexamples,
    })
}

/// Heavy-hitter behaviour against the calibrated error quantile `xi_hat`
/// (the `1 - eta_hat` quantile of observed frequency errors): items with
/// true window frequency at least `gamma w + xi_hat` must be reported, and
/// items at or below `(gamma - 2 zeta) w - xi_hat` must be absent, each in
/// at least a `1 - eta_hat` fraction of the qualifying trials.
pub fn check_hh_envelope(plan: &TrialPlan) -> Result<CheckReport> {
    plan.validate(true)?;
    let budget = PrivacyBudget::new(plan.epsilon, plan.delta)?;
    let mut estimates_per_trial: Vec<Vec<f64>> = Vec::with_capacity(plan.seeds.len());
    let mut truths_per_trial: Vec<HashMap<u64, u64>> = Vec::with_capacity(plan.seeds.len());
    let mut zeta = 0.0;
    for &seed in &plan.seeds {
        let items = plan.stream(seed)?;
        let config = FrameworkConfig::new(
            plan.w,
            plan.sub_len,
            plan.alpha,
            plan.rows,
            plan.width,
            plan.m,
            seed ^ 0xF1DE,
        );
        zeta = config.zeta();
        let mut sketch = WindowSketch::new(config, budget)?;
        let mut oracle = ExactWindow::new(plan.w);
        for &item in &items {
            sketch.observe(item);
            oracle.observe(item);
        }
        let selection = sketch.select_sketches();
        let estimates: Vec<f64> = (1..=plan.m).map(|item| selection.estimate(item)).collect();
        let truths: HashMap<u64, u64> = oracle.counts().collect();
        estimates_per_trial.push(estimates);
        truths_per_trial.push(truths);
    }

    // Calibration: the error quantile over every (trial, item) pair.
    let mut errors = Vec::with_capacity(plan.seeds.len() * plan.m as usize);
    for (estimates, truths) in estimates_per_trial.iter().zip(&truths_per_trial) {
        for (idx, &estimate) in estimates.iter().enumerate() {
            let truth = *truths.get(&(idx as u64 + 1)).unwrap_or(&0) as f64;
            errors.push((estimate - truth).abs());
        }
    }
    let xi_hat = quantile(&errors, 1.0 - plan.eta_hat);

    let w = plan.w as f64;
    let report_threshold = (plan.gamma - zeta) * w;
    let hi_cutoff = plan.gamma * w + xi_hat;
    let lo_cutoff = (plan.gamma - 2.0 * zeta) * w - xi_hat;
    let mut hi_qualified = 0u64;
    let mut hi_hit = 0u64;
    let mut lo_qualified = 0u64;
    let mut lo_excluded = 0u64;
    for (estimates, truths) in estimates_per_trial.iter().zip(&truths_per_trial) {
        for (idx, &estimate) in estimates.iter().enumerate() {
            let truth = *truths.get(&(idx as u64 + 1)).unwrap_or(&0) as f64;
            let reported = estimate >= report_threshold;
            if truth >= hi_cutoff {
                hi_qualified += 1;
                hi_hit += reported as u64;
            }
            if truth <= lo_cutoff {
                lo_qualified += 1;
                lo_excluded += !reported as u64;
            }
        }
    }
    let rate = |hits: u64, total: u64| {
        if total == 0 {
            1.0
        } else {
            hits as f64 / total as f64
        }
    };
    let hi_rate = rate(hi_hit, hi_qualified);
    let lo_rate = rate(lo_excluded, lo_qualified);
    let need = 1.0 - plan.eta_hat;
    let records = vec![
        CheckRecord {
            label: format!(
                "recall side: {hi_qualified} qualifying pairs above {hi_cutoff:.1} (xi_hat = {xi_hat:.2})"
            ),
            value: hi_rate,
            bound: need,
            pass: hi_rate >= need && hi_qualified > 0,
        },
        CheckRecord {
            label: format!("exclusion side: {lo_qualified} qualifying pairs below {lo_cutoff:.1}"),
            value: lo_rate,
            bound: need,
            pass: lo_rate >= need,
        },
    ];
    Ok(CheckReport {
        name: "heavy-hitter-envelope",
        records,
        counterexamples: Vec::new(),
    })
}

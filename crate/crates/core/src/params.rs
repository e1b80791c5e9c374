//! Privacy-budget arithmetic and framework configuration.
//!
//! The window sketch satisfies zero-concentrated differential privacy with a
//! per-substream budget `rho`. User-facing privacy is stated as an
//! `(epsilon, delta)` pair; [`rho_from_eps_delta`] converts between the two so
//! that `rho + 2 * sqrt(rho * ln(1/delta)) = epsilon`. Within a substream the
//! budget is split across the sketches built at each checkpoint by
//! [`budget_schedule`], which favors the sketches covering the most items.

use crate::checkpoints;
use crate::error::{Error, Result};
use crate::pcms::HashKind;

/// An `(epsilon, delta)` differential-privacy target together with the
/// zero-concentrated budget `rho` it converts to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrivacyBudget {
    epsilon: f64,
    delta: f64,
    rho: f64,
}

impl PrivacyBudget {
    /// Derives the zCDP budget for an `(epsilon, delta)` target.
    pub fn new(epsilon: f64, delta: f64) -> Result<Self> {
        let rho = rho_from_eps_delta(epsilon, delta)?;
        Ok(Self {
            epsilon,
            delta,
            rho,
        })
    }

    /// A sentinel budget with `rho = +inf`, meaning no noise is injected.
    ///
    /// Useful for exactness tests: every counter starts at zero and the only
    /// estimation errors left are hash collisions and window misalignment.
    pub fn noiseless() -> Self {
        Self {
            epsilon: f64::INFINITY,
            delta: 0.5,
            rho: f64::INFINITY,
        }
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn is_noiseless(&self) -> bool {
        self.rho.is_infinite()
    }
}

/// Converts an `(epsilon, delta)`-DP target into the largest zCDP budget
/// `rho` whose standard conversion back to approximate DP meets the target:
///
/// `rho = epsilon + 2 ln(1/delta) - 2 sqrt(epsilon ln(1/delta) + ln^2(1/delta))`
///
/// The result satisfies `rho + 2 sqrt(rho ln(1/delta)) = epsilon` up to
/// floating-point error, and `rho < epsilon` for every `delta < 1`.
pub fn rho_from_eps_delta(epsilon: f64, delta: f64) -> Result<f64> {
    if epsilon.is_nan() || epsilon <= 0.0 || !epsilon.is_finite() {
        return Err(Error::InvalidEpsilon(epsilon));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidDelta(delta));
    }
    let ln_inv_delta = -delta.ln();
    // Algebraically identical to the difference form but avoids catastrophic
    // cancellation when epsilon << ln(1/delta):
    //   rho = (sqrt(ln(1/delta) + epsilon) - sqrt(ln(1/delta)))^2
    let root = (ln_inv_delta + epsilon).sqrt() - ln_inv_delta.sqrt();
    let rho = root * root;
    debug_assert!(rho > 0.0);
    Ok(rho)
}

/// Per-substream allocation of the zCDP budget across checkpoint sketches.
///
/// `rho1` funds the single sketch covering the whole substream; each tail
/// entry `rho_tail[j-2]` funds both the forward and the backward sketch at
/// checkpoint `j` (`j = 2..=num_checkpoints`).
#[derive(Debug, Clone, PartialEq)]
pub struct BudgetSchedule {
    rho1: f64,
    rho_tail: Vec<f64>,
}

impl BudgetSchedule {
    pub fn rho1(&self) -> f64 {
        self.rho1
    }

    pub fn rho_tail(&self) -> &[f64] {
        &self.rho_tail
    }

    pub fn num_checkpoints(&self) -> usize {
        self.rho_tail.len() + 1
    }

    /// Budget of the sketch(es) at 1-based checkpoint `j`.
    pub fn checkpoint_budget(&self, j: usize) -> f64 {
        assert!(j >= 1 && j <= self.num_checkpoints(), "checkpoint out of range");
        if j == 1 {
            self.rho1
        } else {
            self.rho_tail[j - 2]
        }
    }

    /// Total budget spent per substream: `rho1 + 2 * sum(rho_tail)`.
    pub fn total_spent(&self) -> f64 {
        self.rho1 + 2.0 * self.rho_tail.iter().sum::<f64>()
    }

    /// Closed form of [`total_spent`](Self::total_spent):
    /// `rho * (1 - (1-alpha)^2 * alpha^(k-1))`, always at most `rho`.
    pub fn closed_form_total(rho: f64, alpha: f64, num_checkpoints: usize) -> f64 {
        rho * (1.0 - (1.0 - alpha).powi(2) * alpha.powi(num_checkpoints as i32 - 1))
    }
}

/// Splits a substream budget `rho` across `num_checkpoints` checkpoints:
/// `rho1 = rho (2 alpha - alpha^2)` and
/// `rho_j = rho alpha^(j-2) (1-alpha)^3 / 2` for `j >= 2`.
///
/// The spend `rho1 + 2 sum(rho_j)` telescopes to
/// `rho (1 - (1-alpha)^2 alpha^(k-1)) <= rho`, so the per-substream privacy
/// cost never exceeds `rho`. An infinite `rho` yields an all-infinite
/// schedule (noise disabled everywhere).
pub fn budget_schedule(rho: f64, alpha: f64, num_checkpoints: usize) -> Result<BudgetSchedule> {
    if rho.is_nan() || rho <= 0.0 {
        return Err(Error::InvalidRho(rho));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidAlpha(alpha));
    }
    if num_checkpoints < 1 {
        return Err(Error::InvalidConfig(
            "number of checkpoints must be at least 1".into(),
        ));
    }
    let rho1 = rho * (2.0 * alpha - alpha * alpha);
    let rho_tail = (2..=num_checkpoints)
        .map(|j| rho * alpha.powi(j as i32 - 2) * (1.0 - alpha).powi(3) / 2.0)
        .collect();
    Ok(BudgetSchedule { rho1, rho_tail })
}

/// Static configuration of the window sketch.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameworkConfig {
    /// Sliding-window size `w` (count-based).
    pub w: u64,
    /// Substream length `L`; the stream is cut into disjoint pieces of this
    /// length and each piece carries its own checkpoint sketches.
    pub sub_len: u64,
    /// Checkpoint density factor; larger values prune more aggressively and
    /// leave fewer checkpoints per substream.
    pub alpha: f64,
    /// Counter rows per sketch (number of hash functions).
    pub rows: usize,
    /// Counter columns per sketch (range of each hash function).
    pub width: usize,
    /// Items are integers in `[1, domain_size]`.
    pub domain_size: u64,
    /// Seed for all per-sketch hash functions and noise draws.
    pub seed: u64,
    /// Hash family; `Identity` requires `width >= domain_size` and exists for
    /// collision-free testing.
    pub hashing: HashKind,
}

impl FrameworkConfig {
    pub fn new(w: u64, sub_len: u64, alpha: f64, rows: usize, width: usize, domain_size: u64, seed: u64) -> Self {
        Self {
            w,
            sub_len,
            alpha,
            rows,
            width,
            domain_size,
            seed,
            hashing: HashKind::TwoUniversal,
        }
    }

    pub fn with_hashing(mut self, hashing: HashKind) -> Self {
        self.hashing = hashing;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.w < 1 {
            return Err(Error::InvalidConfig("window size must be at least 1".into()));
        }
        if self.sub_len < 1 || self.sub_len > self.w {
            return Err(Error::InvalidConfig(format!(
                "substream length must satisfy 1 <= L <= w, got L = {} with w = {}",
                self.sub_len, self.w
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidAlpha(self.alpha));
        }
        if self.rows < 1 {
            return Err(Error::InvalidConfig("sketch must have at least one row".into()));
        }
        if self.width < 1 {
            return Err(Error::InvalidConfig("sketch must have at least one column".into()));
        }
        if self.domain_size < 1 {
            return Err(Error::InvalidConfig("domain size must be at least 1".into()));
        }
        if self.hashing == HashKind::Identity && (self.width as u64) < self.domain_size {
            return Err(Error::InvalidConfig(format!(
                "identity hashing requires width >= domain size, got b = {} < m = {}",
                self.width, self.domain_size
            )));
        }
        Ok(())
    }

    /// Diagnostic per-sketch error fraction `zeta = e / width`, the standard
    /// count-min instantiation of `b = O(1/zeta)`. Also used as the default
    /// slack in the heavy-hitter threshold `(gamma - zeta) w`.
    pub fn zeta(&self) -> f64 {
        std::f64::consts::E / self.width as f64
    }

    /// Diagnostic per-sketch failure probability `eta = e^(-rows)`.
    pub fn eta(&self) -> f64 {
        (-(self.rows as f64)).exp()
    }
}

/// Substream length from the analysis: `L = ceil(sqrt(w))`.
pub fn sub_len_theory(w: u64) -> u64 {
    ((w as f64).sqrt().ceil() as u64).max(1)
}

/// Substream length used in the experiments: `L = ceil(0.1 w)`, i.e. ten
/// substreams per window.
pub fn sub_len_paper(w: u64) -> u64 {
    ((w as f64 * 0.1).ceil() as u64).clamp(1, w)
}

/// Default `delta = n^(-1.5)` for a stream of length `n`.
pub fn delta_default(n: u64) -> f64 {
    (n.max(2) as f64).powf(-1.5)
}

/// Searches for an `alpha` whose checkpoint list for a substream of length
/// `sub_len` has exactly `target` entries.
///
/// The checkpoint count is non-increasing in `alpha`, so the qualifying
/// values form an interval. Within it, the returned `alpha` maximizes the
/// smallest per-sketch budget fraction,
/// `min(2 alpha - alpha^2, alpha^(k-2) (1-alpha)^3 / 2)`: the count alone
/// does not pin `alpha` down, and the plateau edges starve either the
/// full-substream sketch or the checkpoint sketches.
pub fn alpha_for_num_checkpoints(sub_len: u64, target: usize) -> Result<f64> {
    if sub_len < 1 {
        return Err(Error::InvalidConfig("substream length must be at least 1".into()));
    }
    if target < 1 || target as u64 > sub_len {
        return Err(Error::UnreachableCheckpointCount { sub_len, target });
    }
    let count = |alpha: f64| checkpoints::checkpoint_count(sub_len, alpha).expect("alpha in range");
    let max_alpha = 1.0 - 1e-9;
    if count(max_alpha) > target {
        return Err(Error::UnreachableCheckpointCount { sub_len, target });
    }
    // Lower plateau edge: infimum of { alpha : count(alpha) <= target }.
    // The 0.0 endpoint is a sentinel and never evaluated (the count there is
    // sub_len >= target).
    let (mut lo, mut hi) = (0.0, max_alpha);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if count(mid) <= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let lower = hi;
    if count(lower) != target {
        // The count jumped past `target`: no alpha produces it.
        return Err(Error::UnreachableCheckpointCount { sub_len, target });
    }
    // Upper plateau edge: infimum of { alpha : count(alpha) < target }, or
    // the end of the interval when even alpha -> 1 keeps `target` entries.
    let upper = if count(max_alpha) == target {
        max_alpha
    } else {
        let (mut lo, mut hi) = (lower, max_alpha);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if count(mid) < target {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        lo
    };

    let worst_budget_fraction = |alpha: f64| {
        let rho1 = 2.0 * alpha - alpha * alpha;
        if target == 1 {
            rho1
        } else {
            let smallest_tail = alpha.powi(target as i32 - 2) * (1.0 - alpha).powi(3) / 2.0;
            rho1.min(smallest_tail)
        }
    };
    let samples = 33;
    let mut best = lower;
    let mut best_score = worst_budget_fraction(lower);
    for i in 1..=samples {
        let alpha = lower + (upper - lower) * i as f64 / samples as f64;
        if alpha >= 1.0 {
            continue;
        }
        let score = worst_budget_fraction(alpha);
        if score > best_score && count(alpha) == target {
            best = alpha;
            best_score = score;
        }
    }
    Ok(best)
}

//! The sliding-window sketch: substream lifecycle, checkpoint sketch
//! maintenance, eviction, and window-aligned queries.
//!
//! The stream is cut into disjoint substreams of length `L`. Each substream
//! owns one sketch over its full range plus, per checkpoint `j >= 2`, a
//! forward sketch over its first `I[j]` items and a backward sketch over its
//! last `I[j]` items. A query at time `t` stitches together one sketch per
//! substream overlapping the window: the backward sketch of the oldest
//! substream that starts closest to the window start, the full sketches of
//! the interior substreams, and the completed forward sketch of the current
//! substream that reaches closest to `t`. Substreams that fall entirely
//! before the window are dropped whole.

use std::collections::VecDeque;

use crate::checkpoints::{build_checkpoints, CheckpointList};
use crate::error::Result;
use crate::params::{budget_schedule, BudgetSchedule, FrameworkConfig, PrivacyBudget};
use crate::pcms::{derive_seed, Pcms};

/// One substream's sketches.
///
/// `forward[j]` (1-based `j`) covers the first `I[j]` items of the substream
/// and is frozen as soon as the stream moves past its end; `backward[j]`
/// covers the last `I[j]` items. The two `j = 1` entries coincide, so the
/// full-substream sketch is stored once (in the forward list) and carries the
/// budget `rho1`; every other checkpoint sketch carries its tail budget.
#[derive(Debug)]
pub struct Substream {
    ordinal: u64,
    start: u64,
    forward: Vec<Pcms>,
    backward_tail: Vec<Pcms>,
}

impl Substream {
    fn materialize(
        ordinal: u64,
        start: u64,
        config: &FrameworkConfig,
        checkpoints: &CheckpointList,
        schedule: &BudgetSchedule,
    ) -> Self {
        let sub_len = checkpoints.sub_len();
        let idx = checkpoints.forward();
        let end = start + sub_len - 1;
        let mut forward = Vec::with_capacity(idx.len());
        let mut backward_tail = Vec::with_capacity(idx.len().saturating_sub(1));
        for (pos, &offset) in idx.iter().enumerate() {
            let j = pos + 1;
            let rho = schedule.checkpoint_budget(j);
            let fwd_seed = derive_seed(config.seed, ordinal, 2 * (j as u64 - 1));
            forward.push(
                Pcms::new(
                    config.rows,
                    config.width,
                    rho,
                    fwd_seed,
                    (start, start + offset - 1),
                    config.hashing,
                )
                .expect("validated configuration"),
            );
            if j >= 2 {
                let bwd_seed = derive_seed(config.seed, ordinal, 2 * (j as u64 - 1) + 1);
                backward_tail.push(
                    Pcms::new(
                        config.rows,
                        config.width,
                        rho,
                        bwd_seed,
                        (start + sub_len - offset, end),
                        config.hashing,
                    )
                    .expect("validated configuration"),
                );
            }
        }
        Self {
            ordinal,
            start,
            forward,
            backward_tail,
        }
    }

    /// Inserts `item` (arriving at time `t`) into every sketch whose range
    /// contains `t`, and freezes forward sketches the stream has moved past.
    fn ingest(&mut self, t: u64, item: u64) {
        for sketch in &mut self.forward {
            if sketch.end() >= t {
                sketch.insert(item);
            } else if !sketch.frozen() {
                sketch.freeze();
            }
        }
        for sketch in &mut self.backward_tail {
            if sketch.start() <= t {
                sketch.insert(item);
            }
        }
    }

    fn freeze_all(&mut self) {
        for sketch in self.forward.iter_mut().chain(self.backward_tail.iter_mut()) {
            sketch.freeze();
        }
    }

    /// 1-based creation index of this substream.
    pub fn ordinal(&self) -> u64 {
        self.ordinal
    }

    /// Stream position of the substream's first item.
    pub fn start(&self) -> u64 {
        self.start
    }

    /// Stream position of the substream's last item.
    pub fn end(&self) -> u64 {
        self.forward[0].end()
    }

    /// Forward sketches, index 0 holding the full-substream sketch.
    pub fn forward(&self) -> &[Pcms] {
        &self.forward
    }

    /// Backward sketches for checkpoints `j = 2..`, in checkpoint order.
    pub fn backward_tail(&self) -> &[Pcms] {
        &self.backward_tail
    }

    /// Backward sketch at 1-based checkpoint `j`; `j = 1` aliases the shared
    /// full-substream sketch.
    pub fn backward(&self, j: usize) -> &Pcms {
        if j == 1 {
            &self.forward[0]
        } else {
            &self.backward_tail[j - 2]
        }
    }

    /// All distinct sketches (the shared full-substream sketch once).
    pub fn sketches(&self) -> impl Iterator<Item = &Pcms> {
        self.forward.iter().chain(self.backward_tail.iter())
    }

    /// Privacy budget spent on this substream: the shared sketch once plus
    /// both sketches at every tail checkpoint.
    pub fn spent_budget(&self) -> f64 {
        self.forward[0].rho()
            + self.forward[1..].iter().map(Pcms::rho).sum::<f64>()
            + self.backward_tail.iter().map(Pcms::rho).sum::<f64>()
    }
}

/// Why a sketch was chosen for a window query.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectionRole {
    /// Backward sketch of the oldest overlapping substream, at checkpoint
    /// `x`: the latest start that does not cut off the window's left edge.
    WindowStart { checkpoint: usize },
    /// Full sketch of a substream lying entirely inside the window.
    Interior,
    /// Forward sketch of the current substream, at checkpoint `y`: the
    /// completed sketch reaching closest to `t`.
    WindowEnd { checkpoint: usize },
}

/// One chosen sketch with its provenance.
#[derive(Debug, Clone, Copy)]
pub struct SelectedPart<'a> {
    pub sketch: &'a Pcms,
    pub role: SelectionRole,
    pub substream: u64,
}

/// The per-substream sketches a window query sums over. Covered ranges are
/// pairwise disjoint and their union is one contiguous interval.
#[derive(Debug)]
pub struct SketchSelection<'a> {
    parts: Vec<SelectedPart<'a>>,
}

impl<'a> SketchSelection<'a> {
    pub fn parts(&self) -> &[SelectedPart<'a>] {
        &self.parts
    }

    /// The contiguous interval `[u_x, v_y]` the selection covers.
    pub fn covered(&self) -> (u64, u64) {
        (
            self.parts.first().expect("selection is never empty").sketch.start(),
            self.parts.last().expect("selection is never empty").sketch.end(),
        )
    }

    /// Sum of the chosen sketches' estimates. Unclamped.
    pub fn estimate(&self, item: u64) -> f64 {
        self.parts.iter().map(|p| p.sketch.estimate(item)).sum()
    }
}

/// Number of live sketches and their memory use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Footprint {
    pub bytes: usize,
    pub num_sketches: usize,
    pub num_substreams: usize,
}

/// The live sliding-window structure: configuration, checkpoint geometry,
/// budget schedule, and the substreams still overlapping the window.
///
/// Single writer; queries are read-only and may run concurrently with each
/// other, but not with [`observe`](Self::observe) — callers serialize that
/// externally.
#[derive(Debug)]
pub struct WindowSketch {
    config: FrameworkConfig,
    budget: PrivacyBudget,
    checkpoints: CheckpointList,
    schedule: BudgetSchedule,
    active: VecDeque<Substream>,
    t: u64,
    created: u64,
}

impl WindowSketch {
    /// Validates the configuration, computes the checkpoint lists and budget
    /// schedule once, and starts with an empty structure at `t = 0`.
    pub fn new(config: FrameworkConfig, budget: PrivacyBudget) -> Result<Self> {
        config.validate()?;
        let checkpoints = build_checkpoints(config.sub_len, config.alpha)?;
        let schedule = budget_schedule(budget.rho(), config.alpha, checkpoints.len())?;
        Ok(Self {
            config,
            budget,
            checkpoints,
            schedule,
            active: VecDeque::new(),
            t: 0,
            created: 0,
        })
    }

    /// Feeds one item: advances time, materializes a fresh substream when the
    /// current one is full, inserts into every in-range sketch, and drops
    /// substreams that fell entirely behind the window.
    pub fn observe(&mut self, item: u64) {
        assert!(
            item >= 1 && item <= self.config.domain_size,
            "item {item} outside domain [1, {}]",
            self.config.domain_size
        );
        self.t += 1;
        let t = self.t;
        let start_new = match self.active.back() {
            None => true,
            Some(current) => t - current.start >= self.config.sub_len,
        };
        if start_new {
            if let Some(previous) = self.active.back_mut() {
                previous.freeze_all();
            }
            self.created += 1;
            self.active.push_back(Substream::materialize(
                self.created,
                t,
                &self.config,
                &self.checkpoints,
                &self.schedule,
            ));
        }
        self.active
            .back_mut()
            .expect("a substream exists after the check above")
            .ingest(t, item);

        let window_start = self.window_start();
        while matches!(self.active.front(), Some(front) if front.end() < window_start) {
            self.active.pop_front();
        }
        debug_assert!(
            self.active.len() as u64 <= self.config.w.div_ceil(self.config.sub_len) + 1,
            "eviction bound violated at t = {t}"
        );
    }

    /// Chooses one sketch per overlapping substream for the window `[s, t]`.
    ///
    /// `x` maximizes the backward start `u_x <= s` in the oldest substream;
    /// `y` maximizes the forward end `v_y <= t` in the current one; interior
    /// substreams contribute their full sketch. When a single substream
    /// covers the whole window only its forward sketch is used, otherwise the
    /// two edge sketches would double-count.
    ///
    /// # Panics
    ///
    /// Panics if nothing has been observed yet.
    pub fn select_sketches(&self) -> SketchSelection<'_> {
        assert!(self.t >= 1, "select_sketches before the first observe");
        let t = self.t;
        let s = self.window_start();
        let newest = self.active.back().expect("t >= 1 implies a substream");
        let (y, forward_part) = newest
            .forward
            .iter()
            .enumerate()
            .find(|(_, sketch)| sketch.end() <= t)
            .map(|(pos, sketch)| (pos + 1, sketch))
            .expect("the last forward sketch covers one item and always qualifies");
        debug_assert!(forward_part.frozen() || forward_part.end() == t);

        if self.active.len() == 1 {
            return SketchSelection {
                parts: vec![SelectedPart {
                    sketch: forward_part,
                    role: SelectionRole::WindowEnd { checkpoint: y },
                    substream: newest.ordinal,
                }],
            };
        }

        let oldest = self.active.front().expect("at least two substreams");
        debug_assert!(oldest.start <= s, "eviction keeps the window covered");
        let num_checkpoints = self.checkpoints.len();
        let x = (1..=num_checkpoints)
            .rev()
            .find(|&j| oldest.backward(j).start() <= s)
            .expect("u_1 equals the substream start, which is at most s");

        let mut parts = Vec::with_capacity(self.active.len());
        parts.push(SelectedPart {
            sketch: oldest.backward(x),
            role: SelectionRole::WindowStart { checkpoint: x },
            substream: oldest.ordinal,
        });
        for interior in self.active.iter().skip(1).take(self.active.len() - 2) {
            parts.push(SelectedPart {
                sketch: &interior.forward[0],
                role: SelectionRole::Interior,
                substream: interior.ordinal,
            });
        }
        parts.push(SelectedPart {
            sketch: forward_part,
            role: SelectionRole::WindowEnd { checkpoint: y },
            substream: newest.ordinal,
        });
        debug_assert!(parts
            .windows(2)
            .all(|pair| pair[1].sketch.start() == pair[0].sketch.end() + 1));
        SketchSelection { parts }
    }

    /// Estimated frequency of `item` in the current window: the sum of the
    /// selected sketches' estimates. Unrounded and unclamped.
    pub fn estimate_window_frequency(&self, item: u64) -> f64 {
        self.select_sketches().estimate(item)
    }

    /// Items whose estimated window frequency reaches `(gamma - zeta) w`,
    /// with the configuration's derived `zeta = e / width`.
    pub fn heavy_hitters(&self, gamma: f64) -> Vec<(u64, f64)> {
        self.heavy_hitters_with_zeta(gamma, self.config.zeta())
    }

    /// Heavy-hitter query with an explicit threshold slack `zeta`.
    pub fn heavy_hitters_with_zeta(&self, gamma: f64, zeta: f64) -> Vec<(u64, f64)> {
        assert!(gamma.is_finite() && gamma > 0.0, "gamma must be positive");
        let threshold = (gamma - zeta) * self.config.w as f64;
        let selection = self.select_sketches();
        (1..=self.config.domain_size)
            .filter_map(|item| {
                let estimate = selection.estimate(item);
                (estimate >= threshold).then_some((item, estimate))
            })
            .collect()
    }

    /// Memory accounting over live sketches; the shared full-substream
    /// sketch counts once.
    pub fn footprint(&self) -> Footprint {
        let mut bytes = 0;
        let mut num_sketches = 0;
        for substream in &self.active {
            for sketch in substream.sketches() {
                bytes += sketch.size_bytes();
                num_sketches += 1;
            }
        }
        Footprint {
            bytes,
            num_sketches,
            num_substreams: self.active.len(),
        }
    }

    /// Items observed so far.
    pub fn time(&self) -> u64 {
        self.t
    }

    /// 1-based position of the oldest item in the current window,
    /// `max(t - w + 1, 1)`.
    pub fn window_start(&self) -> u64 {
        self.t.saturating_sub(self.config.w - 1).max(1)
    }

    pub fn config(&self) -> &FrameworkConfig {
        &self.config
    }

    pub fn budget(&self) -> &PrivacyBudget {
        &self.budget
    }

    pub fn checkpoints(&self) -> &CheckpointList {
        &self.checkpoints
    }

    pub fn schedule(&self) -> &BudgetSchedule {
        &self.schedule
    }

    /// Substreams still overlapping the window, oldest first.
    pub fn substreams(&self) -> impl Iterator<Item = &Substream> {
        self.active.iter()
    }

    /// Total number of substreams ever materialized.
    pub fn substreams_created(&self) -> u64 {
        self.created
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::ExactWindow;
    use crate::params::{alpha_for_num_checkpoints, BudgetSchedule};
    use crate::pcms::HashKind;

    fn noiseless_config(w: u64, sub_len: u64, alpha: f64, m: u64) -> FrameworkConfig {
        FrameworkConfig::new(w, sub_len, alpha, 2, m as usize, m, 7)
            .with_hashing(HashKind::Identity)
    }

    fn sketch(w: u64, sub_len: u64, alpha: f64, m: u64) -> WindowSketch {
        WindowSketch::new(noiseless_config(w, sub_len, alpha, m), PrivacyBudget::noiseless())
            .unwrap()
    }

    #[test]
    fn create_with_three_checkpoints() {
        let alpha = alpha_for_num_checkpoints(100_000, 3).unwrap();
        let config = FrameworkConfig::new(1_000_000, 100_000, alpha, 3, 500, 25_600, 1);
        let ws = WindowSketch::new(config, PrivacyBudget::new(1.0, 1e-9).unwrap()).unwrap();
        assert_eq!(ws.checkpoints().len(), 3);
        assert_eq!(ws.time(), 0);
        assert_eq!(ws.footprint().num_substreams, 0);
        assert_eq!(ws.footprint().num_sketches, 0);
        assert_eq!(ws.footprint().bytes, 0);
    }

    #[test]
    fn degenerate_substream_lengths() {
        // L = w: a single substream covers the whole window.
        let mut ws = sketch(8, 8, 0.5, 16);
        for item in 1..=8 {
            ws.observe(item);
        }
        assert_eq!(ws.substreams_created(), 1);
        assert_eq!(ws.footprint().num_substreams, 1);

        // L = 1: one single-item sketch per position. Impractical but legal.
        let mut ws = sketch(4, 1, 0.5, 16);
        for item in 1..=6u64 {
            ws.observe(item);
        }
        assert_eq!(ws.checkpoints().forward(), &[1]);
        assert!(ws.footprint().num_substreams as u64 <= 4u64.div_ceil(1) + 1);
        for part in ws.select_sketches().parts() {
            assert_eq!(part.sketch.start(), part.sketch.end());
        }
    }

    #[test]
    fn first_observe_populates_expected_sketches() {
        let mut ws = sketch(16, 8, 0.5, 16);
        ws.observe(5);
        let sub = ws.substreams().next().unwrap();
        // Forward sketches all contain position 1.
        for fwd in sub.forward() {
            assert_eq!(fwd.estimate(5), 1.0);
        }
        // Backward tails start later than position 1.
        for bwd in sub.backward_tail() {
            assert_eq!(bwd.estimate(5), 0.0);
        }
    }

    #[test]
    fn eviction_trace_w4_l2() {
        let mut ws = sketch(4, 2, 0.5, 16);
        let stream = [1u64, 1, 2, 2, 3, 3];
        for (i, &item) in stream.iter().enumerate() {
            ws.observe(item);
            let t = i as u64 + 1;
            if t == 5 {
                let ordinals: Vec<u64> = ws.substreams().map(Substream::ordinal).collect();
                assert_eq!(ordinals, vec![1, 2, 3], "three substreams active at t = 5");
            }
        }
        let ordinals: Vec<u64> = ws.substreams().map(Substream::ordinal).collect();
        assert_eq!(ordinals, vec![2, 3], "substream 1 evicted by t = 6");
        assert_eq!(ws.substreams_created(), 3);

        // Selection covers exactly [3, 6] and reproduces the window counts.
        let selection = ws.select_sketches();
        assert_eq!(selection.covered(), (3, 6));
        let ranges: Vec<(u64, u64)> = selection.parts().iter().map(|p| p.sketch.range()).collect();
        assert_eq!(ranges, vec![(3, 4), (5, 6)]);
        assert_eq!(ws.estimate_window_frequency(2), 2.0);
        assert_eq!(ws.estimate_window_frequency(3), 2.0);
        assert_eq!(ws.estimate_window_frequency(1), 0.0);
    }

    #[test]
    fn aligned_edges_use_full_sketches() {
        let mut ws = sketch(8, 4, 0.5, 16);
        for t in 1..=12u64 {
            ws.observe((t % 16) + 1);
        }
        // t = 12 is a substream end, and the window [5, 12] starts exactly at
        // substream 2's first position.
        let selection = ws.select_sketches();
        assert_eq!(selection.covered(), (5, 12));
        match selection.parts().first().unwrap().role {
            SelectionRole::WindowStart { checkpoint } => assert_eq!(checkpoint, 1),
            ref other => panic!("unexpected role {other:?}"),
        }
        match selection.parts().last().unwrap().role {
            SelectionRole::WindowEnd { checkpoint } => assert_eq!(checkpoint, 1),
            ref other => panic!("unexpected role {other:?}"),
        }
    }

    #[test]
    fn single_substream_selection_has_one_part() {
        // Early stream: the window still fits inside the first substream.
        let mut ws = sketch(8, 8, 0.5, 16);
        for t in 1..=3u64 {
            ws.observe(t);
        }
        let selection = ws.select_sketches();
        assert_eq!(selection.parts().len(), 1);
        assert!(matches!(
            selection.parts()[0].role,
            SelectionRole::WindowEnd { .. }
        ));
        // Covered range ends at the newest completed checkpoint <= 3.
        assert!(selection.covered().1 <= 3);
    }

    #[test]
    fn budget_conservation_per_substream() {
        let alpha = 0.5;
        let budget = PrivacyBudget::new(1.0, 1e-6).unwrap();
        let config = FrameworkConfig::new(32, 8, alpha, 2, 16, 16, 3);
        let mut ws = WindowSketch::new(config, budget).unwrap();
        for t in 0..40u64 {
            ws.observe((t % 16) + 1);
        }
        let k = ws.checkpoints().len();
        let expected = BudgetSchedule::closed_form_total(budget.rho(), alpha, k);
        for sub in ws.substreams() {
            let spent = sub.spent_budget();
            assert!(
                ((spent - expected) / expected).abs() < 1e-12,
                "substream {}: spent {spent}, expected {expected}",
                sub.ordinal()
            );
        }
        assert!(expected <= budget.rho());
    }

    #[test]
    fn footprint_counts_shared_sketch_once() {
        // L = 8, alpha = 0.5 gives |I| = 4, hence 1 + 2 * 3 = 7 sketches.
        let mut ws = sketch(16, 8, 0.5, 16);
        ws.observe(1);
        let fp = ws.footprint();
        assert_eq!(fp.num_substreams, 1);
        assert_eq!(fp.num_sketches, 7);
        assert!(fp.bytes >= 7 * 2 * 16 * 8);
    }

    #[test]
    fn selected_sketches_are_complete() {
        let mut ws = sketch(64, 16, 0.5, 64);
        for t in 1..=200u64 {
            ws.observe((t * 7 % 64) + 1);
            let selection = ws.select_sketches();
            for part in selection.parts() {
                assert!(
                    part.sketch.frozen() || part.sketch.end() == ws.time(),
                    "t = {t}: selected sketch [{}, {}] still open",
                    part.sketch.start(),
                    part.sketch.end()
                );
                assert!(part.sketch.end() <= ws.time());
            }
            // Coverage is an interval around the window edges.
            let (lo, hi) = selection.covered();
            if ws.substreams().count() > 1 {
                assert!(lo <= ws.window_start());
            }
            assert!(hi <= ws.time());
        }
    }

    #[test]
    fn noiseless_equivalence_with_range_oracle() {
        let mut ws = sketch(40, 10, 0.5, 32);
        let mut oracle = ExactWindow::with_history(40);
        let mut state = 5u64;
        for _ in 0..300 {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
            let item = state % 32 + 1;
            ws.observe(item);
            oracle.observe(item);
            let selection = ws.select_sketches();
            let (lo, hi) = selection.covered();
            for probe in 1..=32u64 {
                let expected = oracle.range_frequency(probe, lo, hi).unwrap() as f64;
                assert_eq!(selection.estimate(probe), expected);
            }
        }
    }

    #[test]
    fn misalignment_bounded_by_checkpoint_spacing() {
        // alpha = 1/2: the window edges stay within I[x] / I[y] of the
        // covered interval.
        let mut ws = sketch(64, 16, 0.5, 16);
        for t in 1..=400u64 {
            ws.observe((t % 16) + 1);
            if ws.substreams().count() < 2 {
                continue;
            }
            let selection = ws.select_sketches();
            let (lo, hi) = selection.covered();
            let forward = ws.checkpoints().forward();
            let left_gap = ws.window_start() - lo;
            let right_gap = ws.time() - hi;
            let x = match selection.parts().first().unwrap().role {
                SelectionRole::WindowStart { checkpoint } => checkpoint,
                _ => unreachable!(),
            };
            let y = match selection.parts().last().unwrap().role {
                SelectionRole::WindowEnd { checkpoint } => checkpoint,
                _ => unreachable!(),
            };
            assert!(left_gap < forward[x - 1], "t = {t}: left gap {left_gap}");
            assert!(right_gap < forward[y - 1], "t = {t}: right gap {right_gap}");
        }
    }

    #[test]
    fn heavy_hitters_threshold_is_inclusive() {
        let mut ws = sketch(10, 5, 0.5, 16);
        // Window of ten items: six 9s, four 2s.
        for item in [9, 9, 9, 2, 2, 9, 9, 2, 2, 9] {
            ws.observe(item);
        }
        let hh = ws.heavy_hitters_with_zeta(0.5, 0.0);
        assert!(hh.iter().any(|&(e, _)| e == 9), "60% item is heavy at gamma = 0.5");
        assert!(!hh.iter().any(|&(e, _)| e == 2));

        // Boundary: estimate exactly equal to (gamma - zeta) w is included.
        let estimate = ws.estimate_window_frequency(2);
        let gamma = estimate / 10.0;
        assert!(ws.heavy_hitters_with_zeta(gamma, 0.0).iter().any(|&(e, _)| e == 2));

        // gamma = 1 + zeta pushes the threshold above w.
        let zeta = ws.config().zeta();
        assert!(ws.heavy_hitters(1.0 + zeta).is_empty());
    }

    #[test]
    #[should_panic(expected = "outside domain")]
    fn observe_rejects_out_of_domain_items() {
        let mut ws = sketch(4, 2, 0.5, 16);
        ws.observe(17);
    }

    #[test]
    #[should_panic(expected = "before the first observe")]
    fn selection_requires_data() {
        let ws = sketch(4, 2, 0.5, 16);
        let _ = ws.select_sketches();
    }
}

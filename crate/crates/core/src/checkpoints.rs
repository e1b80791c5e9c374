//! Checkpoint index lists for a substream.
//!
//! A substream of length `L` carries sketches that end (forward list `I`) or
//! start (backward list `I'`) at a pruned set of positions. The pruning keeps
//! any two neighboring indices within a factor `1 - alpha` of each other, or
//! consecutive, which bounds the misalignment between a queried window edge
//! and the nearest usable sketch boundary. The list size stays within
//! `2 ln(L) / alpha + 2` (checked empirically against that constant). The
//! lists are computed once per configuration, before any item is processed.

use crate::error::{Error, Result};

/// The pruned checkpoint positions of one substream, both orientations.
///
/// `forward` is strictly decreasing from `L` down to `1`; `backward` is its
/// reflection `backward[j] = L - forward[j] + 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckpointList {
    forward: Vec<u64>,
    backward: Vec<u64>,
}

impl CheckpointList {
    /// The list `I`: offsets (1-based, relative to the substream start) at
    /// which forward sketches end. `forward()[0]` is the substream length.
    pub fn forward(&self) -> &[u64] {
        &self.forward
    }

    /// The reflected list `I'`: offsets at which backward sketches begin.
    pub fn backward(&self) -> &[u64] {
        &self.backward
    }

    pub fn len(&self) -> usize {
        self.forward.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn sub_len(&self) -> u64 {
        self.forward[0]
    }
}

/// Builds the checkpoint lists for a substream of length `sub_len`.
///
/// Runs the pruning loop literally: indices `L, L-1, ..., 1` are appended one
/// at a time, and after each append every position `j` (while `j <= |I| - 2`)
/// deletes the indices strictly between itself and the farthest position `k`
/// still holding `I[k] >= (1 - alpha) * I[j]`. The comparison is performed on
/// the exact real product, so integral thresholds keep the boundary index.
pub fn build_checkpoints(sub_len: u64, alpha: f64) -> Result<CheckpointList> {
    if sub_len < 1 {
        return Err(Error::InvalidConfig(
            "substream length must be at least 1".into(),
        ));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidAlpha(alpha));
    }
    let keep = 1.0 - alpha;
    let mut forward: Vec<u64> = Vec::new();
    for i in (1..=sub_len).rev() {
        forward.push(i);
        let mut j = 0; // 0-based; 1-based j runs 1..=|I|-2, re-evaluated after deletes
        while j + 2 < forward.len() {
            let threshold = keep * forward[j] as f64;
            // The list is strictly decreasing, so entries >= threshold form a
            // prefix; the partition point locates the largest qualifying k.
            let prefix = forward.partition_point(|&v| v as f64 >= threshold);
            let k = prefix - 1; // at least j: forward[j] >= threshold trivially
            if k > j + 1 {
                forward.drain(j + 1..k);
            }
            j += 1;
        }
    }
    let backward = forward.iter().map(|&v| sub_len - v + 1).collect();
    Ok(CheckpointList { forward, backward })
}

/// Number of checkpoints `|I|` that [`build_checkpoints`] produces.
pub fn checkpoint_count(sub_len: u64, alpha: f64) -> Result<usize> {
    Ok(build_checkpoints(sub_len, alpha)?.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Reference implementation: the same loop with a linear scan instead of
    /// the partition-point shortcut.
    fn build_naive(sub_len: u64, alpha: f64) -> Vec<u64> {
        let keep = 1.0 - alpha;
        let mut list: Vec<u64> = Vec::new();
        for i in (1..=sub_len).rev() {
            list.push(i);
            let mut j = 0;
            while j + 2 < list.len() {
                let threshold = keep * list[j] as f64;
                let mut k = None;
                for kk in (j + 1..list.len()).rev() {
                    if list[kk] as f64 >= threshold {
                        k = Some(kk);
                        break;
                    }
                }
                if let Some(k) = k {
                    if k > j + 1 {
                        list.drain(j + 1..k);
                    }
                }
                j += 1;
            }
        }
        list
    }

    fn assert_invariants(list: &CheckpointList, sub_len: u64, alpha: f64) {
        let fwd = list.forward();
        let bwd = list.backward();
        assert_eq!(fwd.len(), bwd.len());
        assert_eq!(fwd[0], sub_len, "I[1] = L");
        assert_eq!(*fwd.last().unwrap(), 1, "last forward index is 1");
        assert_eq!(bwd[0], 1);
        assert_eq!(*bwd.last().unwrap(), sub_len);
        for k in 1..fwd.len() {
            assert!(fwd[k] < fwd[k - 1], "strictly decreasing");
            let smooth = fwd[k] as f64 >= (1.0 - alpha) * fwd[k - 1] as f64;
            let consecutive = fwd[k] == fwd[k - 1] - 1;
            assert!(
                smooth || consecutive,
                "adjacency violated at k={k}: {} after {} (alpha={alpha})",
                fwd[k],
                fwd[k - 1]
            );
        }
        for j in 0..fwd.len() {
            assert_eq!(bwd[j] + fwd[j], sub_len + 1, "reflection");
        }
    }

    #[test]
    fn hand_traced_examples() {
        let list = build_checkpoints(8, 0.5).unwrap();
        assert_eq!(list.forward(), &[8, 4, 2, 1]);
        assert_eq!(list.backward(), &[1, 5, 7, 8]);

        let list = build_checkpoints(1, 0.5).unwrap();
        assert_eq!(list.forward(), &[1]);
        assert_eq!(list.backward(), &[1]);

        // At i = 1 the element 2 is pruned because 1 >= 0.1 * 3.
        let list = build_checkpoints(3, 0.9).unwrap();
        assert_eq!(list.forward(), &[3, 1]);
    }

    #[test]
    fn counts() {
        assert_eq!(checkpoint_count(8, 0.5).unwrap(), 4);
        assert_eq!(checkpoint_count(1, 0.5).unwrap(), 1);
        // |I| = O(ln L / alpha) with a small constant; c = 2 is comfortable.
        let count = checkpoint_count(100_000, 0.5).unwrap();
        assert!(count as f64 <= 2.0 * (100_000f64).ln() / 0.5 + 2.0, "count = {count}");
    }

    #[test]
    fn matches_naive_construction() {
        for &(sub_len, alpha) in &[
            (1u64, 0.5),
            (2, 0.5),
            (8, 0.5),
            (20, 0.7),
            (100, 0.9),
            (100, 0.1),
            (1000, 0.3),
            (12345, 0.99),
        ] {
            let fast = build_checkpoints(sub_len, alpha).unwrap();
            assert_eq!(fast.forward(), build_naive(sub_len, alpha), "L={sub_len} alpha={alpha}");
            assert_invariants(&fast, sub_len, alpha);
        }
    }

    #[test]
    fn deterministic() {
        let a = build_checkpoints(4096, 0.37).unwrap();
        let b = build_checkpoints(4096, 0.37).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_invalid_inputs() {
        assert!(build_checkpoints(0, 0.5).is_err());
        assert!(build_checkpoints(10, 0.0).is_err());
        assert!(build_checkpoints(10, 1.0).is_err());
        assert!(build_checkpoints(10, f64::NAN).is_err());
    }

    proptest! {
        #[test]
        fn invariants_hold(sub_len in 1u64..3000, alpha_m in 1u32..999) {
            let alpha = alpha_m as f64 / 1000.0;
            let list = build_checkpoints(sub_len, alpha).unwrap();
            assert_invariants(&list, sub_len, alpha);
            // Size bound with the documented constant c = 2.
            let bound = 2.0 * (sub_len as f64).ln() / alpha + 2.0;
            prop_assert!((list.len() as f64) <= bound, "|I| = {} > {bound}", list.len());
        }
    }
}

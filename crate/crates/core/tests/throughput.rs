//! Ingestion-rate sanity checks. Tolerances are deliberately loose: these
//! guard against asymptotic regressions (superlinear per-item cost, free
//! checkpoints), not against timer noise.

use dpsw_core::bench::measure_throughput;
use dpsw_core::datagen::{generate, StreamSpec};
use dpsw_core::params::{alpha_for_num_checkpoints, FrameworkConfig, PrivacyBudget};

fn config(sub_len: u64, alpha: f64) -> FrameworkConfig {
    FrameworkConfig::new(20_000, sub_len, alpha, 2, 1_000, 1_000, 3)
}

#[test]
fn per_item_cost_is_stable_when_stream_doubles() {
    let budget = PrivacyBudget::new(1.0, 1e-6).unwrap();
    let short = generate(&StreamSpec::uniform(200_000, 1_000, 1)).unwrap();
    let long = generate(&StreamSpec::uniform(400_000, 1_000, 1)).unwrap();
    let cfg = config(2_000, 0.5);
    // Warm-up pass so allocator and cache effects hit neither measurement.
    measure_throughput(&cfg, &budget, &short).unwrap();
    let rate_short = measure_throughput(&cfg, &budget, &short).unwrap();
    let rate_long = measure_throughput(&cfg, &budget, &long).unwrap();
    assert!(
        rate_long > rate_short / 3.0 && rate_long < rate_short * 3.0,
        "doubling n moved throughput from {rate_short:.0} to {rate_long:.0} items/s"
    );
}

#[test]
fn more_checkpoints_cost_throughput() {
    let budget = PrivacyBudget::new(1.0, 1e-6).unwrap();
    let items = generate(&StreamSpec::uniform(300_000, 1_000, 2)).unwrap();
    let sparse = config(2_000, alpha_for_num_checkpoints(2_000, 2).unwrap());
    let dense = config(2_000, alpha_for_num_checkpoints(2_000, 12).unwrap());
    measure_throughput(&sparse, &budget, &items).unwrap();
    let rate_sparse = measure_throughput(&sparse, &budget, &items).unwrap();
    let rate_dense = measure_throughput(&dense, &budget, &items).unwrap();
    // 2 checkpoints touch 3 sketches per item, 12 touch up to 23; the gap is
    // large enough to survive timing noise.
    assert!(
        rate_dense < rate_sparse / 1.2,
        "12 checkpoints ({rate_dense:.0} items/s) should be measurably slower than 2 \
         ({rate_sparse:.0} items/s)"
    );
}

//! Benchmark-only crate; see `benches/sketch.rs`.

/// Steady-state fixture shared by the benchmarks: a window sketch with the
/// default experiment shape, pre-warmed past its first full window.
pub fn warmed_sketch() -> (dpsw_core::WindowSketch, Vec<u64>) {
    use dpsw_core::{
        alpha_for_num_checkpoints, generate, FrameworkConfig, PrivacyBudget, StreamSpec,
        WindowSketch,
    };
    let (w, sub_len, m) = (100_000u64, 10_000u64, 25_600u64);
    let alpha = alpha_for_num_checkpoints(sub_len, 3).expect("three checkpoints are reachable");
    let config = FrameworkConfig::new(w, sub_len, alpha, 2, 2_000, m, 1);
    let budget = PrivacyBudget::new(1.0, 1e-9).expect("valid budget");
    let items = generate(&StreamSpec::zipf(2 * w, m, 7)).expect("valid stream spec");
    let mut sketch = WindowSketch::new(config, budget).expect("valid config");
    for &item in &items[..w as usize] {
        sketch.observe(item);
    }
    (sketch, items)
}

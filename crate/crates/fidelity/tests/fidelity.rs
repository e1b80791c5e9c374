//! End-to-end runs of the fidelity checks at small scale.

use dpsw_core::params::{FrameworkConfig, PrivacyBudget};
use dpsw_core::pcms::HashKind;
use dpsw_core::WindowSketch;
use dpsw_fidelity::{
    check_budget_conservation, check_hh_envelope, check_noiseless_equivalence, PlantedItem, TrialPlan,
};

fn equivalence_plan() -> TrialPlan {
    TrialPlan {
        seeds: (0..3).collect(),
        n: 5_000,
        w: 500,
        sub_len: 50,
        alpha: 0.5,
        rows: 2,
        width: 128,
        m: 128,
        epsilon: 1.0,
        delta: 1e-6,
        gamma: 0.1,
        eta_hat: 0.05,
        planted: None,
        query_stride: 37,
    }
}

#[test]
fn budget_conservation_small_grid() {
    let budget = PrivacyBudget::new(1.0, 1e-6).unwrap();
    let report = check_budget_conservation(&[(0.3, 2), (0.5, 4), (0.9, 3)], budget);
    println!("{}", report.render());
    assert!(report.passed(), "{}", report.render());
    assert_eq!(report.records.len(), 3);

    // The infinite sentinel cannot be checked arithmetically.
    let degenerate = check_budget_conservation(&[(0.5, 2)], PrivacyBudget::noiseless());
    assert!(!degenerate.passed());
}

#[test]
fn noiseless_equivalence_holds_and_is_deterministic() {
    let plan = equivalence_plan();
    let report = check_noiseless_equivalence(&plan).unwrap();
    println!("{}", report.render());
    assert!(report.passed(), "{}", report.render());
    let again = check_noiseless_equivalence(&plan).unwrap();
    assert_eq!(report, again, "checks are pure functions of the plan");
}

#[test]
fn heavy_hitter_envelope_with_planted_item() {
    let plan = TrialPlan {
        seeds: (0..20).collect(),
        n: 20_000,
        w: 4_000,
        sub_len: 400,
        alpha: 0.5,
        rows: 2,
        width: 2_048,
        m: 512,
        epsilon: 2.0,
        delta: 1e-6,
        gamma: 0.2,
        eta_hat: 0.05,
        // Every third position: window frequency ~ w/3, far above gamma w.
        planted: Some(PlantedItem { item: 7, every: 3 }),
        query_stride: 1,
    };
    let report = check_hh_envelope(&plan).unwrap();
    println!("{}", report.render());
    assert!(report.passed(), "{}", report.render());
    // Both sides must have actually tested something.
    assert!(report.records.iter().all(|r| !r.label.contains(" 0 qualifying")));
}

#[test]
fn hh_envelope_requires_enough_trials() {
    let mut plan = equivalence_plan();
    plan.seeds = vec![1, 2, 3];
    assert!(check_hh_envelope(&plan).is_err());
}

/// The measured error quantile shrinks as the budget grows: the envelope
/// trend, without asserting any asymptotic constant.
#[test]
fn error_quantile_decreases_with_rho() {
    use dpsw_core::datagen::{generate, StreamSpec};
    use dpsw_core::oracle::ExactWindow;
    use dpsw_fidelity::quantile;

    let (n, w, sub_len, m) = (8_000u64, 2_000u64, 200u64, 256u64);
    let xi_hat = |epsilon: f64| {
        let budget = PrivacyBudget::new(epsilon, 1e-6).unwrap();
        let mut errors = Vec::new();
        for seed in 0..10u64 {
            let items = generate(&StreamSpec::zipf(n, m, 40 + seed)).unwrap();
            let config = FrameworkConfig::new(w, sub_len, 0.5, 2, 256, m, 90 + seed);
            let mut sketch = WindowSketch::new(config, budget).unwrap();
            let mut oracle = ExactWindow::new(w);
            for &item in &items {
                sketch.observe(item);
                oracle.observe(item);
            }
            let selection = sketch.select_sketches();
            for item in 1..=m {
                let truth = oracle.frequency(item) as f64;
                errors.push((selection.estimate(item) - truth).abs());
            }
        }
        quantile(&errors, 0.95)
    };
    let loose = xi_hat(0.25);
    let tight = xi_hat(4.0);
    assert!(
        tight < loose,
        "0.95 error quantile should shrink with budget: eps 0.25 -> {loose:.1}, eps 4 -> {tight:.1}"
    );
}

#[test]
fn gamma_above_every_frequency_yields_empty_set() {
    let config = FrameworkConfig::new(100, 10, 0.5, 2, 64, 64, 5).with_hashing(HashKind::Identity);
    let mut sketch = WindowSketch::new(config, PrivacyBudget::noiseless()).unwrap();
    for t in 0..200u64 {
        sketch.observe(t % 64 + 1);
    }
    assert!(sketch.heavy_hitters_with_zeta(0.99, 0.0).is_empty());
}

//! Differentially private frequency estimation and heavy-hitter
//! identification over count-based sliding windows.
//!
//! The structure cuts the stream into fixed-length substreams, places
//! smooth-histogram checkpoints inside each one, and builds a private
//! count-min sketch per checkpoint — forward sketches covering substream
//! prefixes and backward sketches covering suffixes. Counters are noised at
//! creation (Gaussian, variance `rows / rho` per cell), the per-substream
//! budget split is fixed up front, and queries only ever touch sketches that
//! have already received their final insert, so answering them is free
//! post-processing under zero-concentrated differential privacy.
//!
//! Modules:
//! - [`params`]: budget conversion and allocation, configuration.
//! - [`checkpoints`]: the pruned checkpoint index lists.
//! - [`pcms`]: the noisy counter array.
//! - [`dpsw`]: the sliding-window structure and its queries.
//! - [`oracle`]: exact ground truth for tests and metrics.
//! - [`datagen`]: synthetic streams and stream files.
//! - [`bench`]: query workloads, metrics, experiment drivers.

pub mod bench;
pub mod checkpoints;
pub mod datagen;
pub mod dpsw;
pub mod error;
pub mod oracle;
pub mod params;
pub mod pcms;

pub use bench::{
    build_workload, mae, measure_throughput, mre, prf1, run_experiment, run_grid, ExperimentSpec,
    MetricsReport, RunOutput, Workload, WorkloadEntry,
};
pub use checkpoints::{build_checkpoints, checkpoint_count, CheckpointList};
pub use datagen::{generate, read_stream, write_stream, StreamKind, StreamSpec};
pub use dpsw::{Footprint, SelectedPart, SelectionRole, SketchSelection, Substream, WindowSketch};
pub use error::{Error, Result};
pub use oracle::ExactWindow;
pub use params::{
    alpha_for_num_checkpoints, budget_schedule, delta_default, rho_from_eps_delta, sub_len_paper,
    sub_len_theory, BudgetSchedule, FrameworkConfig, PrivacyBudget,
};
pub use pcms::{HashKind, Pcms};

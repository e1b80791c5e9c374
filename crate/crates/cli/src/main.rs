//! `dpsw` — generate streams, build query workloads, run experiments, and
//! sweep parameter grids for the sliding-window private sketch.

mod grid;

use std::fs::File;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use dpsw_core::bench::{
    append_metrics_csv, build_workload, read_workload, run_experiment, write_freq_log_csv,
    write_hh_log_csv, write_workload, ExperimentSpec, RunOutput,
};
use dpsw_core::datagen::{generate, read_stream_to_vec, write_stream, StreamKind, StreamSpec};
use dpsw_core::params::{
    alpha_for_num_checkpoints, delta_default, sub_len_paper, sub_len_theory, FrameworkConfig,
    PrivacyBudget,
};
use dpsw_core::{checkpoint_count, Workload};

/// Environment variable naming the default output directory.
const OUT_DIR_ENV: &str = "DPSW_OUT_DIR";

#[derive(Parser)]
#[command(
    name = "dpsw",
    version,
    about = "Differentially private frequency and heavy-hitter queries over sliding windows"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic stream file (newline-delimited integers).
    Generate(GenerateArgs),
    /// Sample query timestamps and items for a stream file.
    Workload(WorkloadArgs),
    /// Run one experiment and append a metrics row to a CSV.
    Run(RunArgs),
    /// Cross a parameter grid file and run every point.
    Sweep(SweepArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Zipf,
    Gaussian,
    Uniform,
}

#[derive(Args)]
struct GenerateArgs {
    /// Base distribution.
    #[arg(long, value_enum, default_value = "zipf")]
    kind: KindArg,
    /// Stream length.
    #[arg(long, default_value_t = 10_000_000)]
    n: u64,
    /// Domain size; items lie in [1, m].
    #[arg(long, default_value_t = 25_600)]
    m: u64,
    /// Zipf skewness.
    #[arg(long, default_value_t = 1.0)]
    skew: f64,
    /// Gaussian mean.
    #[arg(long, default_value_t = 50.0)]
    mean: f64,
    /// Gaussian standard deviation.
    #[arg(long, default_value_t = 25.0)]
    sd: f64,
    /// Fraction of positions replaced by uniform draws.
    #[arg(long, default_value_t = 0.05)]
    mix: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output path (default: <out-dir>/stream-<kind>-<seed>.txt).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct WorkloadArgs {
    /// Stream file to sample from.
    #[arg(long)]
    stream: PathBuf,
    /// Window size the queries will target.
    #[arg(long, default_value_t = 1_000_000)]
    w: u64,
    /// Fraction of the timestamps in [w, n] to sample.
    #[arg(long, default_value_t = 0.01)]
    fraction: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output path (default: <out-dir>/workload.csv).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct SketchArgs {
    /// Window size.
    #[arg(long, default_value_t = 1_000_000)]
    w: u64,
    /// Substream length L (default: the `paper` preset).
    #[arg(long, conflicts_with = "preset")]
    sub_len: Option<u64>,
    /// Substream-length preset: `paper` (L = 0.1 w) or `theory`
    /// (L = ceil(sqrt(w))).
    #[arg(long, value_parser = ["paper", "theory"])]
    preset: Option<String>,
    /// Checkpoint density factor (mutually exclusive with
    /// --num-checkpoints).
    #[arg(long, conflicts_with = "num_checkpoints")]
    alpha: Option<f64>,
    /// Target number of checkpoints per substream; alpha is searched to hit
    /// it exactly.
    #[arg(long)]
    num_checkpoints: Option<usize>,
    /// Sketch rows (hash functions per sketch).
    #[arg(long, default_value_t = 4)]
    rows: usize,
    /// Sketch width (columns per row).
    #[arg(long, default_value_t = 2_000)]
    width: usize,
    /// Privacy parameter epsilon.
    #[arg(long, default_value_t = 1.0)]
    eps: f64,
    /// Privacy parameter delta (default: n^-1.5 for the stream's n).
    #[arg(long)]
    delta: Option<f64>,
    /// Heavy-hitter threshold.
    #[arg(long, default_value_t = 0.01)]
    gamma: f64,
    /// Override the derived zeta = e / width in the heavy-hitter threshold.
    #[arg(long)]
    zeta: Option<f64>,
    /// Sketch seed (hashes and noise).
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Args)]
struct RunArgs {
    /// Stream file to replay.
    #[arg(long)]
    stream: PathBuf,
    /// Workload CSV (default: sampled on the fly with --fraction).
    #[arg(long)]
    workload: Option<PathBuf>,
    /// Sampling fraction when no workload file is given.
    #[arg(long, default_value_t = 0.01)]
    fraction: f64,
    /// Workload sampling seed when no workload file is given.
    #[arg(long, default_value_t = 0)]
    workload_seed: u64,
    #[command(flatten)]
    sketch: SketchArgs,
    /// Metrics CSV to append to (default: <out-dir>/metrics.csv).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Optional CSV path for the raw frequency-query log.
    #[arg(long)]
    freq_log: Option<PathBuf>,
    /// Optional CSV path for the raw heavy-hitter log.
    #[arg(long)]
    hh_log: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// Grid file: `key = v1, v2, ...` lines crossed Cartesian-style.
    #[arg(long)]
    grid: PathBuf,
    /// Metrics CSV to append to (default: <out-dir>/metrics.csv).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

fn out_dir() -> PathBuf {
    std::env::var_os(OUT_DIR_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("."))
}

fn default_out(name: &str) -> PathBuf {
    out_dir().join(name)
}

fn main() {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Generate(args) => cmd_generate(args),
        Command::Workload(args) => cmd_workload(args),
        Command::Run(args) => cmd_run(args),
        Command::Sweep(args) => cmd_sweep(args),
    };
    if let Err(err) = outcome {
        eprintln!("dpsw: error: {err:#}");
        std::process::exit(1);
    }
}

fn cmd_generate(args: GenerateArgs) -> anyhow::Result<()> {
    let (kind, name) = match args.kind {
        KindArg::Zipf => (StreamKind::Zipf, "zipf"),
        KindArg::Gaussian => (StreamKind::Gaussian, "gaussian"),
        KindArg::Uniform => (StreamKind::Uniform, "uniform"),
    };
    let spec = StreamSpec {
        kind,
        n: args.n,
        m: args.m,
        zipf_skew: args.skew,
        gauss_mean: args.mean,
        gauss_sd: args.sd,
        mix_uniform_fraction: args.mix,
        seed: args.seed,
        path: None,
    };
    let items = generate(&spec)?;
    let out = args
        .out
        .unwrap_or_else(|| default_out(&format!("stream-{name}-{}.txt", args.seed)));
    write_stream(&out, items).with_context(|| format!("writing {}", out.display()))?;
    println!("wrote {} items to {}", args.n, out.display());
    Ok(())
}

fn cmd_workload(args: WorkloadArgs) -> anyhow::Result<()> {
    let items = read_stream_to_vec(&args.stream)
        .with_context(|| format!("reading {}", args.stream.display()))?;
    let workload = build_workload(&items, args.w, args.fraction, args.seed)?;
    let out = args.out.unwrap_or_else(|| default_out("workload.csv"));
    write_workload(
        File::create(&out).with_context(|| format!("creating {}", out.display()))?,
        &workload,
    )?;
    println!(
        "wrote {} query timestamps to {} (low-frequency shortfall: {})",
        workload.entries.len(),
        out.display(),
        workload.low_shortfall
    );
    Ok(())
}

/// Resolves the sketch flags against a known stream length and domain size.
fn resolve_config(
    sketch: &SketchArgs,
    n: u64,
    m: u64,
) -> anyhow::Result<(FrameworkConfig, PrivacyBudget)> {
    let sub_len = match (&sketch.sub_len, sketch.preset.as_deref()) {
        (Some(explicit), _) => *explicit,
        (None, Some("theory")) => sub_len_theory(sketch.w),
        _ => sub_len_paper(sketch.w),
    };
    let alpha = match (sketch.alpha, sketch.num_checkpoints) {
        (Some(alpha), _) => alpha,
        (None, target) => {
            let target = target.unwrap_or(3);
            alpha_for_num_checkpoints(sub_len, target)
                .with_context(|| format!("searching alpha for {target} checkpoints"))?
        }
    };
    let config = FrameworkConfig::new(sketch.w, sub_len, alpha, sketch.rows, sketch.width, m, sketch.seed);
    config.validate()?;
    let delta = sketch.delta.unwrap_or_else(|| delta_default(n));
    let budget = PrivacyBudget::new(sketch.eps, delta)?;
    Ok((config, budget))
}

/// Echoes every resolved parameter; a run is reproducible from these lines.
fn print_config(config: &FrameworkConfig, budget: &PrivacyBudget, gamma: f64, zeta: Option<f64>) {
    let k = checkpoint_count(config.sub_len, config.alpha).expect("validated");
    let schedule = dpsw_core::budget_schedule(budget.rho(), config.alpha, k).expect("validated");
    println!("w = {}", config.w);
    println!("L = {}", config.sub_len);
    println!("alpha = {}", config.alpha);
    println!("num_checkpoints = {k}");
    println!("rows = {}", config.rows);
    println!("width = {}", config.width);
    println!("m = {}", config.domain_size);
    println!("seed = {}", config.seed);
    println!("epsilon = {}", budget.epsilon());
    println!("delta = {}", budget.delta());
    println!("rho = {}", budget.rho());
    println!("zeta = {}", zeta.unwrap_or_else(|| config.zeta()));
    println!("eta = {}", config.eta());
    println!("gamma = {gamma}");
    println!("schedule_rho1 = {}", schedule.rho1());
    let tail: Vec<String> = schedule.rho_tail().iter().map(|x| x.to_string()).collect();
    println!("schedule_tail = [{}]", tail.join(", "));
    println!("schedule_spent = {}", schedule.total_spent());
    println!("schedule_deficit = {}", budget.rho() - schedule.total_spent());
}

fn load_or_build_workload(
    path: &Option<PathBuf>,
    items: &[u64],
    w: u64,
    fraction: f64,
    seed: u64,
) -> anyhow::Result<Workload> {
    match path {
        Some(path) => {
            let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
            Ok(read_workload(file, w)?)
        }
        None => Ok(build_workload(items, w, fraction, seed)?),
    }
}

fn cmd_run(args: RunArgs) -> anyhow::Result<()> {
    let items = read_stream_to_vec(&args.stream)
        .with_context(|| format!("reading {}", args.stream.display()))?;
    if items.is_empty() {
        bail!("stream {} is empty", args.stream.display());
    }
    let max_item = items.iter().copied().max().unwrap_or(1);
    let (config, budget) = resolve_config(&args.sketch, items.len() as u64, max_item)?;
    print_config(&config, &budget, args.sketch.gamma, args.sketch.zeta);
    let workload = load_or_build_workload(
        &args.workload,
        &items,
        config.w,
        args.fraction,
        args.workload_seed,
    )?;
    let dataset = args
        .stream
        .file_stem()
        .map(|stem| stem.to_string_lossy().into_owned())
        .unwrap_or_else(|| "stream".into());
    let spec = ExperimentSpec {
        dataset,
        config,
        gamma: args.sketch.gamma,
        zeta_override: args.sketch.zeta,
        collect_hh_log: args.hh_log.is_some(),
    };
    let output = run_experiment(&items, &spec, &budget, &workload)?;
    write_logs(&output, &args.freq_log, &args.hh_log)?;
    let out = args.out.unwrap_or_else(|| default_out("metrics.csv"));
    append_metrics_csv(&out, std::slice::from_ref(&output.report))?;
    if output.report.throughput_ips == 0.0 {
        eprintln!("dpsw: warning: empty observe loop, throughput reported as 0");
    }
    println!(
        "mae_high = {:.4}, mre_high = {:.4}, f1 = {:.4}, throughput = {:.0} items/s -> {}",
        output.report.mae_high,
        output.report.mre_high,
        output.report.f1,
        output.report.throughput_ips,
        out.display()
    );
    Ok(())
}

fn write_logs(
    output: &RunOutput,
    freq_log: &Option<PathBuf>,
    hh_log: &Option<PathBuf>,
) -> anyhow::Result<()> {
    if let Some(path) = freq_log {
        write_freq_log_csv(File::create(path)?, &output.freq_log)?;
    }
    if let Some(path) = hh_log {
        write_hh_log_csv(File::create(path)?, &output.hh_log)?;
    }
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> anyhow::Result<()> {
    let text = std::fs::read_to_string(&args.grid)
        .with_context(|| format!("reading {}", args.grid.display()))?;
    let points = grid::parse_grid(&text)?;
    if points.is_empty() {
        bail!("grid {} produced no points", args.grid.display());
    }
    println!("sweeping {} grid points on {} thread(s)", points.len(), args.jobs.max(1));
    let reports = grid::run_sweep(&points, args.jobs.max(1))?;
    let out = args.out.unwrap_or_else(|| default_out("metrics.csv"));
    append_metrics_csv(&out, &reports)?;
    println!("appended {} rows to {}", reports.len(), out.display());
    Ok(())
}

/// Shared by `run` and the sweep worker: one fully-resolved grid point.
pub(crate) fn run_point(point: &grid::GridPoint) -> anyhow::Result<dpsw_core::MetricsReport> {
    let items = match &point.stream_path {
        Some(path) => read_stream_to_vec(Path::new(path))?,
        None => generate(&point.stream_spec())?,
    };
    if items.is_empty() {
        bail!("grid point has an empty stream");
    }
    let sketch = SketchArgs {
        w: point.w,
        sub_len: Some(point.sub_len()),
        preset: None,
        alpha: point.alpha,
        num_checkpoints: point.num_checkpoints,
        rows: point.rows,
        width: point.width,
        eps: point.eps,
        delta: point.delta,
        gamma: point.gamma,
        zeta: point.zeta,
        seed: point.seed,
    };
    let max_item = items.iter().copied().max().unwrap_or(1);
    let (config, budget) = resolve_config(&sketch, items.len() as u64, max_item.max(point.m))?;
    let workload = build_workload(&items, config.w, point.fraction, point.seed)?;
    let spec = ExperimentSpec {
        dataset: point.dataset_label(),
        config,
        gamma: point.gamma,
        zeta_override: point.zeta,
        collect_hh_log: false,
    };
    let output = run_experiment(&items, &spec, &budget, &workload)?;
    Ok(output.report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn run_defaults_mirror_paper_setting() {
        let cli = Cli::parse_from(["dpsw", "run", "--stream", "s.txt"]);
        let Command::Run(args) = cli.command else {
            panic!("expected a run command");
        };
        assert_eq!(args.sketch.w, 1_000_000);
        assert_eq!(args.sketch.sub_len, None, "defaults to the 0.1 w preset");
        assert_eq!(args.sketch.num_checkpoints, None, "resolves to 3 checkpoints");
        assert_eq!(args.sketch.eps, 1.0);
        assert_eq!(args.sketch.delta, None, "defaults to n^-1.5");
        assert_eq!(args.fraction, 0.01);
    }

    #[test]
    fn resolved_defaults() {
        let cli = Cli::parse_from(["dpsw", "run", "--stream", "s.txt"]);
        let Command::Run(args) = cli.command else {
            panic!("expected a run command");
        };
        let (config, budget) = resolve_config(&args.sketch, 10_000_000, 25_600).unwrap();
        assert_eq!(config.sub_len, 100_000);
        assert_eq!(
            dpsw_core::checkpoint_count(config.sub_len, config.alpha).unwrap(),
            3
        );
        let expected_delta = (10_000_000f64).powf(-1.5);
        assert!((budget.delta() - expected_delta).abs() < 1e-18);
    }
}

//! Sweep grid files: `key = v1, v2, ...` lines, `#` comments, values crossed
//! Cartesian-style into one experiment per combination.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use anyhow::{bail, Context};

use dpsw_core::datagen::{StreamKind, StreamSpec};
use dpsw_core::MetricsReport;

/// Keys a grid file may set. Unlisted keys are rejected so typos fail fast.
const KNOWN_KEYS: &[&str] = &[
    "kind", "stream", "n", "m", "skew", "mean", "sd", "mix", "w", "sub_len", "alpha",
    "num_checkpoints", "rows", "width", "eps", "delta", "gamma", "zeta", "fraction", "seed",
];

/// One fully-resolved sweep point.
#[derive(Debug, Clone)]
pub(crate) struct GridPoint {
    pub kind: StreamKind,
    pub stream_path: Option<String>,
    pub n: u64,
    pub m: u64,
    pub skew: f64,
    pub mean: f64,
    pub sd: f64,
    pub mix: f64,
    pub w: u64,
    pub sub_len_value: Option<u64>,
    pub alpha: Option<f64>,
    pub num_checkpoints: Option<usize>,
    pub rows: usize,
    pub width: usize,
    pub eps: f64,
    pub delta: Option<f64>,
    pub gamma: f64,
    pub zeta: Option<f64>,
    pub fraction: f64,
    pub seed: u64,
}

impl GridPoint {
    fn defaults() -> Self {
        Self {
            kind: StreamKind::Zipf,
            stream_path: None,
            n: 1_000_000,
            m: 25_600,
            skew: 1.0,
            mean: 50.0,
            sd: 25.0,
            mix: 0.05,
            w: 100_000,
            sub_len_value: None,
            alpha: None,
            num_checkpoints: Some(3),
            rows: 4,
            width: 2_000,
            eps: 1.0,
            delta: None,
            gamma: 0.01,
            zeta: None,
            fraction: 0.01,
            seed: 0,
        }
    }

    pub fn sub_len(&self) -> u64 {
        self.sub_len_value
            .unwrap_or_else(|| dpsw_core::sub_len_paper(self.w))
    }

    pub fn stream_spec(&self) -> StreamSpec {
        StreamSpec {
            kind: self.kind,
            n: self.n,
            m: self.m,
            zipf_skew: self.skew,
            gauss_mean: self.mean,
            gauss_sd: self.sd,
            mix_uniform_fraction: self.mix,
            seed: self.seed,
            path: None,
        }
    }

    pub fn dataset_label(&self) -> String {
        match (&self.stream_path, self.kind) {
            (Some(path), _) => std::path::Path::new(path)
                .file_stem()
                .map(|stem| stem.to_string_lossy().into_owned())
                .unwrap_or_else(|| "stream".into()),
            (None, StreamKind::Zipf) => "zipf".into(),
            (None, StreamKind::Gaussian) => "gaussian".into(),
            (None, StreamKind::Uniform) => "uniform".into(),
            (None, StreamKind::File) => "stream".into(),
        }
    }

    fn apply(&mut self, key: &str, value: &str) -> anyhow::Result<()> {
        match key {
            "kind" => {
                self.kind = match value {
                    "zipf" => StreamKind::Zipf,
                    "gaussian" => StreamKind::Gaussian,
                    "uniform" => StreamKind::Uniform,
                    other => bail!("unknown stream kind {other:?}"),
                }
            }
            "stream" => self.stream_path = Some(value.to_string()),
            "n" => self.n = parse(key, value)?,
            "m" => self.m = parse(key, value)?,
            "skew" => self.skew = parse(key, value)?,
            "mean" => self.mean = parse(key, value)?,
            "sd" => self.sd = parse(key, value)?,
            "mix" => self.mix = parse(key, value)?,
            "w" => self.w = parse(key, value)?,
            "sub_len" => self.sub_len_value = Some(parse(key, value)?),
            "alpha" => {
                self.alpha = Some(parse(key, value)?);
                self.num_checkpoints = None;
            }
            "num_checkpoints" => {
                self.num_checkpoints = Some(parse(key, value)?);
                self.alpha = None;
            }
            "rows" => self.rows = parse(key, value)?,
            "width" => self.width = parse(key, value)?,
            "eps" => self.eps = parse(key, value)?,
            "delta" => self.delta = Some(parse(key, value)?),
            "gamma" => self.gamma = parse(key, value)?,
            "zeta" => self.zeta = Some(parse(key, value)?),
            "fraction" => self.fraction = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            other => bail!("unknown grid key {other:?}"),
        }
        Ok(())
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> anyhow::Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| anyhow::anyhow!("grid key {key}: bad value {value:?}: {e}"))
}

/// Parses the grid text into the Cartesian product of all assignments.
pub(crate) fn parse_grid(text: &str) -> anyhow::Result<Vec<GridPoint>> {
    let mut axes: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, values) = line
            .split_once('=')
            .with_context(|| format!("grid line {}: expected `key = values`", lineno + 1))?;
        let key = key.trim().to_string();
        if !KNOWN_KEYS.contains(&key.as_str()) {
            bail!("grid line {}: unknown grid key {key:?}", lineno + 1);
        }
        let values: Vec<String> = values
            .split(',')
            .map(|v| v.trim().to_string())
            .filter(|v| !v.is_empty())
            .collect();
        if values.is_empty() {
            bail!("grid line {}: key {key:?} has no values", lineno + 1);
        }
        if axes.insert(key.clone(), values).is_some() {
            bail!("grid key {key:?} given twice");
        }
    }
    let mut points = vec![GridPoint::defaults()];
    for (key, values) in &axes {
        let mut crossed = Vec::with_capacity(points.len() * values.len());
        for point in &points {
            for value in values {
                let mut next = point.clone();
                next.apply(key, value)?;
                crossed.push(next);
            }
        }
        points = crossed;
    }
    Ok(points)
}

/// Runs every point, `jobs` at a time. Each worker owns its sketch and
/// oracle; only the result vector is shared.
pub(crate) fn run_sweep(points: &[GridPoint], jobs: usize) -> anyhow::Result<Vec<MetricsReport>> {
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<(usize, MetricsReport)>> = Mutex::new(Vec::with_capacity(points.len()));
    let failures: Mutex<Vec<String>> = Mutex::new(Vec::new());
    std::thread::scope(|scope| {
        for _ in 0..jobs.min(points.len()) {
            scope.spawn(|| loop {
                let index = next.fetch_add(1, Ordering::Relaxed);
                if index >= points.len() {
                    break;
                }
                match crate::run_point(&points[index]) {
                    Ok(report) => results.lock().unwrap().push((index, report)),
                    Err(err) => failures.lock().unwrap().push(format!("point {index}: {err:#}")),
                }
            });
        }
    });
    let failures = failures.into_inner().unwrap();
    if !failures.is_empty() {
        bail!("{} grid point(s) failed:\n{}", failures.len(), failures.join("\n"));
    }
    let mut results = results.into_inner().unwrap();
    results.sort_by_key(|(index, _)| *index);
    Ok(results.into_iter().map(|(_, report)| report).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn crossing_and_defaults() {
        let points = parse_grid("eps = 0.5, 1.0\nseed = 1, 2, 3 # three seeds\n").unwrap();
        assert_eq!(points.len(), 6);
        assert_eq!(points[0].eps, 0.5);
        assert_eq!(points[0].seed, 1);
        assert_eq!(points[5].eps, 1.0);
        assert_eq!(points[5].seed, 3);
        assert_eq!(points[0].w, 100_000, "defaults fill the rest");
    }

    #[test]
    fn rejects_malformed_grids() {
        assert!(parse_grid("nonsense").is_err());
        assert!(parse_grid("bogus_key = 1").is_err());
        assert!(parse_grid("eps =").is_err());
        assert!(parse_grid("eps = 0.5\neps = 1").is_err());
        assert!(parse_grid("eps = abc").is_err());
    }

    #[test]
    fn comments_and_blanks_are_ignored() {
        let points = parse_grid("# full-line comment\n\n  \n").unwrap();
        assert_eq!(points.len(), 1, "empty grid is the single default point");
    }
}

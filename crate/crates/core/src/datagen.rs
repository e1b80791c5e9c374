//! Synthetic stream generation and newline-delimited stream files.
//!
//! Synthetic streams follow the benchmark recipe: a base distribution (Zipf
//! with configurable skew, rounded Gaussian, or discrete uniform) over the
//! item domain `[1, m]`, with each position independently replaced by a
//! uniform draw with a small mixing probability. Generation is a pure
//! function of the `StreamSpec`, including its seed.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

/// Base distribution of a stream spec.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamKind {
    Zipf,
    Gaussian,
    Uniform,
    File,
}

/// Full description of a stream: distribution, shape parameters, and seed.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamSpec {
    pub kind: StreamKind,
    /// Stream length.
    pub n: u64,
    /// Domain size; items are integers in `[1, m]`.
    pub m: u64,
    /// Zipf skew (probability of item `i` proportional to `i^-skew`).
    pub zipf_skew: f64,
    pub gauss_mean: f64,
    pub gauss_sd: f64,
    /// Probability that a position is replaced by a uniform draw.
    pub mix_uniform_fraction: f64,
    pub seed: u64,
    /// Source path when `kind` is [`StreamKind::File`].
    pub path: Option<PathBuf>,
}

impl StreamSpec {
    pub fn zipf(n: u64, m: u64, seed: u64) -> Self {
        Self {
            kind: StreamKind::Zipf,
            n,
            m,
            zipf_skew: 1.0,
            gauss_mean: 50.0,
            gauss_sd: 25.0,
            mix_uniform_fraction: 0.05,
            seed,
            path: None,
        }
    }

    pub fn gaussian(n: u64, m: u64, seed: u64) -> Self {
        Self {
            kind: StreamKind::Gaussian,
            ..Self::zipf(n, m, seed)
        }
    }

    pub fn uniform(n: u64, m: u64, seed: u64) -> Self {
        Self {
            kind: StreamKind::Uniform,
            mix_uniform_fraction: 0.0,
            ..Self::zipf(n, m, seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 1 {
            return Err(Error::InvalidStreamSpec("stream length must be at least 1".into()));
        }
        if self.m < 1 {
            return Err(Error::InvalidStreamSpec("domain size must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.mix_uniform_fraction) {
            return Err(Error::InvalidStreamSpec(format!(
                "mix fraction must lie in [0, 1], got {}",
                self.mix_uniform_fraction
            )));
        }
        let positive_finite = |x: f64| x > 0.0 && x.is_finite();
        match self.kind {
            StreamKind::Zipf if !positive_finite(self.zipf_skew) => Err(Error::InvalidStreamSpec(
                format!("zipf skew must be positive, got {}", self.zipf_skew),
            )),
            StreamKind::Gaussian if !positive_finite(self.gauss_sd) => Err(Error::InvalidStreamSpec(
                format!("gaussian sd must be positive, got {}", self.gauss_sd),
            )),
            StreamKind::File if self.path.is_none() => {
                Err(Error::InvalidStreamSpec("file streams need a path".into()))
            }
            _ => Ok(()),
        }
    }
}

/// Cumulative probability table for exact Zipf sampling by binary search.
struct ZipfTable {
    cumulative: Vec<f64>,
}

impl ZipfTable {
    fn new(m: u64, skew: f64) -> Self {
        let mut cumulative = Vec::with_capacity(m as usize);
        let mut acc = 0.0;
        for i in 1..=m {
            acc += (i as f64).powf(-skew);
            cumulative.push(acc);
        }
        Self { cumulative }
    }

    fn sample(&self, rng: &mut impl Rng) -> u64 {
        let total = *self.cumulative.last().expect("m >= 1");
        let u = rng.gen::<f64>() * total;
        let idx = self.cumulative.partition_point(|&c| c < u);
        (idx as u64 + 1).min(self.cumulative.len() as u64)
    }
}

/// Generates the item sequence described by `spec`. Rejects `kind = File`
/// (use [`read_stream`] for those). Deterministic given the seed.
pub fn generate(spec: &StreamSpec) -> Result<Vec<u64>> {
    spec.validate()?;
    if spec.kind == StreamKind::File {
        return Err(Error::InvalidStreamSpec(
            "file streams are read, not generated".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut items = Vec::with_capacity(spec.n as usize);
    match spec.kind {
        StreamKind::Zipf => {
            let table = ZipfTable::new(spec.m, spec.zipf_skew);
            for _ in 0..spec.n {
                items.push(table.sample(&mut rng));
            }
        }
        StreamKind::Gaussian => {
            let normal = Normal::new(spec.gauss_mean, spec.gauss_sd)
                .map_err(|e| Error::InvalidStreamSpec(e.to_string()))?;
            for _ in 0..spec.n {
                // Draws are rounded to the nearest integer; anything outside
                // [1, m] is rejected and redrawn.
                let item = loop {
                    let v = normal.sample(&mut rng).round();
                    if v >= 1.0 && v <= spec.m as f64 {
                        break v as u64;
                    }
                };
                items.push(item);
            }
        }
        StreamKind::Uniform => {
            for _ in 0..spec.n {
                items.push(rng.gen_range(1..=spec.m));
            }
        }
        StreamKind::File => unreachable!(),
    }
    if spec.mix_uniform_fraction > 0.0 {
        // Positional interleaving: each position flips its own mixing coin.
        for item in items.iter_mut() {
            if rng.gen::<f64>() < spec.mix_uniform_fraction {
                *item = rng.gen_range(1..=spec.m);
            }
        }
    }
    debug_assert!(items.iter().all(|&s| s >= 1 && s <= spec.m));
    Ok(items)
}

/// Writes items as newline-delimited decimal integers.
pub fn write_stream<P: AsRef<Path>, I: IntoIterator<Item = u64>>(path: P, items: I) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for item in items {
        writeln!(out, "{item}")?;
    }
    out.flush()?;
    Ok(())
}

/// Streaming reader over a newline-delimited stream file. Yields items
/// without loading the whole file; parse failures carry the line number.
pub struct StreamReader {
    lines: std::io::Lines<BufReader<File>>,
    line: usize,
}

impl Iterator for StreamReader {
    type Item = Result<u64>;

    fn next(&mut self) -> Option<Self::Item> {
        let line = self.lines.next()?;
        self.line += 1;
        Some(line.map_err(Error::from).and_then(|text| {
            text.trim().parse::<u64>().map_err(|e| Error::StreamParse {
                line: self.line,
                reason: format!("{:?}: {e}", text),
            })
        }))
    }
}

/// Opens a stream file for iteration.
pub fn read_stream<P: AsRef<Path>>(path: P) -> Result<StreamReader> {
    Ok(StreamReader {
        lines: BufReader::new(File::open(path)?).lines(),
        line: 0,
    })
}

/// Reads a whole stream file into memory.
pub fn read_stream_to_vec<P: AsRef<Path>>(path: P) -> Result<Vec<u64>> {
    read_stream(path)?.collect()
}

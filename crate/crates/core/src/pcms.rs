//! Private count-min sketch: an `a x b` array of real-valued counters whose
//! cells start at independent Gaussian draws instead of zero.
//!
//! Inserting an item bumps one counter per row at a hashed column; a query
//! takes the minimum over the addressed counters. The initial noise has
//! variance `rows / rho` per counter, which makes the released array satisfy
//! `rho`-zCDP (the l2-sensitivity of one item replacement is `sqrt(2 rows)`).
//! Estimates are returned raw: they are not rounded, and negative values are
//! not clamped.

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

const SNAPSHOT_MAGIC: &[u8; 4] = b"DPCM";
const SNAPSHOT_VERSION: u32 = 1;

/// Hash family used to map items onto sketch columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HashKind {
    /// Seeded multiply-add-shift over 64-bit keys, reduced to `[0, width)`
    /// by fixed-point scaling. One independent function per row.
    TwoUniversal,
    /// `item - 1 (mod width)`. Collision-free whenever `width >= domain`;
    /// exists so exactness tests can rule out hash collisions.
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct RowHash {
    mul: u128,
    add: u128,
}

impl RowHash {
    fn draw(rng: &mut impl Rng) -> Self {
        // An even multiplier would discard key bits.
        let mul = rng.gen::<u128>() | 1;
        let add = rng.gen::<u128>();
        Self { mul, add }
    }

    #[inline]
    fn column(&self, item: u64, width: usize) -> usize {
        let h = (self.mul.wrapping_mul(item as u128).wrapping_add(self.add) >> 64) as u64;
        (((h as u128) * (width as u128)) >> 64) as usize
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Mixes a base seed with per-sketch coordinates so every sketch in a window
/// structure draws independent hashes and noise from one configured seed.
pub(crate) fn derive_seed(base: u64, ordinal: u64, slot: u64) -> u64 {
    splitmix64(splitmix64(base ^ splitmix64(ordinal)) ^ splitmix64(slot ^ 0xD1B5_4A32_D192_ED03))
}

/// One noisy counter array covering a declared range of stream positions.
#[derive(Debug, Clone, PartialEq)]
pub struct Pcms {
    counters: Vec<f64>,
    rows: usize,
    width: usize,
    rho: f64,
    seed: u64,
    hash_kind: HashKind,
    hashes: Vec<RowHash>,
    start: u64,
    end: u64,
    frozen: bool,
}

impl Pcms {
    /// Allocates the counter array, seeds the per-row hash functions, and
    /// injects the initial Gaussian noise (variance `rows / rho` per cell,
    /// exactly zero when `rho` is infinite).
    ///
    /// The hash parameters and the noise come from two separate seeded
    /// streams, so sketches that share a seed share hash functions no matter
    /// how much noise they draw.
    pub fn new(
        rows: usize,
        width: usize,
        rho: f64,
        seed: u64,
        range: (u64, u64),
        hash_kind: HashKind,
    ) -> Result<Self> {
        if rows < 1 || width < 1 {
            return Err(Error::InvalidConfig(format!(
                "sketch dimensions must be positive, got {rows} x {width}"
            )));
        }
        if rho.is_nan() || rho <= 0.0 {
            return Err(Error::InvalidRho(rho));
        }
        if range.0 > range.1 {
            return Err(Error::InvalidConfig(format!(
                "sketch range start {} exceeds end {}",
                range.0, range.1
            )));
        }
        let mut hash_rng = ChaCha8Rng::seed_from_u64(splitmix64(seed ^ 0x68AC_39D5_71F0_42E1));
        let hashes = (0..rows).map(|_| RowHash::draw(&mut hash_rng)).collect();
        let mut counters = vec![0.0; rows * width];
        if rho.is_finite() {
            let sigma = (rows as f64 / rho).sqrt();
            let normal = Normal::new(0.0, sigma).expect("sigma is finite and positive");
            let mut noise_rng = ChaCha8Rng::seed_from_u64(splitmix64(seed ^ 0x1F8E_52C4_A6B3_970D));
            for cell in counters.iter_mut() {
                *cell = normal.sample(&mut noise_rng);
            }
        }
        Ok(Self {
            counters,
            rows,
            width,
            rho,
            seed,
            hash_kind,
            hashes,
            start: range.0,
            end: range.1,
            frozen: false,
        })
    }

    /// Column addressed by `item` in `row`.
    #[inline]
    pub fn column(&self, row: usize, item: u64) -> usize {
        match self.hash_kind {
            HashKind::TwoUniversal => self.hashes[row].column(item, self.width),
            HashKind::Identity => ((item - 1) % self.width as u64) as usize,
        }
    }

    /// Adds one occurrence of `item`: exactly one counter per row is
    /// incremented.
    ///
    /// # Panics
    ///
    /// Panics if the sketch has been frozen; inserting after freeze is a
    /// caller bug, not a recoverable condition.
    #[inline]
    pub fn insert(&mut self, item: u64) {
        assert!(!self.frozen, "insert into a frozen sketch");
        for row in 0..self.rows {
            let col = self.column(row, item);
            self.counters[row * self.width + col] += 1.0;
        }
    }

    /// Minimum over the addressed counters. Pure; may be negative.
    #[inline]
    pub fn estimate(&self, item: u64) -> f64 {
        let mut best = f64::INFINITY;
        for row in 0..self.rows {
            let col = self.column(row, item);
            let v = self.counters[row * self.width + col];
            if v < best {
                best = v;
            }
        }
        best
    }

    /// Marks the sketch read-only. Idempotent.
    pub fn freeze(&mut self) {
        self.frozen = true;
    }

    pub fn frozen(&self) -> bool {
        self.frozen
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn hash_kind(&self) -> HashKind {
        self.hash_kind
    }

    /// Declared `[start, end]` stream positions this sketch covers.
    pub fn range(&self) -> (u64, u64) {
        (self.start, self.end)
    }

    pub fn start(&self) -> u64 {
        self.start
    }

    pub fn end(&self) -> u64 {
        self.end
    }

    /// Raw counter cells, row-major. Exposed for calibration checks.
    pub fn counters(&self) -> &[f64] {
        &self.counters
    }

    /// Approximate heap footprint: counters plus hash parameters plus a fixed
    /// per-sketch overhead for bookkeeping fields.
    pub fn size_bytes(&self) -> usize {
        self.counters.len() * 8 + self.hashes.len() * 32 + 64
    }

    /// Writes the versioned binary snapshot: header (dimensions, budget,
    /// seed, range, flags) followed by row-major little-endian `f64` cells.
    pub fn write_snapshot<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(SNAPSHOT_MAGIC)?;
        out.write_all(&SNAPSHOT_VERSION.to_le_bytes())?;
        out.write_all(&(self.rows as u32).to_le_bytes())?;
        out.write_all(&(self.width as u64).to_le_bytes())?;
        out.write_all(&self.rho.to_le_bytes())?;
        out.write_all(&self.seed.to_le_bytes())?;
        out.write_all(&self.start.to_le_bytes())?;
        out.write_all(&self.end.to_le_bytes())?;
        out.write_all(&[self.hash_kind as u8, self.frozen as u8])?;
        for cell in &self.counters {
            out.write_all(&cell.to_le_bytes())?;
        }
        Ok(())
    }

    /// Reads a snapshot produced by [`write_snapshot`](Self::write_snapshot).
    /// Hash functions are re-derived from the stored seed.
    pub fn read_snapshot<R: Read>(mut input: R) -> Result<Self> {
        fn read_array<const N: usize, R: Read>(input: &mut R) -> Result<[u8; N]> {
            let mut buf = [0u8; N];
            input.read_exact(&mut buf)?;
            Ok(buf)
        }
        let magic = read_array::<4, _>(&mut input)?;
        if &magic != SNAPSHOT_MAGIC {
            return Err(Error::Snapshot("bad magic".into()));
        }
        let version = u32::from_le_bytes(read_array(&mut input)?);
        if version != SNAPSHOT_VERSION {
            return Err(Error::Snapshot(format!("unsupported version {version}")));
        }
        let rows = u32::from_le_bytes(read_array(&mut input)?) as usize;
        let width = u64::from_le_bytes(read_array(&mut input)?) as usize;
        let rho = f64::from_le_bytes(read_array(&mut input)?);
        let seed = u64::from_le_bytes(read_array(&mut input)?);
        let start = u64::from_le_bytes(read_array(&mut input)?);
        let end = u64::from_le_bytes(read_array(&mut input)?);
        let [kind, frozen] = read_array::<2, _>(&mut input)?;
        let hash_kind = match kind {
            0 => HashKind::TwoUniversal,
            1 => HashKind::Identity,
            other => return Err(Error::Snapshot(format!("unknown hash kind {other}"))),
        };
        let mut sketch = Pcms::new(rows, width, rho, seed, (start, end), hash_kind)?;
        for cell in sketch.counters.iter_mut() {
            *cell = f64::from_le_bytes(read_array(&mut input)?);
        }
        sketch.frozen = frozen != 0;
        Ok(sketch)
    }
}

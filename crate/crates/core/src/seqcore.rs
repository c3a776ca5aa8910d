//! CAZAC training sequences and the dual-polarization burst preamble.
//!
//! Sequences are 1-indexed in the math (`c(1) .. c(N)`) and 0-indexed in
//! storage: `samples[i]` holds `c(i + 1)`.

use num_complex::Complex;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::dft;
use crate::scalar::{cis, Real};
use crate::signal::{ComplexSequence, DualPolSignal};

/// Preamble geometry: CAZAC block length, guard length and unit count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreambleSpec {
    /// CAZAC block length `N` in symbols.
    pub n: usize,
    /// Guard interval length in symbols, on each side of every block.
    pub n_gi: usize,
    /// Number of repeated training units `L`.
    pub units: usize,
}

impl Default for PreambleSpec {
    fn default() -> Self {
        Self { n: 64, n_gi: 2, units: 2 }
    }
}

impl PreambleSpec {
    pub fn new(n: usize, n_gi: usize, units: usize) -> Result<Self> {
        let spec = Self { n, n_gi, units };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        check_block_length(self.n)?;
        if 2 * self.n_gi >= self.n {
            return Err(Error::InvalidPreamble(format!(
                "guard interval {} too long for block length {}",
                self.n_gi, self.n
            )));
        }
        if self.units == 0 {
            return Err(Error::InvalidPreamble("at least one training unit required".into()));
        }
        Ok(())
    }

    /// Guarded block length `N + 2 N_GI` (one half of a unit).
    pub fn n_cazac(&self) -> usize {
        self.n + 2 * self.n_gi
    }

    /// Symbols per training unit, `2 (N + 2 N_GI)`.
    pub fn unit_len(&self) -> usize {
        2 * self.n_cazac()
    }

    /// Total preamble length `L * 2 (N + 2 N_GI)`.
    pub fn total_len(&self) -> usize {
        self.units * self.unit_len()
    }

    /// Symbol index (within the preamble) of the first core symbol of `block`
    /// (0 or 1) in training unit `unit`.
    pub fn block_start(&self, unit: usize, block: usize) -> usize {
        unit * self.unit_len() + block * self.n_cazac() + self.n_gi
    }
}

fn check_block_length(n: usize) -> Result<()> {
    if n < 8 || !n.is_power_of_two() {
        return Err(Error::InvalidBlockLength(n));
    }
    Ok(())
}

/// The quadratic-phase CAZAC sequence `c(n) = exp(j pi n^2 / N)`, `n = 1..N`.
///
/// `N` must be a power of two no smaller than 8; below that the half-period
/// sign relation between the X and Y blocks no longer holds.
pub fn cazac<T: Real>(n: usize) -> Result<ComplexSequence<T>> {
    check_block_length(n)?;
    let two_n = 2 * n as u64;
    let samples = (1..=n as u64)
        .map(|k| {
            // Reduce n^2 modulo 2N first so the phase argument stays exact.
            let r = (k * k) % two_n;
            cis(T::PI() * T::lit(r as f64) / T::of(n))
        })
        .collect();
    ComplexSequence::new(samples, 1)
}

/// Circular autocorrelation `ACF_m = sum_n c(n) c*((n - m) mod N)`, `m = 1..N`.
///
/// Entry `m - 1` of the output holds `ACF_m`; `ACF_N` is the zero-lag value.
pub fn circular_autocorrelation<T: Real>(seq: &ComplexSequence<T>) -> Result<ComplexSequence<T>> {
    if seq.sps() != 1 {
        return Err(Error::InvalidSignal("autocorrelation expects a symbol-rate sequence".into()));
    }
    let s = seq.samples();
    let n = s.len();
    let acf = (1..=n)
        .map(|m| {
            (0..n).fold(Complex::zero(), |acc, i| {
                let j = (i + n - m % n) % n;
                acc + s[i] * s[j].conj()
            })
        })
        .collect();
    ComplexSequence::new(acf, 1)
}

/// Ratio of largest to smallest DFT magnitude; 1 for a perfectly flat spectrum.
pub fn spectral_flatness<T: Real>(samples: &[Complex<T>]) -> T {
    let spec = dft(samples);
    let (lo, hi) = spec.iter().fold((T::infinity(), T::zero()), |(lo, hi), v| {
        let m = v.norm();
        (lo.min(m), hi.max(m))
    });
    hi / lo
}

/// The four rearranged training blocks of one training unit.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingBlocks<T> {
    pub x1: Vec<Complex<T>>,
    pub x2: Vec<Complex<T>>,
    pub y1: Vec<Complex<T>>,
    pub y2: Vec<Complex<T>>,
}

impl<T: Real> TrainingBlocks<T> {
    /// Arbitrary training blocks of a common length (for comparing against
    /// non-CAZAC training).
    pub fn from_blocks(
        x1: Vec<Complex<T>>,
        x2: Vec<Complex<T>>,
        y1: Vec<Complex<T>>,
        y2: Vec<Complex<T>>,
    ) -> Result<Self> {
        let n = x1.len();
        if n == 0 || [x2.len(), y1.len(), y2.len()].iter().any(|&l| l != n) {
            return Err(Error::InvalidSignal("training blocks must share a non-zero length".into()));
        }
        Ok(Self { x1, x2, y1, y2 })
    }

    pub fn block_len(&self) -> usize {
        self.x1.len()
    }

    /// Block `block` (0 or 1) on polarization `pol` (0 = X, 1 = Y).
    pub fn block(&self, pol: usize, block: usize) -> &[Complex<T>] {
        match (pol, block) {
            (0, 0) => &self.x1,
            (0, _) => &self.x2,
            (_, 0) => &self.y1,
            _ => &self.y2,
        }
    }
}

/// Builds `cX1 = c`, `cY1 = c` shifted by `N/2`, `cX2(n) = conj(cX1(N+1-n))`
/// and `cY2(n) = -conj(cY1(N+1-n))`.
pub fn build_training_blocks<T: Real>(n: usize) -> Result<TrainingBlocks<T>> {
    training_blocks_from_base(cazac::<T>(n)?.into_samples())
}

/// The four-block arrangement around an arbitrary even-length base block
/// `x1`: `y1` is `x1` cyclically shifted by half a block, `x2` and `y2` are
/// the conjugate time reversals of `x1` and `-y1`.
pub fn training_blocks_from_base<T: Real>(x1: Vec<Complex<T>>) -> Result<TrainingBlocks<T>> {
    let n = x1.len();
    if n == 0 || !n.is_multiple_of(2) {
        return Err(Error::InvalidBlockLength(n));
    }
    let y1: Vec<_> = (0..n).map(|i| x1[(i + n / 2) % n]).collect();
    let x2: Vec<_> = (0..n).map(|i| x1[n - 1 - i].conj()).collect();
    let y2: Vec<_> = (0..n).map(|i| -y1[n - 1 - i].conj()).collect();
    TrainingBlocks::from_blocks(x1, x2, y1, y2)
}

/// Appends `block` wrapped in a cyclic prefix (its last `gi` symbols) and a
/// cyclic suffix (its first `gi` symbols).
fn push_guarded<T: Copy>(out: &mut Vec<T>, block: &[T], gi: usize) {
    let n = block.len();
    out.extend_from_slice(&block[n - gi..]);
    out.extend_from_slice(block);
    out.extend_from_slice(&block[..gi]);
}

/// The dual-polarization preamble for `spec` built from CAZAC blocks.
pub fn build_preamble<T: Real>(spec: &PreambleSpec) -> Result<DualPolSignal<T>> {
    spec.validate()?;
    let blocks = build_training_blocks(spec.n)?;
    build_preamble_from_blocks(spec, &blocks)
}

/// Preamble layout with caller-provided training blocks: per polarization, `L`
/// copies of `[GI | block1 | GI | GI | block2 | GI]` with cyclic guards.
pub fn build_preamble_from_blocks<T: Real>(
    spec: &PreambleSpec,
    blocks: &TrainingBlocks<T>,
) -> Result<DualPolSignal<T>> {
    spec.validate()?;
    if blocks.block_len() != spec.n {
        return Err(Error::LengthMismatch {
            expected: spec.n,
            actual: blocks.block_len(),
        });
    }
    let mut unit_x = Vec::with_capacity(spec.unit_len());
    let mut unit_y = Vec::with_capacity(spec.unit_len());
    push_guarded(&mut unit_x, &blocks.x1, spec.n_gi);
    push_guarded(&mut unit_x, &blocks.x2, spec.n_gi);
    push_guarded(&mut unit_y, &blocks.y1, spec.n_gi);
    push_guarded(&mut unit_y, &blocks.y2, spec.n_gi);
    let x = unit_x.iter().copied().cycle().take(spec.total_len()).collect();
    let y = unit_y.iter().copied().cycle().take(spec.total_len()).collect();
    DualPolSignal::new(x, y, 1)
}

//! Burst transmitter: 16QAM mapping, pilot insertion, frame assembly and RRC
//! pulse shaping.
//!
//! Gray table, per rail (first bit pair drives I, second drives Q):
//!
//! | bits | level |
//! |------|-------|
//! | 00   | +1    |
//! | 01   | +3    |
//! | 11   | -3    |
//! | 10   | -1    |
//!
//! Levels are scaled by `1/sqrt(10)` for unit mean energy.

use num_complex::Complex;
use num_traits::Zero;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::FftPair;
use crate::scalar::Real;
use crate::seqcore::{build_preamble, build_preamble_from_blocks, training_blocks_from_base, PreambleSpec, TrainingBlocks};
use crate::signal::DualPolSignal;

/// Default RRC span in symbols.
pub const RRC_SPAN: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Modulation {
    #[default]
    #[serde(rename = "16qam")]
    Qam16,
}

/// Everything needed to build one transmitted burst.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FrameSpec {
    pub preamble: PreambleSpec,
    /// Data symbols per polarization, pilots excluded.
    pub payload_symbols: usize,
    /// One pilot per `pilot_period` payload slots.
    pub pilot_period: usize,
    pub modulation: Modulation,
    pub rolloff: f64,
    /// Symbol rate in Hz.
    pub symbol_rate: f64,
}

impl Default for FrameSpec {
    fn default() -> Self {
        Self {
            preamble: PreambleSpec::default(),
            payload_symbols: 1 << 15,
            pilot_period: 32,
            modulation: Modulation::Qam16,
            rolloff: 0.1,
            symbol_rate: 15e9,
        }
    }
}

impl FrameSpec {
    pub fn validate(&self) -> Result<()> {
        self.preamble.validate()?;
        if self.pilot_period < 2 {
            return Err(Error::InvalidFrame(format!("pilot period {} below 2", self.pilot_period)));
        }
        if !(self.rolloff > 0.0 && self.rolloff <= 1.0) {
            return Err(Error::InvalidFrame(format!("roll-off {} outside (0, 1]", self.rolloff)));
        }
        if !(self.symbol_rate.is_finite() && self.symbol_rate > 0.0) {
            return Err(Error::InvalidFrame(format!("symbol rate {} not positive", self.symbol_rate)));
        }
        Ok(())
    }

    /// Payload slots (data plus pilots) per polarization.
    pub fn payload_slots(&self) -> usize {
        self.payload_symbols + pilot_count(self.payload_symbols, self.pilot_period)
    }

    /// Symbols per polarization in the whole burst.
    pub fn total_symbols(&self) -> usize {
        self.preamble.total_len() + self.payload_slots()
    }
}

/// Transmitted burst in symbol domain plus the ground truth needed for scoring.
#[derive(Debug, Clone, PartialEq)]
pub struct BurstFrame<T> {
    /// Preamble followed by the pilot-bearing payload, sps = 1.
    pub tx_symbols: DualPolSignal<T>,
    /// Frame indices of the pilot slots.
    pub pilot_positions: Vec<usize>,
    /// Payload bits (0/1) per polarization, in mapping order.
    pub payload_bits: [Vec<u8>; 2],
    /// Frame index of the first payload slot.
    pub payload_start: usize,
}

const LEVELS: [f64; 4] = [1.0, 3.0, -1.0, -3.0];

fn rail_level(b0: u8, b1: u8) -> f64 {
    LEVELS[((b0 & 1) << 1 | (b1 & 1)) as usize]
}

/// The 16 constellation points, indexed by the nibble `b0 b1 b2 b3`.
pub fn constellation_16qam<T: Real>() -> [Complex<T>; 16] {
    let s = T::lit(10f64.sqrt()).recip();
    std::array::from_fn(|i| {
        let b = |k: usize| ((i >> (3 - k)) & 1) as u8;
        Complex::new(T::lit(rail_level(b(0), b(1))) * s, T::lit(rail_level(b(2), b(3))) * s)
    })
}

/// The fixed pilot symbol `(3 + 3j)/sqrt(10)`.
pub fn pilot_symbol<T: Real>() -> Complex<T> {
    let v = T::lit(3.0 / 10f64.sqrt());
    Complex::new(v, v)
}

/// Gray-maps bits (values 0/1) onto unit-energy 16QAM.
pub fn map_16qam<T: Real>(bits: &[u8]) -> Result<Vec<Complex<T>>> {
    if !bits.len().is_multiple_of(4) {
        return Err(Error::BitCount(bits.len()));
    }
    let table = constellation_16qam::<T>();
    Ok(bits
        .chunks_exact(4)
        .map(|b| table[((b[0] & 1) << 3 | (b[1] & 1) << 2 | (b[2] & 1) << 1 | (b[3] & 1)) as usize])
        .collect())
}

/// Index of the nearest constellation point; ties go to the lower index.
pub fn slice_16qam<T: Real>(s: Complex<T>) -> usize {
    let table = constellation_16qam::<T>();
    let mut best = 0;
    let mut best_d = T::infinity();
    for (i, p) in table.iter().enumerate() {
        let d = (s - p).norm_sqr();
        if d < best_d {
            best = i;
            best_d = d;
        }
    }
    best
}

/// Nearest constellation point.
pub fn decide_16qam<T: Real>(s: Complex<T>) -> Complex<T> {
    constellation_16qam::<T>()[slice_16qam(s)]
}

/// Hard-decision Gray demapping, 4 bits per symbol.
pub fn demap_16qam<T: Real>(symbols: &[Complex<T>]) -> Vec<u8> {
    symbols
        .iter()
        .flat_map(|&s| {
            let i = slice_16qam(s);
            [(i >> 3) as u8 & 1, (i >> 2) as u8 & 1, (i >> 1) as u8 & 1, i as u8 & 1]
        })
        .collect()
}

/// Number of pilots needed for `payload_len` data symbols.
pub fn pilot_count(payload_len: usize, pilot_period: usize) -> usize {
    payload_len.div_ceil(pilot_period.max(2) - 1)
}

/// Interleaves a pilot at slots `0, P, 2P, ...`; returns the slotted sequence
/// and the pilot slot indices.
pub fn insert_pilots<T: Real>(
    payload: &[Complex<T>],
    pilot_period: usize,
    pilot: Complex<T>,
) -> Result<(Vec<Complex<T>>, Vec<usize>)> {
    if pilot_period < 2 {
        return Err(Error::InvalidFrame(format!("pilot period {pilot_period} below 2")));
    }
    let total = payload.len() + pilot_count(payload.len(), pilot_period);
    let mut out = Vec::with_capacity(total);
    let mut positions = Vec::with_capacity(total / pilot_period + 1);
    let mut data = payload.iter();
    for i in 0..total {
        if i % pilot_period == 0 {
            positions.push(i);
            out.push(pilot);
        } else {
            out.push(*data.next().expect("slot count matches payload"));
        }
    }
    Ok((out, positions))
}

/// Removes the pilot slots again, returning only data symbols.
pub fn strip_pilots<T: Copy>(slots: &[T], pilot_period: usize) -> Vec<T> {
    slots
        .iter()
        .enumerate()
        .filter(|(i, _)| i % pilot_period != 0)
        .map(|(_, s)| *s)
        .collect()
}

/// Closed-form root-raised-cosine taps at `sps` samples per symbol, spanning
/// `span` symbols (`span*sps + 1` taps), normalized to unit energy.
pub fn rrc_taps<T: Real>(rolloff: f64, span: usize, sps: usize) -> Vec<T> {
    let b = rolloff;
    let pi = std::f64::consts::PI;
    let half = (span * sps / 2) as isize;
    let raw: Vec<f64> = (-half..=half)
        .map(|i| {
            let t = i as f64 / sps as f64;
            if i == 0 {
                1.0 - b + 4.0 * b / pi
            } else if ((4.0 * b * t).abs() - 1.0).abs() < 1e-12 {
                b / 2f64.sqrt() * ((1.0 + 2.0 / pi) * (pi / (4.0 * b)).sin() + (1.0 - 2.0 / pi) * (pi / (4.0 * b)).cos())
            } else {
                ((pi * t * (1.0 - b)).sin() + 4.0 * b * t * (pi * t * (1.0 + b)).cos())
                    / (pi * t * (1.0 - (4.0 * b * t).powi(2)))
            }
        })
        .collect();
    let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
    raw.iter().map(|v| T::lit(v / norm)).collect()
}

/// Centered ("same") linear convolution of `x` with an odd-length real FIR,
/// evaluated through one zero-padded transform.
pub fn fir_same<T: Real>(x: &[Complex<T>], taps: &[T]) -> Vec<Complex<T>> {
    if x.is_empty() {
        return Vec::new();
    }
    let center = taps.len() / 2;
    let m = (x.len() + taps.len() - 1).next_power_of_two();
    let fft = FftPair::new(m);
    let mut a = vec![Complex::zero(); m];
    a[..x.len()].copy_from_slice(x);
    let mut h = vec![Complex::zero(); m];
    for (d, &t) in h.iter_mut().zip(taps) {
        *d = Complex::new(t, T::zero());
    }
    fft.forward(&mut a);
    fft.forward(&mut h);
    for (u, v) in a.iter_mut().zip(&h) {
        *u = *u * v;
    }
    fft.inverse(&mut a);
    a[center..center + x.len()].to_vec()
}

/// Upsamples to 2 sps by zero insertion and applies the RRC filter. Symbol `n`
/// lands on sample `2n`; the output has twice the input length.
pub fn rrc_shape<T: Real>(symbols: &DualPolSignal<T>, rolloff: f64, span: usize) -> Result<DualPolSignal<T>> {
    if symbols.sps() != 1 {
        return Err(Error::InvalidSignal("rrc_shape expects a symbol-rate input".into()));
    }
    if span < 16 || !span.is_multiple_of(2) {
        return Err(Error::InvalidSignal(format!("RRC span {span} must be even and at least 16")));
    }
    let taps = rrc_taps::<T>(rolloff, span, 2);
    let shape = |v: &[Complex<T>]| {
        let mut up = vec![Complex::zero(); 2 * v.len()];
        for (i, s) in v.iter().enumerate() {
            up[2 * i] = *s;
        }
        fir_same(&up, &taps)
    };
    DualPolSignal::new(shape(&symbols.x), shape(&symbols.y), 2)
}

/// Matched RRC filter on a 2-sps stream.
pub fn matched_filter<T: Real>(rx: &DualPolSignal<T>, rolloff: f64, span: usize) -> Result<DualPolSignal<T>> {
    if rx.sps() != 2 {
        return Err(Error::InvalidSignal("matched filter expects 2 sps".into()));
    }
    let taps = rrc_taps::<T>(rolloff, span, 2);
    DualPolSignal::new(fir_same(&rx.x, &taps), fir_same(&rx.y, &taps), 2)
}

fn random_bits<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<u8> {
    (0..n).map(|_| rng.random::<bool>() as u8).collect()
}

fn assemble_with<T: Real, R: Rng + ?Sized>(
    spec: &FrameSpec,
    preamble: DualPolSignal<T>,
    rng: &mut R,
) -> Result<BurstFrame<T>> {
    let pilot = pilot_symbol::<T>();
    let payload_start = preamble.len();
    let mut pols = [preamble.x, preamble.y];
    let mut bits: [Vec<u8>; 2] = [Vec::new(), Vec::new()];
    let mut pilot_positions = Vec::new();
    for (p, pol) in pols.iter_mut().enumerate() {
        let b = random_bits(rng, 4 * spec.payload_symbols);
        let (slots, pos) = insert_pilots(&map_16qam::<T>(&b)?, spec.pilot_period, pilot)?;
        pol.extend_from_slice(&slots);
        bits[p] = b;
        if p == 0 {
            pilot_positions = pos.into_iter().map(|i| i + payload_start).collect();
        }
    }
    let [x, y] = pols;
    Ok(BurstFrame {
        tx_symbols: DualPolSignal::new(x, y, 1)?,
        pilot_positions,
        payload_bits: bits,
        payload_start,
    })
}

/// Builds the burst: CAZAC preamble followed by pilot-bearing random 16QAM
/// payload on each polarization. Bits are drawn X first, then Y.
pub fn assemble_frame<T: Real, R: Rng + ?Sized>(spec: &FrameSpec, rng: &mut R) -> Result<BurstFrame<T>> {
    spec.validate()?;
    assemble_with(spec, build_preamble(&spec.preamble)?, rng)
}

/// Same as [`assemble_frame`] but with caller-provided training blocks.
pub fn assemble_frame_with_blocks<T: Real, R: Rng + ?Sized>(
    spec: &FrameSpec,
    blocks: &TrainingBlocks<T>,
    rng: &mut R,
) -> Result<BurstFrame<T>> {
    spec.validate()?;
    assemble_with(spec, build_preamble_from_blocks(&spec.preamble, blocks)?, rng)
}

/// Training blocks in the CAZAC arrangement built around a random 16QAM
/// base block, for comparison against CAZAC training.
pub fn random_qam_blocks<T: Real, R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<TrainingBlocks<T>> {
    training_blocks_from_base(map_16qam::<T>(&random_bits(rng, 4 * n))?)
}

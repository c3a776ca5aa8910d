//! Frame synchronization from the conjugate-symmetric training units, and
//! data-aided frequency-offset estimation.

use num_complex::Complex;
use num_traits::Zero;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::apply_fo;
use crate::error::{Error, Result};
use crate::fft::{bin_frequency, FftPair};
use crate::scalar::{wrap_phase, Real};
use crate::seqcore::PreambleSpec;
use crate::signal::DualPolSignal;

/// Stream a timing metric was computed on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricId {
    X,
    Y,
    Sum,
    Diff,
}

impl MetricId {
    pub const ALL: [MetricId; 4] = [MetricId::X, MetricId::Y, MetricId::Sum, MetricId::Diff];

    pub fn name(self) -> &'static str {
        match self {
            MetricId::X => "x",
            MetricId::Y => "y",
            MetricId::Sum => "x+y",
            MetricId::Diff => "x-y",
        }
    }
}

/// Frame synchronizer settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyncConfig {
    /// Minimum PMNR in dB for a burst to count as detected.
    pub threshold_db: f64,
    /// Samples excluded on each side of the peak when measuring PMNR;
    /// `None` uses `N + 2 N_GI`.
    pub exclusion_halfwidth: Option<usize>,
    /// Only candidates below this sample index are searched; `None` searches
    /// every candidate.
    pub search_len: Option<usize>,
    /// When set, a stream only wins if another stream peaks within this many
    /// samples of it; a lone peak on one stream is usually a sidelobe. Falls
    /// back to the best PMNR of all four when no two streams agree.
    pub agreement: Option<usize>,
}

impl Default for SyncConfig {
    fn default() -> Self {
        Self {
            threshold_db: 3.0,
            exclusion_halfwidth: None,
            search_len: None,
            agreement: Some(4),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyncResult<T> {
    /// Sample index of the first preamble sample (start of unit 1).
    pub offset: usize,
    pub metric_id: MetricId,
    pub pmnr_db: f64,
    /// The four (unit-product) metrics, indexed like [`MetricId::ALL`].
    pub metrics: [Vec<T>; 4],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FoeResult {
    pub fo_x_hz: f64,
    pub fo_y_hz: f64,
    pub fo_hz: f64,
}

/// Phase-increment rule used to turn `R(m)` into a frequency.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FoeMethod {
    /// Increments of `arg R` over two lags; immune to the odd-lag sign flip
    /// that polarization rotation causes.
    #[default]
    TwoLag,
    /// Increments over a single lag; only valid without polarization mixing.
    OneLag,
}

fn stream<T: Real>(rx: &DualPolSignal<T>, id: MetricId) -> Vec<Complex<T>> {
    match id {
        MetricId::X => rx.x.clone(),
        MetricId::Y => rx.y.clone(),
        MetricId::Sum => rx.x.iter().zip(&rx.y).map(|(a, b)| a + b).collect(),
        MetricId::Diff => rx.x.iter().zip(&rx.y).map(|(a, b)| a - b).collect(),
    }
}

/// Symmetric-pair metric of one stream over a window of `2 * nc` symbols at
/// `sps` samples per symbol, for every candidate start `0..count`.
fn symmetric_metric<T: Real>(r: &[Complex<T>], nc: usize, sps: usize, count: usize) -> Vec<T> {
    let half = sps * nc;
    let span = sps * (2 * nc - 1);
    let mut energy = Vec::with_capacity(r.len() + 1);
    energy.push(0.0f64);
    for v in r {
        let last = *energy.last().expect("non-empty");
        energy.push(last + v.norm_sqr().to_f64_lossy());
    }
    let power: Vec<f64> = (0..count)
        .map(|n| {
            let e1 = energy[n + half] - energy[n];
            let e2 = energy[n + span + 1] - energy[n + span + 1 - half];
            (e1 * e2).max(0.0).sqrt()
        })
        .collect();
    // Windows this far below the strongest one hold only filter tails (or
    // rounding residue of the running sum) and would normalize to noise.
    let floor = power.iter().fold(0.0f64, |m, &p| m.max(p)) * 1e-6;
    (0..count)
        .map(|n| {
            let p = power[n];
            if p <= floor || p <= 1e-300 {
                return T::zero();
            }
            let acc = (0..half).fold(Complex::<T>::zero(), |acc, s| acc + r[n + s] * r[n + span - s]);
            T::lit((acc.norm().to_f64_lossy() / p).min(1.0))
        })
        .collect()
}

/// Single-unit timing metrics on the X, Y, X+Y and X-Y streams. Entry `n` is
/// the normalized magnitude of the sum of products of sample pairs placed
/// symmetrically in a one-unit window starting at `n`.
pub fn timing_metric<T: Real>(rx: &DualPolSignal<T>, spec: &PreambleSpec) -> Result<[Vec<T>; 4]> {
    spec.validate()?;
    let sps = rx.sps();
    let window = sps * (2 * spec.n_cazac() - 1) + 1;
    if rx.len() < window {
        return Err(Error::TooShort {
            needed: window,
            actual: rx.len(),
        });
    }
    let count = rx.len() - window + 1;
    let out: Vec<Vec<T>> = MetricId::ALL
        .par_iter()
        .map(|&id| symmetric_metric(&stream(rx, id), spec.n_cazac(), sps, count))
        .collect();
    let mut it = out.into_iter();
    Ok(std::array::from_fn(|_| it.next().expect("four metrics")))
}

/// Product of `units` single-unit metrics spaced one unit apart.
pub fn unit_product<T: Real>(metric: &[T], unit_samples: usize, units: usize) -> Vec<T> {
    let reach = unit_samples * (units - 1);
    if metric.len() <= reach {
        return Vec::new();
    }
    (0..metric.len() - reach)
        .map(|n| (0..units).fold(T::one(), |acc, l| acc * metric[n + l * unit_samples]))
        .collect()
}

/// Peak-to-maximum-noise ratio in dB: peak over the largest value farther
/// than `halfwidth` from `peak`. `+inf` when nothing off-peak is nonzero.
pub fn pmnr<T: Real>(metric: &[T], peak: usize, halfwidth: usize) -> f64 {
    let p = metric[peak].to_f64_lossy();
    let lo = peak.saturating_sub(halfwidth);
    let hi = peak + halfwidth;
    let noise = metric
        .iter()
        .enumerate()
        .filter(|(i, _)| *i < lo || *i > hi)
        .fold(0.0f64, |m, (_, v)| m.max(v.to_f64_lossy()));
    if noise <= 0.0 {
        return f64::INFINITY;
    }
    10.0 * (p / noise).log10()
}

fn argmax<T: Real>(v: &[T]) -> usize {
    // Strict comparison keeps the earliest index on ties.
    v.iter()
        .enumerate()
        .fold((0, T::neg_infinity()), |(bi, bv), (i, &x)| if x > bv { (i, x) } else { (bi, bv) })
        .0
}

/// Locates the preamble: forms the `L`-unit product of each of the four
/// metrics, picks the metric with the highest PMNR and returns its peak.
pub fn frame_sync<T: Real>(rx: &DualPolSignal<T>, spec: &PreambleSpec, cfg: &SyncConfig) -> Result<SyncResult<T>> {
    let single = timing_metric(rx, spec)?;
    let unit = rx.sps() * spec.unit_len();
    let halfwidth = cfg.exclusion_halfwidth.unwrap_or(spec.n_cazac());
    let metrics: [Vec<T>; 4] = single.map(|m| {
        let mut p = unit_product(&m, unit, spec.units);
        if let Some(limit) = cfg.search_len {
            p.truncate(limit.max(1));
        }
        p
    });
    if metrics[0].is_empty() {
        return Err(Error::TooShort {
            needed: spec.units * unit,
            actual: rx.len(),
        });
    }
    let peaks: Vec<(usize, usize, f64)> = metrics
        .iter()
        .enumerate()
        .map(|(i, m)| {
            let peak = argmax(m);
            (i, peak, pmnr(m, peak, halfwidth))
        })
        .collect();
    let confirmed = |&&(i, peak, _): &&(usize, usize, f64)| match cfg.agreement {
        Some(tol) => peaks.iter().any(|&(j, other, _)| j != i && peak.abs_diff(other) <= tol),
        None => true,
    };
    let by_pmnr = |a: &&(usize, usize, f64), b: &&(usize, usize, f64)| a.2.total_cmp(&b.2);
    let &(id, offset, pmnr_db) = peaks
        .iter()
        .filter(confirmed)
        .max_by(by_pmnr)
        .or_else(|| peaks.iter().max_by(by_pmnr))
        .expect("four metrics evaluated");
    if !(pmnr_db >= cfg.threshold_db) {
        return Err(Error::SyncFailed {
            pmnr_db,
            threshold_db: cfg.threshold_db,
        });
    }
    Ok(SyncResult {
        offset,
        metric_id: MetricId::ALL[id],
        pmnr_db,
        metrics,
    })
}

/// Lag correlations `R(m) = 1/(N_TS - m) sum_k z(k) z*(k - m)`, `m = 1..=N_TS/2`,
/// with `z = r conj(c)`. Entry `m - 1` holds `R(m)`.
pub fn lag_correlations<T: Real>(r: &[Complex<T>], known: &[Complex<T>]) -> Vec<Complex<T>> {
    let n = r.len();
    let z: Vec<_> = r.iter().zip(known).map(|(a, c)| a * c.conj()).collect();
    (1..=n / 2)
        .map(|m| {
            let acc = (m..n).fold(Complex::zero(), |acc, k| acc + z[k] * z[k - m].conj());
            acc / T::of(n - m)
        })
        .collect()
}

/// Frequency from `R(m)` (entry `i` is lag `i + 1`) by averaging wrapped
/// phase increments. The two-lag rule only pairs even lags: under a
/// polarization rotation the odd lags carry the factor `cos^2 - sin^2` of the
/// rotation angle and lose their phase near 45 degrees.
pub fn fo_from_correlations<T: Real>(rm: &[Complex<T>], symbol_rate: f64, method: FoeMethod) -> f64 {
    let (step, first, stride) = match method {
        FoeMethod::TwoLag => (2, 1, 2),
        FoeMethod::OneLag => (1, 0, 1),
    };
    let incs: Vec<f64> = (first..rm.len().saturating_sub(step))
        .step_by(stride)
        .map(|i| wrap_phase(rm[i + step].arg().to_f64_lossy() - rm[i].arg().to_f64_lossy()))
        .collect();
    if incs.is_empty() {
        return 0.0;
    }
    incs.iter().sum::<f64>() / incs.len() as f64 * symbol_rate / (std::f64::consts::TAU * step as f64)
}

/// Data-aided FO estimate over the whole symbol-rate preamble `rx` (already
/// aligned to the first preamble symbol), averaged over both polarizations.
pub fn foe_estimate<T: Real>(
    rx: &DualPolSignal<T>,
    spec: &PreambleSpec,
    known: &DualPolSignal<T>,
    symbol_rate: f64,
    method: FoeMethod,
) -> Result<FoeResult> {
    if rx.sps() != 1 || known.sps() != 1 {
        return Err(Error::InvalidSignal("FOE expects symbol-rate input".into()));
    }
    let n = spec.total_len();
    for len in [rx.len(), known.len()] {
        if len != n {
            return Err(Error::LengthMismatch { expected: n, actual: len });
        }
    }
    let fo = |p: usize| fo_from_correlations(&lag_correlations(rx.pol(p), known.pol(p)), symbol_rate, method);
    let (fo_x_hz, fo_y_hz) = (fo(0), fo(1));
    Ok(FoeResult {
        fo_x_hz,
        fo_y_hz,
        fo_hz: 0.5 * (fo_x_hz + fo_y_hz),
    })
}

/// Chooses the 2-sps sample phase of the symbol-rate preamble among
/// `offset - 2 ..= offset + 2` and estimates the FO. Sampling half a symbol
/// off turns the chirp into a spurious tone that biases the FOE, and
/// differential group delay can put the two polarizations' best phases a
/// sample apart. So each received polarization keeps the FO estimate of the
/// candidate whose own FO brings the most preamble energy back into
/// coherence against `known`, block by block. The returned offset is the
/// candidate with the highest combined score.
pub fn refine_timing<T: Real>(
    mf: &DualPolSignal<T>,
    offset: usize,
    spec: &PreambleSpec,
    known: &DualPolSignal<T>,
    symbol_rate: f64,
    method: FoeMethod,
) -> Result<(usize, FoeResult)> {
    let n = known.len();
    let seg = spec.n;
    let mut best_pol = [(f64::NEG_INFINITY, 0.0); 2];
    let mut best_offset: Option<(usize, f64)> = None;
    for o in [Some(offset), offset.checked_sub(1), Some(offset + 1), offset.checked_sub(2), Some(offset + 2)].into_iter().flatten() {
        let Ok(d) = mf.decimate(o, 2, n) else { continue };
        let foe = foe_estimate(&d, spec, known, symbol_rate, method)?;
        let mut total = 0.0;
        for (p, fo) in [foe.fo_x_hz, foe.fo_y_hz].into_iter().enumerate() {
            let rot = apply_fo(&d, -fo, symbol_rate);
            let mut score = 0.0;
            for s0 in (0..n).step_by(seg) {
                let s1 = (s0 + seg).min(n);
                for q in 0..2 {
                    let c = (s0..s1).fold(Complex::zero(), |acc: Complex<T>, k| acc + rot.pol(p)[k] * known.pol(q)[k].conj());
                    score += c.norm_sqr().to_f64_lossy();
                }
            }
            if score > best_pol[p].0 {
                best_pol[p] = (score, fo);
            }
            total += score;
        }
        if best_offset.is_none_or(|b| total > b.1) {
            best_offset = Some((o, total));
        }
    }
    let (o, _) = best_offset.ok_or(Error::TooShort {
        needed: 2 * n,
        actual: mf.len(),
    })?;
    let (fo_x_hz, fo_y_hz) = (best_pol[0].1, best_pol[1].1);
    Ok((
        o,
        FoeResult {
            fo_x_hz,
            fo_y_hz,
            fo_hz: 0.5 * (fo_x_hz + fo_y_hz),
        },
    ))
}

/// Blind estimate from the spectral peak of the fourth-power signal, with
/// power summed over both polarizations.
pub fn foe_4th_power<T: Real>(symbols: &DualPolSignal<T>, symbol_rate: f64) -> f64 {
    let m = symbols.len().next_power_of_two().max(1);
    let fft = FftPair::<T>::new(m);
    let mut power = vec![0.0f64; m];
    for p in 0..2 {
        let mut buf = vec![Complex::zero(); m];
        for (d, s) in buf.iter_mut().zip(symbols.pol(p)) {
            let s2 = s * s;
            *d = s2 * s2;
        }
        fft.forward(&mut buf);
        for (acc, v) in power.iter_mut().zip(&buf) {
            *acc += v.norm_sqr().to_f64_lossy();
        }
    }
    let peak = power
        .iter()
        .enumerate()
        .fold((0, -1.0), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) })
        .0;
    bin_frequency(peak, m, symbol_rate * symbols.sps() as f64) / 4.0
}

/// Removes a frequency offset: multiplies by `exp(-j 2 pi fo t)` with `t`
/// counted from the first sample at `sps * symbol_rate`.
pub fn compensate_fo<T: Real>(waveform: &DualPolSignal<T>, fo_hz: f64, symbol_rate: f64) -> DualPolSignal<T> {
    apply_fo(waveform, -fo_hz, symbol_rate * waveform.sps() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seqcore::build_preamble;

    #[test]
    fn pmnr_arithmetic() {
        assert!((pmnr(&[0.1, 1.0, 0.1], 1, 0) - 10.0).abs() < 1e-12);
        assert_eq!(pmnr(&[0.5f64; 6], 2, 0), 0.0);
        assert_eq!(pmnr(&[0.0, 1.0, 0.0], 1, 0), f64::INFINITY);
        assert_eq!(pmnr(&[0.3, 1.0, 0.3], 1, 5), f64::INFINITY);
    }

    #[test]
    fn argmax_prefers_earliest() {
        assert_eq!(argmax(&[0.2, 0.9, 0.9, 0.1]), 1);
    }

    #[test]
    fn wrapped_increments_straddling_pi() {
        // R(m) = exp(j m w) with w close to pi/2: two-lag increments sit near pi.
        let w = 0.499 * std::f64::consts::PI;
        let rm: Vec<Complex<f64>> = (1..=40).map(|m| Complex::from_polar(1.0, m as f64 * w)).collect();
        let f = fo_from_correlations(&rm, 1.0, FoeMethod::TwoLag);
        assert!((f - w / std::f64::consts::TAU).abs() < 1e-12, "{f}");
        let w = -0.499 * std::f64::consts::PI;
        let rm: Vec<Complex<f64>> = (1..=40).map(|m| Complex::from_polar(1.0, m as f64 * w)).collect();
        let f = fo_from_correlations(&rm, 1.0, FoeMethod::TwoLag);
        assert!((f - w / std::f64::consts::TAU).abs() < 1e-12, "{f}");
    }

    #[test]
    fn metric_peaks_at_preamble_start_symbol_rate() {
        let spec = PreambleSpec::new(16, 1, 1).unwrap();
        let pre = build_preamble::<f64>(&spec).unwrap();
        let mut x = vec![Complex::zero(); 20];
        let mut y = x.clone();
        x.extend_from_slice(&pre.x);
        y.extend_from_slice(&pre.y);
        x.extend(vec![Complex::zero(); 20]);
        y.extend(vec![Complex::zero(); 20]);
        let rx = DualPolSignal::new(x, y, 1).unwrap();
        let m = timing_metric(&rx, &spec).unwrap();
        assert_eq!(argmax(&m[0]), 20);
        assert!((m[0][20] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn compensate_round_trip() {
        let x: Vec<Complex<f64>> = (0..100).map(|i| Complex::new((i as f64).sin(), 0.3)).collect();
        let s = DualPolSignal::new(x.clone(), x, 2).unwrap();
        let back = compensate_fo(&apply_fo(&s, 1e9, 30e9), 1e9, 15e9);
        assert!(back.max_abs_diff(&s) < 1e-12);
    }
}

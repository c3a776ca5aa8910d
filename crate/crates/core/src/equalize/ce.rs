//! Frequency-domain channel estimation from the training blocks and
//! zero-forcing equalizer initialization.

use num_complex::Complex;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::channel::{frequency_grid, rrc_response, JonesSpectrum};
use crate::error::{Error, Result};
use crate::fft::FftPair;
use crate::scalar::Real;
use crate::seqcore::{PreambleSpec, TrainingBlocks};
use crate::signal::{DualPolSignal, Jones};

use super::fdlms::{EqualizerState, Mode};

/// Channel-estimation settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CeConfig {
    /// Diagonal loading is applied where `|det C| < det_floor * sqrt(N)`.
    pub det_floor: f64,
    /// Bins with `|H_Rx|^2` below this fraction of the peak are zeroed.
    pub stopband_floor: f64,
    /// Passes that subtract the interference leaking into each block window
    /// from neighbouring symbols, using the previous estimate.
    pub refine_passes: usize,
    /// Noise shrinkage of the taps used by the refinement: a tap of power `p`
    /// is scaled by `max(0, 1 - gate * p_noise / p)`, where `p_noise` is the
    /// predicted per-tap estimation noise. Needs a noise spectrum.
    pub refine_tap_gate: f64,
    /// Apply the same tap shrinkage to the final per-unit estimates.
    pub denoise: bool,
    /// Re-estimate once with the first decided payload symbols appended to
    /// the known preamble, so the interference they leak into the last
    /// training block is cancelled as well.
    pub payload_feedback: bool,
}

impl Default for CeConfig {
    fn default() -> Self {
        Self {
            det_floor: 1e-6,
            stopband_floor: 1e-3,
            refine_passes: 16,
            refine_tap_gate: 4.0,
            denoise: false,
            payload_feedback: true,
        }
    }
}

/// Per-unit channel estimates on the `2N`-bin grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelEstimate<T> {
    /// Mean of the per-unit estimates.
    pub h: JonesSpectrum<T>,
    /// Estimate from each training unit.
    pub units: Vec<Vec<Jones<T>>>,
    pub n_units_averaged: usize,
    /// Bins where the reference inversion needed diagonal loading.
    pub condition_flags: Vec<bool>,
}

fn zero_stuffed_spectrum<T: Real>(block: &[Complex<T>], fft: &FftPair<T>) -> Vec<Complex<T>> {
    let mut buf = vec![Complex::zero(); 2 * block.len()];
    for (i, s) in block.iter().enumerate() {
        buf[2 * i] = *s;
    }
    fft.forward(&mut buf);
    buf
}

/// Reference matrix `[[C_X1, C_X2], [C_Y1, C_Y2]]` per bin, from the 2x
/// zero-stuffed training blocks (`2N` bins).
pub fn reference_spectra<T: Real>(blocks: &TrainingBlocks<T>) -> Vec<Jones<T>> {
    let n = blocks.block_len();
    let fft = FftPair::new(2 * n);
    let [x1, x2, y1, y2] = [&blocks.x1, &blocks.x2, &blocks.y1, &blocks.y2].map(|b| zero_stuffed_spectrum(b, &fft));
    (0..2 * n).map(|k| Jones::new(x1[k], x2[k], y1[k], y2[k])).collect()
}

/// Inverse of `c`, falling back to diagonal loading `(C^H C + eps I)^-1 C^H`
/// when `|det c| < floor`. Returns the inverse and whether loading was used.
fn loaded_inverse<T: Real>(c: &Jones<T>, floor: T, bin: usize) -> Result<(Jones<T>, bool)> {
    if c.det().norm() >= floor {
        if let Some(inv) = c.inverse() {
            return Ok((inv, false));
        }
    }
    let eps = Complex::new(floor, T::zero());
    let gram = c.adjoint() * *c + Jones::diag(eps, eps);
    let inv = gram.inverse().ok_or(Error::SingularReference { bin })?;
    Ok((inv * c.adjoint(), true))
}

/// Sample window of `2N` samples for the core of training block `block` of
/// unit `unit`.
fn block_window<T: Real>(rx: &DualPolSignal<T>, frame_start: usize, spec: &PreambleSpec, unit: usize, block: usize) -> [Vec<Complex<T>>; 2] {
    let start = frame_start + 2 * spec.block_start(unit, block);
    rx.window(start as isize, 2 * spec.n)
}

/// Estimates the 2x2 response from each training unit. `rx` is the matched
/// filtered, frequency-corrected 2-sps stream and `frame_start` the sample of
/// the first preamble symbol. `known` is the transmitted preamble, optionally
/// followed by known payload symbols. `noise_psd`, when given, is the noise
/// power per sample in each of the `2N` bins (its mean is the per-sample
/// variance); it sets how hard the refinement shrinks weak taps.
#[allow(clippy::too_many_arguments)]
pub fn estimate_channel<T: Real>(
    rx: &DualPolSignal<T>,
    frame_start: usize,
    spec: &PreambleSpec,
    blocks: &TrainingBlocks<T>,
    known: &DualPolSignal<T>,
    noise_psd: Option<&[T]>,
    cfg: &CeConfig,
    symbol_rate: f64,
) -> Result<ChannelEstimate<T>> {
    spec.validate()?;
    if rx.sps() != 2 {
        return Err(Error::InvalidSignal("channel estimation expects 2 sps".into()));
    }
    if known.len() < spec.total_len() {
        return Err(Error::LengthMismatch {
            expected: spec.total_len(),
            actual: known.len(),
        });
    }
    let n = spec.n;
    let m = 2 * n;
    let fft = FftPair::new(m);
    let wide = FftPair::new(4 * m);
    let c = reference_spectra(blocks);
    let floor = T::lit(cfg.det_floor * (n as f64).sqrt());
    let mut flags = vec![false; m];
    let mut c_inv = Vec::with_capacity(m);
    for (k, ck) in c.iter().enumerate() {
        let (inv, loaded) = loaded_inverse(ck, floor, k)?;
        flags[k] = loaded;
        c_inv.push(inv);
    }

    // Expected total power of one 2x2 tap from noise alone.
    let tap_noise = match noise_psd {
        Some(psd) => {
            if psd.len() != m {
                return Err(Error::LengthMismatch {
                    expected: m,
                    actual: psd.len(),
                });
            }
            let acc = psd.iter().zip(&c_inv).fold(T::zero(), |a, (s, ci)| {
                a + *s * ci.0.iter().flatten().fold(T::zero(), |b, v| b + v.norm_sqr())
            });
            acc * T::lit(2.0) / T::of(m)
        }
        None => T::zero(),
    };
    let shrink_floor = tap_noise * T::lit(cfg.refine_tap_gate);

    let solve = |wins: &[[Vec<Complex<T>>; 2]; 2]| -> Vec<Jones<T>> {
        // R(k) = [[R_X1, R_X2], [R_Y1, R_Y2]]: column = block, row = polarization.
        let spectra: Vec<Vec<Vec<Complex<T>>>> = wins
            .iter()
            .map(|w| {
                w.iter()
                    .map(|p| {
                        let mut b = p.clone();
                        fft.forward(&mut b);
                        b
                    })
                    .collect()
            })
            .collect();
        (0..m)
            .map(|k| Jones::new(spectra[0][0][k], spectra[1][0][k], spectra[0][1][k], spectra[1][1][k]) * c_inv[k])
            .collect()
    };

    let mut units = Vec::with_capacity(spec.units);
    for u in 0..spec.units {
        let raw = [block_window(rx, frame_start, spec, u, 0), block_window(rx, frame_start, spec, u, 1)];
        let mut h = solve(&raw);
        for _ in 0..cfg.refine_passes {
            let taps = shrink_taps(impulse_response(&h, &fft), shrink_floor);
            let g = tap_spectra(&taps, &wide);
            let cleaned = [0, 1].map(|b| {
                let corr = window_interference(&g, &wide, spec, blocks, known, u, b);
                let mut w = raw[b].clone();
                for (pol, c) in w.iter_mut().zip(&corr) {
                    for (v, e) in pol.iter_mut().zip(c) {
                        *v = *v - *e;
                    }
                }
                w
            });
            h = solve(&cleaned);
        }
        if cfg.denoise && shrink_floor > T::zero() {
            h = frequency_response(&shrink_taps(impulse_response(&h, &fft), shrink_floor), &fft);
        }
        units.push(h);
    }

    let inv_l = T::one() / T::of(units.len());
    let mean = (0..m)
        .map(|k| {
            units
                .iter()
                .fold(Jones::zero(), |acc, h| acc + h[k])
                .scale(Complex::new(inv_l, T::zero()))
        })
        .collect();
    Ok(ChannelEstimate {
        h: JonesSpectrum {
            grid: frequency_grid(m, 2.0 * symbol_rate),
            h: mean,
        },
        n_units_averaged: units.len(),
        units,
        condition_flags: flags,
    })
}

/// Time-domain taps of a per-bin response; index `t` is lag `t` for
/// `t < N` and `t - 2N` otherwise.
fn impulse_response<T: Real>(h: &[Jones<T>], fft: &FftPair<T>) -> Vec<Jones<T>> {
    let m = h.len();
    let mut taps = vec![Jones::zero(); m];
    for r in 0..2 {
        for c in 0..2 {
            let mut buf: Vec<_> = h.iter().map(|j| j.at(r, c)).collect();
            fft.inverse(&mut buf);
            for (t, v) in buf.into_iter().enumerate() {
                taps[t].0[r][c] = v;
            }
        }
    }
    taps
}

fn frequency_response<T: Real>(taps: &[Jones<T>], fft: &FftPair<T>) -> Vec<Jones<T>> {
    let m = taps.len();
    let mut h = vec![Jones::zero(); m];
    for r in 0..2 {
        for c in 0..2 {
            let mut buf: Vec<_> = taps.iter().map(|j| j.at(r, c)).collect();
            fft.forward(&mut buf);
            for (k, v) in buf.into_iter().enumerate() {
                h[k].0[r][c] = v;
            }
        }
    }
    h
}

/// Scales each tap of power `p` by `max(0, 1 - floor / p)`.
fn shrink_taps<T: Real>(mut taps: Vec<Jones<T>>, floor: T) -> Vec<Jones<T>> {
    if floor <= T::zero() {
        return taps;
    }
    for t in taps.iter_mut() {
        let p = t.0.iter().flatten().fold(T::zero(), |a, v| a + v.norm_sqr());
        let w = if p > floor { T::one() - floor / p } else { T::zero() };
        *t = t.scale(Complex::new(w, T::zero()));
    }
    taps
}

/// Per-sample noise variance from the idle samples `[0, end)` before a burst.
pub fn idle_noise_variance<T: Real>(rx: &DualPolSignal<T>, end: usize) -> Option<f64> {
    let end = end.min(rx.len());
    if end == 0 {
        return None;
    }
    let e: f64 = (0..2).map(|p| rx.pol(p)[..end].iter().map(|v| v.norm_sqr().to_f64_lossy()).sum::<f64>()).sum();
    Some(e / (2 * end) as f64)
}

/// Spectra of the four tap sequences on the `8N`-point linear convolution
/// grid, lag `l` at index `l mod 8N`.
fn tap_spectra<T: Real>(taps: &[Jones<T>], wide: &FftPair<T>) -> [[Vec<Complex<T>>; 2]; 2] {
    let m = taps.len();
    let p = wide.len();
    [0, 1].map(|r| {
        [0, 1].map(|c| {
            let mut buf = vec![Complex::zero(); p];
            for (i, t) in taps.iter().enumerate() {
                let lag = if i < m / 2 { i } else { p - (m - i) };
                buf[lag] = t.at(r, c);
            }
            wide.forward(&mut buf);
            buf
        })
    })
}

/// Difference between what a block window actually contains and what the
/// circular model assumes: symbols around the block core that are not the
/// periodic extension of the block, passed through the taps whose spectra
/// are `g` (see [`tap_spectra`]).
fn window_interference<T: Real>(
    g: &[[Vec<Complex<T>>; 2]; 2],
    wide: &FftPair<T>,
    spec: &PreambleSpec,
    blocks: &TrainingBlocks<T>,
    known: &DualPolSignal<T>,
    unit: usize,
    block: usize,
) -> [Vec<Complex<T>>; 2] {
    let n = spec.n as isize;
    let p = wide.len();
    let s = spec.block_start(unit, block) as isize;
    let total = known.len() as isize;
    // Symbol offsets -N..2N around the block start land on even samples
    // 0..6N of the upsampled sequence.
    let mut u = [vec![Complex::zero(); p], vec![Complex::zero(); p]];
    for jj in -n..2 * n {
        if (0..n).contains(&jj) {
            continue;
        }
        let j = s + jj;
        let cyc = jj.rem_euclid(n) as usize;
        for (pol, buf) in u.iter_mut().enumerate() {
            // Before the burst nothing was sent; payload symbols are unknown
            // and zero-mean.
            let actual = if (0..total).contains(&j) { known.pol(pol)[j as usize] } else { Complex::zero() };
            buf[(2 * (jj + n)) as usize] = actual - blocks.block(pol, block)[cyc];
        }
    }
    for buf in u.iter_mut() {
        wide.forward(buf);
    }
    let m = 2 * spec.n;
    [0, 1].map(|r| {
        let mut y: Vec<Complex<T>> = (0..p).map(|k| g[r][0][k] * u[0][k] + g[r][1][k] * u[1][k]).collect();
        wide.inverse(&mut y);
        // Window sample t sits at 2N + t on the upsampled axis.
        y[m..2 * m].to_vec()
    })
}

/// `|H_Rx|^2` of the receive RRC on the equalizer's `2N`-bin grid.
pub fn rx_power_response<T: Real>(n: usize, rolloff: f64, span: usize, symbol_rate: f64) -> Vec<T> {
    let grid = frequency_grid(2 * n, 2.0 * symbol_rate);
    rrc_response::<T>(&grid, rolloff, span, symbol_rate).into_iter().map(|g| g * g).collect()
}

/// Zero-forcing coefficients `W = (H / |H_Rx|^2)^-1`, computed per unit and
/// averaged. Bins where `|H_Rx|^2` falls below the stopband floor are zeroed.
pub fn zf_init<T: Real>(ce: &ChannelEstimate<T>, h_rx_mag2: &[T], cfg: &CeConfig, step_size: T) -> Result<EqualizerState<T>> {
    let m = ce.h.len();
    if h_rx_mag2.len() != m {
        return Err(Error::LengthMismatch {
            expected: m,
            actual: h_rx_mag2.len(),
        });
    }
    let peak = h_rx_mag2.iter().fold(T::zero(), |a, &b| a.max(b));
    let thr = peak * T::lit(cfg.stopband_floor);
    let inv_l = Complex::new(T::one() / T::of(ce.units.len()), T::zero());
    let mut flags = vec![false; m];
    let w = (0..m)
        .map(|k| {
            if h_rx_mag2[k] < thr {
                flags[k] = true;
                return Jones::zero();
            }
            let g = Complex::new(h_rx_mag2[k].recip(), T::zero());
            let mut acc = Jones::zero();
            for h in &ce.units {
                match h[k].scale(g).inverse() {
                    Some(w) => acc = acc + w,
                    None => flags[k] = true,
                }
            }
            acc.scale(inv_l)
        })
        .collect();
    Ok(EqualizerState {
        w,
        step_size,
        mode: Mode::Training,
        block_len: m / 2,
        constrained: false,
        flags,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seqcore::build_training_blocks;

    #[test]
    fn reference_magnitudes_and_shift() {
        let b = build_training_blocks::<f64>(64).unwrap();
        let c = reference_spectra(&b);
        for (k, j) in c.iter().enumerate() {
            assert!((j.at(0, 0).norm() - 8.0).abs() < 1e-9);
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            assert!((j.at(1, 0) - j.at(0, 0) * sign).norm() < 1e-9);
            assert!(j.det().norm() > 1.0);
        }
    }

    #[test]
    fn loading_engages_on_singular_reference() {
        let z = Complex::new(0.0, 0.0);
        let o = Complex::new(1.0, 0.0);
        let c = Jones::new(o, o, z, z);
        let (inv, loaded) = loaded_inverse(&c, 1e-3f64, 0).unwrap();
        assert!(loaded);
        assert!(inv.frobenius_sqr().is_finite());
    }

    #[test]
    fn interference_matches_direct_sum() {
        use crate::seqcore::build_preamble_from_blocks;
        use rand::{Rng, SeedableRng};
        let spec = PreambleSpec::new(16, 2, 2).unwrap();
        let blocks = build_training_blocks::<f64>(16).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mut c = || Complex::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
        let pre = build_preamble_from_blocks(&spec, &blocks).unwrap();
        let ext = |p: usize, c: &mut dyn FnMut() -> Complex<f64>| {
            let mut v = pre.pol(p).to_vec();
            v.extend((0..10).map(|_| c()));
            v
        };
        let known = DualPolSignal::new(ext(0, &mut c), ext(1, &mut c), 1).unwrap();
        let taps: Vec<Jones<f64>> = (0..32).map(|_| Jones::new(c(), c(), c(), c())).collect();
        let wide = FftPair::new(128);
        let g = tap_spectra(&taps, &wide);
        let n = 16isize;
        for unit in 0..2 {
            for block in 0..2 {
                let fast = window_interference(&g, &wide, &spec, &blocks, &known, unit, block);
                let s = spec.block_start(unit, block) as isize;
                for t in 0..32isize {
                    let mut want = [Complex::new(0.0, 0.0); 2];
                    for jj in (-n..0).chain(n..2 * n) {
                        let lag = t - 2 * jj;
                        if !(-n..n).contains(&lag) {
                            continue;
                        }
                        let j = s + jj;
                        let cyc = jj.rem_euclid(n) as usize;
                        let d = [0, 1].map(|p| {
                            let a = if (0..known.len() as isize).contains(&j) { known.pol(p)[j as usize] } else { Complex::new(0.0, 0.0) };
                            a - blocks.block(p, block)[cyc]
                        });
                        let v = taps[lag.rem_euclid(32) as usize].apply(d);
                        want[0] += v[0];
                        want[1] += v[1];
                    }
                    for p in 0..2 {
                        assert!((fast[p][t as usize] - want[p]).norm() < 1e-12, "unit {unit} block {block} t {t}");
                    }
                }
            }
        }
    }
}

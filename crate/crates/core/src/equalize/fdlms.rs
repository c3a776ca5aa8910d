//! 2x2 overlap-save frequency-domain LMS equalizer.
//!
//! Each block transforms `2N` input samples and keeps the middle `N`, which at
//! 2 sps yields `N/2` output symbols. Block `b` covers output symbols
//! `b*N/2 .. (b+1)*N/2`.

use num_complex::Complex;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::FftPair;
use crate::scalar::{cis, Real};
use crate::signal::{DualPolSignal, Jones};
use crate::txchain::decide_16qam;

use super::cpr::{cpr_pilot_ml, CprBlock, PhaseAnchor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Training,
    DecisionDirected,
}

/// Per-bin coefficients and adaptation settings.
#[derive(Debug, Clone, PartialEq)]
pub struct EqualizerState<T> {
    /// Coefficient matrix per bin, `2 * block_len` bins.
    pub w: Vec<Jones<T>>,
    pub step_size: T,
    pub mode: Mode,
    /// `N`: input advance per block in samples.
    pub block_len: usize,
    /// Restrict gradient updates to taps within half a block of lag zero.
    pub constrained: bool,
    /// Bins zeroed at initialization.
    pub flags: Vec<bool>,
}

impl<T: Real> EqualizerState<T> {
    /// Pass-through coefficients.
    pub fn identity(block_len: usize, step_size: T) -> Self {
        Self {
            w: vec![Jones::identity(); 2 * block_len],
            step_size,
            mode: Mode::Training,
            block_len,
            constrained: false,
            flags: vec![false; 2 * block_len],
        }
    }

    pub fn symbols_per_block(&self) -> usize {
        self.block_len / 2
    }
}

/// Pilots at every `period`-th output symbol, starting with the first.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PilotGrid<T> {
    pub period: usize,
    pub value: Complex<T>,
}

/// How one call to [`fd_lms_equalize`] adapts and recovers phase.
#[derive(Debug, Clone, Copy)]
pub struct EqualizeOptions<'a, T> {
    /// Known transmitted symbols for the processed span.
    pub reference: Option<&'a DualPolSignal<T>>,
    /// Blocks adapted against `reference` before switching to decisions.
    pub train_blocks: usize,
    pub pilots: Option<PilotGrid<T>>,
    pub cpr: bool,
}

impl<T> Default for EqualizeOptions<'_, T> {
    fn default() -> Self {
        Self {
            reference: None,
            train_blocks: 0,
            pilots: None,
            cpr: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Equalized<T> {
    /// Phase-corrected output symbols, sps = 1.
    pub symbols: DualPolSignal<T>,
    /// Carrier phase removed from each symbol.
    pub phase: Vec<T>,
    /// RMS of the adaptation error in each block.
    pub block_error_rms: Vec<T>,
}

/// Equalizes `n_symbols` symbols whose first one sits at sample `start` of
/// the 2-sps stream `rx`, adapting `state` block by block.
pub fn fd_lms_equalize<T: Real>(
    rx: &DualPolSignal<T>,
    start: usize,
    n_symbols: usize,
    state: &mut EqualizerState<T>,
    opts: &EqualizeOptions<'_, T>,
) -> Result<Equalized<T>> {
    if rx.sps() != 2 {
        return Err(Error::InvalidSignal("equalizer expects 2 sps".into()));
    }
    let n = state.block_len;
    if n < 8 || !n.is_multiple_of(4) || state.w.len() != 2 * n {
        return Err(Error::BlockAlignment {
            len: state.w.len(),
            block: n,
        });
    }
    if let Some(r) = opts.reference {
        if r.len() < n_symbols {
            return Err(Error::LengthMismatch {
                expected: n_symbols,
                actual: r.len(),
            });
        }
    }
    let m = 2 * n;
    let per_block = n / 2;
    let blocks = n_symbols.div_ceil(per_block);
    let fft = FftPair::new(m);
    let mut out = [Vec::with_capacity(n_symbols), Vec::with_capacity(n_symbols)];
    let mut phase = Vec::with_capacity(n_symbols);
    let mut block_rms = Vec::with_capacity(blocks);
    let mut anchor: Option<PhaseAnchor<T>> = None;
    let period = opts.pilots.map_or(usize::MAX, |p| p.period);

    for b in 0..blocks {
        let first = b * per_block;
        let valid = per_block.min(n_symbols - first);
        let training = opts.reference.is_some() && b < opts.train_blocks;
        state.mode = if training { Mode::Training } else { Mode::DecisionDirected };

        let s0 = (start + b * n) as isize - (n / 2) as isize;
        let mut xin = rx.window(s0, m);
        for p in xin.iter_mut() {
            fft.forward(p);
        }
        let mut y = [vec![Complex::zero(); m], vec![Complex::zero(); m]];
        for k in 0..m {
            let v = state.w[k].apply([xin[0][k], xin[1][k]]);
            y[0][k] = v[0];
            y[1][k] = v[1];
        }
        for p in y.iter_mut() {
            fft.inverse(p);
        }
        // Kept symbols plus one lookahead symbol for pilot interpolation.
        let lookahead = valid == per_block && first + per_block < n_symbols;
        let take = valid + lookahead as usize;
        let sym: [Vec<Complex<T>>; 2] = [0, 1].map(|p| (0..take).map(|i| y[p][n / 2 + 2 * i]).collect());

        let pilots: Vec<(usize, Complex<T>)> = match opts.pilots {
            Some(g) => (0..take).filter(|i| (first + i).is_multiple_of(g.period)).map(|i| (i, g.value)).collect(),
            None => Vec::new(),
        };
        let reference = opts
            .reference
            .filter(|_| training)
            .map(|r| [&r.x[first..first + valid], &r.y[first..first + valid]]);

        let (corrected, ph) = if opts.cpr {
            let cpr = cpr_pilot_ml(CprBlock {
                symbols: [&sym[0], &sym[1]],
                n_out: valid,
                pilots: &pilots,
                prev: anchor.map(|(i, v)| (i - first as isize, v)),
                reference,
                period,
            })?;
            anchor = cpr.last_anchor.map(|(i, v)| (i + first as isize, v)).or(anchor);
            (cpr.symbols, cpr.phase)
        } else {
            ([0, 1].map(|p| sym[p][..valid].to_vec()), vec![T::zero(); valid])
        };

        // Error after phase recovery, rotated back onto the equalizer output.
        let mut err = [vec![Complex::zero(); m], vec![Complex::zero(); m]];
        let mut e2 = T::zero();
        for p in 0..2 {
            for i in 0..valid {
                let d = match reference {
                    Some(r) => r[p][i],
                    None => pilots
                        .iter()
                        .find(|(j, _)| *j == i)
                        .map(|(_, v)| *v)
                        .unwrap_or_else(|| decide_16qam(corrected[p][i])),
                };
                let e = d - corrected[p][i];
                e2 = e2 + e.norm_sqr();
                err[p][n / 2 + 2 * i] = e * cis(ph[i]);
            }
        }
        block_rms.push((e2 / T::of(2 * valid.max(1))).sqrt());

        if state.step_size > T::zero() {
            let power = xin.iter().flatten().fold(T::zero(), |a, v| a + v.norm_sqr()) / T::of(m);
            // `xin` holds spectra: Parseval gives sum|X|^2 / M = sum|x|^2.
            let per_sample = power / T::of(2 * m);
            if per_sample > T::zero() {
                for p in err.iter_mut() {
                    fft.forward(p);
                }
                let gain = Complex::new(state.step_size / per_sample, T::zero());
                let mut grad: Vec<Jones<T>> = (0..m)
                    .map(|k| {
                        Jones::new(
                            err[0][k] * xin[0][k].conj(),
                            err[0][k] * xin[1][k].conj(),
                            err[1][k] * xin[0][k].conj(),
                            err[1][k] * xin[1][k].conj(),
                        )
                    })
                    .collect();
                if state.constrained {
                    constrain(&mut grad, &fft);
                }
                for (w, g) in state.w.iter_mut().zip(&grad) {
                    *w = *w + g.scale(gain);
                }
            }
        }

        for p in 0..2 {
            out[p].extend_from_slice(&corrected[p]);
        }
        phase.extend_from_slice(&ph);
    }

    let [x, y] = out;
    Ok(Equalized {
        symbols: DualPolSignal::new(x, y, 1)?,
        phase,
        block_error_rms: block_rms,
    })
}

/// Zeroes gradient taps whose lag magnitude reaches half a block.
fn constrain<T: Real>(grad: &mut [Jones<T>], fft: &FftPair<T>) {
    let m = grad.len();
    let q = m / 4;
    for r in 0..2 {
        for c in 0..2 {
            let mut buf: Vec<_> = grad.iter().map(|j| j.at(r, c)).collect();
            fft.inverse(&mut buf);
            for (t, v) in buf.iter_mut().enumerate() {
                if t >= q && t < m - q {
                    *v = Complex::zero();
                }
            }
            fft.forward(&mut buf);
            for (j, v) in grad.iter_mut().zip(buf) {
                j.0[r][c] = v;
            }
        }
    }
}

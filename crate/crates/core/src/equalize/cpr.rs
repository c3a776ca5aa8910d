//! Pilot-aided carrier phase recovery: coarse phase from pilots, linearly
//! interpolated, then a maximum-likelihood residual per block.

use num_complex::Complex;
use num_traits::Zero;

use crate::error::{Error, Result};
use crate::scalar::{cis, wrap_phase, Real};
use crate::txchain::decide_16qam;

/// A pilot phase reference: symbol index (relative to the current block, may
/// be negative) and unwrapped phase.
pub type PhaseAnchor<T> = (isize, T);

#[derive(Debug, Clone, PartialEq)]
pub struct CprOutput<T> {
    pub symbols: [Vec<Complex<T>>; 2],
    /// Total phase removed from each output symbol.
    pub phase: Vec<T>,
    /// Last pilot anchor inside the block, for the next block.
    pub last_anchor: Option<PhaseAnchor<T>>,
}

/// Inputs to [`cpr_pilot_ml`] for one block.
#[derive(Debug, Clone, Copy)]
pub struct CprBlock<'a, T> {
    /// Block symbols per polarization; entries past `n_out` are lookahead.
    pub symbols: [&'a [Complex<T>]; 2],
    pub n_out: usize,
    /// Pilot slots as (index into `symbols`, transmitted value).
    pub pilots: &'a [(usize, Complex<T>)],
    /// Last pilot anchor of the previous block.
    pub prev: Option<PhaseAnchor<T>>,
    /// Known symbols for data-aided operation; decisions are used otherwise.
    pub reference: Option<[&'a [Complex<T>]; 2]>,
    /// Pilot period; anchors farther than this from the block are ignored.
    pub period: usize,
}

fn interpolate<T: Real>(anchors: &[PhaseAnchor<T>], i: isize) -> T {
    match anchors {
        [] => T::zero(),
        [only] => only.1,
        _ => {
            if i <= anchors[0].0 {
                return anchors[0].1;
            }
            for w in anchors.windows(2) {
                let (a, b) = (w[0], w[1]);
                if i <= b.0 {
                    let t = T::of((i - a.0) as usize) / T::of((b.0 - a.0) as usize);
                    return a.1 + (b.1 - a.1) * t;
                }
            }
            anchors[anchors.len() - 1].1
        }
    }
}

/// Phase recovery for one block of dual-polarization symbols. Both
/// polarizations share one phase estimate (common laser phase).
pub fn cpr_pilot_ml<T: Real>(blk: CprBlock<'_, T>) -> Result<CprOutput<T>> {
    let n = blk.n_out;
    let reach = blk.period as isize;
    let mut anchors: Vec<PhaseAnchor<T>> = Vec::new();
    if let Some(p) = blk.prev {
        if p.0 >= -reach {
            anchors.push(p);
        }
    }
    for &(i, v) in blk.pilots {
        if i >= blk.symbols[0].len() {
            continue;
        }
        let c = blk.symbols[0][i] * v.conj() + blk.symbols[1][i] * v.conj();
        if c.is_zero() {
            continue;
        }
        let raw = c.arg();
        let ph = match anchors.last() {
            Some(&(_, last)) => last + wrap_phase(raw - last),
            None => raw,
        };
        anchors.push((i as isize, ph));
    }
    if anchors.is_empty() && blk.reference.is_none() {
        return Err(Error::NoPilotInRange);
    }

    let coarse: Vec<T> = (0..n).map(|i| interpolate(&anchors, i as isize)).collect();
    let mut acc = Complex::zero();
    for p in 0..2 {
        for i in 0..n {
            let u = blk.symbols[p][i] * cis(-coarse[i]);
            let d = match blk.reference {
                Some(r) => r[p][i],
                None => blk
                    .pilots
                    .iter()
                    .find(|(j, _)| *j == i)
                    .map(|(_, v)| *v)
                    .unwrap_or_else(|| decide_16qam(u)),
            };
            acc = acc + u * d.conj();
        }
    }
    let residual = if acc.is_zero() { T::zero() } else { acc.arg() };
    let phase: Vec<T> = coarse.iter().map(|c| *c + residual).collect();
    let symbols = [0, 1].map(|p| (0..n).map(|i| blk.symbols[p][i] * cis(-phase[i])).collect());
    let last_anchor = anchors.iter().rev().find(|a| a.0 < n as isize).copied();
    Ok(CprOutput {
        symbols,
        phase,
        last_anchor,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::txchain::{constellation_16qam, pilot_symbol};

    #[test]
    fn no_pilot_and_no_reference_fails() {
        let s = vec![Complex::new(1.0, 0.0); 4];
        let r = cpr_pilot_ml(CprBlock {
            symbols: [&s, &s],
            n_out: 4,
            pilots: &[],
            prev: None,
            reference: None,
            period: 32,
        });
        assert!(matches!(r, Err(Error::NoPilotInRange)));
    }

    #[test]
    fn interpolation_is_linear_between_pilots() {
        let pilot = pilot_symbol::<f64>();
        let table = constellation_16qam::<f64>();
        let tx: Vec<_> = (0..33).map(|i| if i % 32 == 0 { pilot } else { table[i % 16] }).collect();
        let rx: Vec<_> = tx.iter().enumerate().map(|(i, s)| s * cis(0.01 * i as f64)).collect();
        let out = cpr_pilot_ml(CprBlock {
            symbols: [&rx, &rx],
            n_out: 32,
            pilots: &[(0, pilot), (32, pilot)],
            prev: None,
            reference: None,
            period: 32,
        })
        .unwrap();
        for (i, ph) in out.phase.iter().enumerate() {
            assert!((ph - 0.01 * i as f64).abs() < 1e-12);
        }
        assert_eq!(out.last_anchor.map(|a| a.0), Some(0));
    }
}

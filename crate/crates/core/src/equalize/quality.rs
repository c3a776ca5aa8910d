//! Payload quality metrics: SNR, per-block RMSE and bit error ratio.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::signal::DualPolSignal;
use crate::txchain::demap_16qam;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    /// `-10 log10(mean |e|^2)` over data symbols; `+inf` for zero error.
    pub snr_db: f64,
    /// RMS error over the data symbols of each output block.
    pub rmse_per_block: Vec<f64>,
    pub ber: f64,
    pub bit_errors: usize,
    pub bits: usize,
}

/// Compares equalized against transmitted symbols, skipping pilot slots.
/// `block` is the RMSE block size in symbols.
pub fn measure_quality<T: Real>(
    eq: &DualPolSignal<T>,
    tx: &DualPolSignal<T>,
    pilot_positions: &[usize],
    block: usize,
) -> Result<QualityReport> {
    if eq.len() != tx.len() {
        return Err(Error::LengthMismatch {
            expected: tx.len(),
            actual: eq.len(),
        });
    }
    let mut is_pilot = vec![false; eq.len()];
    for &p in pilot_positions {
        if p < is_pilot.len() {
            is_pilot[p] = true;
        }
    }
    let block = block.max(1);
    let mut total = 0.0f64;
    let mut count = 0usize;
    let mut rmse = Vec::with_capacity(eq.len().div_ceil(block));
    let mut data_eq: [Vec<Complex<T>>; 2] = [Vec::new(), Vec::new()];
    let mut data_tx: [Vec<Complex<T>>; 2] = [Vec::new(), Vec::new()];
    for start in (0..eq.len()).step_by(block) {
        let mut acc = 0.0f64;
        let mut n = 0usize;
        for i in start..(start + block).min(eq.len()) {
            if is_pilot[i] {
                continue;
            }
            for p in 0..2 {
                acc += (eq.pol(p)[i] - tx.pol(p)[i]).norm_sqr().to_f64_lossy();
                n += 1;
                data_eq[p].push(eq.pol(p)[i]);
                data_tx[p].push(tx.pol(p)[i]);
            }
        }
        if n > 0 {
            rmse.push((acc / n as f64).sqrt());
        }
        total += acc;
        count += n;
    }
    let mse = if count > 0 { total / count as f64 } else { 0.0 };
    let snr_db = if mse > 0.0 { -10.0 * mse.log10() } else { f64::INFINITY };
    let mut bit_errors = 0;
    let mut bits = 0;
    for p in 0..2 {
        let a = demap_16qam(&data_eq[p]);
        let b = demap_16qam(&data_tx[p]);
        bits += a.len();
        bit_errors += a.iter().zip(&b).filter(|(x, y)| x != y).count();
    }
    Ok(QualityReport {
        snr_db,
        rmse_per_block: rmse,
        ber: if bits > 0 { bit_errors as f64 / bits as f64 } else { 0.0 },
        bit_errors,
        bits,
    })
}

/// Gaussian tail probability.
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

/// Exact bit error ratio of Gray-mapped 16QAM in AWGN at the given Es/N0.
pub fn ber_16qam_awgn(snr_db: f64) -> f64 {
    let x = (10f64.powf(snr_db / 10.0) / 5.0).sqrt();
    (3.0 * q_function(x) + 2.0 * q_function(3.0 * x) - q_function(5.0 * x)) / 4.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_match_is_infinite_snr() {
        let s = DualPolSignal::new(vec![Complex::new(0.3f64, 0.1); 40], vec![Complex::new(-0.9, 0.3); 40], 1).unwrap();
        let q = measure_quality(&s, &s, &[0, 32], 32).unwrap();
        assert_eq!(q.snr_db, f64::INFINITY);
        assert_eq!(q.ber, 0.0);
        assert_eq!(q.rmse_per_block.len(), 2);
    }

    #[test]
    fn analytic_ber_reference_point() {
        // Es/N0 = 18 dB: x = sqrt(63.1/5) = 3.552.
        let b = ber_16qam_awgn(18.0);
        assert!((b - 1.4318e-4).abs() < 1e-8, "{b}");
    }

    #[test]
    fn misaligned_lengths_rejected() {
        let a = DualPolSignal::new(vec![Complex::new(0.0f64, 0.0); 3], vec![Complex::new(0.0, 0.0); 3], 1).unwrap();
        let b = DualPolSignal::new(vec![Complex::new(0.0f64, 0.0); 4], vec![Complex::new(0.0, 0.0); 4], 1).unwrap();
        assert!(measure_quality(&a, &b, &[], 32).is_err());
    }
}

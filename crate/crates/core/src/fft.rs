//! Thin wrapper over `rustfft` with a normalized inverse.

use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::scalar::Real;

/// Forward/inverse transform pair of a fixed length.
#[derive(Clone)]
pub struct FftPair<T: Real> {
    fwd: Arc<dyn Fft<T>>,
    inv: Arc<dyn Fft<T>>,
    len: usize,
}

impl<T: Real> FftPair<T> {
    pub fn new(len: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            fwd: planner.plan_fft_forward(len),
            inv: planner.plan_fft_inverse(len),
            len,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Unnormalized forward DFT, `X[k] = sum x[n] e^{-j 2 pi k n / M}`.
    pub fn forward(&self, buf: &mut [Complex<T>]) {
        self.fwd.process(buf);
    }

    /// Inverse DFT scaled by `1 / M`.
    pub fn inverse(&self, buf: &mut [Complex<T>]) {
        self.inv.process(buf);
        let scale = T::one() / T::of(self.len);
        for v in buf.iter_mut() {
            *v = *v * scale;
        }
    }
}

/// Forward DFT of `x` into a new vector.
pub fn dft<T: Real>(x: &[Complex<T>]) -> Vec<Complex<T>> {
    let mut buf = x.to_vec();
    if !buf.is_empty() {
        FftPair::new(buf.len()).forward(&mut buf);
    }
    buf
}

/// Normalized inverse DFT of `x` into a new vector.
pub fn idft<T: Real>(x: &[Complex<T>]) -> Vec<Complex<T>> {
    let mut buf = x.to_vec();
    if !buf.is_empty() {
        FftPair::new(buf.len()).inverse(&mut buf);
    }
    buf
}

/// Frequency in Hz of bin `k` for an `m`-point transform in DFT ordering.
pub fn bin_frequency(k: usize, m: usize, sample_rate: f64) -> f64 {
    let kk = if k < m.div_ceil(2) { k as f64 } else { k as f64 - m as f64 };
    kk * sample_rate / m as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip() {
        let x: Vec<Complex<f64>> = (0..12).map(|i| Complex::new(i as f64, -(i as f64) * 0.5)).collect();
        let back = idft(&dft(&x));
        for (a, b) in x.iter().zip(&back) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn bin_frequencies_wrap_negative() {
        assert_eq!(bin_frequency(0, 8, 8.0), 0.0);
        assert_eq!(bin_frequency(3, 8, 8.0), 3.0);
        assert_eq!(bin_frequency(4, 8, 8.0), -4.0);
        assert_eq!(bin_frequency(7, 8, 8.0), -1.0);
        assert_eq!(bin_frequency(2, 5, 5.0), 2.0);
        assert_eq!(bin_frequency(3, 5, 5.0), -2.0);
    }
}

//! Signal containers and 2x2 Jones algebra.

use std::ops::{Add, Mul, Sub};

use num_complex::Complex;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Ordered complex samples tagged with their samples-per-symbol rate.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSequence<T> {
    samples: Vec<Complex<T>>,
    sps: usize,
}

impl<T: Real> ComplexSequence<T> {
    /// Wraps `samples`; the sequence must be non-empty and `sps` 1 or 2.
    pub fn new(samples: Vec<Complex<T>>, sps: usize) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidSignal("empty sequence".into()));
        }
        if !(1..=2).contains(&sps) {
            return Err(Error::InvalidSignal(format!("unsupported sps {sps}")));
        }
        Ok(Self { samples, sps })
    }

    pub fn samples(&self) -> &[Complex<T>] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [Complex<T>] {
        &mut self.samples
    }

    pub fn into_samples(self) -> Vec<Complex<T>> {
        self.samples
    }

    pub fn sps(&self) -> usize {
        self.sps
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn energy(&self) -> T {
        self.samples.iter().fold(T::zero(), |acc, s| acc + s.norm_sqr())
    }
}

/// X/Y polarization pair of equal length.
#[derive(Debug, Clone, PartialEq)]
pub struct DualPolSignal<T> {
    pub x: Vec<Complex<T>>,
    pub y: Vec<Complex<T>>,
    sps: usize,
}

impl<T: Real> DualPolSignal<T> {
    pub fn new(x: Vec<Complex<T>>, y: Vec<Complex<T>>, sps: usize) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::LengthMismatch {
                expected: x.len(),
                actual: y.len(),
            });
        }
        if !(1..=2).contains(&sps) {
            return Err(Error::InvalidSignal(format!("unsupported sps {sps}")));
        }
        Ok(Self { x, y, sps })
    }

    pub fn from_sequences(x: ComplexSequence<T>, y: ComplexSequence<T>) -> Result<Self> {
        if x.sps() != y.sps() {
            return Err(Error::InvalidSignal("polarizations differ in sps".into()));
        }
        let sps = x.sps();
        Self::new(x.into_samples(), y.into_samples(), sps)
    }

    pub fn zeros(len: usize, sps: usize) -> Self {
        Self {
            x: vec![Complex::zero(); len],
            y: vec![Complex::zero(); len],
            sps,
        }
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn sps(&self) -> usize {
        self.sps
    }

    pub fn pol(&self, p: usize) -> &[Complex<T>] {
        if p == 0 {
            &self.x
        } else {
            &self.y
        }
    }

    pub fn pol_mut(&mut self, p: usize) -> &mut Vec<Complex<T>> {
        if p == 0 {
            &mut self.x
        } else {
            &mut self.y
        }
    }

    /// Samples `[start, start + len)`; positions outside the signal read as zero.
    pub fn window(&self, start: isize, len: usize) -> [Vec<Complex<T>>; 2] {
        let grab = |v: &[Complex<T>]| {
            (0..len)
                .map(|i| {
                    let idx = start + i as isize;
                    if idx >= 0 && (idx as usize) < v.len() {
                        v[idx as usize]
                    } else {
                        Complex::zero()
                    }
                })
                .collect::<Vec<_>>()
        };
        [grab(&self.x), grab(&self.y)]
    }

    /// Every `step`-th sample starting at `start`, `count` samples per polarization.
    pub fn decimate(&self, start: usize, step: usize, count: usize) -> Result<Self> {
        let last = start + step * count.saturating_sub(1);
        if count > 0 && last >= self.len() {
            return Err(Error::TooShort {
                needed: last + 1,
                actual: self.len(),
            });
        }
        let take = |v: &[Complex<T>]| (0..count).map(|i| v[start + i * step]).collect();
        Ok(Self {
            x: take(&self.x),
            y: take(&self.y),
            sps: 1,
        })
    }

    pub fn energy(&self) -> T {
        self.x
            .iter()
            .chain(self.y.iter())
            .fold(T::zero(), |acc, s| acc + s.norm_sqr())
    }

    /// `self * a + other`, elementwise.
    pub fn scale_add(&self, a: Complex<T>, other: &Self) -> Result<Self> {
        if self.len() != other.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                actual: other.len(),
            });
        }
        let f = |u: &[Complex<T>], v: &[Complex<T>]| u.iter().zip(v).map(|(p, q)| *p * a + *q).collect();
        Ok(Self {
            x: f(&self.x, &other.x),
            y: f(&self.y, &other.y),
            sps: self.sps,
        })
    }

    /// Largest elementwise distance to `other` over both polarizations.
    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.x
            .iter()
            .zip(&other.x)
            .chain(self.y.iter().zip(&other.y))
            .fold(T::zero(), |m, (a, b)| m.max((*a - *b).norm()))
    }
}

/// A 2x2 complex matrix, row-major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jones<T>(pub [[Complex<T>; 2]; 2]);

impl<T: Real> Jones<T> {
    pub fn new(a: Complex<T>, b: Complex<T>, c: Complex<T>, d: Complex<T>) -> Self {
        Jones([[a, b], [c, d]])
    }

    pub fn identity() -> Self {
        let (o, z) = (Complex::one(), Complex::zero());
        Jones([[o, z], [z, o]])
    }

    pub fn zero() -> Self {
        Jones([[Complex::zero(); 2]; 2])
    }

    pub fn diag(a: Complex<T>, d: Complex<T>) -> Self {
        Jones([[a, Complex::zero()], [Complex::zero(), d]])
    }

    /// Real rotation `[[cos, -sin], [sin, cos]]`.
    pub fn rotation(angle: T) -> Self {
        let (s, c) = angle.sin_cos();
        let re = |v: T| Complex::new(v, T::zero());
        Jones([[re(c), re(-s)], [re(s), re(c)]])
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> Complex<T> {
        self.0[r][c]
    }

    pub fn det(&self) -> Complex<T> {
        self.0[0][0] * self.0[1][1] - self.0[0][1] * self.0[1][0]
    }

    /// Inverse, or `None` when the determinant is exactly zero.
    pub fn inverse(&self) -> Option<Self> {
        let det = self.det();
        if det.norm_sqr() == T::zero() {
            return None;
        }
        let inv = det.inv();
        let [[a, b], [c, d]] = self.0;
        Some(Jones([[d * inv, -b * inv], [-c * inv, a * inv]]))
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        let [[a, b], [c, d]] = self.0;
        Jones([[a.conj(), c.conj()], [b.conj(), d.conj()]])
    }

    pub fn scale(&self, s: Complex<T>) -> Self {
        let [[a, b], [c, d]] = self.0;
        Jones([[a * s, b * s], [c * s, d * s]])
    }

    pub fn apply(&self, v: [Complex<T>; 2]) -> [Complex<T>; 2] {
        [
            self.0[0][0] * v[0] + self.0[0][1] * v[1],
            self.0[1][0] * v[0] + self.0[1][1] * v[1],
        ]
    }

    pub fn frobenius_sqr(&self) -> T {
        self.0.iter().flatten().fold(T::zero(), |acc, v| acc + v.norm_sqr())
    }

    /// Singular values, largest first.
    pub fn singular_values(&self) -> (T, T) {
        // Eigenvalues of A^H A from its trace and determinant.
        let tr = self.frobenius_sqr();
        let det = self.det().norm_sqr();
        let two = T::lit(2.0);
        let disc = (tr * tr / T::lit(4.0) - det).max(T::zero()).sqrt();
        let s1 = (tr / two + disc).max(T::zero()).sqrt();
        let s2 = (tr / two - disc).max(T::zero()).sqrt();
        (s1, s2)
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.0
            .iter()
            .flatten()
            .zip(other.0.iter().flatten())
            .fold(T::zero(), |m, (a, b)| m.max((*a - *b).norm()))
    }
}

impl<T: Real> Mul for Jones<T> {
    type Output = Jones<T>;

    fn mul(self, rhs: Self) -> Self {
        let a = self.0;
        let b = rhs.0;
        let mut out = [[Complex::zero(); 2]; 2];
        for (r, row) in out.iter_mut().enumerate() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = a[r][0] * b[0][c] + a[r][1] * b[1][c];
            }
        }
        Jones(out)
    }
}

impl<T: Real> Add for Jones<T> {
    type Output = Jones<T>;

    fn add(self, rhs: Self) -> Self {
        let mut out = self.0;
        for (r, row) in out.iter_mut().enumerate() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = *v + rhs.0[r][c];
            }
        }
        Jones(out)
    }
}

impl<T: Real> Sub for Jones<T> {
    type Output = Jones<T>;

    fn sub(self, rhs: Self) -> Self {
        let mut out = self.0;
        for (r, row) in out.iter_mut().enumerate() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = *v - rhs.0[r][c];
            }
        }
        Jones(out)
    }
}

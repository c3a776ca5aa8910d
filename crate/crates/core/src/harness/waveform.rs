//! "CBW1" binary waveform files.
//!
//! Layout, all little-endian: magic `CBW1`, version `u32` (= 1), sps `u32`,
//! sample count `u64`, then one `(XI, XQ, YI, YQ)` quad of `f64` per sample.
//! The header is 20 bytes.

use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::signal::DualPolSignal;

pub const MAGIC: &[u8; 4] = b"CBW1";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 20;

/// File size for `samples` samples.
pub fn file_len(samples: usize) -> usize {
    HEADER_LEN + 32 * samples
}

pub fn encode(signal: &DualPolSignal<f64>) -> Result<Vec<u8>> {
    let mut buf = Vec::with_capacity(file_len(signal.len()));
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(signal.sps() as u32).to_le_bytes());
    buf.extend_from_slice(&(signal.len() as u64).to_le_bytes());
    for (x, y) in signal.x.iter().zip(&signal.y) {
        for v in [x.re, x.im, y.re, y.im] {
            if !v.is_finite() {
                return Err(Error::InvalidSignal("waveform contains non-finite samples".into()));
            }
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(buf)
}

pub fn decode(bytes: &[u8]) -> Result<DualPolSignal<f64>> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(Error::BadMagic);
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::Truncated {
            expected: HEADER_LEN,
            actual: bytes.len(),
        });
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes"));
    let version = u32_at(4);
    if version != VERSION {
        return Err(Error::VersionMismatch(version));
    }
    let sps = u32_at(8) as usize;
    let count = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes"));
    let expected = usize::try_from(count)
        .ok()
        .and_then(|c| c.checked_mul(32))
        .and_then(|b| b.checked_add(HEADER_LEN))
        .ok_or(Error::Truncated {
            expected: usize::MAX,
            actual: bytes.len(),
        })?;
    if bytes.len() != expected {
        return Err(Error::Truncated {
            expected,
            actual: bytes.len(),
        });
    }
    let f = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().expect("8 bytes"));
    let (x, y): (Vec<_>, Vec<_>) = bytes[HEADER_LEN..]
        .chunks_exact(32)
        .enumerate()
        .map(|(i, _)| {
            let o = HEADER_LEN + 32 * i;
            (Complex::new(f(o), f(o + 8)), Complex::new(f(o + 16), f(o + 24)))
        })
        .unzip();
    DualPolSignal::new(x, y, sps)
}

pub fn write_to<W: Write>(signal: &DualPolSignal<f64>, mut out: W) -> Result<()> {
    out.write_all(&encode(signal)?)?;
    Ok(())
}

pub fn read_from<R: Read>(mut input: R) -> Result<DualPolSignal<f64>> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    decode(&bytes)
}

pub fn write_waveform(path: &Path, signal: &DualPolSignal<f64>) -> Result<()> {
    std::fs::write(path, encode(signal)?)?;
    Ok(())
}

pub fn read_waveform(path: &Path) -> Result<DualPolSignal<f64>> {
    decode(&std::fs::read(path)?)
}

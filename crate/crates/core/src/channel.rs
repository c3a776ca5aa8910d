//! Linear dual-polarization fiber channel (RSOP, CD, first-order PMD, PDL)
//! plus frequency offset, arrival delay, laser phase noise and AWGN.

use num_complex::Complex;
use num_traits::Zero;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::fft::{bin_frequency, FftPair};
use crate::scalar::{cis, Real};
use crate::signal::{DualPolSignal, Jones};
use crate::txchain::rrc_taps;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Channel impairments. Every parameter at zero (and `snr_db` off) is the
/// identity channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChannelConfig {
    /// Accumulated dispersion `D z`, ps/nm.
    pub cd_ps_per_nm: f64,
    pub wavelength_nm: f64,
    /// Differential group delay, ps.
    pub dgd_ps: f64,
    /// PMD principal-axis angle, rad.
    pub pmd_angle: f64,
    pub pdl_db: f64,
    /// PDL axis angle, rad.
    pub pdl_angle: f64,
    pub rsop_theta: f64,
    pub rsop_alpha: f64,
    pub rsop_beta: f64,
    pub fo_hz: f64,
    /// Arrival delay in 2-sps samples; may be fractional.
    pub delay_samples: f64,
    /// Es/N0 per symbol per polarization in dB; `None` disables noise.
    #[serde(serialize_with = "ser_snr", deserialize_with = "de_snr")]
    pub snr_db: Option<f64>,
    /// Combined transmitter and LO linewidth, Hz.
    pub laser_linewidth_hz: f64,
    /// Seed for [`simulate`]; trial runners derive their own generators.
    pub seed: u64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            cd_ps_per_nm: 0.0,
            wavelength_nm: 1550.0,
            dgd_ps: 0.0,
            pmd_angle: 0.0,
            pdl_db: 0.0,
            pdl_angle: 0.0,
            rsop_theta: 0.0,
            rsop_alpha: 0.0,
            rsop_beta: 0.0,
            fo_hz: 0.0,
            delay_samples: 0.0,
            snr_db: None,
            laser_linewidth_hz: 0.0,
            seed: 0,
        }
    }
}

fn ser_snr<S: Serializer>(v: &Option<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match v {
        Some(x) => s.serialize_f64(*x),
        None => s.serialize_str("off"),
    }
}

fn de_snr<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Option<f64>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Snr {
        Db(f64),
        Word(String),
    }
    match Option::<Snr>::deserialize(d)? {
        None => Ok(None),
        Some(Snr::Db(x)) => Ok(Some(x)),
        Some(Snr::Word(w)) if w.eq_ignore_ascii_case("off") => Ok(None),
        Some(Snr::Word(w)) => Err(serde::de::Error::custom(format!("snr_db: expected number or \"off\", got \"{w}\""))),
    }
}

impl ChannelConfig {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            ("cd_ps_per_nm", self.cd_ps_per_nm),
            ("dgd_ps", self.dgd_ps),
            ("pmd_angle", self.pmd_angle),
            ("pdl_angle", self.pdl_angle),
            ("rsop_theta", self.rsop_theta),
            ("rsop_alpha", self.rsop_alpha),
            ("rsop_beta", self.rsop_beta),
            ("fo_hz", self.fo_hz),
            ("delay_samples", self.delay_samples),
        ];
        for (name, v) in finite {
            if !v.is_finite() {
                return Err(Error::Config(format!("channel.{name} must be finite")));
            }
        }
        if !(self.pdl_db.is_finite() && self.pdl_db >= 0.0) {
            return Err(Error::Config("channel.pdl_db must be finite and >= 0".into()));
        }
        if !(self.wavelength_nm.is_finite() && self.wavelength_nm > 0.0) {
            return Err(Error::Config("channel.wavelength_nm must be positive".into()));
        }
        if !(self.laser_linewidth_hz.is_finite() && self.laser_linewidth_hz >= 0.0) {
            return Err(Error::Config("channel.laser_linewidth_hz must be >= 0".into()));
        }
        if matches!(self.snr_db, Some(s) if !s.is_finite()) {
            return Err(Error::Config("channel.snr_db must be finite or \"off\"".into()));
        }
        Ok(())
    }
}

/// Per-bin 2x2 transfer matrix on a DFT-ordered frequency grid.
#[derive(Debug, Clone, PartialEq)]
pub struct JonesSpectrum<T> {
    /// Bin frequencies in Hz.
    pub grid: Vec<f64>,
    pub h: Vec<Jones<T>>,
}

/// Frequencies of an `m`-point DFT at `sample_rate`, in DFT ordering.
pub fn frequency_grid(m: usize, sample_rate: f64) -> Vec<f64> {
    (0..m).map(|k| bin_frequency(k, m, sample_rate)).collect()
}

impl<T: Real> JonesSpectrum<T> {
    /// The same matrix at every bin.
    pub fn flat(grid: &[f64], j: Jones<T>) -> Self {
        Self {
            grid: grid.to_vec(),
            h: vec![j; grid.len()],
        }
    }

    pub fn identity(grid: &[f64]) -> Self {
        Self::flat(grid, Jones::identity())
    }

    /// Scalar response times the identity.
    pub fn scalar(grid: &[f64], f: impl Fn(f64) -> Complex<T>) -> Self {
        Self {
            grid: grid.to_vec(),
            h: grid.iter().map(|&g| Jones::identity().scale(f(g))).collect(),
        }
    }

    /// DFT of a 2x2 impulse response `taps[t]` placed at sample lags `t + first_lag`
    /// (negative lags wrap circularly) on an `m`-point grid.
    pub fn from_impulse_response(taps: &[Jones<T>], first_lag: isize, m: usize, sample_rate: f64) -> Self {
        let grid = frequency_grid(m, sample_rate);
        let mut h = vec![Jones::zero(); m];
        let fft = FftPair::new(m);
        for r in 0..2 {
            for c in 0..2 {
                let mut buf = vec![Complex::zero(); m];
                for (t, tap) in taps.iter().enumerate() {
                    let idx = (t as isize + first_lag).rem_euclid(m as isize) as usize;
                    buf[idx] = buf[idx] + tap.at(r, c);
                }
                fft.forward(&mut buf);
                for (k, v) in buf.into_iter().enumerate() {
                    h[k].0[r][c] = v;
                }
            }
        }
        Self { grid, h }
    }

    pub fn len(&self) -> usize {
        self.h.len()
    }

    pub fn is_empty(&self) -> bool {
        self.h.is_empty()
    }

    /// Per-bin product `self * rhs` (rhs acts first).
    pub fn then_after(&self, rhs: &Self) -> Result<Self> {
        if self.len() != rhs.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                actual: rhs.len(),
            });
        }
        Ok(Self {
            grid: self.grid.clone(),
            h: self.h.iter().zip(&rhs.h).map(|(a, b)| *a * *b).collect(),
        })
    }

    /// Per-bin inverse; `None` if any bin is singular.
    pub fn inverse(&self) -> Option<Self> {
        let h = self.h.iter().map(|j| j.inverse()).collect::<Option<Vec<_>>>()?;
        Some(Self {
            grid: self.grid.clone(),
            h,
        })
    }
}

/// Chromatic dispersion `exp(-j D z lambda^2 w^2 / (4 pi c))` on both polarizations.
pub fn jones_cd<T: Real>(grid: &[f64], cd_ps_per_nm: f64, wavelength_nm: f64) -> JonesSpectrum<T> {
    // ps/nm -> s/m
    let dz = cd_ps_per_nm * 1e-3;
    let lambda = wavelength_nm * 1e-9;
    JonesSpectrum::scalar(grid, |f| {
        let w = std::f64::consts::TAU * f;
        let phase = -dz * lambda * lambda * w * w / (4.0 * std::f64::consts::PI * SPEED_OF_LIGHT);
        cis(T::lit(phase))
    })
}

/// First-order PMD `R(a) diag(e^{j w dt/2}, e^{-j w dt/2}) R(a)^-1`.
pub fn jones_pmd<T: Real>(grid: &[f64], dgd_ps: f64, alpha: f64) -> JonesSpectrum<T> {
    let r = Jones::<T>::rotation(T::lit(alpha));
    let rt = Jones::<T>::rotation(T::lit(-alpha));
    let dt = dgd_ps * 1e-12;
    JonesSpectrum {
        grid: grid.to_vec(),
        h: grid
            .iter()
            .map(|&f| {
                let half = T::lit(std::f64::consts::PI * f * dt);
                r * Jones::diag(cis(half), cis(-half)) * rt
            })
            .collect(),
    }
}

/// PDL parameter `gamma = (10^{PDL/10} - 1) / (10^{PDL/10} + 1)`.
pub fn pdl_gamma(pdl_db: f64) -> f64 {
    let g = 10f64.powf(pdl_db / 10.0);
    (g - 1.0) / (g + 1.0)
}

/// Frequency-flat PDL `R(b) diag(sqrt(1+g), sqrt(1-g)) R(b)^-1`.
pub fn jones_pdl<T: Real>(pdl_db: f64, beta: f64) -> Jones<T> {
    let g = pdl_gamma(pdl_db);
    let re = |v: f64| Complex::new(T::lit(v), T::zero());
    Jones::rotation(T::lit(beta)) * Jones::diag(re((1.0 + g).sqrt()), re((1.0 - g).sqrt())) * Jones::rotation(T::lit(-beta))
}

/// Polarization rotation `[[cos t e^{ja}, -sin t e^{jb}], [sin t e^{-jb}, cos t e^{-ja}]]`.
pub fn jones_rsop<T: Real>(theta: f64, alpha: f64, beta: f64) -> Jones<T> {
    let (s, c) = theta.sin_cos();
    let p = |mag: f64, ph: f64| Complex::from_polar(T::lit(mag), T::lit(ph));
    Jones::new(p(c, alpha), p(-s, beta), p(s, -beta), p(c, -alpha))
}

/// Frequency response of the discrete RRC filter used at 2 sps, evaluated on `grid`.
pub fn rrc_response<T: Real>(grid: &[f64], rolloff: f64, span: usize, symbol_rate: f64) -> Vec<T> {
    let taps = rrc_taps::<f64>(rolloff, span, 2);
    let center = (taps.len() / 2) as f64;
    let fs = 2.0 * symbol_rate;
    grid.iter()
        .map(|&f| {
            // Symmetric taps: the centered response is real.
            let v: f64 = taps
                .iter()
                .enumerate()
                .map(|(i, t)| t * (std::f64::consts::TAU * f * (i as f64 - center) / fs).cos())
                .sum();
            T::lit(v)
        })
        .collect()
}

/// Fiber part of the channel: `H_CD H_PMD H_PDL H_RSOP` per bin.
pub fn fiber_response<T: Real>(config: &ChannelConfig, grid: &[f64]) -> JonesSpectrum<T> {
    let cd = jones_cd::<T>(grid, config.cd_ps_per_nm, config.wavelength_nm);
    let pmd = jones_pmd::<T>(grid, config.dgd_ps, config.pmd_angle);
    let tail = jones_pdl::<T>(config.pdl_db, config.pdl_angle)
        * jones_rsop::<T>(config.rsop_theta, config.rsop_alpha, config.rsop_beta);
    JonesSpectrum {
        grid: grid.to_vec(),
        h: cd.h.iter().zip(&pmd.h).map(|(c, p)| *c * *p * tail).collect(),
    }
}

/// End-to-end response `H_Rx H_CD H_PMD H_PDL H_RSOP H_Tx`, with matched RRC
/// filters for `H_Tx` and `H_Rx`.
pub fn compose_channel<T: Real>(
    config: &ChannelConfig,
    grid: &[f64],
    rolloff: f64,
    span: usize,
    symbol_rate: f64,
) -> JonesSpectrum<T> {
    let rrc = rrc_response::<T>(grid, rolloff, span, symbol_rate);
    let mut h = fiber_response::<T>(config, grid);
    for (j, g) in h.h.iter_mut().zip(&rrc) {
        *j = j.scale(Complex::new(*g * *g, T::zero()));
    }
    h
}

/// Applies `h` as a per-bin 2x2 multiply over one full-length transform
/// (circular convolution in time).
pub fn apply_channel<T: Real>(waveform: &DualPolSignal<T>, h: &JonesSpectrum<T>) -> Result<DualPolSignal<T>> {
    let m = waveform.len();
    if h.len() != m {
        return Err(Error::LengthMismatch {
            expected: m,
            actual: h.len(),
        });
    }
    let fft = FftPair::new(m);
    let mut x = waveform.x.clone();
    let mut y = waveform.y.clone();
    fft.forward(&mut x);
    fft.forward(&mut y);
    for (k, j) in h.h.iter().enumerate() {
        let [a, b] = j.apply([x[k], y[k]]);
        x[k] = a;
        y[k] = b;
    }
    fft.inverse(&mut x);
    fft.inverse(&mut y);
    DualPolSignal::new(x, y, waveform.sps())
}

/// Multiplies by `exp(j 2 pi fo n / fs)`, `n` counted from the first sample.
pub fn apply_fo<T: Real>(waveform: &DualPolSignal<T>, fo_hz: f64, sample_rate: f64) -> DualPolSignal<T> {
    let mut out = waveform.clone();
    if fo_hz == 0.0 {
        return out;
    }
    let step = std::f64::consts::TAU * fo_hz / sample_rate;
    for p in 0..2 {
        for (n, v) in out.pol_mut(p).iter_mut().enumerate() {
            // Reduce in f64 so long bursts keep full phase precision.
            let ph = (step * n as f64).rem_euclid(std::f64::consts::TAU);
            *v = *v * cis(T::lit(ph));
        }
    }
    out
}

/// Delays by `delay` samples: integer part as a zero-filled shift, fractional
/// part as a linear phase over one full-length transform.
pub fn apply_delay<T: Real>(waveform: &DualPolSignal<T>, delay: f64) -> DualPolSignal<T> {
    let whole = delay.floor();
    let frac = delay - whole;
    let shift = whole as isize;
    let m = waveform.len();
    let mut out = waveform.clone();
    for p in 0..2 {
        let src = waveform.pol(p);
        let dst = out.pol_mut(p);
        for (i, d) in dst.iter_mut().enumerate() {
            let j = i as isize - shift;
            *d = if j >= 0 && (j as usize) < m { src[j as usize] } else { Complex::zero() };
        }
    }
    if frac != 0.0 {
        let fft = FftPair::new(m);
        for p in 0..2 {
            let buf = out.pol_mut(p);
            fft.forward(buf);
            for (k, v) in buf.iter_mut().enumerate() {
                let f = bin_frequency(k, m, 1.0);
                *v = *v * cis(T::lit(-std::f64::consts::TAU * f * frac));
            }
            fft.inverse(buf);
        }
    }
    out
}

/// Delay, frequency offset, shared Wiener phase noise and circular AWGN, in
/// that order. `symbol_rate` fixes the 2-sps sample clock. Noise variance per
/// complex sample is `10^{-snr/10}`, which with unit-energy matched filtering
/// gives the requested Es/N0 at the symbol instants.
pub fn apply_fo_delay_noise<T: Real, R: Rng + ?Sized>(
    waveform: &DualPolSignal<T>,
    config: &ChannelConfig,
    symbol_rate: f64,
    rng: &mut R,
) -> Result<DualPolSignal<T>> {
    config.validate()?;
    let fs = 2.0 * symbol_rate;
    let mut out = if config.delay_samples != 0.0 {
        apply_delay(waveform, config.delay_samples)
    } else {
        waveform.clone()
    };
    out = apply_fo(&out, config.fo_hz, fs);
    if config.laser_linewidth_hz > 0.0 {
        let sigma = (std::f64::consts::TAU * config.laser_linewidth_hz / fs).sqrt();
        let walk = Normal::new(0.0, sigma).expect("finite sigma");
        let mut phase = 0.0f64;
        for i in 0..out.len() {
            phase += walk.sample(rng);
            let r = cis(T::lit(phase));
            out.x[i] = out.x[i] * r;
            out.y[i] = out.y[i] * r;
        }
    }
    if let Some(snr) = config.snr_db {
        let sigma = (0.5 * 10f64.powf(-snr / 10.0)).sqrt();
        let n = Normal::new(0.0, sigma).expect("finite sigma");
        for p in 0..2 {
            for v in out.pol_mut(p).iter_mut() {
                *v = *v + Complex::new(T::lit(n.sample(rng)), T::lit(n.sample(rng)));
            }
        }
    }
    Ok(out)
}

/// Fiber response followed by FO, delay, phase noise and AWGN, using the
/// config's own seed.
pub fn simulate<T: Real>(waveform: &DualPolSignal<T>, config: &ChannelConfig, symbol_rate: f64) -> Result<DualPolSignal<T>> {
    use rand::SeedableRng;
    let grid = frequency_grid(waveform.len(), 2.0 * symbol_rate);
    let faded = apply_channel(waveform, &fiber_response(config, &grid))?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(config.seed);
    apply_fo_delay_noise(&faded, config, symbol_rate, &mut rng)
}

/// `true` when `j^H j = I` within `tol`.
pub fn is_unitary<T: Real>(j: &Jones<T>, tol: T) -> bool {
    (j.adjoint() * *j).max_abs_diff(&Jones::identity()) < tol
}

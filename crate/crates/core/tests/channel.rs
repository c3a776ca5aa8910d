use num_complex::Complex;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use burstdsp::channel::{
    apply_channel, apply_delay, apply_fo, apply_fo_delay_noise, compose_channel, fiber_response, frequency_grid, is_unitary, jones_cd,
    jones_pdl, jones_pmd, jones_rsop, pdl_gamma, rrc_response, ChannelConfig, JonesSpectrum,
};
use burstdsp::signal::{DualPolSignal, Jones};
use burstdsp::sync::compensate_fo;

type C = Complex<f64>;

const RS: f64 = 15e9;

fn random_signal(len: usize, seed: u64) -> DualPolSignal<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v = || (0..len).map(|_| C::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect();
    DualPolSignal::new(v(), v(), 2).unwrap()
}

fn random_jones(rng: &mut ChaCha8Rng) -> Jones<f64> {
    let mut c = || C::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
    Jones::new(c(), c(), c(), c())
}

#[test]
fn pdl_parameter_at_three_db() {
    assert!((pdl_gamma(3.0) - 0.332_28).abs() < 1e-4);
    assert_eq!(pdl_gamma(0.0), 0.0);
}

#[test]
fn frequency_domain_equals_circular_convolution() {
    let m = 96;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let taps: Vec<Jones<f64>> = (0..7).map(|_| random_jones(&mut rng)).collect();
    let first_lag = -3;
    let h = JonesSpectrum::from_impulse_response(&taps, first_lag, m, 2.0 * RS);
    let x = random_signal(m, 5);
    let fd = apply_channel(&x, &h).unwrap();
    for n in 0..m {
        let mut want = [C::new(0.0, 0.0); 2];
        for (t, tap) in taps.iter().enumerate() {
            let j = (n as isize - (t as isize + first_lag)).rem_euclid(m as isize) as usize;
            let v = tap.apply([x.x[j], x.y[j]]);
            want[0] += v[0];
            want[1] += v[1];
        }
        assert!((fd.x[n] - want[0]).norm() < 1e-12 && (fd.y[n] - want[1]).norm() < 1e-12);
    }
}

#[test]
fn fiber_without_pdl_conserves_energy() {
    let x = random_signal(1024, 2);
    let cfg = ChannelConfig {
        cd_ps_per_nm: 1360.0,
        dgd_ps: 80.0,
        pmd_angle: 0.4,
        rsop_theta: 1.1,
        rsop_alpha: 0.3,
        rsop_beta: 2.0,
        ..ChannelConfig::default()
    };
    let y = apply_channel(&x, &fiber_response(&cfg, &frequency_grid(1024, 2.0 * RS))).unwrap();
    assert!((y.energy() / x.energy() - 1.0).abs() < 1e-12);
}

#[test]
fn composition_order() {
    let grid = frequency_grid(64, 2.0 * RS);
    let cfg = ChannelConfig {
        cd_ps_per_nm: 340.0,
        dgd_ps: 30.0,
        pmd_angle: 0.2,
        pdl_db: 3.0,
        pdl_angle: 0.7,
        rsop_theta: 0.9,
        rsop_alpha: 0.1,
        rsop_beta: 0.5,
        ..ChannelConfig::default()
    };
    let h = compose_channel::<f64>(&cfg, &grid, 0.1, 32, RS);
    let cd = jones_cd::<f64>(&grid, 340.0, 1550.0);
    let pmd = jones_pmd::<f64>(&grid, 30.0, 0.2);
    let rrc = rrc_response::<f64>(&grid, 0.1, 32, RS);
    let tail = jones_pdl::<f64>(3.0, 0.7) * jones_rsop::<f64>(0.9, 0.1, 0.5);
    for k in 0..64 {
        let want = (cd.h[k] * pmd.h[k] * tail).scale(C::new(rrc[k] * rrc[k], 0.0));
        assert!(h.h[k].max_abs_diff(&want) < 1e-12, "bin {k}");
    }
}

#[test]
fn integer_delay_is_a_shift() {
    let x = random_signal(64, 8);
    let d = apply_delay(&x, 5.0);
    assert!(d.x[..5].iter().all(|v| v.norm() == 0.0));
    assert_eq!(&d.x[5..], &x.x[..59]);
    assert_eq!(&d.y[5..], &x.y[..59]);
}

#[test]
fn frequency_offset_round_trip() {
    let x = random_signal(4096, 3);
    let shifted = apply_fo(&x, 1.3e9, 2.0 * RS);
    assert!(shifted.max_abs_diff(&x) > 0.1);
    let back = compensate_fo(&shifted, 1.3e9, RS);
    assert!(back.max_abs_diff(&x) < 1e-12);
}

#[test]
fn noise_variance_calibration() {
    let silent = DualPolSignal::<f64>::zeros(1 << 17, 2);
    let cfg = ChannelConfig {
        snr_db: Some(12.0),
        ..ChannelConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let noisy = apply_fo_delay_noise(&silent, &cfg, RS, &mut rng).unwrap();
    let var = noisy.energy() / (2 * noisy.len()) as f64;
    let want = 10f64.powf(-1.2);
    assert!((var / want - 1.0).abs() < 0.02, "variance {var} vs {want}");
}

#[test]
fn invalid_configs_rejected() {
    let bad = [
        ChannelConfig { pdl_db: -0.5, ..ChannelConfig::default() },
        ChannelConfig { cd_ps_per_nm: f64::NAN, ..ChannelConfig::default() },
        ChannelConfig { snr_db: Some(f64::INFINITY), ..ChannelConfig::default() },
        ChannelConfig { wavelength_nm: 0.0, ..ChannelConfig::default() },
    ];
    for c in bad {
        assert!(c.validate().is_err(), "{c:?}");
    }
}

proptest! {
    #[test]
    fn lossless_elements_are_unitary(cd in 0.0f64..2000.0, dgd in 0.0f64..100.0, a in -3.2f64..3.2, t in 0.0f64..3.2, b in -3.2f64..3.2) {
        let grid = frequency_grid(32, 2.0 * RS);
        prop_assert!(jones_cd::<f64>(&grid, cd, 1550.0).h.iter().all(|j| is_unitary(j, 1e-12)));
        prop_assert!(jones_pmd::<f64>(&grid, dgd, a).h.iter().all(|j| is_unitary(j, 1e-12)));
        prop_assert!(is_unitary(&jones_rsop::<f64>(t, a, b), 1e-12));
    }

    #[test]
    fn pdl_singular_value_ratio(pdl in 0.0f64..10.0, beta in -3.2f64..3.2) {
        let (a, b) = jones_pdl::<f64>(pdl, beta).singular_values();
        let (hi, lo) = (a.max(b), a.min(b));
        prop_assert!((20.0 * (hi / lo).log10() - pdl).abs() < 1e-9);
    }
}

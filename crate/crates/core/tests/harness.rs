use std::io::Write;

use burstdsp::harness::{
    receive, receive_at, run_trial, scenario, sweep, transmit, waveform, with_param, write_csv, TrainingKind, TrialConfig, TrialReport,
    CSV_HEADER,
};
use burstdsp::signal::DualPolSignal;
use burstdsp::Error;

fn small(trials: usize) -> TrialConfig {
    let mut cfg = TrialConfig::default();
    cfg.frame.payload_symbols = 2048;
    cfg.trials = trials;
    cfg
}

#[test]
fn checked_in_config_matches_defaults() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/default.json");
    let cfg = TrialConfig::load(std::path::Path::new(path)).unwrap();
    assert_eq!(cfg, TrialConfig::default());
}

#[test]
fn partial_nested_object_resets_siblings() {
    let cfg = TrialConfig::from_json(r#"{"dsp": {"lms_mu": 0.001}}"#).unwrap();
    assert_eq!(cfg.dsp.lms_mu, 0.001);
    assert_eq!(cfg.dsp.ce, TrialConfig::default().dsp.ce);
    assert!(TrialConfig::from_json(r#"{"dsp": {"lms_mu": -1}}"#).is_err());
    assert!(TrialConfig::from_json(r#"{"channel": {"snr_db": "loud"}}"#).is_err());
}

#[test]
fn fixed_seed_is_deterministic() {
    let cfg = small(3);
    let a = TrialReport::run(&cfg).unwrap();
    let b = TrialReport::run(&cfg).unwrap();
    assert_eq!(a, b);
    let mut other = cfg.clone();
    other.master_seed += 1;
    assert_ne!(TrialReport::run(&other).unwrap().records[0].snr_db, a.records[0].snr_db);
}

#[test]
fn trials_are_independent_of_batch() {
    let cfg = small(4);
    let batch = TrialReport::run(&cfg).unwrap();
    assert_eq!(run_trial(&cfg, 3).unwrap(), batch.records[3]);
    assert_eq!(batch.aggregate.trials, 4);
}

#[test]
fn default_link_quality() {
    let r = TrialReport::run(&small(4)).unwrap();
    assert!(r.aggregate.abs_sync_offset_error.mean <= 1.0);
    assert!(r.aggregate.abs_foe_error_hz.mean < 5e6);
    assert!(r.aggregate.post_ce_snr_db.mean > 13.0);
    assert!(r.aggregate.snr_db.mean > 15.0);
}

#[test]
fn noiseless_ce_is_exact_enough() {
    let mut cfg = small(3);
    cfg.channel.snr_db = None;
    cfg.channel.cd_ps_per_nm = 1360.0;
    cfg.channel.dgd_ps = 80.0;
    cfg.channel.pdl_db = 7.0;
    cfg.dsp.lms_mu = 0.0;
    for t in 0..3 {
        let r = run_trial(&cfg, t).unwrap();
        assert!(r.post_ce_snr_db.unwrap() >= 30.0, "trial {t}: {:?}", r.post_ce_snr_db);
    }
}

#[test]
fn known_start_matches_detected_start() {
    let mut cfg = small(1);
    cfg.channel.snr_db = None;
    cfg.randomize.delay = false;
    cfg.channel.delay_samples = 40.0;
    let sc = scenario(&cfg, 0).unwrap();
    let rx = transmit(&cfg, &sc, 0).unwrap();
    let detected = receive(&cfg, &rx, &sc.blocks, None).unwrap();
    assert_eq!(detected.offset, 2 * cfg.dsp.guard_symbols + 40);
    let given = receive_at(&cfg, &rx, &sc.blocks, None, detected.offset).unwrap();
    assert!(given.pmnr_db.is_nan());
    assert_eq!(given.payload, detected.payload);
    assert!(receive_at(&cfg, &rx, &sc.blocks, None, rx.len()).is_err());
}

#[test]
fn qam_training_runs() {
    let mut cfg = small(2);
    cfg.dsp.training = TrainingKind::Qam16;
    let r = TrialReport::run(&cfg).unwrap();
    assert!(r.aggregate.post_ce_snr_db.mean.is_finite());
}

#[test]
fn disabled_ce_trains_on_payload() {
    let mut cfg = small(2);
    cfg.frame.payload_symbols = 8192;
    cfg.dsp.ce_enabled = false;
    let r = TrialReport::run(&cfg).unwrap();
    assert!(r.records.iter().all(|t| t.post_ce_snr_db.is_none()));
    let trace = &r.records[0].rmse_per_block;
    assert!(trace[0] > 2.0 * trace[trace.len() - 1]);
}

#[test]
fn failures_carry_the_trial_index() {
    let mut cfg = small(1);
    // Too little signal for the detector to clear any threshold.
    cfg.channel.snr_db = Some(-30.0);
    cfg.dsp.sync.threshold_db = 40.0;
    match run_trial(&cfg, 5) {
        Err(Error::Trial { trial, source }) => {
            assert_eq!(trial, 5);
            assert!(matches!(*source, Error::SyncFailed { .. }));
        }
        other => panic!("expected a trial error, got {other:?}"),
    }
}

#[test]
fn csv_layout() {
    let mut cfg = small(2);
    cfg.frame.payload_symbols = 1024;
    let rows = sweep(&cfg, "snr_db", &[14.0, 20.0]).unwrap();
    let mut buf = Vec::new();
    write_csv(&rows, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(
        lines[0],
        "param,value,trials,pmnr_db_mean,pmnr_db_std,abs_sync_offset_error_mean,foe_error_hz_mean,foe_error_hz_std,\
         abs_foe_error_hz_mean,abs_foe_error_hz_std,post_ce_snr_db_mean,post_ce_snr_db_std,snr_db_mean,snr_db_std,\
         ber_mean,ber_std,first_block_rmse_mean,first_block_rmse_std,schema,master_seed"
    );
    assert_eq!(lines.len(), 3);
    for line in &lines[1..] {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields.len(), CSV_HEADER.len());
        assert_eq!(fields[0], "snr_db");
        assert_eq!(fields[2], "2");
        assert_eq!(fields[18], "1");
    }
    let snr = |l: &str| l.split(',').nth(12).unwrap().parse::<f64>().unwrap();
    assert!(snr(lines[2]) > snr(lines[1]));
}

#[test]
fn sweep_parameter_handling() {
    let base = TrialConfig::default();
    assert_eq!(with_param(&base, "N", 128.0).unwrap().frame.preamble.n, 128);
    assert_eq!(with_param(&base, "units", 4.0).unwrap().frame.preamble.units, 4);
    let fixed = with_param(&base, "rsop_theta", 0.5).unwrap();
    assert!(!fixed.randomize.rsop_theta);
    assert!(matches!(with_param(&base, "gain", 1.0), Err(Error::UnknownParameter(_))));
    assert!(with_param(&base, "n", 64.5).is_err());
    assert!(with_param(&base, "n", 48.0).is_err());
}

fn sample_signal() -> DualPolSignal<f64> {
    let mut cfg = small(1);
    cfg.frame.payload_symbols = 256;
    let sc = scenario(&cfg, 0).unwrap();
    transmit(&cfg, &sc, 0).unwrap()
}

#[test]
fn waveform_file_round_trip() {
    let s = sample_signal();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("rx.cbw");
    waveform::write_waveform(&path, &s).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    assert_eq!(bytes.len(), waveform::file_len(s.len()));
    assert_eq!(&bytes[..4], b"CBW1");
    let back = waveform::read_waveform(&path).unwrap();
    assert_eq!(back, s);
    assert_eq!(waveform::encode(&back).unwrap(), bytes);
}

#[test]
fn waveform_header_layout() {
    let s = DualPolSignal::new(vec![num_complex::Complex::new(1.5, -2.0)], vec![num_complex::Complex::new(0.25, 8.0)], 2).unwrap();
    let b = waveform::encode(&s).unwrap();
    assert_eq!(b.len(), 20 + 32);
    assert_eq!(u32::from_le_bytes(b[4..8].try_into().unwrap()), 1);
    assert_eq!(u32::from_le_bytes(b[8..12].try_into().unwrap()), 2);
    assert_eq!(u64::from_le_bytes(b[12..20].try_into().unwrap()), 1);
    assert_eq!(f64::from_le_bytes(b[20..28].try_into().unwrap()), 1.5);
    assert_eq!(f64::from_le_bytes(b[44..52].try_into().unwrap()), 8.0);
}

#[test]
fn waveform_corruption_is_reported() {
    let bytes = waveform::encode(&sample_signal()).unwrap();
    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert!(matches!(waveform::decode(&bad), Err(Error::BadMagic)));
    assert!(matches!(waveform::decode(&bytes[..bytes.len() - 5]), Err(Error::Truncated { .. })));
    assert!(matches!(waveform::decode(&bytes[..12]), Err(Error::Truncated { .. })));
    let mut version = bytes.clone();
    version[4] = 9;
    assert!(matches!(waveform::decode(&version), Err(Error::VersionMismatch(9))));

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("short.cbw");
    let mut f = std::fs::File::create(&path).unwrap();
    f.write_all(&bytes[..100]).unwrap();
    drop(f);
    assert!(waveform::read_waveform(&path).is_err());
}

//! One Monte-Carlo trial: transmitter, channel and the full receiver chain.

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{apply_channel, apply_fo_delay_noise, fiber_response, frequency_grid, ChannelConfig};
use crate::equalize::{
    estimate_channel, fd_lms_equalize, idle_noise_variance, measure_quality, rx_power_response, zf_init, EqualizeOptions, EqualizerState,
    PilotGrid,
};
use crate::error::{Error, Result};
use crate::seqcore::{build_training_blocks, TrainingBlocks};
use crate::signal::DualPolSignal;
use crate::sync::{compensate_fo, frame_sync, refine_timing, FoeResult, MetricId};
use crate::txchain::{assemble_frame_with_blocks, decide_16qam, matched_filter, pilot_symbol, random_qam_blocks, rrc_shape, BurstFrame};

use super::config::{TrainingKind, TrialConfig};

/// Symbols per block for the per-block RMSE trace.
pub const RMSE_BLOCK: usize = 32;

/// Block length above which the preamble training step is scaled down.
const PREAMBLE_STEP_REF_N: usize = 64;

/// Generator for trial `trial`: the master seed picks the key, the trial
/// index picks an independent ChaCha stream.
pub fn trial_rng(master_seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(trial as u64);
    rng
}

/// Scalar outcome of one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    /// Detected minus true frame start, in samples.
    pub sync_offset_error: f64,
    pub pmnr_db: f64,
    pub metric: MetricId,
    pub fo_estimate_hz: f64,
    /// Estimated minus true frequency offset.
    pub foe_error_hz: f64,
    /// Payload SNR with the channel-estimate coefficients held fixed.
    pub post_ce_snr_db: Option<f64>,
    /// Payload SNR after adaptive equalization.
    pub snr_db: f64,
    pub ber: f64,
    pub rmse_per_block: Vec<f64>,
    /// Channel realization actually used.
    pub rsop_theta: f64,
    pub rsop_alpha: f64,
    pub rsop_beta: f64,
    pub delay_samples: f64,
}

/// Everything the receiver learns from one burst.
#[derive(Debug, Clone)]
pub struct ReceiverOutput {
    /// Frame-sync offset on the 2-sps grid.
    pub offset: usize,
    /// Sample phase used for symbol-rate processing after timing refinement.
    pub symbol_offset: usize,
    pub pmnr_db: f64,
    pub metric: MetricId,
    pub foe: FoeResult,
    /// Equalized payload slots (pilots included), sps = 1.
    pub payload: DualPolSignal<f64>,
    /// Payload with coefficients frozen at their channel-estimate values.
    pub payload_ce: Option<DualPolSignal<f64>>,
    pub block_error_rms: Vec<f64>,
}

/// Realized per-trial channel and transmitted burst.
pub struct Scenario {
    pub channel: ChannelConfig,
    pub frame: BurstFrame<f64>,
    pub blocks: TrainingBlocks<f64>,
}

/// Draws the burst and channel realization for `trial`. The frame is drawn
/// first so a receiver can regenerate it from the seed alone.
pub fn scenario(cfg: &TrialConfig, trial: usize) -> Result<Scenario> {
    let mut rng = trial_rng(cfg.master_seed, trial);
    let spec = &cfg.frame;
    let blocks = match cfg.dsp.training {
        TrainingKind::Cazac => build_training_blocks(spec.preamble.n)?,
        TrainingKind::Qam16 => random_qam_blocks(spec.preamble.n, &mut rng)?,
    };
    let frame = assemble_frame_with_blocks(spec, &blocks, &mut rng)?;
    let mut channel = cfg.channel.clone();
    let tau = std::f64::consts::TAU;
    if cfg.randomize.rsop_theta {
        channel.rsop_theta = rng.random::<f64>() * std::f64::consts::PI;
    }
    if cfg.randomize.rsop_phases {
        channel.rsop_alpha = rng.random::<f64>() * tau;
        channel.rsop_beta = rng.random::<f64>() * tau;
    }
    if cfg.randomize.delay {
        channel.delay_samples = rng.random::<f64>() * (2 * spec.preamble.unit_len()) as f64;
    }
    Ok(Scenario { channel, frame, blocks })
}

/// Largest random delay in samples.
fn max_delay(cfg: &TrialConfig) -> usize {
    2 * cfg.frame.preamble.unit_len()
}

/// Pulse-shapes the burst with silent guards and passes it through the channel.
pub fn transmit(cfg: &TrialConfig, sc: &Scenario, trial: usize) -> Result<DualPolSignal<f64>> {
    let guard = cfg.dsp.guard_symbols;
    let tail = guard + max_delay(cfg).div_ceil(2) + (cfg.channel.delay_samples.max(0.0) / 2.0).ceil() as usize;
    let sym = &sc.frame.tx_symbols;
    let pad = |v: &[num_complex::Complex<f64>]| {
        let mut out = vec![num_complex::Complex::new(0.0, 0.0); guard];
        out.extend_from_slice(v);
        out.resize(guard + v.len() + tail, num_complex::Complex::new(0.0, 0.0));
        out
    };
    let padded = DualPolSignal::new(pad(&sym.x), pad(&sym.y), 1)?;
    let wave = rrc_shape(&padded, cfg.frame.rolloff, cfg.dsp.rrc_span)?;
    let grid = frequency_grid(wave.len(), 2.0 * cfg.frame.symbol_rate);
    let faded = apply_channel(&wave, &fiber_response(&sc.channel, &grid))?;
    // Noise draws use a stream disjoint from the scenario draws.
    let mut rng = trial_rng(cfg.master_seed ^ 0x6e6f_6973_6520_7278, trial);
    apply_fo_delay_noise(&faded, &sc.channel, cfg.frame.symbol_rate, &mut rng)
}

/// Receiver chain: frame sync, FOE, matched filter, FO removal, channel
/// estimation, ZF initialization, preamble training pass, then payload
/// equalization with pilot-aided phase recovery. `known_payload` enables
/// data-aided training on the first payload blocks when CE is disabled.
pub fn receive(
    cfg: &TrialConfig,
    rx: &DualPolSignal<f64>,
    blocks: &TrainingBlocks<f64>,
    known_payload: Option<&DualPolSignal<f64>>,
) -> Result<ReceiverOutput> {
    let spec = &cfg.frame;
    let pre = &spec.preamble;
    let dsp = &cfg.dsp;
    let mut sync_cfg = dsp.sync;
    if sync_cfg.search_len.is_none() {
        // Arrival uncertainty plus one preamble length past the latest start.
        sync_cfg.search_len = Some(2 * dsp.guard_symbols + max_delay(cfg) + 2 * pre.total_len());
    }
    let sync = frame_sync(rx, pre, &sync_cfg)?;
    receive_from(cfg, rx, blocks, known_payload, sync.offset, sync.pmnr_db, sync.metric_id)
}

/// Receiver chain with the frame start supplied instead of detected, for
/// isolating the later stages from synchronization. `pmnr_db` is NaN.
pub fn receive_at(
    cfg: &TrialConfig,
    rx: &DualPolSignal<f64>,
    blocks: &TrainingBlocks<f64>,
    known_payload: Option<&DualPolSignal<f64>>,
    frame_offset: usize,
) -> Result<ReceiverOutput> {
    receive_from(cfg, rx, blocks, known_payload, frame_offset, f64::NAN, MetricId::ALL[0])
}

fn receive_from(
    cfg: &TrialConfig,
    rx: &DualPolSignal<f64>,
    blocks: &TrainingBlocks<f64>,
    known_payload: Option<&DualPolSignal<f64>>,
    frame_offset: usize,
    pmnr_db: f64,
    metric: MetricId,
) -> Result<ReceiverOutput> {
    let spec = &cfg.frame;
    let pre = &spec.preamble;
    let dsp = &cfg.dsp;
    let rs = spec.symbol_rate;
    let known = crate::seqcore::build_preamble_from_blocks(pre, blocks)?;
    let needed = frame_offset + 2 * (pre.total_len() + spec.payload_slots());
    if needed > rx.len() {
        return Err(Error::TooShort { needed, actual: rx.len() });
    }
    // The FO is removed ahead of the matched filter so the filter sees the
    // signal centered; the first filtering only serves the estimate.
    let mf = matched_filter(rx, spec.rolloff, dsp.rrc_span)?;
    let (offset, foe) = refine_timing(&mf, frame_offset, pre, &known, rs, dsp.foe_method)?;
    let mf = matched_filter(&compensate_fo(rx, foe.fo_hz, rs), spec.rolloff, dsp.rrc_span)?;

    let mu = dsp.lms_mu;
    let slots = spec.payload_slots();
    let start = offset + 2 * pre.total_len();
    let pilots = Some(PilotGrid {
        period: spec.pilot_period,
        value: pilot_symbol(),
    });
    let mut state = if dsp.ce_enabled {
        let hrx = rx_power_response::<f64>(pre.n, spec.rolloff, dsp.rrc_span, rs);
        // Idle samples ending well before the pulse tails of the burst.
        let noise = idle_noise_variance(rx, frame_offset.saturating_sub(2 * dsp.rrc_span));
        let psd: Option<Vec<f64>> = noise.map(|v| hrx.iter().map(|g| g * v).collect());
        let ce = estimate_channel(&mf, offset, pre, blocks, &known, psd.as_deref(), &dsp.ce, rs)?;
        let mut state = zf_init(&ce, &hrx, &dsp.ce, mu)?;
        if dsp.ce.payload_feedback {
            let head = pre.n.min(slots);
            let mut frozen = state.clone();
            frozen.step_size = 0.0;
            let opts = EqualizeOptions {
                reference: None,
                train_blocks: 0,
                pilots,
                cpr: dsp.cpr,
            };
            let eq = fd_lms_equalize(&mf, start, head, &mut frozen, &opts)?;
            let decide = |v: &[Complex<f64>]| -> Vec<Complex<f64>> {
                v.iter()
                    .enumerate()
                    .map(|(i, &z)| if i % spec.pilot_period == 0 { pilot_symbol() } else { decide_16qam(z) })
                    .collect()
            };
            let extend = |p: usize| [known.pol(p), &decide(eq.symbols.pol(p))].concat();
            let known_ext = DualPolSignal::new(extend(0), extend(1), 1)?;
            let ce = estimate_channel(&mf, offset, pre, blocks, &known_ext, psd.as_deref(), &dsp.ce, rs)?;
            state = zf_init(&ce, &hrx, &dsp.ce, mu)?;
        }
        state
    } else {
        EqualizerState::identity(pre.n, mu)
    };
    state.constrained = dsp.lms_constrained;

    // Each bin sees a fixed number of preamble blocks whatever the length, so
    // the pass step shrinks with the block size above the reference length to
    // keep its misadjustment from growing with N.
    state.step_size = mu * (PREAMBLE_STEP_REF_N as f64 / pre.n as f64).min(1.0);
    for _ in 0..if mu > 0.0 { dsp.preamble_passes } else { 0 } {
        fd_lms_equalize(
            &mf,
            offset,
            pre.total_len(),
            &mut state,
            &EqualizeOptions {
                reference: Some(&known),
                train_blocks: usize::MAX,
                pilots: None,
                cpr: dsp.cpr,
            },
        )?;
    }

    state.step_size = mu;

    let payload_ce = if dsp.ce_enabled {
        let mut frozen = state.clone();
        frozen.step_size = 0.0;
        let opts = EqualizeOptions {
            reference: None,
            train_blocks: 0,
            pilots,
            cpr: dsp.cpr,
        };
        Some(fd_lms_equalize(&mf, start, slots, &mut frozen, &opts)?.symbols)
    } else {
        None
    };

    let (payload, block_error_rms) = if mu > 0.0 || payload_ce.is_none() {
        let opts = EqualizeOptions {
            reference: known_payload.filter(|_| !dsp.ce_enabled),
            train_blocks: dsp.train_blocks,
            pilots,
            cpr: dsp.cpr,
        };
        let eq = fd_lms_equalize(&mf, start, slots, &mut state, &opts)?;
        (eq.symbols, eq.block_error_rms)
    } else {
        (payload_ce.clone().expect("ce payload present"), Vec::new())
    };

    Ok(ReceiverOutput {
        offset: frame_offset,
        symbol_offset: offset,
        pmnr_db,
        metric,
        foe,
        payload,
        payload_ce,
        block_error_rms,
    })
}

fn payload_of(frame: &BurstFrame<f64>) -> Result<(DualPolSignal<f64>, Vec<usize>)> {
    let s = frame.payload_start;
    let tx = &frame.tx_symbols;
    let payload = DualPolSignal::new(tx.x[s..].to_vec(), tx.y[s..].to_vec(), 1)?;
    let pilots = frame.pilot_positions.iter().map(|p| p - s).collect();
    Ok((payload, pilots))
}

fn run_trial_inner(cfg: &TrialConfig, trial: usize) -> Result<TrialRecord> {
    cfg.validate()?;
    let sc = scenario(cfg, trial)?;
    let rx = transmit(cfg, &sc, trial)?;
    let (tx_payload, pilots) = payload_of(&sc.frame)?;
    let true_offset = 2.0 * cfg.dsp.guard_symbols as f64 + sc.channel.delay_samples;
    let out = if cfg.dsp.oracle_timing {
        receive_at(cfg, &rx, &sc.blocks, Some(&tx_payload), true_offset.round() as usize)?
    } else {
        receive(cfg, &rx, &sc.blocks, Some(&tx_payload))?
    };

    let q = measure_quality(&out.payload, &tx_payload, &pilots, RMSE_BLOCK)?;
    let post_ce_snr_db = match &out.payload_ce {
        Some(p) => Some(measure_quality(p, &tx_payload, &pilots, RMSE_BLOCK)?.snr_db),
        None => None,
    };
    Ok(TrialRecord {
        trial,
        sync_offset_error: out.offset as f64 - true_offset,
        pmnr_db: out.pmnr_db,
        metric: out.metric,
        fo_estimate_hz: out.foe.fo_hz,
        foe_error_hz: out.foe.fo_hz - sc.channel.fo_hz,
        post_ce_snr_db,
        snr_db: q.snr_db,
        ber: q.ber,
        rmse_per_block: q.rmse_per_block,
        rsop_theta: sc.channel.rsop_theta,
        rsop_alpha: sc.channel.rsop_alpha,
        rsop_beta: sc.channel.rsop_beta,
        delay_samples: sc.channel.delay_samples,
    })
}

/// Runs trial `trial`; errors carry the trial index.
pub fn run_trial(cfg: &TrialConfig, trial: usize) -> Result<TrialRecord> {
    run_trial_inner(cfg, trial).map_err(|e| Error::Trial {
        trial,
        source: Box::new(e),
    })
}

/// Runs trials `0..cfg.trials` in parallel; records come back in trial order.
pub fn run_trials(cfg: &TrialConfig) -> Result<Vec<TrialRecord>> {
    (0..cfg.trials).into_par_iter().map(|t| run_trial(cfg, t)).collect()
}

/// Mean and sample standard deviation of the finite entries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

impl Stat {
    pub fn of(values: impl IntoIterator<Item = f64>) -> Self {
        let v: Vec<f64> = values.into_iter().filter(|x| x.is_finite()).collect();
        if v.is_empty() {
            return Self { mean: f64::NAN, std: f64::NAN };
        }
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let var = if v.len() > 1 {
            v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (v.len() - 1) as f64
        } else {
            0.0
        };
        Self { mean, std: var.sqrt() }
    }
}

/// Aggregates over a set of trial records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub trials: usize,
    pub abs_sync_offset_error: Stat,
    pub pmnr_db: Stat,
    pub foe_error_hz: Stat,
    pub abs_foe_error_hz: Stat,
    pub post_ce_snr_db: Stat,
    pub snr_db: Stat,
    pub ber: Stat,
    pub first_block_rmse: Stat,
}

impl Aggregate {
    pub fn from_records(records: &[TrialRecord]) -> Self {
        Self {
            trials: records.len(),
            abs_sync_offset_error: Stat::of(records.iter().map(|r| r.sync_offset_error.abs())),
            pmnr_db: Stat::of(records.iter().map(|r| r.pmnr_db)),
            foe_error_hz: Stat::of(records.iter().map(|r| r.foe_error_hz)),
            abs_foe_error_hz: Stat::of(records.iter().map(|r| r.foe_error_hz.abs())),
            post_ce_snr_db: Stat::of(records.iter().filter_map(|r| r.post_ce_snr_db)),
            snr_db: Stat::of(records.iter().map(|r| r.snr_db)),
            ber: Stat::of(records.iter().map(|r| r.ber)),
            first_block_rmse: Stat::of(records.iter().filter_map(|r| r.rmse_per_block.first().copied())),
        }
    }
}

/// Records plus their aggregate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub records: Vec<TrialRecord>,
    pub aggregate: Aggregate,
}

impl TrialReport {
    pub fn run(cfg: &TrialConfig) -> Result<Self> {
        let records = run_trials(cfg)?;
        let aggregate = Aggregate::from_records(&records);
        Ok(Self { records, aggregate })
    }
}

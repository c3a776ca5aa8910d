//! One-parameter sweeps emitting a CSV table of trial aggregates.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};

use super::config::TrialConfig;
use super::trial::{Aggregate, TrialReport};

/// Sweepable parameters and their config field.
pub const SWEEP_PARAMS: [&str; 8] = ["n", "l", "fo_hz", "rsop_theta", "cd_ps_per_nm", "dgd_ps", "pdl_db", "snr_db"];

/// Column order of the sweep CSV. Changing it is a schema change.
pub const CSV_HEADER: [&str; 20] = [
    "param",
    "value",
    "trials",
    "pmnr_db_mean",
    "pmnr_db_std",
    "abs_sync_offset_error_mean",
    "foe_error_hz_mean",
    "foe_error_hz_std",
    "abs_foe_error_hz_mean",
    "abs_foe_error_hz_std",
    "post_ce_snr_db_mean",
    "post_ce_snr_db_std",
    "snr_db_mean",
    "snr_db_std",
    "ber_mean",
    "ber_std",
    "first_block_rmse_mean",
    "first_block_rmse_std",
    "schema",
    "master_seed",
];

/// Current CSV schema version, written in the `schema` column.
pub const CSV_SCHEMA: u32 = 1;

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub param: String,
    pub value: f64,
    pub trials: usize,
    pub pmnr_db_mean: f64,
    pub pmnr_db_std: f64,
    pub abs_sync_offset_error_mean: f64,
    pub foe_error_hz_mean: f64,
    pub foe_error_hz_std: f64,
    pub abs_foe_error_hz_mean: f64,
    pub abs_foe_error_hz_std: f64,
    pub post_ce_snr_db_mean: f64,
    pub post_ce_snr_db_std: f64,
    pub snr_db_mean: f64,
    pub snr_db_std: f64,
    pub ber_mean: f64,
    pub ber_std: f64,
    pub first_block_rmse_mean: f64,
    pub first_block_rmse_std: f64,
    pub schema: u32,
    pub master_seed: u64,
}

impl SweepRow {
    fn new(param: &str, value: f64, a: &Aggregate, master_seed: u64) -> Self {
        Self {
            param: param.to_string(),
            value,
            trials: a.trials,
            pmnr_db_mean: a.pmnr_db.mean,
            pmnr_db_std: a.pmnr_db.std,
            abs_sync_offset_error_mean: a.abs_sync_offset_error.mean,
            foe_error_hz_mean: a.foe_error_hz.mean,
            foe_error_hz_std: a.foe_error_hz.std,
            abs_foe_error_hz_mean: a.abs_foe_error_hz.mean,
            abs_foe_error_hz_std: a.abs_foe_error_hz.std,
            post_ce_snr_db_mean: a.post_ce_snr_db.mean,
            post_ce_snr_db_std: a.post_ce_snr_db.std,
            snr_db_mean: a.snr_db.mean,
            snr_db_std: a.snr_db.std,
            ber_mean: a.ber.mean,
            ber_std: a.ber.std,
            first_block_rmse_mean: a.first_block_rmse.mean,
            first_block_rmse_std: a.first_block_rmse.std,
            schema: CSV_SCHEMA,
            master_seed,
        }
    }
}

/// Canonical parameter name, accepting `N`/`L`/`units` aliases.
pub fn canonical_param(name: &str) -> Result<&'static str> {
    let lower = name.to_ascii_lowercase();
    let key = match lower.as_str() {
        "units" => "l",
        other => other,
    };
    SWEEP_PARAMS
        .iter()
        .find(|p| **p == key)
        .copied()
        .ok_or_else(|| Error::UnknownParameter(name.to_string()))
}

/// Copy of `base` with `param` set to `value`. A swept RSOP angle is no
/// longer randomized.
pub fn with_param(base: &TrialConfig, param: &str, value: f64) -> Result<TrialConfig> {
    let mut cfg = base.clone();
    let as_count = |v: f64| -> Result<usize> {
        if v >= 0.0 && v.fract() == 0.0 {
            Ok(v as usize)
        } else {
            Err(Error::Config(format!("{param} must be a non-negative integer, got {v}")))
        }
    };
    match canonical_param(param)? {
        "n" => cfg.frame.preamble.n = as_count(value)?,
        "l" => cfg.frame.preamble.units = as_count(value)?,
        "fo_hz" => cfg.channel.fo_hz = value,
        "rsop_theta" => {
            cfg.channel.rsop_theta = value;
            cfg.randomize.rsop_theta = false;
        }
        "cd_ps_per_nm" => cfg.channel.cd_ps_per_nm = value,
        "dgd_ps" => cfg.channel.dgd_ps = value,
        "pdl_db" => cfg.channel.pdl_db = value,
        "snr_db" => cfg.channel.snr_db = Some(value),
        _ => unreachable!("canonical_param returns a listed name"),
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Runs `base.trials` trials at each value.
pub fn sweep(base: &TrialConfig, param: &str, values: &[f64]) -> Result<Vec<SweepRow>> {
    let name = canonical_param(param)?;
    values
        .iter()
        .map(|&v| {
            let cfg = with_param(base, name, v)?;
            let report = TrialReport::run(&cfg)?;
            Ok(SweepRow::new(name, v, &report.aggregate, cfg.master_seed))
        })
        .collect()
}

/// Writes rows as CSV with the [`CSV_HEADER`] columns.
pub fn write_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

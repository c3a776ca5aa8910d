//! JSON trial configuration. Defaults reproduce the baseline scenario:
//! N = 64, N_GI = 2, L = 2, 2^15 payload symbols, 15 GBd, roll-off 0.1,
//! CD 340 ps/nm, DGD 30 ps, PDL 3 dB, random RSOP and 18 dB AWGN.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel::ChannelConfig;
use crate::equalize::CeConfig;
use crate::error::{Error, Result};
use crate::sync::{FoeMethod, SyncConfig};
use crate::txchain::FrameSpec;

/// Training sequence placed in the four preamble blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainingKind {
    #[default]
    Cazac,
    /// Random 16QAM blocks in the same arrangement (comparison baseline).
    Qam16,
}

/// Receiver DSP settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DspConfig {
    /// Initialize the equalizer from the preamble channel estimate; otherwise
    /// start from pass-through and train on known payload blocks.
    pub ce_enabled: bool,
    /// FD-LMS step size; 0 freezes the coefficients.
    pub lms_mu: f64,
    /// Gradient constraint for the FD-LMS update.
    pub lms_constrained: bool,
    /// Training passes over the known preamble before the payload.
    pub preamble_passes: usize,
    /// Payload blocks adapted against known symbols when CE is disabled.
    pub train_blocks: usize,
    pub cpr: bool,
    pub training: TrainingKind,
    /// Start the receiver at the true frame position instead of running
    /// frame sync. Diagnostic only.
    pub oracle_timing: bool,
    pub foe_method: FoeMethod,
    pub sync: SyncConfig,
    pub ce: CeConfig,
    /// RRC span in symbols for both pulse shaping and matched filtering.
    pub rrc_span: usize,
    /// Silent symbols before the burst.
    pub guard_symbols: usize,
}

impl Default for DspConfig {
    fn default() -> Self {
        Self {
            ce_enabled: true,
            lms_mu: 5e-4,
            lms_constrained: false,
            preamble_passes: 1,
            train_blocks: 100,
            cpr: true,
            training: TrainingKind::Cazac,
            oracle_timing: false,
            foe_method: FoeMethod::TwoLag,
            sync: SyncConfig::default(),
            ce: CeConfig::default(),
            rrc_span: crate::txchain::RRC_SPAN,
            guard_symbols: 64,
        }
    }
}

/// Which channel parameters are redrawn for every trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct RandomizeConfig {
    /// Draw the rotation angle uniformly from `[0, pi)`.
    pub rsop_theta: bool,
    /// Draw the rotation phases uniformly from `[0, 2 pi)`.
    pub rsop_phases: bool,
    /// Draw the arrival delay uniformly over one training unit.
    pub delay: bool,
}

impl Default for RandomizeConfig {
    fn default() -> Self {
        Self {
            rsop_theta: true,
            rsop_phases: true,
            delay: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrialConfig {
    pub frame: FrameSpec,
    pub channel: ChannelConfig,
    pub dsp: DspConfig,
    pub randomize: RandomizeConfig,
    pub trials: usize,
    pub master_seed: u64,
}

impl Default for TrialConfig {
    fn default() -> Self {
        Self {
            frame: FrameSpec::default(),
            channel: ChannelConfig {
                cd_ps_per_nm: 340.0,
                dgd_ps: 30.0,
                pdl_db: 3.0,
                snr_db: Some(18.0),
                ..ChannelConfig::default()
            },
            dsp: DspConfig::default(),
            randomize: RandomizeConfig::default(),
            trials: 1,
            master_seed: 1,
        }
    }
}

impl TrialConfig {
    pub fn validate(&self) -> Result<()> {
        self.frame.validate()?;
        self.channel.validate()?;
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if !(self.dsp.lms_mu.is_finite() && self.dsp.lms_mu >= 0.0) {
            return Err(Error::Config("dsp.lms_mu must be finite and >= 0".into()));
        }
        if self.dsp.rrc_span < 16 || !self.dsp.rrc_span.is_multiple_of(2) {
            return Err(Error::Config("dsp.rrc_span must be even and at least 16".into()));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        let c = TrialConfig::from_json("{}").unwrap();
        assert_eq!(c, TrialConfig::default());
        assert_eq!(c.frame.total_symbols(), 34098);
    }

    #[test]
    fn round_trip() {
        let c = TrialConfig::default();
        assert_eq!(TrialConfig::from_json(&c.to_json()).unwrap(), c);
    }

    #[test]
    fn nested_override() {
        let c = TrialConfig::from_json(r#"{"frame": {"preamble": {"n": 128, "n_gi": 2, "units": 4}}, "channel": {"snr_db": "off"}}"#).unwrap();
        assert_eq!(c.frame.preamble.n, 128);
        assert_eq!(c.frame.payload_symbols, 1 << 15);
        assert_eq!(c.channel.snr_db, None);
        assert_eq!(c.channel.cd_ps_per_nm, 0.0);
    }

    #[test]
    fn invalid_values_rejected() {
        assert!(TrialConfig::from_json(r#"{"trials": 0}"#).is_err());
        assert!(TrialConfig::from_json(r#"{"frame": {"preamble": {"n": 48, "n_gi": 2, "units": 2}}}"#).is_err());
        assert!(TrialConfig::from_json(r#"{"channel": {"pdl_db": -1}}"#).is_err());
    }
}

//! Channel estimation, ZF initialization, FD-LMS equalization, carrier phase
//! recovery and payload quality metrics.

pub mod ce;
pub mod cpr;
pub mod fdlms;
pub mod quality;

pub use ce::{estimate_channel, idle_noise_variance, reference_spectra, rx_power_response, zf_init, CeConfig, ChannelEstimate};
pub use cpr::{cpr_pilot_ml, CprBlock, CprOutput, PhaseAnchor};
pub use fdlms::{fd_lms_equalize, EqualizeOptions, Equalized, EqualizerState, Mode, PilotGrid};
pub use quality::{ber_16qam_awgn, measure_quality, q_function, QualityReport};

//! Slotted random multiple access towards a base station equipped with an
//! ideal successive interference cancellation (SIC) receiver.
//!
//! The crate pairs a closed-form model of the fixed-parameter access scheme
//! with a variable-slot simulator that covers both the fixed and the
//! backlog-adaptive scheme. Observables are packet delivery ratio, access
//! delay, throughput (absolute and normalized to the offered rate) and the
//! time-average Age of Information.
//!
//! Module map:
//!
//! - [`config`]: system constants, slot duration and target SNR calibration.
//! - [`sic`]: single-slot SIC decoding and Monte-Carlo estimation of the
//!   mean decoded count `m_h(γ)`.
//! - [`policy`]: fixed and adaptive `(p, γ)` rules and the sum-rate objective.
//! - [`analytic`]: closed-form metrics for the fixed scheme.
//! - [`sim`]: discrete slot simulator and age-of-information accounting.
//! - [`experiment`]: sweeps over the mean generation time, CSV output and
//!   analytic/simulation cross-validation.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod config;
mod error;
pub mod experiment;
pub mod math;
pub mod policy;
pub mod sic;
pub mod sim;

pub use analytic::{fixed_metrics, FixedMetrics};
pub use config::{slot_time, target_snr, SystemConfig, SystemParams};
pub use error::{Error, Result};
pub use policy::{adaptive_params, fixed_params, Scheme, SchemeParams};
pub use sic::{decode_slot, estimate_mh, DecodeOutcome, MhEstimate, MhTable};
pub use sim::{replicate, run, SimConfig, SimMetrics};

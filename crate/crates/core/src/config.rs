//! System constants and the two physical-layer calibration formulas.
//!
//! Units are fixed throughout the crate: seconds, hertz, bits, and linear
//! (not dB) SNR/SNIR values. The noise power is carried for reference only;
//! every received power is normalized by it, so it never enters a formula.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Time needed to send `bits` at spectral efficiency `log2(1 + gamma)` over
/// `bandwidth_hz`.
pub fn slot_time(gamma: f64, bits: u64, bandwidth_hz: f64) -> Result<f64> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::domain(format!(
            "gamma must be positive, got {gamma}"
        )));
    }
    if bits == 0 {
        return Err(Error::domain("packet length must be at least one bit"));
    }
    if !(bandwidth_hz > 0.0) || !bandwidth_hz.is_finite() {
        return Err(Error::domain(format!(
            "bandwidth must be positive, got {bandwidth_hz}"
        )));
    }
    Ok(bits as f64 / (bandwidth_hz * gamma.ln_1p() / std::f64::consts::LN_2))
}

/// Outage constant `c = -ln(1 - epsilon)`.
pub fn outage_constant(epsilon: f64) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::domain(format!(
            "epsilon must lie in (0, 1), got {epsilon}"
        )));
    }
    Ok(-(-epsilon).ln_1p())
}

/// Mean received SNR `S0` such that a lone transmitter under unit-mean
/// Rayleigh fading meets `gamma` with probability `1 - epsilon`.
pub fn target_snr(gamma: f64, epsilon: f64) -> Result<f64> {
    let c = outage_constant(epsilon)?;
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::domain(format!(
            "gamma must be positive, got {gamma}"
        )));
    }
    Ok(gamma / c)
}

/// Packet length with an explicit unit, stored in bits.
///
/// Parsed from strings such as `"500 B"`, `"500 bytes"` or `"4000 bit"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PacketLength {
    bits: u64,
}

impl PacketLength {
    pub fn from_bits(bits: u64) -> Self {
        Self { bits }
    }

    pub fn from_bytes(bytes: u64) -> Self {
        Self { bits: bytes * 8 }
    }

    pub fn bits(self) -> u64 {
        self.bits
    }
}

impl FromStr for PacketLength {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let split = s
            .find(|ch: char| !ch.is_ascii_digit())
            .ok_or_else(|| Error::config(format!("packet length {s:?} lacks a unit suffix")))?;
        let (num, unit) = s.split_at(split);
        let value: u64 = num
            .parse()
            .map_err(|_| Error::config(format!("packet length {s:?} is not an integer")))?;
        match unit.trim() {
            "B" | "byte" | "bytes" => Ok(Self::from_bytes(value)),
            "bit" | "bits" => Ok(Self::from_bits(value)),
            other => Err(Error::config(format!(
                "unknown packet length unit {other:?} (use B or bit)"
            ))),
        }
    }
}

impl fmt::Display for PacketLength {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.bits.is_multiple_of(8) {
            write!(f, "{} B", self.bits / 8)
        } else {
            write!(f, "{} bit", self.bits)
        }
    }
}

impl Serialize for PacketLength {
    fn serialize<S: serde::Serializer>(
        &self,
        serializer: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PacketLength {
    fn deserialize<D: serde::Deserializer<'de>>(
        deserializer: D,
    ) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Raw configuration as read from a TOML file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemParams {
    /// Number of nodes.
    pub n: usize,
    /// Packet length, e.g. `"500 B"`.
    pub l: PacketLength,
    /// Channel bandwidth in Hz.
    pub w: f64,
    /// Outage tolerance of a lone transmitter.
    pub epsilon: f64,
    pub gamma_max: f64,
    /// Per-node message generation rate in 1/s.
    pub lambda: f64,
    /// Backlog level where the adaptive rule switches to its SIC branch.
    pub k_c: usize,
    pub a_gamma: f64,
    pub b_gamma: f64,
    /// Empty-slot duration in seconds. Defaults to `slot_time(gamma_max)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_0: Option<f64>,
    /// Background noise power in dBm (not used by any computation).
    #[serde(default = "default_noise_dbm")]
    pub p_n: f64,
}

fn default_noise_dbm() -> f64 {
    -107.0
}

impl Default for SystemParams {
    fn default() -> Self {
        Self {
            n: 50,
            l: PacketLength::from_bytes(500),
            w: 1e6,
            epsilon: 0.1,
            gamma_max: 31.0,
            lambda: 100.0,
            k_c: 6,
            a_gamma: 0.39,
            b_gamma: 0.78,
            t_0: None,
            p_n: default_noise_dbm(),
        }
    }
}

/// Validated, immutable system configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    params: SystemParams,
    t0: f64,
    c: f64,
}

impl SystemConfig {
    pub fn new(params: SystemParams) -> Result<Self> {
        let p = &params;
        if p.n == 0 {
            return Err(Error::config("n must be at least 1"));
        }
        if p.l.bits() == 0 {
            return Err(Error::config("packet length must be positive"));
        }
        if !(p.w > 0.0 && p.w.is_finite()) {
            return Err(Error::config(format!("w must be positive, got {}", p.w)));
        }
        if !(p.epsilon > 0.0 && p.epsilon < 1.0) {
            return Err(Error::config(format!(
                "epsilon must lie in (0, 1), got {}",
                p.epsilon
            )));
        }
        if !(p.gamma_max > 0.0 && p.gamma_max.is_finite()) {
            return Err(Error::config(format!(
                "gamma_max must be positive, got {}",
                p.gamma_max
            )));
        }
        if !(p.lambda > 0.0 && p.lambda.is_finite()) {
            return Err(Error::config(format!(
                "lambda must be positive, got {}",
                p.lambda
            )));
        }
        if p.k_c == 0 {
            return Err(Error::config("k_c must be at least 1"));
        }
        if !(p.a_gamma > 0.0 && p.b_gamma > 0.0) {
            return Err(Error::config("a_gamma and b_gamma must be positive"));
        }
        let t0 = match p.t_0 {
            Some(t) if t > 0.0 && t.is_finite() => t,
            Some(t) => return Err(Error::config(format!("t_0 must be positive, got {t}"))),
            None => slot_time(p.gamma_max, p.l.bits(), p.w)?,
        };
        let c = outage_constant(p.epsilon)?;
        Ok(Self { params, t0, c })
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let params: SystemParams =
            toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        Self::new(params)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let params: SystemParams = toml::from_str(&text).map_err(|e| Error::Format {
            path: path.to_owned(),
            msg: e.to_string(),
        })?;
        Self::new(params)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(&self.params).expect("system parameters serialize to TOML")
    }

    /// Same system with a different generation rate.
    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        let mut params = self.params.clone();
        params.lambda = lambda;
        Self::new(params)
    }

    pub fn params(&self) -> &SystemParams {
        &self.params
    }

    pub fn n(&self) -> usize {
        self.params.n
    }

    pub fn packet_bits(&self) -> u64 {
        self.params.l.bits()
    }

    pub fn bandwidth_hz(&self) -> f64 {
        self.params.w
    }

    pub fn epsilon(&self) -> f64 {
        self.params.epsilon
    }

    pub fn gamma_max(&self) -> f64 {
        self.params.gamma_max
    }

    pub fn lambda(&self) -> f64 {
        self.params.lambda
    }

    pub fn k_c(&self) -> usize {
        self.params.k_c
    }

    pub fn a_gamma(&self) -> f64 {
        self.params.a_gamma
    }

    pub fn b_gamma(&self) -> f64 {
        self.params.b_gamma
    }

    /// Duration of a slot in which nobody is backlogged.
    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn noise_dbm(&self) -> f64 {
        self.params.p_n
    }

    /// `-ln(1 - epsilon)`.
    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn slot_time(&self, gamma: f64) -> Result<f64> {
        slot_time(gamma, self.packet_bits(), self.bandwidth_hz())
    }
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self::new(SystemParams::default()).expect("default parameters are valid")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1e-300)
    }

    #[test]
    fn slot_time_examples() {
        // log2(32) = 5: 4000 / (1e6 * 5) = 0.8 ms
        assert!(close(slot_time(31.0, 4000, 1e6).unwrap(), 0.8e-3, 1e-12));
        assert!(close(slot_time(1.0, 1_000_000, 1e6).unwrap(), 1.0, 1e-12));
        let gamma: f64 = 1.0 / (0.39 * 50.0 + 0.78);
        let expected = 4000.0 / (1e6 * (1.0 + gamma).log2());
        let t = slot_time(gamma, 4000, 1e6).unwrap();
        assert!(close(t, expected, 1e-12));
        assert!((t - 57.6e-3).abs() < 0.05e-3, "T* = {t}");
    }

    #[test]
    fn slot_time_rejects_bad_inputs() {
        assert!(slot_time(0.0, 4000, 1e6).is_err());
        assert!(slot_time(-1.0, 4000, 1e6).is_err());
        assert!(slot_time(1.0, 0, 1e6).is_err());
        assert!(slot_time(1.0, 4000, 0.0).is_err());
    }

    #[test]
    fn target_snr_examples() {
        let c = -(0.9f64).ln();
        assert!(close(target_snr(31.0, 0.1).unwrap(), 31.0 / c, 1e-14));
        assert!((target_snr(31.0, 0.1).unwrap() - 294.23).abs() < 0.01);
        let gamma = 1.0 / 20.28;
        assert!((target_snr(gamma, 0.1).unwrap() - 0.46801).abs() < 1e-5);
        let eps = 1.0 - (-0.7f64).exp();
        assert!(close(target_snr(0.7, eps).unwrap(), 1.0, 1e-12));
    }

    #[test]
    fn target_snr_rejects_bad_epsilon() {
        assert!(target_snr(1.0, 0.0).is_err());
        assert!(target_snr(1.0, 1.0).is_err());
        assert!(target_snr(1.0, -0.2).is_err());
    }

    #[test]
    fn packet_length_units() {
        assert_eq!("500 B".parse::<PacketLength>().unwrap().bits(), 4000);
        assert_eq!("500bytes".parse::<PacketLength>().unwrap().bits(), 4000);
        assert_eq!("4000 bit".parse::<PacketLength>().unwrap().bits(), 4000);
        assert!("4000".parse::<PacketLength>().is_err());
        assert!("4000 kb".parse::<PacketLength>().is_err());
    }

    #[test]
    fn config_from_toml() {
        let cfg = SystemConfig::from_toml_str(
            r#"
            n = 50
            l = "500 B"
            w = 1e6
            epsilon = 0.1
            gamma_max = 31.0
            lambda = 100.0
            k_c = 6
            a_gamma = 0.39
            b_gamma = 0.78
            p_n = -107.0
            "#,
        )
        .unwrap();
        assert_eq!(cfg.packet_bits(), 4000);
        assert!(close(cfg.t0(), 0.8e-3, 1e-12));
        assert!(close(cfg.c(), 0.105_360_515_657_826_3, 1e-12));
        let back = SystemConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn config_rejects_unknown_keys_and_bad_values() {
        assert!(SystemConfig::from_toml_str("n = 50\nbogus = 1").is_err());
        let d = SystemParams::default;
        assert!(SystemConfig::new(SystemParams {
            epsilon: 1.0,
            ..d()
        })
        .is_err());
        assert!(SystemConfig::new(SystemParams { n: 0, ..d() }).is_err());
        assert!(SystemConfig::new(SystemParams {
            t_0: Some(0.0),
            ..d()
        })
        .is_err());
    }

    #[test]
    fn explicit_t0_overrides_default() {
        let p = SystemParams {
            t_0: Some(2e-3),
            ..SystemParams::default()
        };
        assert_eq!(SystemConfig::new(p).unwrap().t0(), 2e-3);
    }
}

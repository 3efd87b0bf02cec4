//! Dual-power pulse layout and per-PRI transmit vectors.
//!
//! One PRI is `M = H + N_r + L + S` chips: the high-power code, a recovery
//! gap, the low-power code and the silent listening period.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sequences::SequenceSet;
use crate::units::{dbm_to_watts, C0};

/// Physical and waveform parameters of the sensing pulse, in SI units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseConfig {
    /// High-power transmit power (W).
    pub p_high: f64,
    /// Low-power transmit power (W).
    pub p_low: f64,
    /// High-power code length `H` (chips).
    pub high_len: usize,
    /// Low-power code length `L` (chips).
    pub low_len: usize,
    /// Recovery gap `N_r` (chips).
    pub recovery_len: usize,
    /// Silent period `S` (chips).
    pub silent_len: usize,
    /// Chip duration `T_p` (s).
    pub chip_s: f64,
    /// Pulse repetition interval `T` (s).
    pub pri_s: f64,
    /// PRIs per CPI `K`.
    pub num_pri: usize,
    /// Carrier frequency (Hz).
    pub carrier_hz: f64,
    /// Bandwidth (Hz).
    pub bandwidth_hz: f64,
}

impl PulseConfig {
    /// The reference 28 GHz / 100 MHz configuration (M = 892, K = 32).
    pub fn table_one() -> Self {
        PulseSpec::default()
            .to_config()
            .expect("built-in configuration is valid")
    }

    /// Chips per PRI, `M`.
    pub fn total_len(&self) -> usize {
        self.high_len + self.recovery_len + self.low_len + self.silent_len
    }

    /// First chip sampled by the receiver, `H + N_r`.
    pub fn rx_on(&self) -> usize {
        self.high_len + self.recovery_len
    }

    /// Number of delay bins `N_r + L + S`.
    pub fn num_delay_bins(&self) -> usize {
        self.recovery_len + self.low_len + self.silent_len
    }

    pub fn wavelength(&self) -> f64 {
        C0 / self.carrier_hz
    }

    /// Range of one delay bin (m).
    pub fn range_per_bin(&self) -> f64 {
        C0 * self.chip_s / 2.0
    }

    /// Energy-weighted code gain `P_h·H + P_l·L`.
    pub fn full_energy(&self) -> f64 {
        self.p_high * self.high_len as f64 + self.p_low * self.low_len as f64
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.high_len == 0 || self.low_len == 0 {
            return fail("code lengths must be positive".into());
        }
        if self.low_len > self.high_len {
            return fail(format!("L={} exceeds H={}", self.low_len, self.high_len));
        }
        if self.silent_len <= self.high_len + self.recovery_len + self.low_len {
            return fail(format!(
                "silent period S={} must exceed H+N_r+L={}",
                self.silent_len,
                self.high_len + self.recovery_len + self.low_len
            ));
        }
        if self.num_pri == 0 || self.num_pri % 4 != 0 {
            return fail(format!("K={} must be a positive multiple of 4", self.num_pri));
        }
        if !(self.p_low > 0.0 && self.p_high >= self.p_low) {
            return fail(format!(
                "powers must satisfy P_h >= P_l > 0 (got {} W, {} W)",
                self.p_high, self.p_low
            ));
        }
        if !(self.chip_s > 0.0 && self.pri_s > 0.0 && self.carrier_hz > 0.0 && self.bandwidth_hz > 0.0) {
            return fail("timing and frequency parameters must be positive".into());
        }
        if self.pri_s < self.total_len() as f64 * self.chip_s * (1.0 - 1e-9) {
            return fail("PRI shorter than the sensing symbol".into());
        }
        Ok(())
    }
}

/// File form of [`PulseConfig`]: powers in dBm, durations in µs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PulseSpec {
    pub carrier_frequency_ghz: f64,
    pub bandwidth_mhz: f64,
    pub pri_us: f64,
    pub num_pri: usize,
    pub p_high_dbm: f64,
    pub p_low_dbm: f64,
    pub symbol_duration_us: f64,
    pub high_duration_us: f64,
    pub low_duration_us: f64,
    #[serde(default)]
    pub recovery_duration_us: f64,
    /// Defaults to `1/B`.
    #[serde(default)]
    pub chip_duration_us: Option<f64>,
}

impl Default for PulseSpec {
    fn default() -> Self {
        Self {
            carrier_frequency_ghz: 28.0,
            bandwidth_mhz: 100.0,
            pri_us: 125.0,
            num_pri: 32,
            p_high_dbm: 53.0,
            p_low_dbm: 35.0,
            symbol_duration_us: 8.92,
            high_duration_us: 1.28,
            low_duration_us: 0.64,
            recovery_duration_us: 0.0,
            chip_duration_us: Some(0.01),
        }
    }
}

fn chips_in(duration_us: f64, chip_us: f64, what: &str) -> Result<usize> {
    let n = duration_us / chip_us;
    let r = n.round();
    if r < 0.0 || (n - r).abs() > 1e-6 * r.max(1.0) {
        return Err(Error::Config(format!(
            "{what} of {duration_us} µs is not a whole number of {chip_us} µs chips"
        )));
    }
    Ok(r as usize)
}

impl PulseSpec {
    pub fn to_config(&self) -> Result<PulseConfig> {
        let chip_us = self.chip_duration_us.unwrap_or(1.0 / self.bandwidth_mhz);
        if !(chip_us > 0.0) {
            return Err(Error::Config("chip duration must be positive".into()));
        }
        let high_len = chips_in(self.high_duration_us, chip_us, "high-power duration")?;
        let low_len = chips_in(self.low_duration_us, chip_us, "low-power duration")?;
        let recovery_len = chips_in(self.recovery_duration_us, chip_us, "recovery duration")?;
        let total = chips_in(self.symbol_duration_us, chip_us, "symbol duration")?;
        let used = high_len + low_len + recovery_len;
        if total <= used {
            return Err(Error::Config("symbol too short for the pulse".into()));
        }
        let cfg = PulseConfig {
            p_high: dbm_to_watts(self.p_high_dbm),
            p_low: dbm_to_watts(self.p_low_dbm),
            high_len,
            low_len,
            recovery_len,
            silent_len: total - used,
            chip_s: chip_us * 1e-6,
            pri_s: self.pri_us * 1e-6,
            num_pri: self.num_pri,
            carrier_hz: self.carrier_frequency_ghz * 1e9,
            bandwidth_hz: self.bandwidth_mhz * 1e6,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Amplitude-scaled transmit chips of one PRI.
#[derive(Debug, Clone, PartialEq)]
pub struct TransmitPri {
    pub chips: Vec<Complex64>,
    pub pri_index: usize,
}

impl TransmitPri {
    pub fn energy(&self) -> f64 {
        self.chips.iter().map(|c| c.norm_sqr()).sum()
    }
}

/// Transmit vector for PRI `k`, drawing codes from `set` cyclically.
pub fn build_pri(config: &PulseConfig, set: &SequenceSet, k: usize) -> Result<TransmitPri> {
    if k >= config.num_pri {
        return Err(Error::Index {
            index: k,
            limit: config.num_pri,
        });
    }
    if set.high_len() != config.high_len || set.low_len() != config.low_len {
        return Err(Error::LengthMismatch {
            expected: config.high_len,
            actual: set.high_len(),
        });
    }
    let codes = set.pulse_for_pri(k);
    let (ah, al) = (config.p_high.sqrt(), config.p_low.sqrt());
    let mut chips = vec![Complex64::new(0.0, 0.0); config.total_len()];
    for (dst, c) in chips.iter_mut().zip(codes.high.chips()) {
        *dst = c * ah;
    }
    let low_start = config.rx_on();
    for (dst, c) in chips[low_start..].iter_mut().zip(codes.low.chips()) {
        *dst = c * al;
    }
    Ok(TransmitPri { chips, pri_index: k })
}

/// Fraction of symbols spent on sensing when one sensing symbol is
/// inserted every `symbols_per_slot` symbols.
pub fn frame_overhead(symbols_per_slot: usize) -> Result<f64> {
    if symbols_per_slot == 0 {
        return Err(Error::Domain("symbols_per_slot must be at least 1".into()));
    }
    Ok(1.0 / symbols_per_slot as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sequences::build_sequence_set;

    #[test]
    fn table_one_dimensions() {
        let c = PulseConfig::table_one();
        assert_eq!((c.high_len, c.low_len, c.recovery_len), (128, 64, 0));
        assert_eq!(c.total_len(), 892);
        assert_eq!(c.silent_len, 700);
        assert_eq!(c.num_delay_bins(), 764);
        assert!((c.wavelength() - 0.010_706_873_5).abs() < 1e-9);
    }

    #[test]
    fn table_one_layout_k0() {
        let c = PulseConfig::table_one();
        let s = build_sequence_set(128, 64).unwrap();
        let x = build_pri(&c, &s, 0).unwrap();
        let (ah, al) = (c.p_high.sqrt(), c.p_low.sqrt());
        for (i, v) in x.chips.iter().enumerate() {
            let expect = match i {
                0..=127 => ah,
                128..=191 => al,
                _ => 0.0,
            };
            assert!((v.norm() - expect).abs() < 1e-12, "chip {i}");
        }
        let e = c.p_high * 128.0 + c.p_low * 64.0;
        assert!((x.energy() - e).abs() < 1e-9 * e);
    }

    #[test]
    fn recovery_gap_is_silent() {
        let mut c = PulseConfig::table_one();
        c.recovery_len = 5;
        c.silent_len = 695;
        let s = build_sequence_set(128, 64).unwrap();
        let x = build_pri(&c, &s, 1).unwrap();
        assert!(x.chips[128..133].iter().all(|v| v.norm() == 0.0));
        assert!(x.chips[133].norm() > 0.0);
        assert!(x.chips[197..].iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn third_pri_negates_low_code() {
        let c = PulseConfig::table_one();
        let s = build_sequence_set(128, 64).unwrap();
        let x0 = build_pri(&c, &s, 0).unwrap();
        let x2 = build_pri(&c, &s, 2).unwrap();
        assert_eq!(x0.chips[..128], x2.chips[..128]);
        for i in 128..192 {
            assert_eq!(x2.chips[i], -x0.chips[i]);
        }
    }

    #[test]
    fn equal_powers_give_uniform_pulse() {
        let mut c = PulseConfig::table_one();
        c.p_low = c.p_high;
        c.validate().unwrap();
        let s = build_sequence_set(128, 64).unwrap();
        let x = build_pri(&c, &s, 3).unwrap();
        let a = c.p_high.sqrt();
        assert!(x.chips[..192].iter().all(|v| (v.norm() - a).abs() < 1e-12));
    }

    #[test]
    fn out_of_range_pri_is_rejected() {
        let c = PulseConfig::table_one();
        let s = build_sequence_set(128, 64).unwrap();
        assert!(matches!(build_pri(&c, &s, 32), Err(Error::Index { .. })));
    }

    #[test]
    fn overhead() {
        assert!((frame_overhead(14).unwrap() - 0.071_428_571_428_571_43).abs() < 1e-15);
        assert_eq!(frame_overhead(1).unwrap(), 1.0);
        assert!((frame_overhead(28).unwrap() - 0.035_714_285_714_285_71).abs() < 1e-15);
        assert!(frame_overhead(0).is_err());
    }

    #[test]
    fn validation_catches_bad_layouts() {
        let mut c = PulseConfig::table_one();
        c.num_pri = 30;
        assert!(c.validate().is_err());
        let mut c = PulseConfig::table_one();
        c.silent_len = 100;
        assert!(c.validate().is_err());
    }

    #[test]
    fn spec_parses_from_toml() {
        let text = r#"
            carrier_frequency_ghz = 28
            bandwidth_mhz = 100
            pri_us = 125
            num_pri = 32
            p_high_dbm = 53
            p_low_dbm = 35
            symbol_duration_us = 8.92
            high_duration_us = 1.28
            low_duration_us = 0.64
        "#;
        let spec: PulseSpec = toml::from_str(text).unwrap();
        assert_eq!(spec.to_config().unwrap(), PulseConfig::table_one());
    }
}

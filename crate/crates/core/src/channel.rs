//! Received-signal model: delayed Doppler-shifted echoes, windowed residual
//! self-interference and thermal noise, gated to the receive window.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::{db_to_linear, dbsm_to_m2, sic_db_to_beta_sq, C0};
use crate::waveform::{PulseConfig, TransmitPri};

/// A point target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Target {
    pub range_m: f64,
    /// Radial velocity, positive when closing.
    pub velocity_mps: f64,
    pub rcs_m2: f64,
}

impl Target {
    pub fn new(range_m: f64, velocity_mps: f64, rcs_dbsm: f64) -> Self {
        Self {
            range_m,
            velocity_mps,
            rcs_m2: dbsm_to_m2(rcs_dbsm),
        }
    }

    /// Target placed exactly on delay bin `n`.
    pub fn at_bin(n: usize, pcfg: &PulseConfig, velocity_mps: f64, rcs_dbsm: f64) -> Self {
        Self::new(n as f64 * pcfg.range_per_bin(), velocity_mps, rcs_dbsm)
    }

    /// Round-trip delay in chips (unrounded).
    pub fn delay_chips(&self, pcfg: &PulseConfig) -> f64 {
        2.0 * self.range_m / (C0 * pcfg.chip_s)
    }

    /// Nearest delay bin; must fall in `1..=N_r+L+S`.
    pub fn delay_bin(&self, pcfg: &PulseConfig) -> Result<usize> {
        if !(self.range_m > 0.0) {
            return Err(Error::Domain(format!("target range {} m must be positive", self.range_m)));
        }
        let n = self.delay_chips(pcfg).round();
        let limit = pcfg.num_delay_bins();
        if n < 1.0 || n > limit as f64 {
            return Err(Error::Domain(format!(
                "target at {} m maps to delay bin {n}, outside 1..={limit}",
                self.range_m
            )));
        }
        Ok(n as usize)
    }

    /// Doppler shift `2 v f_c / c0` (Hz).
    pub fn doppler_hz(&self, pcfg: &PulseConfig) -> f64 {
        2.0 * self.velocity_mps * pcfg.carrier_hz / C0
    }
}

/// Antenna, noise and self-interference parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelConfig {
    /// Linear transmit gain.
    pub tx_gain: f64,
    /// Linear receive gain.
    pub rx_gain: f64,
    pub wavelength_m: f64,
    /// Noise power spectral density (W/Hz).
    pub n0_w_per_hz: f64,
    pub noise_figure_db: f64,
    /// SIC capability; `inf` removes self-interference entirely.
    pub sic_db: f64,
    pub rng_seed: u64,
    /// Interpolate echoes at fractional delays instead of snapping to bins.
    #[serde(default)]
    pub fractional_delay: bool,
}

impl ChannelConfig {
    /// 20 dBi antennas, -174 dBm/Hz, 5 dB noise figure.
    pub fn table_one(pcfg: &PulseConfig, sic_db: f64) -> Self {
        Self {
            tx_gain: 100.0,
            rx_gain: 100.0,
            wavelength_m: pcfg.wavelength(),
            n0_w_per_hz: db_to_linear(-174.0 - 30.0),
            noise_figure_db: 5.0,
            sic_db,
            rng_seed: 0,
            fractional_delay: false,
        }
    }

    /// `|β|²`.
    pub fn beta_sq(&self) -> f64 {
        sic_db_to_beta_sq(self.sic_db)
    }

    /// Per-sample noise power `N0·B·NF` (W).
    pub fn noise_power(&self, pcfg: &PulseConfig) -> f64 {
        self.n0_w_per_hz * pcfg.bandwidth_hz * db_to_linear(self.noise_figure_db)
    }

    /// `G_t G_r λ² / (4π)³`, the range- and RCS-free part of the radar equation.
    pub fn radar_constant(&self) -> f64 {
        self.tx_gain * self.rx_gain * self.wavelength_m.powi(2) / (4.0 * PI).powi(3)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.tx_gain > 0.0
            && self.rx_gain > 0.0
            && self.wavelength_m > 0.0
            && self.n0_w_per_hz > 0.0
            && self.noise_figure_db.is_finite()
            && !self.sic_db.is_nan();
        if ok {
            Ok(())
        } else {
            Err(Error::Config("channel gains, wavelength and noise PSD must be positive".into()))
        }
    }
}

/// Two-way power gain `|α|² = G_t G_r λ² σ / ((4π)³ R⁴)`.
pub fn channel_gain(target: &Target, cfg: &ChannelConfig) -> Result<f64> {
    if !(target.range_m > 0.0) {
        return Err(Error::Domain(format!("target range {} m must be positive", target.range_m)));
    }
    Ok(cfg.radar_constant() * target.rcs_m2 / target.range_m.powi(4))
}

/// Per-CPI echo parameters of one target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Echo {
    /// Delay in chips; integral unless fractional delays are enabled.
    pub delay: f64,
    pub doppler_hz: f64,
    /// Complex amplitude, with the CPI's random phase.
    pub alpha: Complex64,
}

/// Draws the random initial phase of each target for one CPI.
pub fn draw_echoes<R: Rng + ?Sized>(
    targets: &[Target],
    cfg: &ChannelConfig,
    pcfg: &PulseConfig,
    rng: &mut R,
) -> Result<Vec<Echo>> {
    targets
        .iter()
        .map(|t| {
            let bin = t.delay_bin(pcfg)?;
            let delay = if cfg.fractional_delay {
                t.delay_chips(pcfg)
            } else {
                bin as f64
            };
            let phase = rng.random::<f64>() * 2.0 * PI;
            let amp = channel_gain(t, cfg)?.sqrt();
            Ok(Echo {
                delay,
                doppler_hz: t.doppler_hz(pcfg),
                alpha: Complex64::from_polar(amp, phase),
            })
        })
        .collect()
}

/// One PRI of gated receive samples.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceivedPri {
    pub samples: Vec<Complex64>,
    pub pri_index: usize,
}

/// Adds independent `CN(0, power)` samples to every element of `buf`.
pub fn add_complex_noise<R: Rng + ?Sized>(
    buf: &mut [Complex64],
    power: f64,
    rng: &mut R,
) {
    if power <= 0.0 {
        return;
    }
    let s = (power / 2.0).sqrt();
    for v in buf {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        *v += Complex64::new(re * s, im * s);
    }
}

/// Adds `gain · x[i - delay]` to `out[i]` for every `i`, interpolating linearly
/// for fractional delays.
pub fn add_delayed(out: &mut [Complex64], x: &[Complex64], delay: f64, gain: Complex64) {
    let whole = delay.floor();
    let frac = delay - whole;
    let d = whole as isize;
    let m = out.len() as isize;
    let get = |j: isize| -> Complex64 {
        if j >= 0 && (j as usize) < x.len() {
            x[j as usize]
        } else {
            Complex64::new(0.0, 0.0)
        }
    };
    let lo = d.max(0);
    let hi = (d + x.len() as isize + 1).min(m);
    for i in lo..hi {
        let j = i - d;
        let v = if frac == 0.0 {
            get(j)
        } else {
            get(j) * (1.0 - frac) + get(j - 1) * frac
        };
        out[i as usize] += gain * v;
    }
}

/// Slow-time phase `e^{j2π f_d k T}` of an echo in PRI `k`.
pub fn doppler_phase(e: &Echo, k: usize, pri_s: f64) -> Complex64 {
    Complex64::from_polar(1.0, 2.0 * PI * e.doppler_hz * k as f64 * pri_s)
}

/// Adds every echo of `chips` (delayed, truncated at `out.len()`) for PRI `k`.
pub fn add_echoes(out: &mut [Complex64], chips: &[Complex64], k: usize, echoes: &[Echo], pri_s: f64) {
    for e in echoes {
        add_delayed(out, chips, e.delay, e.alpha * doppler_phase(e, k, pri_s));
    }
}

/// Received samples for one PRI.
///
/// Echoes are the full transmit vector delayed and truncated at `M`; the
/// receiver is blanked before chip `H + N_r`. Self-interference of power
/// `|β|² P_l` occupies the low-power window and noise covers the whole
/// receive window.
pub fn simulate_rx<R: Rng + ?Sized>(
    pulse: &TransmitPri,
    echoes: &[Echo],
    cfg: &ChannelConfig,
    pcfg: &PulseConfig,
    rng: &mut R,
) -> ReceivedPri {
    let m = pcfg.total_len();
    let on = pcfg.rx_on();
    let k = pulse.pri_index;
    let mut samples = vec![Complex64::new(0.0, 0.0); m];
    add_echoes(&mut samples, &pulse.chips, k, echoes, pcfg.pri_s);
    samples[..on].fill(Complex64::new(0.0, 0.0));
    add_complex_noise(
        &mut samples[on..on + pcfg.low_len],
        cfg.beta_sq() * pcfg.p_low,
        rng,
    );
    add_complex_noise(&mut samples[on..], cfg.noise_power(pcfg), rng);
    ReceivedPri { samples, pri_index: k }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sequences::build_sequence_set;
    use crate::waveform::build_pri;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn table_one() -> (PulseConfig, ChannelConfig) {
        let p = PulseConfig::table_one();
        let c = ChannelConfig::table_one(&p, 110.0);
        (p, c)
    }

    #[test]
    fn radar_equation_at_600m() {
        let (_, c) = table_one();
        let lambda = C0 / 28e9;
        let expect = 100.0 * 100.0 * lambda * lambda * 0.1 / ((4.0 * PI).powi(3) * 600f64.powi(4));
        let t = Target::new(600.0, 0.0, -10.0);
        let g = channel_gain(&t, &c).unwrap();
        assert!((g - expect).abs() < 1e-12 * expect);
        assert!((g - 4.458e-16).abs() < 0.001e-16);
    }

    #[test]
    fn radar_equation_scaling() {
        let (_, c) = table_one();
        let zero = Target { range_m: 50.0, velocity_mps: 0.0, rcs_m2: 0.0 };
        assert_eq!(channel_gain(&zero, &c).unwrap(), 0.0);
        let a = channel_gain(&Target::new(300.0, 0.0, 0.0), &c).unwrap();
        let b = channel_gain(&Target::new(600.0, 0.0, 0.0), &c).unwrap();
        assert!((a / b - 16.0).abs() < 1e-12);
        assert!(channel_gain(&Target::new(0.0, 0.0, 0.0), &c).is_err());
    }

    #[test]
    fn delay_bins() {
        let (p, _) = table_one();
        assert_eq!(Target::new(600.0, 0.0, 0.0).delay_bin(&p).unwrap(), 400);
        assert_eq!(Target::at_bin(17, &p, 0.0, 0.0).delay_bin(&p).unwrap(), 17);
        assert!(Target::new(1200.0, 0.0, 0.0).delay_bin(&p).is_err());
        assert!(Target::new(0.2, 0.0, 0.0).delay_bin(&p).is_err());
    }

    #[test]
    fn noise_only_is_gated() {
        let (p, mut c) = table_one();
        c.sic_db = f64::INFINITY;
        let s = build_sequence_set(128, 64).unwrap();
        let x = build_pri(&p, &s, 0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let y = simulate_rx(&x, &[], &c, &p, &mut rng);
        assert!(y.samples[..128].iter().all(|v| v.norm() == 0.0));
        assert!(y.samples[128..].iter().all(|v| v.norm() > 0.0));
    }

    #[test]
    fn seeded_runs_are_identical() {
        let (p, c) = table_one();
        let s = build_sequence_set(128, 64).unwrap();
        let x = build_pri(&p, &s, 5).unwrap();
        let targets = [Target::new(100.0, 12.0, 0.0)];
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let e = draw_echoes(&targets, &c, &p, &mut rng).unwrap();
            simulate_rx(&x, &e, &c, &p, &mut rng)
        };
        assert_eq!(run(9), run(9));
        assert_ne!(run(9), run(10));
    }

    #[test]
    fn integer_delay_matches_shift() {
        let x: Vec<Complex64> = (0..6).map(|i| Complex64::new(i as f64 + 1.0, 0.0)).collect();
        let mut out = vec![Complex64::new(0.0, 0.0); 8];
        add_delayed(&mut out, &x, 3.0, Complex64::new(1.0, 0.0));
        let re: Vec<f64> = out.iter().map(|v| v.re).collect();
        assert_eq!(re, vec![0.0, 0.0, 0.0, 1.0, 2.0, 3.0, 4.0, 5.0]);
    }

    #[test]
    fn fractional_delay_interpolates() {
        let x = vec![Complex64::new(1.0, 0.0); 4];
        let mut out = vec![Complex64::new(0.0, 0.0); 8];
        add_delayed(&mut out, &x, 1.25, Complex64::new(1.0, 0.0));
        let re: Vec<f64> = out.iter().map(|v| v.re).collect();
        assert_eq!(re, vec![0.0, 0.75, 1.0, 1.0, 1.0, 0.25, 0.0, 0.0]);
    }
}

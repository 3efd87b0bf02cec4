//! Comparison waveforms: a half-duplex LFM pulse radar and a continuous
//! OFDM-style sensing waveform, both feeding the same Doppler and detection
//! stack as the dual-power pulse.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{
    add_complex_noise, add_delayed, add_echoes, doppler_phase, draw_echoes, ChannelConfig, Target,
};
use crate::detection::{CfarConfig, DetectionReport};
use crate::error::{Error, Result};
use crate::pipeline::{nearest_doppler_bin, Detector, DopplerProcessing, SensingChain, TrialRng};
use crate::receiver::{rd_map, FastTimeMatrix, FftCorrelator, RdAxes, RdMap};
use crate::waveform::PulseConfig;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Half-duplex LFM pulse parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LfmConfig {
    pub duration_s: f64,
    pub bandwidth_hz: f64,
    pub power_w: f64,
    /// Transmit power during the silent period; the receiver then stays
    /// on and sees `|β|²` times this as self-interference.
    #[serde(default)]
    pub comm_fill_power_w: Option<f64>,
}

impl LfmConfig {
    /// Same duration, bandwidth and peak power as the high-power sequence.
    pub fn matched_to(pcfg: &PulseConfig) -> Self {
        Self {
            duration_s: pcfg.high_len as f64 * pcfg.chip_s,
            bandwidth_hz: pcfg.bandwidth_hz,
            power_w: pcfg.p_high,
            comm_fill_power_w: None,
        }
    }

    pub fn num_chips(&self, pcfg: &PulseConfig) -> usize {
        (self.duration_s / pcfg.chip_s).round() as usize
    }

    pub fn validate(&self, pcfg: &PulseConfig) -> Result<()> {
        if !(self.power_w > 0.0 && self.bandwidth_hz > 0.0 && self.duration_s > 0.0) {
            return Err(Error::Config("LFM power, bandwidth and duration must be positive".into()));
        }
        if self.duration_s * self.bandwidth_hz < 10.0 {
            return Err(Error::Config(format!(
                "LFM time-bandwidth product {} is too small",
                self.duration_s * self.bandwidth_hz
            )));
        }
        let n = self.num_chips(pcfg);
        if n + pcfg.recovery_len >= pcfg.total_len() {
            return Err(Error::Config(format!("LFM pulse of {n} chips does not fit the PRI")));
        }
        if let Some(p) = self.comm_fill_power_w {
            if !(p >= 0.0) {
                return Err(Error::Config(format!("comm fill power {p} must be non-negative")));
            }
        }
        Ok(())
    }

    /// Chirp samples at the chip rate, sweeping `[-B/2, B/2]`.
    pub fn chirp(&self, pcfg: &PulseConfig) -> Vec<Complex64> {
        let n = self.num_chips(pcfg);
        let rate = self.bandwidth_hz * pcfg.chip_s / n as f64;
        let amp = self.power_w.sqrt();
        (0..n)
            .map(|i| {
                let t = i as f64 - n as f64 / 2.0;
                Complex64::from_polar(amp, PI * rate * t * t)
            })
            .collect()
    }

    /// Minimum range `c₀ (T_h + T_r) / 2` of the gated receiver.
    pub fn blind_range_m(&self, pcfg: &PulseConfig) -> f64 {
        (self.num_chips(pcfg) + pcfg.recovery_len) as f64 * pcfg.range_per_bin()
    }
}

/// Continuous known-signal sensing parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OfdmSensingConfig {
    /// Continuous transmit power.
    pub power_w: f64,
}

impl OfdmSensingConfig {
    /// Transmit power defaults to the low-power level.
    pub fn matched_to(pcfg: &PulseConfig) -> Self {
        Self { power_w: pcfg.p_low }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.power_w > 0.0) {
            return Err(Error::Config(format!("OFDM power {} must be positive", self.power_w)));
        }
        Ok(())
    }
}

fn check_bins(pcfg: &PulseConfig, doppler: &DopplerProcessing) -> Result<()> {
    pcfg.validate()?;
    if doppler.fft_size(pcfg.num_pri) < pcfg.num_pri {
        return Err(Error::Config("Doppler FFT shorter than K".into()));
    }
    Ok(())
}

/// Half-duplex LFM pulse radar. Range gates inside the blind range are
/// reported as empty.
pub struct LfmChain {
    pub pulse: PulseConfig,
    pub channel: ChannelConfig,
    pub lfm: LfmConfig,
    pub doppler: DopplerProcessing,
    chips: Vec<Complex64>,
    engine: FftCorrelator,
    spectrum: Vec<Complex64>,
}

impl LfmChain {
    pub fn new(pulse: PulseConfig, channel: ChannelConfig, lfm: LfmConfig, doppler: DopplerProcessing) -> Result<Self> {
        check_bins(&pulse, &doppler)?;
        channel.validate()?;
        lfm.validate(&pulse)?;
        let chirp = lfm.chirp(&pulse);
        let mut chips = vec![ZERO; pulse.total_len()];
        chips[..chirp.len()].copy_from_slice(&chirp);
        let engine = FftCorrelator::new((pulse.total_len() + chirp.len()).next_power_of_two());
        let spectrum = engine.filter_spectrum(&chirp, 0);
        Ok(Self { pulse, channel, lfm, doppler, chips, engine, spectrum })
    }

    fn gate(&self) -> usize {
        self.lfm.num_chips(&self.pulse) + self.pulse.recovery_len
    }

    fn transmit_pri(&self, rng: &mut TrialRng) -> Vec<Complex64> {
        let mut x = self.chips.clone();
        if let Some(p) = self.lfm.comm_fill_power_w {
            let gate = self.gate();
            fill_qpsk(&mut x[gate..], p, rng);
        }
        x
    }

    pub fn fast_time(&self, targets: &[Target], rng: &mut TrialRng) -> Result<FastTimeMatrix> {
        let echoes = draw_echoes(targets, &self.channel, &self.pulse, rng)?;
        let bins = self.pulse.num_delay_bins();
        let gate = self.gate();
        let n = self.lfm.num_chips(&self.pulse);
        let norm = (self.lfm.power_w * n as f64).sqrt();
        let mut d = FastTimeMatrix::zeros(bins, self.pulse.num_pri);
        for k in 0..self.pulse.num_pri {
            let x = self.transmit_pri(rng);
            let mut y = vec![ZERO; self.pulse.total_len()];
            add_echoes(&mut y, &x, k, &echoes, self.pulse.pri_s);
            y[..gate].fill(ZERO);
            if let Some(p) = self.lfm.comm_fill_power_w {
                add_complex_noise(&mut y[gate..], self.channel.beta_sq() * p, rng);
            }
            add_complex_noise(&mut y[gate..], self.channel.noise_power(&self.pulse), rng);
            let yf = self.engine.transform(&y);
            let mut r = self.engine.correlate(&yf, &self.spectrum, 1..bins + 1);
            for (i, v) in r.iter_mut().enumerate() {
                *v = if i + 1 < gate { ZERO } else { *v / norm };
            }
            d.set_column(k, &r);
        }
        Ok(d)
    }

    pub fn axes(&self) -> RdAxes {
        RdAxes::from_config(&self.pulse, self.doppler.fft_size(self.pulse.num_pri))
    }
}

impl SensingChain for LfmChain {
    fn run_cpi(&self, targets: &[Target], rng: &mut TrialRng) -> Result<RdMap> {
        let d = self.fast_time(targets, rng)?;
        rd_map(&d, self.doppler.fft_size(self.pulse.num_pri), self.doppler.window, self.axes())
    }

    fn delay_bin(&self, target: &Target) -> Result<usize> {
        target.delay_bin(&self.pulse)
    }

    fn doppler_bin(&self, target: &Target) -> isize {
        nearest_doppler_bin(target, &self.pulse, self.doppler.fft_size(self.pulse.num_pri))
    }
}

/// Unit-modulus QPSK samples scaled to `power`.
fn fill_qpsk<R: Rng + ?Sized>(buf: &mut [Complex64], power: f64, rng: &mut R) {
    let a = (power / 2.0).sqrt();
    for v in buf {
        let bits: u8 = rng.random_range(0..4);
        let re = if bits & 1 == 0 { a } else { -a };
        let im = if bits & 2 == 0 { a } else { -a };
        *v = Complex64::new(re, im);
    }
}

/// Continuous OFDM-style sensing: a random QPSK stream is transmitted
/// without gaps, each PRI window of `M` samples is correlated against the
/// known transmit stream, and residual self-interference covers the whole
/// window.
pub struct OfdmChain {
    pub pulse: PulseConfig,
    pub channel: ChannelConfig,
    pub ofdm: OfdmSensingConfig,
    pub doppler: DopplerProcessing,
    engine: FftCorrelator,
}

impl OfdmChain {
    pub fn new(
        pulse: PulseConfig,
        channel: ChannelConfig,
        ofdm: OfdmSensingConfig,
        doppler: DopplerProcessing,
    ) -> Result<Self> {
        check_bins(&pulse, &doppler)?;
        channel.validate()?;
        ofdm.validate()?;
        let m = pulse.total_len();
        let engine = FftCorrelator::new((2 * m + pulse.num_delay_bins()).next_power_of_two());
        Ok(Self { pulse, channel, ofdm, doppler, engine })
    }

    pub fn fast_time(&self, targets: &[Target], rng: &mut TrialRng) -> Result<FastTimeMatrix> {
        let echoes = draw_echoes(targets, &self.channel, &self.pulse, rng)?;
        let m = self.pulse.total_len();
        let bins = self.pulse.num_delay_bins();
        let k_total = self.pulse.num_pri;
        // Stream with `bins` samples of history before the first window.
        let mut stream = vec![ZERO; bins + k_total * m];
        fill_qpsk(&mut stream, self.ofdm.power_w, rng);
        let norm = (self.ofdm.power_w * m as f64).sqrt();
        let rsi = self.channel.beta_sq() * self.ofdm.power_w;
        let noise = self.channel.noise_power(&self.pulse);
        let mut d = FastTimeMatrix::zeros(bins, k_total);
        for k in 0..k_total {
            // reference[j] is the stream sample sent at window time j - bins.
            let reference = &stream[k * m..k * m + bins + m];
            let mut y = vec![ZERO; m];
            for e in &echoes {
                let g = e.alpha * doppler_phase(e, k, self.pulse.pri_s);
                // Echo at window sample i is reference[i + bins - delay].
                add_delayed(&mut y, reference, e.delay - bins as f64, g);
            }
            add_complex_noise(&mut y, rsi, rng);
            add_complex_noise(&mut y, noise, rng);
            // c[lag] = Σ conj(y[i]) ref[i + lag]; r[n] = conj(c[bins - n]).
            let rf = self.engine.transform(reference);
            let ys = self.engine.filter_spectrum(&y, 0);
            let c = self.engine.correlate(&rf, &ys, 0..bins);
            let r: Vec<Complex64> = (1..=bins).map(|n| c[bins - n].conj() / norm).collect();
            d.set_column(k, &r);
        }
        Ok(d)
    }

    pub fn axes(&self) -> RdAxes {
        RdAxes::from_config(&self.pulse, self.doppler.fft_size(self.pulse.num_pri))
    }
}

impl SensingChain for OfdmChain {
    fn run_cpi(&self, targets: &[Target], rng: &mut TrialRng) -> Result<RdMap> {
        let d = self.fast_time(targets, rng)?;
        rd_map(&d, self.doppler.fft_size(self.pulse.num_pri), self.doppler.window, self.axes())
    }

    fn delay_bin(&self, target: &Target) -> Result<usize> {
        target.delay_bin(&self.pulse)
    }

    fn doppler_bin(&self, target: &Target) -> isize {
        nearest_doppler_bin(target, &self.pulse, self.doppler.fft_size(self.pulse.num_pri))
    }
}

/// One LFM CPI followed by detection.
pub fn lfm_pipeline(
    targets: &[Target],
    chain: &LfmChain,
    cfar: &CfarConfig,
    detector: Detector,
    rng: &mut TrialRng,
) -> Result<(RdMap, DetectionReport)> {
    let map = chain.run_cpi(targets, rng)?;
    let rep = detector.detect(&map, cfar)?;
    Ok((map, rep))
}

/// One OFDM CPI followed by detection.
pub fn ofdm_pipeline(
    targets: &[Target],
    chain: &OfdmChain,
    cfar: &CfarConfig,
    detector: Detector,
    rng: &mut TrialRng,
) -> Result<(RdMap, DetectionReport)> {
    let map = chain.run_cpi(targets, rng)?;
    let rep = detector.detect(&map, cfar)?;
    Ok((map, rep))
}

/// Analytic minimum detectable RCS (m²) of the gated LFM pulse at delay bin
/// `n` for RD-map SNR threshold `rho`; `None` inside the blind range.
pub fn lfm_min_rcs(n: usize, pcfg: &PulseConfig, ccfg: &ChannelConfig, lfm: &LfmConfig, rho: f64) -> Option<f64> {
    let chips = lfm.num_chips(pcfg);
    if n < chips + pcfg.recovery_len || n == 0 {
        return None;
    }
    let range = n as f64 * pcfg.range_per_bin();
    let floor = ccfg.noise_power(pcfg) + lfm.comm_fill_power_w.map_or(0.0, |p| ccfg.beta_sq() * p);
    let per_sigma = pcfg.num_pri as f64 * ccfg.radar_constant() / range.powi(4) * lfm.power_w * chips as f64 / floor;
    Some(rho / per_sigma)
}

/// Analytic minimum detectable RCS (m²) of continuous sensing at delay bin `n`.
pub fn ofdm_min_rcs(n: usize, pcfg: &PulseConfig, ccfg: &ChannelConfig, ofdm: &OfdmSensingConfig, rho: f64) -> f64 {
    let range = n as f64 * pcfg.range_per_bin();
    let floor = ccfg.noise_power(pcfg) + ccfg.beta_sq() * ofdm.power_w;
    let per_sigma = pcfg.num_pri as f64 * ccfg.radar_constant() / range.powi(4)
        * ofdm.power_w
        * pcfg.total_len() as f64
        / floor;
    rho / per_sigma
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::trial_rng;

    fn setup(sic: f64) -> (PulseConfig, ChannelConfig) {
        let p = PulseConfig::table_one();
        let c = ChannelConfig::table_one(&p, sic);
        (p, c)
    }

    fn quiet(p: &PulseConfig, sic: f64) -> ChannelConfig {
        ChannelConfig { n0_w_per_hz: 1e-40, ..ChannelConfig::table_one(p, sic) }
    }

    #[test]
    fn chirp_is_unit_modulus_and_spans_the_band() {
        let p = PulseConfig::table_one();
        let lfm = LfmConfig::matched_to(&p);
        let c = lfm.chirp(&p);
        assert_eq!(c.len(), 128);
        assert!(c.iter().all(|v| (v.norm_sqr() - p.p_high).abs() < 1e-9));
        // Instantaneous frequency (cycles/chip) runs from about -1/2 to 1/2.
        let f0 = (c[1] * c[0].conj()).arg() / (2.0 * PI);
        let f1 = (c[127] * c[126].conj()).arg() / (2.0 * PI);
        assert!(f0 < -0.45 && f1 > 0.45, "{f0} {f1}");
        assert!((lfm.blind_range_m(&p) - 191.9).abs() < 0.1);
    }

    #[test]
    fn lfm_blind_range_has_no_response() {
        let (p, c) = setup(110.0);
        let chain = LfmChain::new(p.clone(), c, LfmConfig::matched_to(&p), DopplerProcessing::default()).unwrap();
        let cfar = CfarConfig::default();
        for n in [20, 100, 127] {
            let t = Target::at_bin(n, &p, 0.0, 0.0);
            let (map, rep) = lfm_pipeline(&[t], &chain, &cfar, Detector::Hierarchical, &mut trial_rng(1, 0)).unwrap();
            assert!(map.power[..127 * map.cols].iter().all(|&v| v == 0.0), "bin {n}");
            assert!(!crate::pipeline::target_hit(&chain, &rep, &t, map.cols, 1).unwrap());
        }
    }

    #[test]
    fn lfm_detects_600m_target() {
        let (p, c) = setup(110.0);
        let chain = LfmChain::new(p.clone(), c, LfmConfig::matched_to(&p), DopplerProcessing::default()).unwrap();
        let t = Target::new(600.0, 0.0, 0.0);
        let (map, rep) = lfm_pipeline(&[t], &chain, &CfarConfig::default(), Detector::Hierarchical, &mut trial_rng(3, 0)).unwrap();
        assert!(crate::pipeline::target_hit(&chain, &rep, &t, map.cols, 1).unwrap());
    }

    #[test]
    fn lfm_peak_matches_energy() {
        let (p, _) = setup(110.0);
        let c = quiet(&p, f64::INFINITY);
        let chain = LfmChain::new(p.clone(), c.clone(), LfmConfig::matched_to(&p), DopplerProcessing::default()).unwrap();
        let t = Target::at_bin(400, &p, 0.0, 0.0);
        let map = chain.run_cpi(&[t], &mut trial_rng(0, 0)).unwrap();
        let alpha_sq = crate::channel::channel_gain(&t, &c).unwrap();
        let expect = 32.0 * alpha_sq * p.p_high * 128.0;
        let got = map.get(399, map.zero_col());
        assert!((got / expect - 1.0).abs() < 1e-9, "{got} vs {expect}");
    }

    #[test]
    fn ofdm_peak_matches_energy_and_has_no_blind_range() {
        let (p, _) = setup(110.0);
        let c = quiet(&p, f64::INFINITY);
        let o = OfdmSensingConfig::matched_to(&p);
        let chain = OfdmChain::new(p.clone(), c.clone(), o, DopplerProcessing::default()).unwrap();
        for n in [3, 50, 400] {
            let t = Target::at_bin(n, &p, 0.0, 0.0);
            let map = chain.run_cpi(&[t], &mut trial_rng(0, n as u64)).unwrap();
            let alpha_sq = crate::channel::channel_gain(&t, &c).unwrap();
            let expect = 32.0 * alpha_sq * p.p_low * 892.0;
            let got = map.get(n - 1, map.zero_col());
            assert!((got / expect - 1.0).abs() < 1e-9, "bin {n}: {got} vs {expect}");
        }
    }

    #[test]
    fn ofdm_floor_without_rsi_is_thermal() {
        let (p, _) = setup(110.0);
        let c = ChannelConfig::table_one(&p, f64::INFINITY);
        let chain = OfdmChain::new(p.clone(), c.clone(), OfdmSensingConfig::matched_to(&p), DopplerProcessing::default()).unwrap();
        let map = chain.run_cpi(&[], &mut trial_rng(5, 0)).unwrap();
        let mean = map.power.iter().sum::<f64>() / map.power.len() as f64;
        assert!((mean / c.noise_power(&p) - 1.0).abs() < 0.05, "{mean}");
        let with_rsi = OfdmChain::new(p.clone(), ChannelConfig::table_one(&p, 100.0), OfdmSensingConfig::matched_to(&p), DopplerProcessing::default()).unwrap();
        let map = with_rsi.run_cpi(&[], &mut trial_rng(5, 0)).unwrap();
        let mean = map.power.iter().sum::<f64>() / map.power.len() as f64;
        let floor = c.noise_power(&p) + 1e-10 * p.p_low;
        assert!((mean / floor - 1.0).abs() < 0.05, "{mean} vs {floor}");
    }

    #[test]
    fn analytic_baselines() {
        let (p, c) = setup(110.0);
        let lfm = LfmConfig::matched_to(&p);
        assert!(lfm_min_rcs(100, &p, &c, &lfm, 31.6).is_none());
        let s = lfm_min_rcs(400, &p, &c, &lfm, 1.0).unwrap();
        let r = 400.0 * p.range_per_bin();
        let snr = 32.0 * c.radar_constant() * s / r.powi(4) * p.p_high * 128.0 / c.noise_power(&p);
        assert!((snr - 1.0).abs() < 1e-12);
        let o = OfdmSensingConfig::matched_to(&p);
        let lo = ofdm_min_rcs(67, &p, &ChannelConfig::table_one(&p, 120.0), &o, 31.6);
        let hi = ofdm_min_rcs(67, &p, &ChannelConfig::table_one(&p, 100.0), &o, 31.6);
        // Floor ratio (N0BF + 3.16e-10) / (N0BF + 3.16e-12).
        let n0 = c.noise_power(&p);
        let expect = (n0 + 1e-10 * p.p_low) / (n0 + 1e-12 * p.p_low);
        assert!((hi / lo / expect - 1.0).abs() < 1e-12);
    }
}

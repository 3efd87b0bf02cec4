//! End-to-end CPI simulation: transmit, channel, fast-time filtering,
//! Doppler processing and detection.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{draw_echoes, simulate_rx, ChannelConfig, Target};
use crate::detection::{cfar_2d, hierarchical_detect, CfarConfig, DetectionReport};
use crate::error::{Error, Result};
use crate::metrics::MetricModel;
use crate::receiver::{
    combine, rd_map, DopplerWindow, FastCorrelator, FastTimeMatrix, RdAxes, RdMap, WeightProfile,
};
use crate::sequences::SequenceSet;
use crate::units::dbsm_to_m2;
use crate::waveform::{build_pri, PulseConfig, TransmitPri};

pub type TrialRng = ChaCha8Rng;

/// Independent RNG stream for Monte Carlo trial `index` under `seed`.
pub fn trial_rng(seed: u64, index: u64) -> TrialRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// How the low-power branch is weighted. Written as `optimal`,
/// `designed:<dBsm>`, `fixed:<w>`, `high_only` or `low_only`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum WeightMode {
    /// Closed-form optimal weight per delay bin, designed for the minimum
    /// detectable RCS of each bin.
    Optimal,
    /// Optimal weight designed for a fixed RCS (dBsm) in the eclipsed bins.
    Designed(f64),
    Fixed(f64),
    /// `w = 0`.
    HighOnly,
    /// `w = ∞`.
    LowOnly,
}

impl WeightMode {
    pub fn profile(&self, model: &MetricModel) -> Result<WeightProfile> {
        let bins = model.params.num_delay_bins();
        match *self {
            WeightMode::Optimal => model.optimal_profile(),
            WeightMode::Designed(dbsm) => model.designed_profile(dbsm_to_m2(dbsm)),
            WeightMode::Fixed(w) => WeightProfile::constant(bins, w),
            WeightMode::HighOnly => WeightProfile::constant(bins, 0.0),
            WeightMode::LowOnly => WeightProfile::constant(bins, f64::INFINITY),
        }
    }

    pub fn label(&self) -> String {
        match self {
            WeightMode::Optimal => "optimal".into(),
            WeightMode::Designed(s) => format!("designed:{s}"),
            WeightMode::Fixed(w) => format!("fixed:{w}"),
            WeightMode::HighOnly => "high_only".into(),
            WeightMode::LowOnly => "low_only".into(),
        }
    }
}

impl std::str::FromStr for WeightMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "optimal" => Ok(WeightMode::Optimal),
            "high_only" | "high-only" => Ok(WeightMode::HighOnly),
            "low_only" | "low-only" => Ok(WeightMode::LowOnly),
            other if other.starts_with("designed:") => {
                let dbsm: f64 = other["designed:".len()..]
                    .parse()
                    .map_err(|_| Error::Config(format!("bad design RCS in '{s}'")))?;
                if !dbsm.is_finite() {
                    return Err(Error::Config(format!("design RCS {dbsm} must be finite")));
                }
                Ok(WeightMode::Designed(dbsm))
            }
            other => {
                let w: f64 = other
                    .strip_prefix("fixed:")
                    .unwrap_or(other)
                    .parse()
                    .map_err(|_| Error::Config(format!("unknown weight mode '{s}'")))?;
                if w.is_nan() || w < 0.0 {
                    return Err(Error::Config(format!("fixed weight {w} must be non-negative")));
                }
                Ok(WeightMode::Fixed(w))
            }
        }
    }
}

impl TryFrom<String> for WeightMode {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<WeightMode> for String {
    fn from(m: WeightMode) -> String {
        m.label()
    }
}

/// Slow-time processing options.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DopplerProcessing {
    /// Doppler FFT size; `None` uses `K`.
    #[serde(default)]
    pub m_fft: Option<usize>,
    #[serde(default)]
    pub window: DopplerWindow,
}

impl Default for DopplerProcessing {
    fn default() -> Self {
        Self { m_fft: None, window: DopplerWindow::Rectangular }
    }
}

impl DopplerProcessing {
    pub fn fft_size(&self, num_pri: usize) -> usize {
        self.m_fft.unwrap_or(num_pri)
    }
}

/// A sensing chain that turns targets into an RD map for one CPI.
pub trait SensingChain: Sync {
    fn run_cpi(&self, targets: &[Target], rng: &mut TrialRng) -> Result<RdMap>;

    /// Delay bin of `target` in this chain's map.
    fn delay_bin(&self, target: &Target) -> Result<usize>;

    /// Signed Doppler bin of `target` in this chain's map.
    fn doppler_bin(&self, target: &Target) -> isize;
}

/// Signed Doppler bin nearest to `target`'s Doppler shift.
pub fn nearest_doppler_bin(target: &Target, pcfg: &PulseConfig, m_fft: usize) -> isize {
    let bins = target.doppler_hz(pcfg) * pcfg.pri_s * m_fft as f64;
    // Same column layout as the RD map: indices start at -(M_FFT-1)/2.
    let lo = -(((m_fft - 1) / 2) as isize);
    (bins.round() as isize - lo).rem_euclid(m_fft as isize) + lo
}

/// The dual-power pulse with the weighted two-branch receiver.
pub struct ProposalChain {
    pub pulse: PulseConfig,
    pub channel: ChannelConfig,
    pub weights: WeightProfile,
    pub doppler: DopplerProcessing,
    pris: Vec<TransmitPri>,
    correlator: FastCorrelator,
}

impl ProposalChain {
    pub fn new(
        pulse: PulseConfig,
        channel: ChannelConfig,
        set: &SequenceSet,
        weights: WeightProfile,
        doppler: DopplerProcessing,
    ) -> Result<Self> {
        pulse.validate()?;
        channel.validate()?;
        if weights.len() != pulse.num_delay_bins() {
            return Err(Error::LengthMismatch { expected: pulse.num_delay_bins(), actual: weights.len() });
        }
        let pris = (0..pulse.num_pri)
            .map(|k| build_pri(&pulse, set, k))
            .collect::<Result<Vec<_>>>()?;
        let correlator = FastCorrelator::new(set, &pulse);
        Ok(Self { pulse, channel, weights, doppler, pris, correlator })
    }

    pub fn axes(&self) -> RdAxes {
        RdAxes::from_config(&self.pulse, self.doppler.fft_size(self.pulse.num_pri))
    }

    /// Weighted fast-time outputs for one CPI.
    pub fn fast_time(&self, targets: &[Target], rng: &mut TrialRng) -> Result<FastTimeMatrix> {
        let echoes = draw_echoes(targets, &self.channel, &self.pulse, rng)?;
        let mut d = FastTimeMatrix::zeros(self.pulse.num_delay_bins(), self.pulse.num_pri);
        for (k, x) in self.pris.iter().enumerate() {
            let y = simulate_rx(x, &echoes, &self.channel, &self.pulse, rng);
            let branches = self.correlator.correlate(&y.samples, k);
            d.set_column(k, &combine(&branches, &self.weights, &self.pulse)?);
        }
        Ok(d)
    }
}

impl SensingChain for ProposalChain {
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

/// Detector applied to RD maps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Detector {
    Hierarchical,
    Cfar2d,
}

impl Detector {
    pub fn detect(&self, map: &RdMap, cfg: &CfarConfig) -> Result<DetectionReport> {
        match self {
            Detector::Hierarchical => hierarchical_detect(map, cfg),
            Detector::Cfar2d => cfar_2d(map, cfg),
        }
    }
}

/// Whether `report` contains `target` within `tol` bins on both axes.
pub fn target_hit(
    chain: &dyn SensingChain,
    report: &DetectionReport,
    target: &Target,
    cols: usize,
    tol: usize,
) -> Result<bool> {
    Ok(report.hits(chain.delay_bin(target)?, chain.doppler_bin(target), cols, tol))
}

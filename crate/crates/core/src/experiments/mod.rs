//! Scenario ingestion and Monte Carlo experiment runners.
//!
//! A [`ScenarioConfig`] is read from TOML, resolved into a [`Scenario`] of
//! validated SI-unit configurations, and handed to one of the runners in
//! [`runs`]. Every runner is a pure function of the scenario: trial `i`
//! draws from stream `i` of a ChaCha generator keyed by the experiment seed,
//! so results do not depend on thread count or scheduling.

pub mod output;
pub mod runs;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::baselines::{LfmChain, LfmConfig, OfdmChain, OfdmSensingConfig};
use crate::channel::{ChannelConfig, Target};
use crate::detection::CfarConfig;
use crate::error::{Error, Result};
use crate::metrics::{MetricModel, MetricParams};
use crate::pipeline::{Detector, DopplerProcessing, ProposalChain, SensingChain, WeightMode};
use crate::sequences::{build_sequence_set, SequenceSet};
use crate::units::{db_to_linear, dbm_to_watts};
use crate::waveform::{PulseConfig, PulseSpec};

pub use output::{write_run, ExperimentResult, Provenance};
pub use runs::run;

/// Experiment selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Rdmap,
    PdVsRange,
    MinRcs,
    MultiTarget,
    DetectorCompare,
    MetricSweep,
    SequenceVerify,
}

impl std::str::FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let v = serde_json::Value::String(s.replace('-', "_"));
        serde_json::from_value(v).map_err(|_| Error::Config(format!("unknown experiment '{s}'")))
    }
}

/// Sensing waveform under test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Waveform {
    Proposal,
    Lfm,
    Ofdm,
}

impl Waveform {
    pub fn label(self) -> &'static str {
        match self {
            Waveform::Proposal => "proposal",
            Waveform::Lfm => "lfm",
            Waveform::Ofdm => "ofdm",
        }
    }
}

/// Channel parameters in configuration units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelSpec {
    pub sic_db: f64,
    pub tx_gain: f64,
    pub rx_gain: f64,
    pub n0_dbm_per_hz: f64,
    pub noise_figure_db: f64,
    pub fractional_delay: bool,
}

impl Default for ChannelSpec {
    fn default() -> Self {
        Self {
            sic_db: 110.0,
            tx_gain: 100.0,
            rx_gain: 100.0,
            n0_dbm_per_hz: -174.0,
            noise_figure_db: 5.0,
            fractional_delay: false,
        }
    }
}

impl ChannelSpec {
    pub fn to_config(&self, pcfg: &PulseConfig) -> Result<ChannelConfig> {
        let c = ChannelConfig {
            tx_gain: self.tx_gain,
            rx_gain: self.rx_gain,
            wavelength_m: pcfg.wavelength(),
            n0_w_per_hz: dbm_to_watts(self.n0_dbm_per_hz),
            noise_figure_db: self.noise_figure_db,
            sic_db: self.sic_db,
            rng_seed: 0,
            fractional_delay: self.fractional_delay,
        };
        c.validate()?;
        Ok(c)
    }
}

/// Point target in configuration units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSpec {
    /// Range in metres; ignored when `delay_bin` is given.
    #[serde(default)]
    pub range_m: Option<f64>,
    /// Place the target exactly on this delay bin.
    #[serde(default)]
    pub delay_bin: Option<usize>,
    #[serde(default)]
    pub velocity_mps: f64,
    pub rcs_dbsm: f64,
}

impl TargetSpec {
    pub fn to_target(&self, pcfg: &PulseConfig) -> Result<Target> {
        match (self.delay_bin, self.range_m) {
            (Some(n), _) => Ok(Target::at_bin(n, pcfg, self.velocity_mps, self.rcs_dbsm)),
            (None, Some(r)) if r > 0.0 => Ok(Target::new(r, self.velocity_mps, self.rcs_dbsm)),
            _ => Err(Error::Config("target needs a positive range_m or a delay_bin".into())),
        }
    }
}

/// Range grid of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RangeGrid {
    pub start_m: f64,
    pub stop_m: f64,
    pub points: usize,
}

impl RangeGrid {
    pub fn ranges(&self) -> Vec<f64> {
        if self.points <= 1 {
            return vec![self.start_m];
        }
        let step = (self.stop_m - self.start_m) / (self.points - 1) as f64;
        (0..self.points).map(|i| self.start_m + step * i as f64).collect()
    }
}

/// Experiment controls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_weight_mode")]
    pub weight_mode: WeightMode,
    /// Extra weight modes compared by sweeps.
    #[serde(default)]
    pub compare_weight_modes: Vec<WeightMode>,
    #[serde(default = "default_detector")]
    pub detector: Detector,
    #[serde(default = "default_waveform")]
    pub waveform: Waveform,
    /// Baseline compared against the proposal in multi-target runs.
    #[serde(default)]
    pub baseline: Option<Waveform>,
    /// Design metric threshold ρ (dB).
    #[serde(default = "default_rho_db")]
    pub rho_db: f64,
    /// Range sweeps; defaults depend on the experiment.
    #[serde(default)]
    pub range_grid: Option<RangeGrid>,
    /// Explicit range list; takes precedence over `range_grid`.
    #[serde(default)]
    pub ranges_m: Option<Vec<f64>>,
    /// RCS of the swept target (dBsm) for range sweeps.
    #[serde(default = "default_sweep_rcs")]
    pub rcs_dbsm: f64,
    /// Velocity of the swept target.
    #[serde(default)]
    pub velocity_mps: f64,
    /// SIC levels for min-RCS sweeps; defaults to the channel's.
    #[serde(default)]
    pub sic_levels_db: Vec<f64>,
    /// Also estimate σ* by Monte Carlo at these ranges.
    #[serde(default)]
    pub monte_carlo_ranges_m: Vec<f64>,
    /// Detection probability defining σ* and maximum range.
    #[serde(default = "default_pd_target")]
    pub pd_target: f64,
    /// Hit tolerance in bins on both axes.
    #[serde(default = "default_tolerance")]
    pub tolerance_bins: usize,
    #[serde(default)]
    pub doppler: DopplerProcessing,
    #[serde(default)]
    pub lfm: Option<LfmConfig>,
    #[serde(default)]
    pub ofdm: Option<OfdmSensingConfig>,
    /// Write RD maps as binary files where the experiment produces them.
    #[serde(default)]
    pub save_maps: bool,
    /// Target-free CPIs used to calibrate each detector's threshold factor
    /// to `p_fa` in detector comparisons; 0 keeps the analytic factor.
    #[serde(default = "default_calibration_trials")]
    pub calibration_trials: usize,
}

fn default_trials() -> usize {
    200
}
fn default_weight_mode() -> WeightMode {
    WeightMode::Optimal
}
fn default_detector() -> Detector {
    Detector::Hierarchical
}
fn default_waveform() -> Waveform {
    Waveform::Proposal
}
fn default_rho_db() -> f64 {
    15.0
}
fn default_sweep_rcs() -> f64 {
    -10.0
}
fn default_pd_target() -> f64 {
    0.9
}
fn default_tolerance() -> usize {
    1
}
fn default_calibration_trials() -> usize {
    400
}

impl ExperimentSpec {
    pub fn new(kind: ExperimentKind) -> Self {
        Self {
            kind,
            trials: default_trials(),
            seed: 0,
            weight_mode: default_weight_mode(),
            compare_weight_modes: Vec::new(),
            detector: default_detector(),
            waveform: default_waveform(),
            baseline: None,
            rho_db: default_rho_db(),
            range_grid: None,
            ranges_m: None,
            rcs_dbsm: default_sweep_rcs(),
            velocity_mps: 0.0,
            sic_levels_db: Vec::new(),
            monte_carlo_ranges_m: Vec::new(),
            pd_target: default_pd_target(),
            tolerance_bins: default_tolerance(),
            doppler: DopplerProcessing::default(),
            lfm: None,
            ofdm: None,
            save_maps: false,
            calibration_trials: default_calibration_trials(),
        }
    }
}

/// Complete scenario as read from a TOML file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub pulse: PulseSpec,
    #[serde(default)]
    pub channel: ChannelSpec,
    #[serde(default)]
    pub cfar: CfarConfig,
    #[serde(default)]
    pub targets: Vec<TargetSpec>,
    pub experiment: ExperimentSpec,
}

impl ScenarioConfig {
    /// Table-I scenario for `kind` with default controls.
    pub fn table_one(kind: ExperimentKind) -> Self {
        Self {
            pulse: PulseSpec::default(),
            channel: ChannelSpec::default(),
            cfar: CfarConfig::default(),
            targets: Vec::new(),
            experiment: ExperimentSpec::new(kind),
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let c: Self = toml::from_str(s)?;
        c.validate()?;
        Ok(c)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("cannot serialize scenario: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        let e = &self.experiment;
        if e.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if let WeightMode::Fixed(w) = e.weight_mode {
            if w.is_nan() || w < 0.0 {
                return Err(Error::Config(format!("fixed weight {w} must be non-negative")));
            }
        }
        if !(e.pd_target > 0.0 && e.pd_target < 1.0) {
            return Err(Error::Config(format!("pd_target {} must lie in (0, 1)", e.pd_target)));
        }
        if let Some(g) = &e.range_grid {
            if !(g.start_m > 0.0 && g.stop_m >= g.start_m && g.points >= 1) {
                return Err(Error::Config("range grid needs 0 < start <= stop and points >= 1".into()));
            }
        }
        self.cfar.validate()?;
        self.resolve().map(|_| ())
    }

    /// Validated SI-unit configuration.
    pub fn resolve(&self) -> Result<Scenario> {
        let pulse = self.pulse.to_config()?;
        pulse.validate()?;
        let channel = self.channel.to_config(&pulse)?;
        let targets = self
            .targets
            .iter()
            .map(|t| t.to_target(&pulse))
            .collect::<Result<Vec<_>>>()?;
        for t in &targets {
            t.delay_bin(&pulse)?;
        }
        Ok(Scenario {
            pulse,
            channel,
            cfar: self.cfar.clone(),
            targets,
            spec: self.experiment.clone(),
        })
    }
}

/// Resolved scenario ready to run.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub pulse: PulseConfig,
    pub channel: ChannelConfig,
    pub cfar: CfarConfig,
    pub targets: Vec<Target>,
    pub spec: ExperimentSpec,
}

impl Scenario {
    pub fn sequence_set(&self) -> Result<SequenceSet> {
        build_sequence_set(self.pulse.high_len, self.pulse.low_len)
    }

    /// Analytic model at the scenario's channel, or at `channel` if given.
    pub fn model(&self, set: &SequenceSet, channel: Option<&ChannelConfig>) -> Result<MetricModel> {
        let params = MetricParams::new(
            &self.pulse,
            channel.unwrap_or(&self.channel),
            &self.cfar,
            self.spec.rho_db,
        );
        MetricModel::new(params, set)
    }

    /// Threshold ρ as a linear ratio.
    pub fn rho(&self) -> f64 {
        db_to_linear(self.spec.rho_db)
    }

    pub fn lfm_config(&self) -> LfmConfig {
        self.spec.lfm.clone().unwrap_or_else(|| LfmConfig::matched_to(&self.pulse))
    }

    pub fn ofdm_config(&self) -> OfdmSensingConfig {
        self.spec.ofdm.clone().unwrap_or_else(|| OfdmSensingConfig::matched_to(&self.pulse))
    }

    /// Sensing chain of `waveform` at `channel`; the proposal uses `mode`.
    pub fn chain(
        &self,
        waveform: Waveform,
        mode: WeightMode,
        channel: &ChannelConfig,
        set: &SequenceSet,
    ) -> Result<Box<dyn SensingChain>> {
        let doppler = self.spec.doppler;
        Ok(match waveform {
            Waveform::Proposal => {
                let model = self.model(set, Some(channel))?;
                let weights = mode.profile(&model)?;
                Box::new(ProposalChain::new(self.pulse.clone(), channel.clone(), set, weights, doppler)?)
            }
            Waveform::Lfm => Box::new(LfmChain::new(self.pulse.clone(), channel.clone(), self.lfm_config(), doppler)?),
            Waveform::Ofdm => Box::new(OfdmChain::new(self.pulse.clone(), channel.clone(), self.ofdm_config(), doppler)?),
        })
    }

    /// Doppler FFT size.
    pub fn m_fft(&self) -> usize {
        self.spec.doppler.fft_size(self.pulse.num_pri)
    }

    /// Sweep ranges: explicit list, then grid, then `default`.
    pub fn ranges(&self, default: RangeGrid) -> Vec<f64> {
        if let Some(r) = &self.spec.ranges_m {
            return r.clone();
        }
        self.spec.range_grid.clone().unwrap_or(default).ranges()
    }

    /// Channel copy at another SIC level.
    pub fn channel_at_sic(&self, sic_db: f64) -> ChannelConfig {
        ChannelConfig { sic_db, ..self.channel.clone() }
    }
}

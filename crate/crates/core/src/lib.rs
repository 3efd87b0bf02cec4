//! Chip-level simulation of a dual-power phase-coded sensing waveform for
//! integrated sensing and communication.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod channel;
pub mod detection;
pub mod error;
pub mod experiments;
pub mod metrics;
pub mod pipeline;
pub mod receiver;
pub mod sequences;
pub mod stats;
pub mod units;
pub mod waveform;

pub use baselines::{lfm_pipeline, ofdm_pipeline, LfmChain, LfmConfig, OfdmChain, OfdmSensingConfig};
pub use channel::{channel_gain, simulate_rx, ChannelConfig, Echo, ReceivedPri, Target};
pub use error::{Error, Result};
pub use sequences::{
    acf, build_sequence_set, ccf, golay_pair, verify_set, ChipSequence, ComplementaryPair,
    Correlation, PulseCodes, SequenceSet, SetReport,
};
pub use waveform::{build_pri, frame_overhead, PulseConfig, PulseSpec, TransmitPri};
pub use detection::{
    alpha_for_rate, analytic_alpha, cfar_2d, hierarchical_detect, CfarConfig, Detection,
    DetectionReport,
};
pub use metrics::{MetricModel, MetricParams, MinRcs, Region};
pub use pipeline::{trial_rng, Detector, DopplerProcessing, ProposalChain, SensingChain, WeightMode};
pub use receiver::{DopplerWindow, RdMap, WeightProfile};
pub use experiments::{ExperimentKind, ScenarioConfig, Waveform};
pub use stats::{wilson, Proportion};

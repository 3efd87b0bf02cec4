//! Experiment runners. Each returns a typed payload; persistence lives in
//! [`super::output`].

use rayon::prelude::*;
use serde::Serialize;

use super::output::{ExperimentResult, Payload, Provenance};
use super::{ExperimentKind, RangeGrid, Scenario, ScenarioConfig, Waveform};
use crate::baselines::{lfm_min_rcs, ofdm_min_rcs};
use crate::channel::{ChannelConfig, Target};
use crate::detection::{
    alpha_for_rate, cfar_2d, cfar_2d_statistics, hierarchical_detect, hierarchical_statistics, DetectionReport,
};
use crate::error::{Error, Result};
use crate::metrics::paslr;
use crate::pipeline::{target_hit, trial_rng, Detector, SensingChain, WeightMode};
use crate::receiver::RdMap;
use crate::sequences::{verify_set, SequenceSet, SetReport};
use crate::stats::{wilson, Proportion, Z95};
use crate::units::{linear_to_db, m2_to_dbsm};

/// Runs the experiment selected by `cfg`.
pub fn run(cfg: &ScenarioConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let s = cfg.resolve()?;
    let payload = match s.spec.kind {
        ExperimentKind::Rdmap => Payload::Rdmap(run_rdmap(&s)?),
        ExperimentKind::PdVsRange => Payload::PdVsRange(run_pd_vs_range(&s)?),
        ExperimentKind::MinRcs => Payload::MinRcs(run_min_rcs(&s)?),
        ExperimentKind::MultiTarget => Payload::MultiTarget(run_multi_target(&s)?),
        ExperimentKind::DetectorCompare => Payload::DetectorCompare(run_detector_compare(&s)?),
        ExperimentKind::MetricSweep => Payload::MetricSweep(run_metric_sweep(&s)?),
        ExperimentKind::SequenceVerify => Payload::SequenceVerify(run_sequence_verify(&s)?),
    };
    Ok(ExperimentResult { provenance: Provenance::of(cfg)?, payload })
}

/// RNG stream of trial `trial` at sweep point `point`. Streams are shared
/// across weight modes and detectors so comparisons see the same noise.
pub fn point_stream(point: usize, trial: usize) -> u64 {
    ((point as u64) << 32) | trial as u64
}

/// Runs `f` for every trial in parallel; output order follows trial index.
fn per_trial<T: Send>(trials: usize, f: impl Fn(usize) -> Result<T> + Sync) -> Result<Vec<T>> {
    (0..trials).into_par_iter().map(&f).collect()
}

/// Whether a target's delay bin exists in the map.
fn check_target(chain: &dyn SensingChain, t: &Target) -> Result<()> {
    chain.delay_bin(t).map(|_| ())
}

// ---------------------------------------------------------------- rdmap

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TargetOutcome {
    pub index: usize,
    pub range_m: f64,
    pub delay_bin: usize,
    pub doppler_bin: isize,
    pub rcs_dbsm: f64,
    pub hits: usize,
    pub trials: usize,
    /// Majority of trials hit.
    pub detected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RdmapOutput {
    pub waveform: Waveform,
    pub weight_mode: WeightMode,
    pub detector: Detector,
    pub report: DetectionReport,
    pub targets: Vec<TargetOutcome>,
    #[serde(skip)]
    pub map: RdMap,
}

/// One CPI (trial 0 of the seed) through the selected waveform and detector.
pub fn run_rdmap(s: &Scenario) -> Result<RdmapOutput> {
    let set = s.sequence_set()?;
    let chain = s.chain(s.spec.waveform, s.spec.weight_mode, &s.channel, &set)?;
    let mut rng = trial_rng(s.spec.seed, 0);
    let map = chain.run_cpi(&s.targets, &mut rng)?;
    let report = s.spec.detector.detect(&map, &s.cfar)?;
    let targets = s
        .targets
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let hit = target_hit(chain.as_ref(), &report, t, map.cols, s.spec.tolerance_bins)?;
            Ok(TargetOutcome {
                index: i,
                range_m: t.range_m,
                delay_bin: chain.delay_bin(t)?,
                doppler_bin: chain.doppler_bin(t),
                rcs_dbsm: m2_to_dbsm(t.rcs_m2),
                hits: hit as usize,
                trials: 1,
                detected: hit,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RdmapOutput {
        waveform: s.spec.waveform,
        weight_mode: s.spec.weight_mode,
        detector: s.spec.detector,
        report,
        targets,
        map,
    })
}

// ---------------------------------------------------------- pd_vs_range

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PdPoint {
    pub range_m: f64,
    pub delay_bin: usize,
    pub pd: Proportion,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PdCurve {
    pub label: String,
    pub waveform: Waveform,
    pub weight_mode: Option<WeightMode>,
    pub detector: Detector,
    pub points: Vec<PdPoint>,
    pub summary: CurveSummary,
}

/// Shape of a detection curve against a target probability.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveSummary {
    pub pd_target: f64,
    /// Range of the last point meeting the target, if any.
    pub max_range_m: Option<f64>,
    /// Index of the first point of the final run of failing points
    /// (the far-range roll-off); `points.len()` when the last point passes.
    pub rolloff_index: usize,
    /// Failing points before the roll-off.
    pub dead_zone_ranges_m: Vec<f64>,
}

pub fn summarize(points: &[PdPoint], pd_target: f64) -> CurveSummary {
    let pass = |p: &PdPoint| p.pd.estimate >= pd_target;
    let rolloff_index = points.iter().rposition(pass).map_or(0, |i| i + 1);
    CurveSummary {
        pd_target,
        max_range_m: rolloff_index.checked_sub(1).map(|i| points[i].range_m),
        rolloff_index,
        dead_zone_ranges_m: points[..rolloff_index]
            .iter()
            .filter(|p| !pass(p))
            .map(|p| p.range_m)
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PdOutput {
    pub sic_db: f64,
    pub rcs_dbsm: f64,
    pub velocity_mps: f64,
    pub trials: usize,
    pub tolerance_bins: usize,
    pub curves: Vec<PdCurve>,
}

/// Default sweep: 40 points from 10 m to the last delay bin.
fn default_pd_grid(s: &Scenario) -> RangeGrid {
    let far = (s.pulse.num_delay_bins() as f64 - 2.0) * s.pulse.range_per_bin();
    RangeGrid { start_m: 10.0, stop_m: far, points: 40 }
}

/// Hits of `chain` on a swept target, per range point, with each detector.
fn sweep_hits(
    s: &Scenario,
    chain: &dyn SensingChain,
    ranges: &[f64],
    rcs_dbsm: f64,
    detectors: &[Detector],
) -> Result<Vec<(PdPointBase, Vec<usize>)>> {
    let trials = s.spec.trials;
    ranges
        .iter()
        .enumerate()
        .map(|(pi, &r)| {
            let t = Target::new(r, s.spec.velocity_mps, rcs_dbsm);
            check_target(chain, &t)?;
            let cols = s.m_fft();
            let outcomes = per_trial(trials, |i| {
                let mut rng = trial_rng(s.spec.seed, point_stream(pi, i));
                let map = chain.run_cpi(&[t], &mut rng)?;
                detectors
                    .iter()
                    .map(|d| target_hit(chain, &d.detect(&map, &s.cfar)?, &t, cols, s.spec.tolerance_bins))
                    .collect::<Result<Vec<bool>>>()
            })?;
            let hits = (0..detectors.len())
                .map(|d| outcomes.iter().filter(|o| o[d]).count())
                .collect();
            Ok((PdPointBase { range_m: r, delay_bin: chain.delay_bin(&t)? }, hits))
        })
        .collect()
}

struct PdPointBase {
    range_m: f64,
    delay_bin: usize,
}

fn curve(
    label: String,
    waveform: Waveform,
    mode: Option<WeightMode>,
    detector: Detector,
    base: &[(PdPointBase, Vec<usize>)],
    which: usize,
    s: &Scenario,
) -> PdCurve {
    let points: Vec<PdPoint> = base
        .iter()
        .map(|(b, hits)| PdPoint {
            range_m: b.range_m,
            delay_bin: b.delay_bin,
            pd: wilson(hits[which], s.spec.trials, Z95),
        })
        .collect();
    let summary = summarize(&points, s.spec.pd_target);
    PdCurve { label, waveform, weight_mode: mode, detector, points, summary }
}

/// Detection probability against range for the proposal under each
/// requested weight mode, plus the baseline if one is configured.
pub fn run_pd_vs_range(s: &Scenario) -> Result<PdOutput> {
    let set = s.sequence_set()?;
    let ranges = s.ranges(default_pd_grid(s));
    let mut curves = Vec::new();
    let det = s.spec.detector;
    let mut run_one = |waveform: Waveform, mode: Option<WeightMode>| -> Result<()> {
        let chain = s.chain(waveform, mode.unwrap_or(WeightMode::Optimal), &s.channel, &set)?;
        let base = sweep_hits(s, chain.as_ref(), &ranges, s.spec.rcs_dbsm, &[det])?;
        let label = match mode {
            Some(m) => format!("{}:{}", waveform.label(), m.label()),
            None => waveform.label().to_string(),
        };
        curves.push(curve(label, waveform, mode, det, &base, 0, s));
        Ok(())
    };
    match s.spec.waveform {
        Waveform::Proposal => {
            let mut modes = vec![s.spec.weight_mode];
            modes.extend(s.spec.compare_weight_modes.iter().copied().filter(|m| *m != s.spec.weight_mode));
            for m in modes {
                run_one(Waveform::Proposal, Some(m))?;
            }
        }
        w => run_one(w, None)?,
    }
    if let Some(b) = s.spec.baseline.filter(|b| *b != s.spec.waveform) {
        run_one(b, (b == Waveform::Proposal).then_some(s.spec.weight_mode))?;
    }
    Ok(PdOutput {
        sic_db: s.channel.sic_db,
        rcs_dbsm: s.spec.rcs_dbsm,
        velocity_mps: s.spec.velocity_mps,
        trials: s.spec.trials,
        tolerance_bins: s.spec.tolerance_bins,
        curves,
    })
}

// -------------------------------------------------------------- min_rcs

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MinRcsRow {
    pub sic_db: f64,
    pub delay_bin: usize,
    pub range_m: f64,
    pub region: &'static str,
    /// Proposal with the optimal weight.
    pub proposal_dbsm: f64,
    pub proposal_weight: f64,
    /// Proposal with `w = 0`; `None` when sidelobes cap the metric below ρ.
    pub high_only_dbsm: Option<f64>,
    /// Proposal with `w = 1`.
    pub matched_dbsm: Option<f64>,
    /// LFM pulse; `None` in its blind range.
    pub lfm_dbsm: Option<f64>,
    pub ofdm_dbsm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McMinRcsPoint {
    pub sic_db: f64,
    pub range_m: f64,
    pub delay_bin: usize,
    pub analytic_dbsm: f64,
    /// RCS where the empirical P_d crosses the target; `None` if the
    /// bracket never crosses.
    pub monte_carlo_dbsm: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MinRcsOutput {
    pub rho_db: f64,
    pub rows: Vec<MinRcsRow>,
    pub monte_carlo: Vec<McMinRcsPoint>,
}

fn sic_levels(s: &Scenario) -> Vec<f64> {
    if s.spec.sic_levels_db.is_empty() {
        vec![s.channel.sic_db]
    } else {
        s.spec.sic_levels_db.clone()
    }
}

/// Minimum detectable RCS of the proposal and both baselines at every delay
/// bin, analytically; optionally cross-checked by Monte Carlo bisection.
pub fn run_min_rcs(s: &Scenario) -> Result<MinRcsOutput> {
    let set = s.sequence_set()?;
    let rho = s.rho();
    let lfm = s.lfm_config();
    let ofdm = s.ofdm_config();
    let mut rows = Vec::new();
    let mut monte_carlo = Vec::new();
    for sic in sic_levels(s) {
        let ch = s.channel_at_sic(sic);
        let model = s.model(&set, Some(&ch))?;
        for n in 1..=s.pulse.num_delay_bins() {
            let region = model.region(n)?;
            let opt = model.min_detectable_rcs(n)?;
            let fixed = |w: f64| -> Result<Option<f64>> {
                if matches!(region, crate::metrics::Region::RecoveryLowOnly) && w < f64::INFINITY {
                    return Ok(None);
                }
                Ok(model.min_rcs_fixed_weight(n, w)?.map(m2_to_dbsm))
            };
            rows.push(MinRcsRow {
                sic_db: sic,
                delay_bin: n,
                range_m: model.params.range_of(n),
                region: region.label(),
                proposal_dbsm: m2_to_dbsm(opt.sigma),
                proposal_weight: opt.weight,
                high_only_dbsm: fixed(0.0)?,
                matched_dbsm: fixed(1.0)?,
                lfm_dbsm: lfm_min_rcs(n, &s.pulse, &ch, &lfm, rho).map(m2_to_dbsm),
                ofdm_dbsm: m2_to_dbsm(ofdm_min_rcs(n, &s.pulse, &ch, &ofdm, rho)),
            });
        }
        for (pi, &r) in s.spec.monte_carlo_ranges_m.iter().enumerate() {
            monte_carlo.push(mc_min_rcs(s, &set, &ch, r, pi)?);
        }
    }
    Ok(MinRcsOutput { rho_db: s.spec.rho_db, rows, monte_carlo })
}

/// Bisects the target RCS (in dB) until the empirical detection probability
/// of the optimal-weight proposal crosses `pd_target`. All RCS values reuse
/// the same trial streams, so P_d is evaluated on common noise.
pub fn mc_min_rcs(s: &Scenario, set: &SequenceSet, ch: &ChannelConfig, range_m: f64, point: usize) -> Result<McMinRcsPoint> {
    let model = s.model(set, Some(ch))?;
    let t0 = Target::new(range_m, s.spec.velocity_mps, 0.0);
    let n = t0.delay_bin(&s.pulse)?;
    let analytic = m2_to_dbsm(model.min_detectable_rcs(n)?.sigma);
    let chain = s.chain(Waveform::Proposal, s.spec.weight_mode, ch, set)?;
    let pd_at = |dbsm: f64| -> Result<f64> {
        let t = Target { rcs_m2: crate::units::dbsm_to_m2(dbsm), ..t0 };
        let hits = per_trial(s.spec.trials, |i| {
            let mut rng = trial_rng(s.spec.seed, point_stream(point, i));
            let map = chain.run_cpi(&[t], &mut rng)?;
            target_hit(chain.as_ref(), &s.spec.detector.detect(&map, &s.cfar)?, &t, map.cols, s.spec.tolerance_bins)
        })?;
        Ok(hits.iter().filter(|&&h| h).count() as f64 / s.spec.trials as f64)
    };
    let (mut lo, mut hi) = (analytic - 15.0, analytic + 15.0);
    let target = s.spec.pd_target;
    let monte_carlo_dbsm = if pd_at(lo)? >= target || pd_at(hi)? < target {
        None
    } else {
        while hi - lo > 0.05 {
            let mid = 0.5 * (lo + hi);
            if pd_at(mid)? >= target {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Some(0.5 * (lo + hi))
    };
    Ok(McMinRcsPoint { sic_db: ch.sic_db, range_m, delay_bin: n, analytic_dbsm: analytic, monte_carlo_dbsm })
}

// --------------------------------------------------------- multi_target

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WaveformOutcome {
    pub waveform: Waveform,
    pub weight_mode: Option<WeightMode>,
    pub targets: Vec<TargetOutcome>,
    pub detected_targets: usize,
    /// Mean number of detections per CPI, target hits included.
    pub mean_detections: f64,
    #[serde(skip)]
    pub first_map: Option<RdMap>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MultiTargetOutput {
    pub sic_db: f64,
    pub trials: usize,
    pub detector: Detector,
    pub outcomes: Vec<WaveformOutcome>,
}

fn waveform_outcome(s: &Scenario, chain: &dyn SensingChain, waveform: Waveform, mode: Option<WeightMode>) -> Result<WaveformOutcome> {
    for t in &s.targets {
        check_target(chain, t)?;
    }
    let trials = s.spec.trials;
    let runs = per_trial(trials, |i| {
        let mut rng = trial_rng(s.spec.seed, i as u64);
        let map = chain.run_cpi(&s.targets, &mut rng)?;
        let rep = s.spec.detector.detect(&map, &s.cfar)?;
        let hits = s
            .targets
            .iter()
            .map(|t| target_hit(chain, &rep, t, map.cols, s.spec.tolerance_bins))
            .collect::<Result<Vec<bool>>>()?;
        Ok((hits, rep.detections.len(), (i == 0 && s.spec.save_maps).then_some(map)))
    })?;
    let targets: Vec<TargetOutcome> = s
        .targets
        .iter()
        .enumerate()
        .map(|(k, t)| {
            let hits = runs.iter().filter(|r| r.0[k]).count();
            Ok(TargetOutcome {
                index: k,
                range_m: t.range_m,
                delay_bin: chain.delay_bin(t)?,
                doppler_bin: chain.doppler_bin(t),
                rcs_dbsm: m2_to_dbsm(t.rcs_m2),
                hits,
                trials,
                detected: 2 * hits > trials,
            })
        })
        .collect::<Result<_>>()?;
    let mean_detections = runs.iter().map(|r| r.1).sum::<usize>() as f64 / trials as f64;
    let first_map = runs.into_iter().next().and_then(|r| r.2);
    Ok(WaveformOutcome {
        waveform,
        weight_mode: mode,
        detected_targets: targets.iter().filter(|t| t.detected).count(),
        targets,
        mean_detections,
        first_map,
    })
}

/// Per-target majority-vote detection for the proposal and the configured
/// baseline on the scenario's target list.
pub fn run_multi_target(s: &Scenario) -> Result<MultiTargetOutput> {
    if s.targets.is_empty() {
        return Err(Error::Config("multi_target needs at least one target".into()));
    }
    let set = s.sequence_set()?;
    let mut outcomes = Vec::new();
    let mut add = |w: Waveform| -> Result<()> {
        let mode = (w == Waveform::Proposal).then_some(s.spec.weight_mode);
        let chain = s.chain(w, s.spec.weight_mode, &s.channel, &set)?;
        outcomes.push(waveform_outcome(s, chain.as_ref(), w, mode)?);
        Ok(())
    };
    add(s.spec.waveform)?;
    if let Some(b) = s.spec.baseline.filter(|b| *b != s.spec.waveform) {
        add(b)?;
    }
    Ok(MultiTargetOutput { sic_db: s.channel.sic_db, trials: s.spec.trials, detector: s.spec.detector, outcomes })
}

// ----------------------------------------------------- detector_compare

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetectorCompareOutput {
    pub sic_db: f64,
    pub rcs_dbsm: f64,
    pub velocity_mps: f64,
    pub trials: usize,
    /// Threshold factors used by each detector.
    pub hierarchical_alpha: f64,
    pub cfar_2d_alpha: f64,
    /// Whether the factors were calibrated on target-free maps.
    pub calibrated: bool,
    pub hierarchical: PdCurve,
    pub cfar_2d: PdCurve,
    /// Ranges where the hierarchical interval lies entirely above the 2D one.
    pub separated_ranges_m: Vec<f64>,
}

fn default_compare_grid(s: &Scenario) -> RangeGrid {
    let far = (s.pulse.num_delay_bins() as f64 - 2.0) * s.pulse.range_per_bin();
    RangeGrid { start_m: 500.0, stop_m: far, points: 33 }
}

/// Stream block reserved for target-free calibration CPIs.
const CALIBRATION_POINT: usize = u32::MAX as usize;

/// Threshold factors giving a per-cell false-alarm rate of `p_fa` for the
/// hierarchical and 2D detectors, from target-free CPIs of `chain`.
pub fn calibrate_alphas(s: &Scenario, chain: &dyn SensingChain, cpis: usize) -> Result<(f64, f64)> {
    let stats = per_trial(cpis, |i| {
        let mut rng = trial_rng(s.spec.seed, point_stream(CALIBRATION_POINT, i));
        let map = chain.run_cpi(&[], &mut rng)?;
        let h: Vec<f64> = hierarchical_statistics(&map, &s.cfar)?.into_iter().map(|c| c.ratio).collect();
        let c: Vec<f64> = cfar_2d_statistics(&map, &s.cfar)?.into_iter().map(|c| c.ratio).collect();
        Ok((h, c, map.rows * map.cols))
    })?;
    let cells: usize = stats.iter().map(|x| x.2).sum();
    let h = stats.iter().flat_map(|x| x.0.iter().copied()).collect();
    let c = stats.iter().flat_map(|x| x.1.iter().copied()).collect();
    Ok((alpha_for_rate(h, cells, s.cfar.p_fa)?, alpha_for_rate(c, cells, s.cfar.p_fa)?))
}

/// Both detectors on the same proposal RD maps across a range sweep, each
/// with its threshold calibrated to the configured false-alarm rate.
pub fn run_detector_compare(s: &Scenario) -> Result<DetectorCompareOutput> {
    let set = s.sequence_set()?;
    let chain = s.chain(Waveform::Proposal, s.spec.weight_mode, &s.channel, &set)?;
    let calibrated = s.spec.calibration_trials > 0;
    let (ah, ac) = if calibrated {
        calibrate_alphas(s, chain.as_ref(), s.spec.calibration_trials)?
    } else {
        (s.cfar.alpha(), s.cfar.alpha())
    };
    let hs = Scenario { cfar: s.cfar.clone().with_alpha(ah), ..s.clone() };
    let cs = Scenario { cfar: s.cfar.clone().with_alpha(ac), ..s.clone() };
    let ranges = s.ranges(default_compare_grid(s));
    let trials = s.spec.trials;
    let cols = s.m_fft();
    let mut base = Vec::with_capacity(ranges.len());
    for (pi, &r) in ranges.iter().enumerate() {
        let t = Target::new(r, s.spec.velocity_mps, s.spec.rcs_dbsm);
        check_target(chain.as_ref(), &t)?;
        let outcomes = per_trial(trials, |i| {
            let mut rng = trial_rng(s.spec.seed, point_stream(pi, i));
            let map = chain.run_cpi(&[t], &mut rng)?;
            let h = target_hit(chain.as_ref(), &hierarchical_detect(&map, &hs.cfar)?, &t, cols, s.spec.tolerance_bins)?;
            let c = target_hit(chain.as_ref(), &cfar_2d(&map, &cs.cfar)?, &t, cols, s.spec.tolerance_bins)?;
            Ok([h, c])
        })?;
        let hits = (0..2).map(|d| outcomes.iter().filter(|o| o[d]).count()).collect();
        base.push((PdPointBase { range_m: r, delay_bin: chain.delay_bin(&t)? }, hits));
    }
    let mode = Some(s.spec.weight_mode);
    let h = curve("hierarchical".into(), Waveform::Proposal, mode, Detector::Hierarchical, &base, 0, s);
    let c = curve("cfar_2d".into(), Waveform::Proposal, mode, Detector::Cfar2d, &base, 1, s);
    let separated_ranges_m = h
        .points
        .iter()
        .zip(&c.points)
        .filter(|(a, b)| a.pd.lower > b.pd.upper)
        .map(|(a, _)| a.range_m)
        .collect();
    Ok(DetectorCompareOutput {
        sic_db: s.channel.sic_db,
        rcs_dbsm: s.spec.rcs_dbsm,
        velocity_mps: s.spec.velocity_mps,
        trials,
        hierarchical_alpha: ah,
        cfar_2d_alpha: ac,
        calibrated,
        hierarchical: h,
        cfar_2d: c,
        separated_ranges_m,
    })
}

// --------------------------------------------------------- metric_sweep

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricRow {
    pub delay_bin: usize,
    pub range_m: f64,
    pub region: &'static str,
    /// PASLR; `None` where it is infinite or undefined.
    pub gamma: Option<f64>,
    /// Optimal weight; `None` stands for `w = ∞`.
    pub w_star: Option<f64>,
    /// Metric at the optimal weight for the sweep RCS.
    pub f_db: f64,
    pub sigma_star_dbsm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricSweepOutput {
    pub sic_db: f64,
    pub rcs_dbsm: f64,
    pub rho_db: f64,
    pub rows: Vec<MetricRow>,
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

/// Region, PASLR, optimal weight, metric and σ* for every delay bin.
pub fn run_metric_sweep(s: &Scenario) -> Result<MetricSweepOutput> {
    let set = s.sequence_set()?;
    let model = s.model(&set, None)?;
    let profile = model.optimal_profile()?;
    let sigma = crate::units::dbsm_to_m2(s.spec.rcs_dbsm);
    let rows = (1..=s.pulse.num_delay_bins())
        .map(|n| {
            let region = model.region(n)?;
            let gamma = if region.is_eclipsed() { finite(paslr(n, &set, &model.params)?) } else { None };
            let w = profile.at(n);
            Ok(MetricRow {
                delay_bin: n,
                range_m: model.params.range_of(n),
                region: region.label(),
                gamma,
                w_star: finite(w),
                f_db: linear_to_db(model.sensing_metric(n, w, sigma)?),
                sigma_star_dbsm: m2_to_dbsm(model.min_detectable_rcs(n)?.sigma),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MetricSweepOutput { sic_db: s.channel.sic_db, rcs_dbsm: s.spec.rcs_dbsm, rho_db: s.spec.rho_db, rows })
}

// ------------------------------------------------------ sequence_verify

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SequenceVerifyOutput {
    pub high_len: usize,
    pub low_len: usize,
    pub report: SetReport,
    pub perfect: bool,
    pub set: SequenceSet,
}

pub fn run_sequence_verify(s: &Scenario) -> Result<SequenceVerifyOutput> {
    let set = s.sequence_set()?;
    let report = verify_set(&set);
    Ok(SequenceVerifyOutput {
        high_len: s.pulse.high_len,
        low_len: s.pulse.low_len,
        perfect: report.is_perfect(),
        report,
        set,
    })
}

//! Run directories: config snapshot, CSV tables, optional RD-map binaries
//! and a JSON summary.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::runs::{
    DetectorCompareOutput, MetricSweepOutput, MinRcsOutput, MultiTargetOutput, PdCurve, PdOutput, RdmapOutput,
    SequenceVerifyOutput,
};
use super::ScenarioConfig;
use crate::error::Result;

/// Everything needed to reproduce a result.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Provenance {
    /// SHA-256 of the canonical JSON form of the scenario.
    pub config_sha256: String,
    pub seed: u64,
    pub trials: usize,
    pub code_version: String,
    pub detection_rule: String,
}

impl Provenance {
    pub fn of(cfg: &ScenarioConfig) -> Result<Self> {
        let canonical = serde_json::to_vec(cfg)?;
        Ok(Self {
            config_sha256: hex::encode(Sha256::digest(&canonical)),
            seed: cfg.experiment.seed,
            trials: cfg.experiment.trials,
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            detection_rule: format!(
                "hit if a detection lies within ±{} bins of the true delay and Doppler bins",
                cfg.experiment.tolerance_bins
            ),
        })
    }
}

/// Kind-tagged experiment payload.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Payload {
    Rdmap(RdmapOutput),
    PdVsRange(PdOutput),
    MinRcs(MinRcsOutput),
    MultiTarget(MultiTargetOutput),
    DetectorCompare(DetectorCompareOutput),
    MetricSweep(MetricSweepOutput),
    SequenceVerify(SequenceVerifyOutput),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentResult {
    pub provenance: Provenance,
    #[serde(flatten)]
    pub payload: Payload,
}

impl ExperimentResult {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::Writer::from_writer(BufWriter::new(File::create(path)?)))
}

fn write_pd_curves(path: &Path, curves: &[&PdCurve]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["curve", "range_m", "delay_bin", "hits", "trials", "pd", "ci_low", "ci_high", "ci_half_width"])?;
    for c in curves {
        for p in &c.points {
            w.write_record([
                c.label.clone(),
                p.range_m.to_string(),
                p.delay_bin.to_string(),
                p.pd.successes.to_string(),
                p.pd.trials.to_string(),
                p.pd.estimate.to_string(),
                p.pd.lower.to_string(),
                p.pd.upper.to_string(),
                p.pd.half_width().to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes `result` and the `cfg` snapshot into `dir`, returning the files
/// written.
pub fn write_run(dir: &Path, cfg: &ScenarioConfig, result: &ExperimentResult) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut files = Vec::new();
    let config_path = dir.join("config.toml");
    fs::write(&config_path, cfg.to_toml_string()?)?;
    files.push(config_path);
    match &result.payload {
        Payload::Rdmap(o) => {
            let csv_path = dir.join("rdmap.csv");
            o.map.write_csv(BufWriter::new(File::create(&csv_path)?))?;
            files.push(csv_path);
            let det_path = dir.join("detections.csv");
            o.report.write_csv(BufWriter::new(File::create(&det_path)?))?;
            files.push(det_path);
            if cfg.experiment.save_maps {
                let bin = dir.join("rdmap.f64");
                o.map.write_binary(&bin)?;
                files.push(bin);
            }
        }
        Payload::PdVsRange(o) => {
            let p = dir.join("pd_vs_range.csv");
            write_pd_curves(&p, &o.curves.iter().collect::<Vec<_>>())?;
            files.push(p);
        }
        Payload::DetectorCompare(o) => {
            let p = dir.join("detector_compare.csv");
            write_pd_curves(&p, &[&o.hierarchical, &o.cfar_2d])?;
            files.push(p);
        }
        Payload::MinRcs(o) => {
            let p = dir.join("min_rcs.csv");
            let mut w = csv_writer(&p)?;
            w.write_record([
                "sic_db", "delay_bin", "range_m", "region", "proposal_dbsm", "proposal_weight", "high_only_dbsm",
                "matched_dbsm", "lfm_dbsm", "ofdm_dbsm",
            ])?;
            for r in &o.rows {
                w.write_record([
                    r.sic_db.to_string(),
                    r.delay_bin.to_string(),
                    r.range_m.to_string(),
                    r.region.to_string(),
                    r.proposal_dbsm.to_string(),
                    r.proposal_weight.to_string(),
                    opt(r.high_only_dbsm),
                    opt(r.matched_dbsm),
                    opt(r.lfm_dbsm),
                    r.ofdm_dbsm.to_string(),
                ])?;
            }
            w.flush()?;
            files.push(p);
            if !o.monte_carlo.is_empty() {
                let p = dir.join("min_rcs_monte_carlo.csv");
                let mut w = csv_writer(&p)?;
                w.write_record(["sic_db", "range_m", "delay_bin", "analytic_dbsm", "monte_carlo_dbsm"])?;
                for r in &o.monte_carlo {
                    w.write_record([
                        r.sic_db.to_string(),
                        r.range_m.to_string(),
                        r.delay_bin.to_string(),
                        r.analytic_dbsm.to_string(),
                        opt(r.monte_carlo_dbsm),
                    ])?;
                }
                w.flush()?;
                files.push(p);
            }
        }
        Payload::MultiTarget(o) => {
            let p = dir.join("multi_target.csv");
            let mut w = csv_writer(&p)?;
            w.write_record([
                "waveform", "target", "range_m", "delay_bin", "doppler_bin", "rcs_dbsm", "hits", "trials", "detected",
            ])?;
            for oc in &o.outcomes {
                for t in &oc.targets {
                    w.write_record([
                        oc.waveform.label().to_string(),
                        t.index.to_string(),
                        t.range_m.to_string(),
                        t.delay_bin.to_string(),
                        t.doppler_bin.to_string(),
                        t.rcs_dbsm.to_string(),
                        t.hits.to_string(),
                        t.trials.to_string(),
                        t.detected.to_string(),
                    ])?;
                }
                if let Some(map) = &oc.first_map {
                    let bin = dir.join(format!("rdmap_{}.f64", oc.waveform.label()));
                    map.write_binary(&bin)?;
                    files.push(bin);
                }
            }
            w.flush()?;
            files.push(p);
        }
        Payload::MetricSweep(o) => {
            let p = dir.join("metric_sweep.csv");
            let mut w = csv_writer(&p)?;
            w.write_record(["n_tau", "range_m", "region", "gamma", "w_star", "F_dB", "sigma_star_dbsm"])?;
            for r in &o.rows {
                w.write_record([
                    r.delay_bin.to_string(),
                    r.range_m.to_string(),
                    r.region.to_string(),
                    r.gamma.map_or_else(|| "inf".to_string(), |g| g.to_string()),
                    r.w_star.map_or_else(|| "inf".to_string(), |g| g.to_string()),
                    r.f_db.to_string(),
                    r.sigma_star_dbsm.to_string(),
                ])?;
            }
            w.flush()?;
            files.push(p);
        }
        Payload::SequenceVerify(o) => {
            let p = dir.join("sequence_set.json");
            fs::write(&p, o.set.to_json()?)?;
            files.push(p);
        }
    }
    let summary = dir.join("summary.json");
    let mut f = BufWriter::new(File::create(&summary)?);
    f.write_all(result.to_json()?.as_bytes())?;
    f.flush()?;
    files.push(summary);
    Ok(files)
}

//! `dualpulse`: command-line runner for the sensing experiments.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;

use dualpulse_core::experiments::output::Payload;
use dualpulse_core::experiments::{run, write_run, ExperimentKind, ExperimentResult, ScenarioConfig};
use dualpulse_core::{Error, Result};

#[derive(Parser)]
#[command(name = "dualpulse", version, about = "Dual-power phase-coded ISAC sensing experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// One CPI through a waveform and detector; prints the detections.
    Rdmap(Common),
    /// Detection probability against range for several weight modes.
    PdVsRange(Common),
    /// Minimum detectable RCS per delay bin, analytic and optional Monte Carlo.
    MinRcs(Common),
    /// Majority-vote detection of a target list against a baseline.
    MultiTarget(Common),
    /// Hierarchical 1D against 2D CFAR on identical maps.
    DetectorCompare(Common),
    /// Sidelobe ratio, optimal weight, metric and minimum RCS per delay bin.
    MetricSweep(Common),
    /// Correlation identities of the sequence set.
    SequenceVerify(Common),
}

impl Command {
    fn split(self) -> (ExperimentKind, Common) {
        match self {
            Command::Rdmap(c) => (ExperimentKind::Rdmap, c),
            Command::PdVsRange(c) => (ExperimentKind::PdVsRange, c),
            Command::MinRcs(c) => (ExperimentKind::MinRcs, c),
            Command::MultiTarget(c) => (ExperimentKind::MultiTarget, c),
            Command::DetectorCompare(c) => (ExperimentKind::DetectorCompare, c),
            Command::MetricSweep(c) => (ExperimentKind::MetricSweep, c),
            Command::SequenceVerify(c) => (ExperimentKind::SequenceVerify, c),
        }
    }
}

#[derive(Args)]
struct Common {
    /// Scenario TOML; the built-in reference configuration when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory for the config snapshot, CSV tables and summary.json.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Base seed; every trial draws from its own stream of it.
    #[arg(long)]
    seed: Option<u64>,
    /// Monte Carlo trials per point.
    #[arg(long)]
    trials: Option<usize>,
    /// SIC capability (dB).
    #[arg(long)]
    sic_db: Option<f64>,
    /// optimal, designed:<dBsm>, fixed:<w>, high_only or low_only.
    #[arg(long)]
    weight_mode: Option<String>,
    /// proposal, lfm or ofdm.
    #[arg(long)]
    waveform: Option<String>,
    /// hierarchical or cfar2d.
    #[arg(long)]
    detector: Option<String>,
    /// Baseline waveform for comparisons.
    #[arg(long)]
    baseline: Option<String>,
    /// Print the full JSON summary instead of the text report.
    #[arg(long)]
    json: bool,
    /// Print the resolved scenario as TOML and exit.
    #[arg(long)]
    print_config: bool,
}

fn parse_enum<T: DeserializeOwned>(value: &str, what: &str) -> Result<T> {
    let v = serde_json::Value::String(value.replace('-', "_"));
    serde_json::from_value(v).map_err(|_| Error::Config(format!("unknown {what} '{value}'")))
}

fn scenario(kind: ExperimentKind, c: &Common) -> Result<ScenarioConfig> {
    let mut cfg = match &c.config {
        Some(p) => ScenarioConfig::from_path(p)?,
        None => ScenarioConfig::table_one(kind),
    };
    let e = &mut cfg.experiment;
    e.kind = kind;
    if let Some(s) = c.seed {
        e.seed = s;
    }
    if let Some(t) = c.trials {
        e.trials = t;
    }
    if let Some(m) = &c.weight_mode {
        e.weight_mode = m.parse()?;
    }
    if let Some(w) = &c.waveform {
        e.waveform = parse_enum(w, "waveform")?;
    }
    if let Some(d) = &c.detector {
        e.detector = parse_enum(d, "detector")?;
    }
    if let Some(b) = &c.baseline {
        e.baseline = Some(parse_enum(b, "baseline")?);
    }
    if let Some(s) = c.sic_db {
        cfg.channel.sic_db = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn opt_m(v: Option<f64>) -> String {
    v.map_or_else(|| "none".into(), |x| format!("{x:.1} m"))
}

fn report(r: &ExperimentResult) {
    match &r.payload {
        Payload::Rdmap(o) => {
            println!("{} / {} / {}", o.waveform.label(), o.weight_mode.label(), serde_label(&o.detector));
            println!("{:>6} {:>10} {:>8} {:>12} {:>12}", "bin", "range_m", "doppler", "velocity_mps", "power");
            for d in &o.report.detections {
                println!(
                    "{:>6} {:>10.2} {:>8} {:>12.2} {:>12.4e}",
                    d.range_bin, d.range_m, d.doppler_bin, d.velocity_mps, d.power
                );
            }
            for t in &o.targets {
                println!("target {} at {:.1} m: {}", t.index, t.range_m, if t.detected { "detected" } else { "missed" });
            }
        }
        Payload::PdVsRange(o) => {
            for c in &o.curves {
                println!(
                    "{:<24} P_d >= {} up to {}; dead zone {:?}",
                    c.label,
                    c.summary.pd_target,
                    opt_m(c.summary.max_range_m),
                    c.summary.dead_zone_ranges_m
                );
            }
        }
        Payload::MinRcs(o) => {
            println!("{:>7} {:>6} {:>9} {:>14} {:>10} {:>10}", "sic_db", "bin", "range_m", "proposal_dBsm", "lfm_dBsm", "ofdm_dBsm");
            for row in o.rows.iter().filter(|x| x.delay_bin == 1 || x.delay_bin % 50 == 0) {
                let lfm = row.lfm_dbsm.map_or_else(|| "blind".into(), |v| format!("{v:.2}"));
                println!(
                    "{:>7} {:>6} {:>9.1} {:>14.2} {:>10} {:>10.2}",
                    row.sic_db, row.delay_bin, row.range_m, row.proposal_dbsm, lfm, row.ofdm_dbsm
                );
            }
            for m in &o.monte_carlo {
                println!(
                    "monte carlo at {:.1} m, SIC {} dB: analytic {:.2} dBsm, simulated {}",
                    m.range_m,
                    m.sic_db,
                    m.analytic_dbsm,
                    m.monte_carlo_dbsm.map_or_else(|| "not bracketed".into(), |v| format!("{v:.2} dBsm"))
                );
            }
        }
        Payload::MultiTarget(o) => {
            for w in &o.outcomes {
                let hits: Vec<String> = w.targets.iter().map(|t| format!("{}/{}", t.hits, t.trials)).collect();
                println!(
                    "{:<9} detected {}/{} targets, hits [{}], {:.1} detections per CPI",
                    w.waveform.label(),
                    w.detected_targets,
                    w.targets.len(),
                    hits.join(", "),
                    w.mean_detections
                );
            }
        }
        Payload::DetectorCompare(o) => {
            println!("alpha: hierarchical {:.3}, 2D {:.3} (calibrated: {})", o.hierarchical_alpha, o.cfar_2d_alpha, o.calibrated);
            println!("max range: hierarchical {}, 2D {}", opt_m(o.hierarchical.summary.max_range_m), opt_m(o.cfar_2d.summary.max_range_m));
            println!("hierarchical CI above 2D CI at {:?} m", o.separated_ranges_m);
        }
        Payload::MetricSweep(o) => {
            println!("{} delay bins", o.rows.len());
            for row in o.rows.iter().filter(|x| x.delay_bin == 1 || x.delay_bin % 50 == 0) {
                println!(
                    "bin {:>4} {:>8.1} m {:<16} F {:>7.2} dB  sigma* {:>7.2} dBsm",
                    row.delay_bin, row.range_m, row.region, row.f_db, row.sigma_star_dbsm
                );
            }
        }
        Payload::SequenceVerify(o) => {
            println!(
                "H={} L={}: residuals high {} low {} cross {} ({}), perfect: {}",
                o.high_len,
                o.low_len,
                o.report.autocorr_residual_high,
                o.report.autocorr_residual_low,
                o.report.cross_residual,
                if o.report.exact { "integer" } else { "float" },
                o.perfect
            );
        }
    }
}

fn serde_label<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_value(v).ok().and_then(|x| x.as_str().map(String::from)).unwrap_or_default()
}

fn execute(kind: ExperimentKind, c: &Common) -> Result<()> {
    let cfg = scenario(kind, c)?;
    if c.print_config {
        print!("{}", cfg.to_toml_string()?);
        return Ok(());
    }
    let result = run(&cfg)?;
    if let Some(dir) = &c.out {
        let files = write_run(dir, &cfg, &result)?;
        for f in files {
            eprintln!("wrote {}", f.display());
        }
    }
    if c.json {
        println!("{}", result.to_json()?);
    } else {
        report(&result);
    }
    Ok(())
}

fn main() -> ExitCode {
    let (kind, common) = Cli::parse().command.split();
    match execute(kind, &common) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let body = serde_json::json!({ "error": { "kind": e.kind(), "message": e.to_string() } });
            eprintln!("{body}");
            ExitCode::from(match e {
                Error::Config(_) | Error::Toml(_) | Error::Constraint(_) => 2,
                _ => 1,
            })
        }
    }
}

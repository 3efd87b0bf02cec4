//! Cell-averaging CFAR detection on range-Doppler maps.

use std::collections::HashSet;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::receiver::RdMap;

/// CFAR window geometry and threshold factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CfarConfig {
    /// Total guard cells along an axis, split evenly around the CUT.
    pub guard_cells: usize,
    /// Total training cells along an axis.
    pub training_cells: usize,
    pub p_fa: f64,
    /// Threshold factor; derived from `p_fa` when absent.
    #[serde(default)]
    pub alpha: Option<f64>,
}

impl Default for CfarConfig {
    fn default() -> Self {
        Self {
            guard_cells: 4,
            training_cells: 16,
            p_fa: 1e-5,
            alpha: None,
        }
    }
}

/// CA-CFAR factor `t (p^(-1/t) - 1)` for exponential cells.
pub fn analytic_alpha(p_fa: f64, training_cells: usize) -> f64 {
    let t = training_cells as f64;
    t * (p_fa.powf(-1.0 / t) - 1.0)
}

impl CfarConfig {
    pub fn new(guard_cells: usize, training_cells: usize, p_fa: f64) -> Result<Self> {
        let c = Self { guard_cells, training_cells, p_fa, alpha: None };
        c.validate()?;
        Ok(c)
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = Some(alpha);
        self
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
            .unwrap_or_else(|| analytic_alpha(self.p_fa, self.training_cells))
    }

    pub fn validate(&self) -> Result<()> {
        if self.guard_cells % 2 != 0 || self.training_cells % 2 != 0 || self.training_cells < 2 {
            return Err(Error::Config(format!(
                "guard ({}) and training ({}) cells must be even, training at least 2",
                self.guard_cells, self.training_cells
            )));
        }
        if !(self.p_fa > 0.0 && self.p_fa < 1.0) {
            return Err(Error::Config(format!("p_fa {} must lie in (0, 1)", self.p_fa)));
        }
        if let Some(a) = self.alpha {
            if !(a > 0.0) {
                return Err(Error::Config(format!("alpha {a} must be positive")));
            }
        }
        Ok(())
    }

    /// Minimum axis extent a 1D window needs.
    pub fn min_extent(&self) -> usize {
        self.guard_cells + self.training_cells + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    Range,
    Doppler,
}

/// Training-cell indices along a 1D axis of length `extent` for the CUT at
/// `i`. Cells that do not fit on one side are moved to the other so the
/// count is always `training_cells`.
pub fn training_window(i: usize, extent: usize, cfg: &CfarConfig) -> Result<Vec<usize>> {
    if extent < cfg.min_extent() {
        return Err(Error::Config(format!(
            "axis extent {extent} is below guard+training+1 = {}",
            cfg.min_extent()
        )));
    }
    if i >= extent {
        return Err(Error::Index { index: i, limit: extent });
    }
    let g = cfg.guard_cells / 2;
    let t = cfg.training_cells;
    let left_avail = i.saturating_sub(g);
    let right_avail = (extent - 1 - i).saturating_sub(g);
    let mut nl = left_avail.min(t / 2);
    let mut nr = right_avail.min(t / 2);
    if nl < t / 2 {
        nr = t - nl;
    } else if nr < t / 2 {
        nl = t - nr;
    }
    let left_end = i.saturating_sub(g);
    let mut cells: Vec<usize> = (left_end - nl..left_end).collect();
    cells.extend(i + g + 1..=i + g + nr);
    debug_assert_eq!(cells.len(), t);
    Ok(cells)
}

/// Outcome of one CFAR test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CfarDecision {
    pub detected: bool,
    pub threshold: f64,
    /// Mean training-cell power.
    pub noise_level: f64,
}

fn axis_extent(map: &RdMap, axis: Axis) -> usize {
    match axis {
        Axis::Range => map.rows,
        Axis::Doppler => map.cols,
    }
}

fn axis_cell(row: usize, col: usize, axis: Axis, j: usize) -> (usize, usize) {
    match axis {
        Axis::Range => (j, col),
        Axis::Doppler => (row, j),
    }
}

/// Mean training power around `cell` along `axis`, skipping `exclude`d
/// cells unless that would empty the window.
fn training_mean(
    map: &RdMap,
    cell: (usize, usize),
    axis: Axis,
    cfg: &CfarConfig,
    exclude: Option<&HashSet<(usize, usize)>>,
) -> Result<f64> {
    let (row, col) = cell;
    let i = match axis {
        Axis::Range => row,
        Axis::Doppler => col,
    };
    let window = training_window(i, axis_extent(map, axis), cfg)?;
    let (mut sum, mut count) = (0.0, 0usize);
    for &j in &window {
        let c = axis_cell(row, col, axis, j);
        if exclude.is_some_and(|ex| ex.contains(&c)) {
            continue;
        }
        sum += map.get(c.0, c.1);
        count += 1;
    }
    if count == 0 {
        sum = window.iter().map(|&j| {
            let c = axis_cell(row, col, axis, j);
            map.get(c.0, c.1)
        }).sum();
        count = window.len();
    }
    Ok(sum / count as f64)
}

/// 1D CA-CFAR test of `cell = (row, col)` along `axis`.
pub fn cfar_1d(map: &RdMap, cell: (usize, usize), axis: Axis, cfg: &CfarConfig) -> Result<CfarDecision> {
    if cell.0 >= map.rows || cell.1 >= map.cols {
        return Err(Error::Index { index: cell.0.max(cell.1), limit: map.rows.min(map.cols) });
    }
    let noise_level = training_mean(map, cell, axis, cfg, None)?;
    let threshold = cfg.alpha() * noise_level;
    Ok(CfarDecision {
        detected: map.get(cell.0, cell.1) > threshold,
        threshold,
        noise_level,
    })
}

/// Cells strictly greater than every available 8-neighbor.
pub fn local_maxima(map: &RdMap) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for r in 0..map.rows {
        for c in 0..map.cols {
            let v = map.get(r, c);
            let mut is_max = true;
            'nb: for dr in -1isize..=1 {
                for dc in -1isize..=1 {
                    if dr == 0 && dc == 0 {
                        continue;
                    }
                    let (nr, nc) = (r as isize + dr, c as isize + dc);
                    if nr < 0 || nc < 0 || nr >= map.rows as isize || nc >= map.cols as isize {
                        continue;
                    }
                    if map.get(nr as usize, nc as usize) >= v {
                        is_max = false;
                        break 'nb;
                    }
                }
            }
            if is_max {
                out.push((r, c));
            }
        }
    }
    out
}

/// One detected cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub row: usize,
    pub col: usize,
    /// 1-based delay bin.
    pub range_bin: usize,
    pub doppler_bin: isize,
    pub range_m: f64,
    pub velocity_mps: f64,
    pub power: f64,
    pub range_threshold: f64,
    pub doppler_threshold: f64,
}

impl Detection {
    fn at(map: &RdMap, row: usize, col: usize, range_threshold: f64, doppler_threshold: f64) -> Self {
        Self {
            row,
            col,
            range_bin: map.delay_bin(row),
            doppler_bin: map.doppler_index(col),
            range_m: map.range_m(row),
            velocity_mps: map.velocity_mps(col),
            power: map.get(row, col),
            range_threshold,
            doppler_threshold,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub detections: Vec<Detection>,
    /// Candidates that passed the range stage.
    pub stage1_candidates: usize,
    pub local_maxima: usize,
}

impl DetectionReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        for d in &self.detections {
            wr.serialize(d)?;
        }
        if self.detections.is_empty() {
            wr.write_record([
                "row", "col", "range_bin", "doppler_bin", "range_m", "velocity_mps", "power",
                "range_threshold", "doppler_threshold",
            ])?;
        }
        wr.flush()?;
        Ok(())
    }

    /// Whether any detection lies within `tol` bins of `(range_bin, doppler_bin)`
    /// on both axes. Doppler distance wraps modulo `cols`.
    pub fn hits(&self, range_bin: usize, doppler_bin: isize, cols: usize, tol: usize) -> bool {
        self.detections.iter().any(|d| {
            let dr = d.range_bin.abs_diff(range_bin);
            let raw = (d.doppler_bin - doppler_bin).rem_euclid(cols as isize) as usize;
            let dd = raw.min(cols - raw);
            dr <= tol && dd <= tol
        })
    }
}

/// Hierarchical 1D CFAR: local maxima, then a range-axis test, then a
/// Doppler-axis test that ignores other range-stage survivors in its
/// training cells.
pub fn hierarchical_detect(map: &RdMap, cfg: &CfarConfig) -> Result<DetectionReport> {
    cfg.validate()?;
    let maxima = local_maxima(map);
    let mut stage1 = Vec::new();
    for &cell in &maxima {
        let d = cfar_1d(map, cell, Axis::Range, cfg)?;
        if d.detected {
            stage1.push((cell, d.threshold));
        }
    }
    let survivors: HashSet<(usize, usize)> = stage1.iter().map(|(c, _)| *c).collect();
    let alpha = cfg.alpha();
    let mut detections = Vec::new();
    for &(cell, range_threshold) in &stage1 {
        let doppler_threshold = alpha * training_mean(map, cell, Axis::Doppler, cfg, Some(&survivors))?;
        if map.get(cell.0, cell.1) > doppler_threshold {
            detections.push(Detection::at(map, cell.0, cell.1, range_threshold, doppler_threshold));
        }
    }
    Ok(DetectionReport {
        detections,
        stage1_candidates: stage1.len(),
        local_maxima: maxima.len(),
    })
}

/// Offsets of the 2D training annulus, nearest first.
///
/// The guard square has half-width `ceil(g_c / 4)`; training cells are the
/// first `t_c` cells outside it ordered by Chebyshev then Euclidean distance.
/// At map edges out-of-bounds offsets are skipped and farther cells fill in.
fn annulus_offsets(cfg: &CfarConfig, rows: usize, cols: usize) -> (isize, Vec<(isize, isize)>) {
    let guard = cfg.guard_cells.div_ceil(4) as isize;
    let reach = (rows.max(cols)) as isize;
    let mut offs = Vec::new();
    // Rings up to the point where t_c cells are guaranteed even at a corner.
    let mut ring = guard + 1;
    while ring <= reach {
        for dr in -ring..=ring {
            for dc in -ring..=ring {
                if dr.abs().max(dc.abs()) == ring {
                    offs.push((dr, dc));
                }
            }
        }
        let full = (2 * ring + 1).pow(2) - (2 * guard + 1).pow(2);
        if full as usize >= 4 * cfg.training_cells {
            break;
        }
        ring += 1;
    }
    offs.sort_by_key(|&(dr, dc)| (dr.abs().max(dc.abs()), dr * dr + dc * dc, dr, dc));
    (guard, offs)
}

/// 2D CA-CFAR over every cell with a square guard/training annulus.
pub fn cfar_2d(map: &RdMap, cfg: &CfarConfig) -> Result<DetectionReport> {
    let stats = cfar_2d_statistics(map, cfg)?;
    let alpha = cfg.alpha();
    let detections = stats
        .into_iter()
        .filter(|s| s.ratio > alpha)
        .map(|s| {
            let th = alpha * s.noise_level;
            Detection::at(map, s.row, s.col, th, th)
        })
        .collect::<Vec<_>>();
    let n = detections.len();
    Ok(DetectionReport {
        detections,
        stage1_candidates: n,
        local_maxima: 0,
    })
}

/// CUT power over training mean for one cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellStatistic {
    pub row: usize,
    pub col: usize,
    pub noise_level: f64,
    /// The cell is detected for any `alpha < ratio`.
    pub ratio: f64,
}

fn ratio(p: f64, noise: f64) -> f64 {
    if noise > 0.0 {
        p / noise
    } else if p > 0.0 {
        f64::INFINITY
    } else {
        0.0
    }
}

/// Per-cell statistics of the 2D detector.
pub fn cfar_2d_statistics(map: &RdMap, cfg: &CfarConfig) -> Result<Vec<CellStatistic>> {
    cfg.validate()?;
    let (guard, offs) = annulus_offsets(cfg, map.rows, map.cols);
    let side = (2 * guard + 1) as usize;
    if map.rows * map.cols < side * side + cfg.training_cells {
        return Err(Error::Config("map too small for the 2D CFAR window".into()));
    }
    let mut out = Vec::with_capacity(map.rows * map.cols);
    for r in 0..map.rows {
        for c in 0..map.cols {
            let (mut sum, mut n) = (0.0, 0usize);
            for &(dr, dc) in &offs {
                let (rr, cc) = (r as isize + dr, c as isize + dc);
                if rr < 0 || cc < 0 || rr >= map.rows as isize || cc >= map.cols as isize {
                    continue;
                }
                sum += map.get(rr as usize, cc as usize);
                n += 1;
                if n == cfg.training_cells {
                    break;
                }
            }
            let noise = sum / n as f64;
            out.push(CellStatistic { row: r, col: c, noise_level: noise, ratio: ratio(map.get(r, c), noise) });
        }
    }
    Ok(out)
}

/// Per-candidate statistics of the hierarchical detector: for each local
/// maximum, the smaller of its range-axis and Doppler-axis power ratios.
/// Stage-2 candidate exclusion is not applied, since it depends on `alpha`.
pub fn hierarchical_statistics(map: &RdMap, cfg: &CfarConfig) -> Result<Vec<CellStatistic>> {
    cfg.validate()?;
    local_maxima(map)
        .into_iter()
        .map(|(r, c)| {
            let p = map.get(r, c);
            let nr = training_mean(map, (r, c), Axis::Range, cfg, None)?;
            let nd = training_mean(map, (r, c), Axis::Doppler, cfg, None)?;
            Ok(CellStatistic {
                row: r,
                col: c,
                noise_level: nr.max(nd),
                ratio: ratio(p, nr).min(ratio(p, nd)),
            })
        })
        .collect()
}

/// Threshold factor giving a per-cell false-alarm rate of `p_fa`, from
/// detector statistics pooled over `total_cells` noise-only cells.
pub fn alpha_for_rate(mut ratios: Vec<f64>, total_cells: usize, p_fa: f64) -> Result<f64> {
    let allowed = (p_fa * total_cells as f64).floor() as usize;
    if allowed == 0 {
        return Err(Error::Config(format!(
            "{total_cells} cells are too few to calibrate p_fa = {p_fa}"
        )));
    }
    if ratios.len() <= allowed {
        return Ok(f64::MIN_POSITIVE);
    }
    ratios.sort_by(|a, b| b.total_cmp(a));
    // Detection needs ratio > alpha, so alpha = the (allowed+1)-th largest
    // lets exactly `allowed` cells through (ties aside).
    Ok(ratios[allowed])
}

//! Fast-time mismatched filtering and slow-time Doppler processing.
//!
//! Delay bin `n` (1-based) is stored at index `n - 1` of every fast-time
//! vector and RD-map row.

use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::channel::ReceivedPri;
use crate::error::{Error, Result};
use crate::sequences::SequenceSet;
use crate::units::C0;
use crate::waveform::PulseConfig;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Per-delay-bin weight on the low-power branch. `f64::INFINITY` selects
/// the low-power-only filter for that bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightProfile {
    w: Vec<f64>,
}

impl WeightProfile {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if let Some((i, v)) = w.iter().enumerate().find(|(_, v)| v.is_nan() || **v < 0.0) {
            return Err(Error::Domain(format!("weight {v} at delay bin {} is negative", i + 1)));
        }
        Ok(Self { w })
    }

    pub fn constant(bins: usize, w: f64) -> Result<Self> {
        Self::new(vec![w; bins])
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    /// Weight of 1-based delay bin `n`.
    pub fn at(&self, n: usize) -> f64 {
        self.w[n - 1]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.w
    }
}

/// Matched-filter outputs of the two branches for one PRI.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchOutput {
    pub r1: Vec<Complex64>,
    pub r2: Vec<Complex64>,
}

fn branch_filters(set: &SequenceSet, pcfg: &PulseConfig, k: usize) -> (Vec<Complex64>, Vec<Complex64>) {
    let codes = set.pulse_for_pri(k);
    let ah = pcfg.p_high.sqrt();
    let al = pcfg.p_low.sqrt();
    let f1 = codes.high.chips().iter().map(|c| c * ah).collect();
    let f2 = codes.low.chips().iter().map(|c| c * al).collect();
    (f1, f2)
}

/// `Σ_i conj(f[i]) y[offset + i + n]` for `n = 1..=bins`, zero beyond `y`.
fn shifted_inner(f: &[Complex64], offset: usize, y: &[Complex64], bins: usize) -> Vec<Complex64> {
    (1..=bins)
        .map(|n| {
            f.iter()
                .enumerate()
                .filter_map(|(i, fi)| y.get(offset + i + n).map(|yv| fi.conj() * yv))
                .sum()
        })
        .collect()
}

fn check_len(y: &ReceivedPri, pcfg: &PulseConfig) -> Result<()> {
    if y.samples.len() != pcfg.total_len() {
        return Err(Error::LengthMismatch {
            expected: pcfg.total_len(),
            actual: y.samples.len(),
        });
    }
    Ok(())
}

/// Exact branch correlation by direct summation.
///
/// `r1[n]` correlates the high-power filter (support `[0, H)`) and `r2[n]`
/// the low-power filter (support `[H+N_r, H+N_r+L)`) against `y` shifted by
/// `n` chips.
pub fn branch_correlate(
    y: &ReceivedPri,
    set: &SequenceSet,
    pcfg: &PulseConfig,
    k: usize,
) -> Result<BranchOutput> {
    check_len(y, pcfg)?;
    let bins = pcfg.num_delay_bins();
    let (f1, f2) = branch_filters(set, pcfg, k);
    Ok(BranchOutput {
        r1: shifted_inner(&f1, 0, &y.samples, bins),
        r2: shifted_inner(&f2, pcfg.rx_on(), &y.samples, bins),
    })
}

/// One-shot correlation with the concatenated filter
/// `[√P_h h, 0, w√P_l l] / √(P_h H + w² P_l L)` at constant weight `w`.
pub fn full_filter_correlate(
    y: &ReceivedPri,
    set: &SequenceSet,
    pcfg: &PulseConfig,
    k: usize,
    w: f64,
) -> Result<Vec<Complex64>> {
    check_len(y, pcfg)?;
    let (f1, f2) = branch_filters(set, pcfg, k);
    let mut f = vec![ZERO; pcfg.rx_on() + pcfg.low_len];
    f[..pcfg.high_len].copy_from_slice(&f1);
    for (dst, v) in f[pcfg.rx_on()..].iter_mut().zip(&f2) {
        *dst = v * w;
    }
    let norm = (pcfg.p_high * pcfg.high_len as f64 + w * w * pcfg.p_low * pcfg.low_len as f64).sqrt();
    let mut r = shifted_inner(&f, 0, &y.samples, pcfg.num_delay_bins());
    r.iter_mut().for_each(|v| *v /= norm);
    Ok(r)
}

/// Circular FFT correlation engine of a fixed size.
pub struct FftCorrelator {
    size: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl FftCorrelator {
    pub fn new(size: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            size,
            fwd: planner.plan_fft_forward(size),
            inv: planner.plan_fft_inverse(size),
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Spectrum of `y` zero-padded to the engine size.
    pub fn transform(&self, y: &[Complex64]) -> Vec<Complex64> {
        let mut buf = vec![ZERO; self.size];
        buf[..y.len()].copy_from_slice(y);
        self.fwd.process(&mut buf);
        buf
    }

    /// Matched-filter spectrum `conj(FFT(f)) / size` with `f` placed at `offset`.
    pub fn filter_spectrum(&self, f: &[Complex64], offset: usize) -> Vec<Complex64> {
        let mut buf = self.transform(&[]);
        buf[offset..offset + f.len()].copy_from_slice(f);
        self.fwd.process(&mut buf);
        let scale = 1.0 / self.size as f64;
        buf.iter_mut().for_each(|v| *v = v.conj() * scale);
        buf
    }

    /// Circular correlation `Σ_i conj(f[i]) y[(i + n) mod size]` for
    /// `n ∈ lags`, from the two spectra.
    pub fn correlate(&self, y_spec: &[Complex64], f_spec: &[Complex64], lags: std::ops::Range<usize>) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = y_spec.iter().zip(f_spec).map(|(a, b)| a * b).collect();
        self.inv.process(&mut buf);
        buf[lags].to_vec()
    }
}

/// FFT-based branch correlator with precomputed filter spectra.
///
/// Uses a circular transform long enough (`≥ M + N_r + L`) that no
/// wrap-around reaches a correlation lag of interest, so the output equals
/// [`branch_correlate`] up to rounding.
pub struct FastCorrelator {
    engine: FftCorrelator,
    bins: usize,
    /// High and low branch spectra of each pulse.
    spectra: Vec<(Vec<Complex64>, Vec<Complex64>)>,
}

impl FastCorrelator {
    pub fn new(set: &SequenceSet, pcfg: &PulseConfig) -> Self {
        let size = (pcfg.total_len() + pcfg.recovery_len + pcfg.low_len).next_power_of_two();
        let engine = FftCorrelator::new(size);
        let spectra = (0..4)
            .map(|k| {
                let (f1, f2) = branch_filters(set, pcfg, k);
                (engine.filter_spectrum(&f1, 0), engine.filter_spectrum(&f2, pcfg.rx_on()))
            })
            .collect();
        Self {
            engine,
            bins: pcfg.num_delay_bins(),
            spectra,
        }
    }

    pub fn correlate(&self, y: &[Complex64], k: usize) -> BranchOutput {
        let yf = self.engine.transform(y);
        let (s1, s2) = &self.spectra[k % 4];
        BranchOutput {
            r1: self.engine.correlate(&yf, s1, 1..self.bins + 1),
            r2: self.engine.correlate(&yf, s2, 1..self.bins + 1),
        }
    }
}

/// Combines branches: `(r1 + w r2) / √(P_h H + w² P_l L)` per delay bin.
pub fn combine(out: &BranchOutput, weights: &WeightProfile, pcfg: &PulseConfig) -> Result<Vec<Complex64>> {
    let n = out.r1.len();
    if out.r2.len() != n {
        return Err(Error::LengthMismatch { expected: n, actual: out.r2.len() });
    }
    if weights.len() != n {
        return Err(Error::LengthMismatch { expected: n, actual: weights.len() });
    }
    let eh = pcfg.p_high * pcfg.high_len as f64;
    let el = pcfg.p_low * pcfg.low_len as f64;
    Ok(out
        .r1
        .iter()
        .zip(&out.r2)
        .zip(weights.as_slice())
        .map(|((a, b), &w)| {
            if w.is_infinite() {
                b / el.sqrt()
            } else {
                (a + b * w) / (eh + w * w * el).sqrt()
            }
        })
        .collect())
}

/// Slow-time taper applied before the Doppler transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DopplerWindow {
    #[default]
    Rectangular,
    Hann,
}

impl DopplerWindow {
    pub fn coefficients(self, k: usize) -> Vec<f64> {
        match self {
            DopplerWindow::Rectangular => vec![1.0; k],
            DopplerWindow::Hann if k == 1 => vec![1.0],
            DopplerWindow::Hann => (0..k)
                .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / (k - 1) as f64).cos())
                .collect(),
        }
    }
}

/// Fast-time outputs of a CPI: `rows` delay bins by `cols` PRIs, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FastTimeMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<Complex64>,
}

impl FastTimeMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![ZERO; rows * cols] }
    }

    pub fn row(&self, r: usize) -> &[Complex64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn set_column(&mut self, c: usize, values: &[Complex64]) {
        for (r, v) in values.iter().enumerate() {
            self.data[r * self.cols + c] = *v;
        }
    }
}

/// Bin spacing of an RD map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RdAxes {
    /// Range of delay bin 1 is `range_per_bin`.
    pub range_per_bin: f64,
    pub velocity_per_bin: f64,
}

impl RdAxes {
    pub fn from_config(pcfg: &PulseConfig, m_fft: usize) -> Self {
        let doppler_per_bin = 1.0 / (m_fft as f64 * pcfg.pri_s);
        Self {
            range_per_bin: pcfg.range_per_bin(),
            velocity_per_bin: doppler_per_bin * C0 / (2.0 * pcfg.carrier_hz),
        }
    }
}

/// Range-Doppler power map. Column `c` holds Doppler index
/// `c - zero_col`, so columns span `(-M_FFT/2, M_FFT/2]` for even sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RdMap {
    pub rows: usize,
    pub cols: usize,
    pub power: Vec<f64>,
    pub axes: RdAxes,
}

impl RdMap {
    pub fn new(rows: usize, cols: usize, power: Vec<f64>, axes: RdAxes) -> Result<Self> {
        if power.len() != rows * cols {
            return Err(Error::LengthMismatch { expected: rows * cols, actual: power.len() });
        }
        Ok(Self { rows, cols, power, axes })
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.power[row * self.cols + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.power[row * self.cols..(row + 1) * self.cols]
    }

    /// Column holding zero Doppler.
    pub fn zero_col(&self) -> usize {
        (self.cols - 1) / 2
    }

    /// Signed Doppler index of column `col`.
    pub fn doppler_index(&self, col: usize) -> isize {
        col as isize - self.zero_col() as isize
    }

    /// Column of a signed Doppler index, wrapping modulo `cols`.
    pub fn col_of(&self, doppler_index: isize) -> usize {
        (doppler_index + self.zero_col() as isize).rem_euclid(self.cols as isize) as usize
    }

    /// 1-based delay bin of `row`.
    pub fn delay_bin(&self, row: usize) -> usize {
        row + 1
    }

    pub fn range_m(&self, row: usize) -> f64 {
        self.delay_bin(row) as f64 * self.axes.range_per_bin
    }

    pub fn velocity_mps(&self, col: usize) -> f64 {
        self.doppler_index(col) as f64 * self.axes.velocity_per_bin
    }

    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.power.iter_mut().for_each(|v| *v *= c);
        out
    }

    /// CSV with one row per delay bin: `delay_bin,range_m,p_0,...`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec!["delay_bin".to_string(), "range_m".to_string()];
        header.extend((0..self.cols).map(|c| format!("doppler_{}", self.doppler_index(c))));
        wr.write_record(&header)?;
        for r in 0..self.rows {
            let mut rec = vec![self.delay_bin(r).to_string(), format!("{}", self.range_m(r))];
            rec.extend(self.row(r).iter().map(|v| format!("{v:e}")));
            wr.write_record(&rec)?;
        }
        wr.flush()?;
        Ok(())
    }

    /// Little-endian `f64` row-major dump at `path` plus `path.json` metadata.
    pub fn write_binary(&self, path: &Path) -> Result<()> {
        let mut f = BufWriter::new(File::create(path)?);
        for v in &self.power {
            f.write_all(&v.to_le_bytes())?;
        }
        f.flush()?;
        let meta = RdMapMeta {
            rows: self.rows,
            cols: self.cols,
            dtype: "f64le".into(),
            layout: "row_major".into(),
            first_delay_bin: 1,
            zero_doppler_col: self.zero_col(),
            axes: self.axes,
        };
        let sidecar = sidecar_path(path);
        std::fs::write(sidecar, serde_json::to_string_pretty(&meta)?)?;
        Ok(())
    }

    pub fn read_binary(path: &Path) -> Result<Self> {
        let meta: RdMapMeta = serde_json::from_str(&std::fs::read_to_string(sidecar_path(path))?)?;
        let bytes = std::fs::read(path)?;
        let power: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        Self::new(meta.rows, meta.cols, power, meta.axes)
    }
}

fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    s.into()
}

#[derive(Debug, Serialize, Deserialize)]
struct RdMapMeta {
    rows: usize,
    cols: usize,
    dtype: String,
    layout: String,
    first_delay_bin: usize,
    zero_doppler_col: usize,
    axes: RdAxes,
}

/// `P(n, m) = |DFT_{M_FFT}(window · D(n, ·))[m]|² / K`, FFT-shifted.
pub fn rd_map(d: &FastTimeMatrix, m_fft: usize, window: DopplerWindow, axes: RdAxes) -> Result<RdMap> {
    let k = d.cols;
    if m_fft < k || k == 0 {
        return Err(Error::Config(format!("M_FFT={m_fft} must be at least K={k}")));
    }
    let fft = FftPlanner::new().plan_fft_forward(m_fft);
    let taper = window.coefficients(k);
    let zero_col = (m_fft - 1) / 2;
    let scale = 1.0 / k as f64;
    let mut power = vec![0.0; d.rows * m_fft];
    let mut buf = vec![ZERO; m_fft];
    let mut scratch = vec![ZERO; fft.get_inplace_scratch_len()];
    for r in 0..d.rows {
        buf.fill(ZERO);
        for (b, (v, t)) in buf.iter_mut().zip(d.row(r).iter().zip(&taper)) {
            *b = v * t;
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        let out = &mut power[r * m_fft..(r + 1) * m_fft];
        for (m, v) in buf.iter().enumerate() {
            let col = (m + zero_col) % m_fft;
            out[col] = v.norm_sqr() * scale;
        }
    }
    RdMap::new(d.rows, m_fft, power, axes)
}

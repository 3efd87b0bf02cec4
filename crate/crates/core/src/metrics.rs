//! Analytic sensing metrics: sidelobe ratio under partial eclipsing, the
//! piecewise SNR/SINR/SSINR metric, optimal branch weights and the minimum
//! detectable RCS.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelConfig;
use crate::detection::CfarConfig;
use crate::error::{Error, Result};
use crate::receiver::WeightProfile;
use crate::sequences::SequenceSet;
use crate::units::{db_to_linear, C0};
use crate::waveform::PulseConfig;

/// Scalar parameters of the analytic model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricParams {
    pub num_pri: usize,
    pub p_high: f64,
    pub p_low: f64,
    pub high_len: usize,
    pub low_len: usize,
    pub recovery_len: usize,
    pub silent_len: usize,
    pub beta_sq: f64,
    /// Noise power per sample including the noise figure (W).
    pub n0b: f64,
    pub guard_cells: usize,
    pub training_cells: usize,
    /// `G_t G_r λ² / (4π)³`.
    pub radar_constant: f64,
    pub chip_s: f64,
    /// Minimum detectable SNR (linear).
    pub rho: f64,
}

impl MetricParams {
    pub fn new(pcfg: &PulseConfig, ccfg: &ChannelConfig, cfar: &CfarConfig, rho_db: f64) -> Self {
        Self {
            num_pri: pcfg.num_pri,
            p_high: pcfg.p_high,
            p_low: pcfg.p_low,
            high_len: pcfg.high_len,
            low_len: pcfg.low_len,
            recovery_len: pcfg.recovery_len,
            silent_len: pcfg.silent_len,
            beta_sq: ccfg.beta_sq(),
            n0b: ccfg.noise_power(pcfg),
            guard_cells: cfar.guard_cells,
            training_cells: cfar.training_cells,
            radar_constant: ccfg.radar_constant(),
            chip_s: pcfg.chip_s,
            rho: db_to_linear(rho_db),
        }
    }

    pub fn num_delay_bins(&self) -> usize {
        self.recovery_len + self.low_len + self.silent_len
    }

    /// Range of delay bin `n` (m).
    pub fn range_of(&self, n: usize) -> f64 {
        n as f64 * self.chip_s * C0 / 2.0
    }

    /// `|α|²` of a target with RCS `sigma` at delay bin `n`.
    pub fn alpha_sq(&self, n: usize, sigma: f64) -> f64 {
        self.radar_constant * sigma / self.range_of(n).powi(4)
    }
}

/// The eight delay regions of the piecewise metric.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    /// `(0, N_r]`: low-power echo only.
    RecoveryLowOnly,
    /// `(N_r, L]`: eclipsed high-power echo, both branches see RSI.
    EclipsedFullRsi,
    /// `(L, L+N_r]`.
    EclipsedRecovery,
    /// `(L+N_r, H+N_r)`.
    EclipsedHighRsi,
    /// `[H+N_r, H+N_r+L]`: full echo with RSI.
    FullRsi,
    /// `(H+N_r+L, S]`: full echo, noise only.
    Full,
    /// `(S, L+S]`: low-power tail truncated.
    TruncatedLow,
    /// `(L+S, N_r+L+S]`: high-power echo only.
    HighOnly,
}

impl Region {
    pub fn label(self) -> &'static str {
        match self {
            Region::RecoveryLowOnly => "sinr_low_only",
            Region::EclipsedFullRsi => "ssinr_full_rsi",
            Region::EclipsedRecovery => "ssinr_recovery",
            Region::EclipsedHighRsi => "ssinr_high_rsi",
            Region::FullRsi => "sinr",
            Region::Full => "snr",
            Region::TruncatedLow => "snr_truncated",
            Region::HighOnly => "snr_high_only",
        }
    }

    /// Regions where sidelobes of the eclipsed high-power echo matter.
    pub fn is_eclipsed(self) -> bool {
        matches!(
            self,
            Region::EclipsedFullRsi | Region::EclipsedRecovery | Region::EclipsedHighRsi
        )
    }

    pub const ALL: [Region; 8] = [
        Region::RecoveryLowOnly,
        Region::EclipsedFullRsi,
        Region::EclipsedRecovery,
        Region::EclipsedHighRsi,
        Region::FullRsi,
        Region::Full,
        Region::TruncatedLow,
        Region::HighOnly,
    ];
}

/// Region of delay bin `n`; boundaries belong to the earlier region.
pub fn region_of(n: usize, p: &MetricParams) -> Result<Region> {
    let (h, l, nr, s) = (p.high_len, p.low_len, p.recovery_len, p.silent_len);
    let r = if n == 0 || n > nr + l + s {
        return Err(Error::Domain(format!("delay bin {n} outside 1..={}", nr + l + s)));
    } else if n <= nr {
        Region::RecoveryLowOnly
    } else if n <= l {
        Region::EclipsedFullRsi
    } else if n <= l + nr {
        Region::EclipsedRecovery
    } else if n < h + nr {
        Region::EclipsedHighRsi
    } else if n <= h + nr + l {
        Region::FullRsi
    } else if n <= s {
        Region::Full
    } else if n <= l + s {
        Region::TruncatedLow
    } else {
        Region::HighOnly
    };
    Ok(r)
}

/// Joint high-power correlation `Σ_k r_{h,k}[lag]` of the full filters
/// against echoes eclipsed at delay `n_tau`, unit chip amplitude.
pub fn eclipsed_correlation(set: &SequenceSet, num_pri: usize, recovery_len: usize, n_tau: usize, lag: usize) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for p in 0..4 {
        let h = set.pulse_for_pri(p).high.chips();
        let hl = h.len();
        // Eclipsed echo: chips h[H+N_r-n_tau..H] placed from index H+N_r.
        let start = hl + recovery_len - n_tau;
        for (i, hi) in h.iter().enumerate() {
            let j = i + lag;
            if j >= hl + recovery_len && j < hl + n_tau {
                acc += hi.conj() * h[start + j - (hl + recovery_len)];
            }
        }
    }
    // Each of the 4 pulses repeats K/4 times over the CPI.
    acc * (num_pri as f64 / 4.0)
}

/// Peak-to-average sidelobe ratio for `N_r < n_tau < H + N_r`.
///
/// The CFAR training window starts at the first bin after the recovery gap
/// and is redistributed to the right near that edge. Returns `+inf` when
/// every training cell is exactly zero.
pub fn paslr(n_tau: usize, set: &SequenceSet, p: &MetricParams) -> Result<f64> {
    let (nr, h) = (p.recovery_len, p.high_len);
    if n_tau <= nr || n_tau >= h + nr {
        return Err(Error::Domain(format!(
            "PASLR is defined for {} < n_tau < {}, got {n_tau}",
            nr,
            h + nr
        )));
    }
    let (g, t) = (p.guard_cells / 2, p.training_cells);
    let power = |n: usize| eclipsed_correlation(set, p.num_pri, nr, n_tau, n).norm_sqr();
    let sum = |a: usize, b: usize| (a..=b).map(power).sum::<f64>();
    let denom = if n_tau <= nr + g + 1 {
        sum(n_tau + g + 1, n_tau + g + t)
    } else if n_tau < nr + g + t / 2 + 1 {
        sum(nr + 1, n_tau - g - 1) + sum(n_tau + g + 1, nr + 2 * g + t + 1)
    } else {
        sum(n_tau - g - t / 2, n_tau - g - 1) + sum(n_tau + g + 1, n_tau + g + t / 2)
    };
    let peak = power(n_tau);
    if denom == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(t as f64 * peak / denom)
}

/// Value of one branch formula at `n` for weight `w`, gain `alpha_sq` and
/// sidelobe ratio `gamma` (ignored outside the eclipsed regions). An
/// infinite `w` evaluates the low-power-only limit.
pub fn branch_value(region: Region, n: usize, w: f64, alpha_sq: f64, gamma: f64, p: &MetricParams) -> f64 {
    let k = p.num_pri as f64;
    let (ph, pl) = (p.p_high, p.p_low);
    let (h, l) = (p.high_len as f64, p.low_len as f64);
    let (nr, s) = (p.recovery_len as f64, p.silent_len as f64);
    let nf = n as f64;
    let b2 = p.beta_sq;
    let n0b = p.n0b;
    let sidelobe = |a: f64| if gamma.is_infinite() { 0.0 } else { k * alpha_sq * a * a / gamma };
    // SNR-type ratio of a two-branch filter, with `w = inf` as its limit.
    let ratio = |a: f64, d: f64, sl: f64, rsi_h: f64, rsi_l: f64, noise_l: f64| {
        if w.is_infinite() {
            k * alpha_sq * d * d / (b2 * rsi_l * pl * pl + n0b * noise_l * pl)
        } else {
            k * alpha_sq * (a + w * d).powi(2)
                / (sl + b2 * (rsi_h + w * w * rsi_l * pl * pl) + n0b * (a + w * w * noise_l * pl))
        }
    };
    match region {
        Region::RecoveryLowOnly => k * alpha_sq * (pl * l).powi(2) / (b2 * (l - nf) * pl * pl + n0b * pl * l),
        Region::EclipsedFullRsi => {
            let a = ph * (nf - nr);
            ratio(a, pl * l, sidelobe(a), (nf - nr) * ph * pl, l - nf, l)
        }
        Region::EclipsedRecovery => {
            let a = ph * (nf - nr);
            ratio(a, pl * l, sidelobe(a), (nf - nr) * ph * pl, 0.0, l)
        }
        Region::EclipsedHighRsi => {
            let a = ph * (nf - nr);
            ratio(a, pl * l, sidelobe(a), l * ph * pl, 0.0, l)
        }
        Region::FullRsi => ratio(ph * h, pl * l, 0.0, (h + nr + l - nf) * ph * pl, 0.0, l),
        Region::Full => ratio(ph * h, pl * l, 0.0, 0.0, 0.0, l),
        Region::TruncatedLow => {
            let lt = l + s - nf;
            ratio(ph * h, pl * lt, 0.0, 0.0, 0.0, lt)
        }
        Region::HighOnly => k * alpha_sq * ph * h / n0b,
    }
}

/// Result of a minimum-RCS solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinRcs {
    pub sigma: f64,
    /// Metric at `sigma` (with the weight designed for `sigma`).
    pub metric: f64,
    pub weight: f64,
}

/// Coefficients behind the monotonicity argument for `n_tau ∈ (N_r, L]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AppendixCoefficients {
    pub a: f64,
    pub d: f64,
    pub f: f64,
    pub m: f64,
    pub n: f64,
    pub c: f64,
    pub dd: f64,
    pub e: f64,
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    /// `C0..C4` of the derivative numerator `g(x) = Σ C_i x^i`.
    pub c_poly: [f64; 5],
}

impl AppendixCoefficients {
    /// `f(x) = K x (A + (m x + n) D)² / (c x + d + e (m x + n)²)`.
    pub fn f(&self, x: f64, k: f64) -> f64 {
        let w = self.m * x + self.n;
        k * x * (self.a + w * self.d).powi(2) / (self.c * x + self.dd + self.e * w * w)
    }

    pub fn g(&self, x: f64) -> f64 {
        self.c_poly.iter().rev().fold(0.0, |acc, ci| acc * x + ci)
    }

    /// `2 D A c / m - A² e`, which equals `P_l F A²`.
    pub fn bracket(&self) -> f64 {
        2.0 * self.d * self.a * self.c / self.m - self.a * self.a * self.e
    }

    /// `D(x)` with `f'(x) = g(x) / D(x)²`.
    pub fn denominator(&self, x: f64) -> f64 {
        self.b2 * x * x + self.b1 * x + self.b0
    }
}

/// Analytic model with the sidelobe ratios precomputed for every eclipsed bin.
#[derive(Debug, Clone)]
pub struct MetricModel {
    pub params: MetricParams,
    /// `gamma[n - N_r - 1]` for `n ∈ (N_r, H + N_r)`.
    gamma: Vec<f64>,
}

const SOLVER_REL_TOL: f64 = 1e-12;

impl MetricModel {
    pub fn new(params: MetricParams, set: &SequenceSet) -> Result<Self> {
        let nr = params.recovery_len;
        let gamma = (nr + 1..nr + params.high_len)
            .map(|n| paslr(n, set, &params))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { params, gamma })
    }

    pub fn region(&self, n: usize) -> Result<Region> {
        region_of(n, &self.params)
    }

    /// Sidelobe ratio at `n`; `+inf` outside the eclipsed span.
    pub fn gamma(&self, n: usize) -> f64 {
        let nr = self.params.recovery_len;
        if n > nr && n < nr + self.params.high_len {
            self.gamma[n - nr - 1]
        } else {
            f64::INFINITY
        }
    }

    /// Sensing metric `F` at delay bin `n` for weight `w` and RCS `sigma`,
    /// with the range taken from the bin.
    pub fn sensing_metric(&self, n: usize, w: f64, sigma: f64) -> Result<f64> {
        if w.is_nan() || w < 0.0 {
            return Err(Error::Domain(format!("weight {w} must be non-negative")));
        }
        if !(sigma >= 0.0) {
            return Err(Error::Domain(format!("RCS {sigma} must be non-negative")));
        }
        let region = self.region(n)?;
        let alpha_sq = self.params.alpha_sq(n, sigma);
        Ok(branch_value(region, n, w, alpha_sq, self.gamma(n), &self.params))
    }

    /// Stationary weight for a target of RCS `sigma` at bin `n`.
    pub fn weight_for_rcs(&self, n: usize, sigma: f64) -> Result<f64> {
        let p = &self.params;
        let region = self.region(n)?;
        let (ph, pl) = (p.p_high, p.p_low);
        let (h, l, nr) = (p.high_len as f64, p.low_len as f64, p.recovery_len as f64);
        let (b2, n0b, k) = (p.beta_sq, p.n0b, p.num_pri as f64);
        let nf = n as f64;
        let x = p.alpha_sq(n, sigma);
        let g = self.gamma(n);
        let sl = |v: f64| if g.is_infinite() { 0.0 } else { v / g };
        let w = match region {
            Region::RecoveryLowOnly => {
                return Err(Error::Domain(format!(
                    "no weight at delay bin {n}: only the low-power echo is received"
                )))
            }
            Region::EclipsedFullRsi => {
                (sl(k * l * x * ph * (nf - nr)) + l * b2 * pl + n0b * l) / (b2 * (l - nf) * pl + n0b * l)
            }
            Region::EclipsedRecovery => (sl(k * x * ph * (nf - nr)) + b2 * pl + n0b) / n0b,
            Region::EclipsedHighRsi => {
                let a = ph * (nf - nr);
                (sl(k * x * a * a) + b2 * l * ph * pl) / (n0b * a) + 1.0
            }
            Region::FullRsi => b2 * (h + nr + l - nf) * pl / (n0b * h) + 1.0,
            Region::Full | Region::TruncatedLow | Region::HighOnly => 1.0,
        };
        Ok(w)
    }

    /// Optimal weight at bin `n`, designed for the minimum detectable RCS in
    /// the eclipsed regions. RCS-independent elsewhere.
    pub fn optimal_weight(&self, n: usize) -> Result<f64> {
        let region = self.region(n)?;
        if region.is_eclipsed() {
            let sigma = self.min_detectable_rcs(n)?.sigma;
            self.weight_for_rcs(n, sigma)
        } else {
            self.weight_for_rcs(n, 1.0)
        }
    }

    /// `f(n, σ) = F(n, w(n, σ), σ)`.
    pub fn metric_at_own_weight(&self, n: usize, sigma: f64) -> Result<f64> {
        let w = self.weight_for_rcs(n, sigma)?;
        self.sensing_metric(n, w, sigma)
    }

    /// Smallest RCS whose metric reaches `rho` under the optimal weight.
    pub fn min_detectable_rcs(&self, n: usize) -> Result<MinRcs> {
        self.min_detectable_rcs_for(n, self.params.rho)
    }

    pub fn min_detectable_rcs_for(&self, n: usize, rho: f64) -> Result<MinRcs> {
        if !(rho > 0.0) {
            return Err(Error::Domain(format!("rho {rho} must be positive")));
        }
        let region = self.region(n)?;
        if !region.is_eclipsed() {
            // Metric is linear in σ at a σ-independent weight.
            let w = match region {
                Region::RecoveryLowOnly => f64::INFINITY,
                _ => self.weight_for_rcs(n, 1.0)?,
            };
            let unit = self.sensing_metric(n, w, 1.0)?;
            let sigma = rho / unit;
            return Ok(MinRcs { sigma, metric: unit * sigma, weight: w });
        }
        let f = |sigma: f64| self.metric_at_own_weight(n, sigma);
        let (mut lo, mut hi) = (1e-12_f64, 1e-6_f64);
        while f(lo)? >= rho {
            lo /= 1e6;
            if lo < 1e-300 {
                return Err(Error::Solver(format!("no lower bracket at bin {n}")));
            }
        }
        while f(hi)? < rho {
            hi *= 1e3;
            if hi > 1e300 {
                return Err(Error::Solver(format!("rho unattainable at bin {n}")));
            }
        }
        // Bisection on log σ; valid because f is increasing in σ.
        for _ in 0..400 {
            let mid = (lo * hi).sqrt();
            if f(mid)? < rho {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi / lo - 1.0 < SOLVER_REL_TOL {
                break;
            }
        }
        let sigma = (lo * hi).sqrt();
        Ok(MinRcs {
            sigma,
            metric: f(sigma)?,
            weight: self.weight_for_rcs(n, sigma)?,
        })
    }

    /// Minimum RCS under a fixed weight, or `None` when the metric saturates
    /// below `rho` (sidelobe-limited).
    pub fn min_rcs_fixed_weight(&self, n: usize, w: f64) -> Result<Option<f64>> {
        let region = self.region(n)?;
        let rho = self.params.rho;
        if !region.is_eclipsed() {
            let unit = self.sensing_metric(n, w, 1.0)?;
            return Ok((unit > 0.0).then(|| rho / unit));
        }
        // F(σ) = u σ / (v σ + c0) saturates at u / v.
        let u = self.sensing_metric(n, w, 1.0)?;
        let big = self.sensing_metric(n, w, 1e30)?;
        if big < rho * (1.0 + 1e-12) {
            return Ok(None);
        }
        let (mut lo, mut hi) = (1e-300_f64, 1e30_f64);
        if u >= rho {
            hi = 1.0;
        } else {
            lo = 1.0;
        }
        for _ in 0..4000 {
            let mid = (lo * hi).sqrt();
            if self.sensing_metric(n, w, mid)? < rho {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi / lo - 1.0 < SOLVER_REL_TOL {
                break;
            }
        }
        Ok(Some((lo * hi).sqrt()))
    }

    /// Optimal per-bin weight profile: low-power-only before the recovery
    /// gap ends, the designed weight through the RSI span, 1 beyond it.
    pub fn optimal_profile(&self) -> Result<WeightProfile> {
        let bins = self.params.num_delay_bins();
        let w = (1..=bins)
            .map(|n| match self.region(n)? {
                Region::RecoveryLowOnly => Ok(f64::INFINITY),
                _ => self.optimal_weight(n),
            })
            .collect::<Result<Vec<_>>>()?;
        WeightProfile::new(w)
    }

    /// Per-bin weight profile designed for a target of RCS `sigma` in the
    /// eclipsed bins; identical to [`Self::optimal_profile`] elsewhere.
    pub fn designed_profile(&self, sigma: f64) -> Result<WeightProfile> {
        if !(sigma > 0.0) {
            return Err(Error::Domain(format!("design RCS {sigma} must be positive")));
        }
        let bins = self.params.num_delay_bins();
        let w = (1..=bins)
            .map(|n| match self.region(n)? {
                Region::RecoveryLowOnly => Ok(f64::INFINITY),
                r if r.is_eclipsed() => self.weight_for_rcs(n, sigma),
                _ => self.optimal_weight(n),
            })
            .collect::<Result<Vec<_>>>()?;
        WeightProfile::new(w)
    }

    /// Auxiliary constants and derivative-numerator coefficients for
    /// `n ∈ (N_r, L]`.
    pub fn appendix_coefficients(&self, n: usize) -> Result<AppendixCoefficients> {
        if self.region(n)? != Region::EclipsedFullRsi {
            return Err(Error::Domain(format!("bin {n} is outside (N_r, L]")));
        }
        let p = &self.params;
        let k = p.num_pri as f64;
        let (ph, pl) = (p.p_high, p.p_low);
        let (l, nr) = (p.low_len as f64, p.recovery_len as f64);
        let nf = n as f64;
        let gamma = self.gamma(n);
        let a = ph * (nf - nr);
        let d = pl * l;
        let f = p.beta_sq * (l - nf) * pl + p.n0b * l;
        let m = k * l * a / (gamma * f);
        let nn = (l * p.beta_sq * pl + p.n0b * l) / f;
        let c = k * a * a / gamma;
        let dd = p.beta_sq * (nf - nr) * ph * pl + p.n0b * a;
        let e = pl * f;
        let a3 = k * m * m * d * d;
        let a2 = 2.0 * k * m * d * (a + nn * d);
        let a1 = k * (a + nn * d).powi(2);
        let b2 = e * m * m;
        let b1 = c + 2.0 * e * m * nn;
        let b0 = dd + e * nn * nn;
        let c_poly = [
            a1 * b0,
            2.0 * a2 * b0,
            3.0 * a3 * b0 + a2 * b1 - a1 * b2,
            2.0 * a3 * b1,
            a3 * b2,
        ];
        Ok(AppendixCoefficients {
            a,
            d,
            f,
            m,
            n: nn,
            c,
            dd,
            e,
            a1,
            a2,
            a3,
            b0,
            b1,
            b2,
            c_poly,
        })
    }
}

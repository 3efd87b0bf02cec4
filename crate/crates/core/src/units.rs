//! Physical constants and decibel conversions.
//!
//! Every dB/linear conversion in the crate goes through this module.

/// Speed of light in vacuum (m/s).
pub const C0: f64 = 299_792_458.0;

/// Power ratio in dB to linear.
#[inline]
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Linear power ratio to dB. Non-positive input maps to `-inf`.
#[inline]
pub fn linear_to_db(x: f64) -> f64 {
    if x > 0.0 {
        10.0 * x.log10()
    } else {
        f64::NEG_INFINITY
    }
}

/// dBm to watts.
#[inline]
pub fn dbm_to_watts(dbm: f64) -> f64 {
    db_to_linear(dbm - 30.0)
}

/// Watts to dBm.
#[inline]
pub fn watts_to_dbm(w: f64) -> f64 {
    linear_to_db(w) + 30.0
}

/// RCS in dBsm to square meters.
#[inline]
pub fn dbsm_to_m2(dbsm: f64) -> f64 {
    db_to_linear(dbsm)
}

/// RCS in square meters to dBsm.
#[inline]
pub fn m2_to_dbsm(m2: f64) -> f64 {
    linear_to_db(m2)
}

/// Residual self-interference power gain |β|² for a SIC capability in dB.
/// `f64::INFINITY` gives perfect cancellation.
#[inline]
pub fn sic_db_to_beta_sq(sic_db: f64) -> f64 {
    if sic_db.is_infinite() && sic_db > 0.0 {
        0.0
    } else {
        db_to_linear(-sic_db)
    }
}

/// One-way range covered by `bins` chips of duration `chip_s`.
#[inline]
pub fn bins_to_range(bins: f64, chip_s: f64) -> f64 {
    bins * C0 * chip_s / 2.0
}

/// Nearest delay bin for a target at `range_m`.
#[inline]
pub fn range_to_bin(range_m: f64, chip_s: f64) -> i64 {
    (2.0 * range_m / (C0 * chip_s)).round() as i64
}

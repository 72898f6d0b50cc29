//! KPSS level-stationarity pre-check.
//!
//! The statistic is `n^-2 * sum_t S_t^2 / lrv`, where `S_t` are partial
//! sums of the demeaned series (level stationarity: no trend term) and
//! `lrv` is the Bartlett-kernel long-run variance with bandwidth
//! `floor(4 * (n/100)^(1/4))` unless one is supplied. Large values reject
//! stationarity; the critical values are 0.347 (10%), 0.463 (5%) and
//! 0.739 (1%).

use crate::error::{Error, Result};
use serde::Serialize;

pub const KPSS_CRITICAL_10PCT: f64 = 0.347;
pub const KPSS_CRITICAL_5PCT: f64 = 0.463;
pub const KPSS_CRITICAL_1PCT: f64 = 0.739;

/// Bandwidth rule for the Bartlett long-run variance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bandwidth {
    /// `floor(4 * (n/100)^(1/4))`.
    Auto,
    Fixed(usize),
}

/// KPSS test output.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct KpssResult {
    pub statistic: f64,
    pub bandwidth: usize,
    /// The long-run variance was (numerically) zero: constant series.
    pub degenerate: bool,
    pub reject_at_10pct: bool,
    pub reject_at_5pct: bool,
    pub reject_at_1pct: bool,
}

/// Conventional automatic bandwidth.
pub fn auto_bandwidth(n: usize) -> usize {
    (4.0 * (n as f64 / 100.0).powf(0.25)).floor() as usize
}

/// Bartlett-kernel long-run variance of an already-demeaned series:
/// `gamma_0 + 2 * sum_{j=1..b} (1 - j/(b+1)) gamma_j` with autocovariances
/// normalized by `n`. Shared with the long-run variance estimation used by
/// the stopping-time approximations, so the two stay consistent.
pub fn bartlett_long_run_variance(demeaned: &[f64], bandwidth: usize) -> f64 {
    let n = demeaned.len();
    let nf = n as f64;
    let mut lrv = demeaned.iter().map(|e| e * e).sum::<f64>() / nf;
    for j in 1..=bandwidth.min(n.saturating_sub(1)) {
        let mut gamma_j = 0.0;
        for t in j..n {
            gamma_j += demeaned[t] * demeaned[t - j];
        }
        gamma_j /= nf;
        lrv += 2.0 * (1.0 - j as f64 / (bandwidth as f64 + 1.0)) * gamma_j;
    }
    lrv
}

/// Runs the KPSS level-stationarity test.
pub fn kpss_level(series: &[f64], bandwidth: Bandwidth) -> Result<KpssResult> {
    let n = series.len();
    if n < 8 {
        return Err(Error::Data(format!(
            "KPSS needs at least 8 observations, got {n}"
        )));
    }
    let b = match bandwidth {
        Bandwidth::Auto => auto_bandwidth(n),
        Bandwidth::Fixed(b) => b,
    };

    let mean = series.iter().sum::<f64>() / n as f64;
    let demeaned: Vec<f64> = series.iter().map(|x| x - mean).collect();

    let scale = demeaned.iter().fold(0.0f64, |a, &e| a.max(e.abs()));
    if scale == 0.0 {
        // constant input: zero partial sums, statistic defined as 0
        return Ok(KpssResult {
            statistic: 0.0,
            bandwidth: b,
            degenerate: true,
            reject_at_10pct: false,
            reject_at_5pct: false,
            reject_at_1pct: false,
        });
    }

    let nf = n as f64;
    let mut s = 0.0;
    let mut sum_sq_partial = 0.0;
    for e in &demeaned {
        s += e;
        sum_sq_partial += s * s;
    }
    let numerator = sum_sq_partial / (nf * nf);
    let lrv = bartlett_long_run_variance(&demeaned, b);
    if lrv <= 0.0 {
        return Ok(KpssResult {
            statistic: 0.0,
            bandwidth: b,
            degenerate: true,
            reject_at_10pct: false,
            reject_at_5pct: false,
            reject_at_1pct: false,
        });
    }
    let statistic = numerator / lrv;
    Ok(KpssResult {
        statistic,
        bandwidth: b,
        degenerate: false,
        reject_at_10pct: statistic > KPSS_CRITICAL_10PCT,
        reject_at_5pct: statistic > KPSS_CRITICAL_5PCT,
        reject_at_1pct: statistic > KPSS_CRITICAL_1PCT,
    })
}

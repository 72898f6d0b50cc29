//! Shared oracles and helpers for the integration suites.
//!
//! Everything here is an independent route: the batch scanner rebuilds the
//! residual vector with its own arithmetic, the least-squares oracle is a
//! hand-rolled Gauss-Jordan solve, and the sup-of-|W| distribution comes
//! from the classical reflection series rather than simulation.

use breakwatch::dgp::GeneratedWorld;
use breakwatch::model::FittedModel;
use statrs::distribution::{ContinuousCDF, Normal};

/// Standard normal CDF.
pub fn std_normal_cdf(x: f64) -> f64 {
    Normal::new(0.0, 1.0).unwrap().cdf(x)
}

/// One-sample Kolmogorov-Smirnov distance against the standard normal.
pub fn ks_distance_std_normal(samples: &[f64]) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = std_normal_cdf(x);
        d = d.max(((i + 1) as f64 / n - f).abs());
        d = d.max((f - i as f64 / n).abs());
    }
    d
}

/// Two-sample Kolmogorov-Smirnov distance.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);
    let (na, nb) = (xs.len() as f64, ys.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < xs.len() && j < ys.len() {
        if xs[i] <= ys[j] {
            i += 1;
        } else {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// `P{ sup_{0 <= t <= 1} |W(t)| <= c }` by the alternating reflection series.
pub fn sup_abs_brownian_cdf(c: f64) -> f64 {
    if c <= 0.0 {
        return 0.0;
    }
    let mut acc = 0.0;
    for k in 0..200 {
        let m = (2 * k + 1) as f64;
        let term = (if k % 2 == 0 { 1.0 } else { -1.0 }) / m
            * (-m * m * std::f64::consts::PI * std::f64::consts::PI / (8.0 * c * c)).exp();
        acc += term;
        if term.abs() < 1e-17 {
            break;
        }
    }
    (4.0 / std::f64::consts::PI) * acc
}

/// Quantile of `sup |W|` over [0, 1], by bisection of the series CDF.
pub fn sup_abs_brownian_quantile(p: f64) -> f64 {
    let (mut lo, mut hi) = (0.05_f64, 10.0_f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if sup_abs_brownian_cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Batch-scan stopping-time oracle: builds the whole post-training residual
/// vector first (plain accumulation, own inner-product order), then scans
/// for the first strict boundary crossing. Returns `None` when no crossing
/// happens within `horizon` steps.
pub fn batch_scan_tau(
    world: &GeneratedWorld,
    model: &FittedModel,
    m: u64,
    horizon: u64,
    c: f64,
    gamma: f64,
    corrected: bool,
) -> Option<u64> {
    let m = m as usize;
    let beta = model.beta();
    let k = world.n_exog();
    let sigma_hat = model.sigma_hat_sq().sqrt();
    let horizon = (horizon as usize).min(world.len() - m);

    // residuals first
    let mut residuals = Vec::with_capacity(horizon);
    for s in 0..horizon {
        let t = m + s;
        // own evaluation order: lag term first, then exogenous, then intercept
        let mut fitted = beta[k + 1] * world.y[t - 1];
        let row = world.exog_row(t);
        for j in (0..k).rev() {
            fitted += beta[j + 1] * row[j];
        }
        fitted += beta[0];
        residuals.push(world.y[t] - fitted);
    }

    // then the scan
    let mf = m as f64;
    let correction = if corrected {
        1.0 + (1.0 + gamma) * sigma_hat / mf.sqrt()
    } else {
        1.0
    };
    let mut cum = 0.0;
    for (i, &r) in residuals.iter().enumerate() {
        cum += r;
        let s = (i + 1) as f64;
        let bound = c * correction * mf.sqrt() * (1.0 + s / mf) * (s / (mf + s)).powf(gamma);
        if cum.abs() / sigma_hat > bound {
            return Some((i + 1) as u64);
        }
    }
    None
}

/// Gauss-Jordan solve of the normal equations `(X'X) b = X'y` with partial
/// pivoting; the brute-force least-squares oracle.
pub fn brute_force_ols(rows: &[Vec<f64>], ys: &[f64]) -> Vec<f64> {
    let n = rows.len();
    let d = rows[0].len();
    let mut a = vec![vec![0.0_f64; d + 1]; d];
    for i in 0..d {
        for j in 0..d {
            let mut acc = 0.0;
            for t in 0..n {
                acc += rows[t][i] * rows[t][j];
            }
            a[i][j] = acc;
        }
        let mut acc = 0.0;
        for t in 0..n {
            acc += rows[t][i] * ys[t];
        }
        a[i][d] = acc;
    }
    for col in 0..d {
        let pivot = (col..d)
            .max_by(|&r1, &r2| a[r1][col].abs().total_cmp(&a[r2][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        let p = a[col][col];
        for j in col..=d {
            a[col][j] /= p;
        }
        for r in 0..d {
            if r != col {
                let f = a[r][col];
                for j in col..=d {
                    a[r][j] -= f * a[col][j];
                }
            }
        }
    }
    (0..d).map(|i| a[i][d]).collect()
}

//! Stopping-time approximations under the three change regimes.
//!
//! After a change the detector drifts, and the stopping time concentrates
//! around a deterministic center with a known fluctuation scale:
//!
//! * stationary post-change coefficient: `tau ~ a_m + b_m * N(0,1)` where
//!   the change size is `delta = c_a' (beta_0 - delta_m)`;
//! * unit-root post-change coefficient with drift `fa1 != 0`:
//!   `tau ~ c_m + d_m * N(0,1)`;
//! * unit-root with vanishing drift: `tau / M^((1-2g)/(3-2g))` converges to
//!   the first-passage law of an integrated Wiener process plus a parabola
//!   (`simulate_rw_limit` evaluates it by Monte Carlo);
//! * explosive post-change coefficient: `tau` sits `s* + (((1/2-g) ln M +
//!   g ln ln M) / ln |delta_d|)` steps in, shifted by a random `O(1)` term
//!   whose law is the distribution `F` of the series limit `Z`
//!   (`explosive_threshold` returns the threshold location and the argument
//!   at which `F` is evaluated).
//!
//! The `c_m`/`d_m` constants are implemented in the form the crossing
//! calculation actually produces: the drift enters `c_m` inversely
//! (stronger drift means earlier detection), `d_m` carries `c_m^(gamma-1)`,
//! and the constant `d_0` carries `c^((3-2*gamma)/(4-2*gamma))`. A unit
//! test pins `d_m` against an independent expansion of the crossing
//! equation.

use crate::dgp::{RegressorKind, RegressorProcess};
use crate::error::{Error, Result};
use crate::rng::{substream, Gaussian};
use crate::stationarity::{auto_bandwidth, bartlett_long_run_variance};
use rayon::prelude::*;
use serde::Serialize;

/// Change magnitude for the stationary-alternative normal approximation.
#[derive(Debug, Clone, Serialize)]
pub struct ChangeMagnitude {
    /// `c_a' (beta_0 - delta_m)`.
    pub delta: f64,
    /// `(1, E x_2, ..., E x_{d-1}, E y_after)`.
    pub c_a: Vec<f64>,
}

/// Drift and long-run-variance parameters for the unit-root alternative.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RandomWalkParams {
    /// `E w_0' (delta_bar - beta0_bar)`; with zero-mean regressors this is
    /// the intercept difference.
    pub fa1: f64,
    /// `sigma^2 + sum_s cov(w_0' delta_bar, w_s' delta_bar)`.
    pub fb1_sq: f64,
}

impl RandomWalkParams {
    pub fn fb1(&self) -> f64 {
        self.fb1_sq.sqrt()
    }
}

/// Parameters of the explosive alternative.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ExplosiveParams {
    /// Post-change autoregressive coefficient, `|delta_d_bar| > 1`.
    pub delta_d_bar: f64,
    /// Pre-change autoregressive coefficient, `|beta0_d| < 1`.
    pub beta0_d: f64,
    pub s_star: u64,
}

/// Measures the size of a stationary change.
///
/// The post-change stationary mean of the response is
/// `E w' delta_bar / (1 - delta_d)` (geometric series, zero-mean errors);
/// it forms the last coordinate of `c_a`.
pub fn delta_measure(
    beta0: &[f64],
    delta_m: &[f64],
    exog_means: &[f64],
) -> Result<ChangeMagnitude> {
    let d = beta0.len();
    if delta_m.len() != d {
        return Err(Error::Dimension(format!(
            "beta0 has length {d}, delta_m has {}",
            delta_m.len()
        )));
    }
    if exog_means.len() != d - 2 {
        return Err(Error::Dimension(format!(
            "expected {} exogenous means, got {}",
            d - 2,
            exog_means.len()
        )));
    }
    let delta_d = delta_m[d - 1];
    if delta_d.abs() >= 1.0 {
        return Err(Error::Parameter(format!(
            "stationary alternative needs |delta_d| < 1, got {delta_d}"
        )));
    }
    let mut mean_w_delta = delta_m[0];
    for (j, &mu) in exog_means.iter().enumerate() {
        mean_w_delta += delta_m[j + 1] * mu;
    }
    let ey_after = mean_w_delta / (1.0 - delta_d);

    let mut c_a = Vec::with_capacity(d);
    c_a.push(1.0);
    c_a.extend_from_slice(exog_means);
    c_a.push(ey_after);

    let mut delta = 0.0;
    for i in 0..d {
        delta += c_a[i] * (beta0[i] - delta_m[i]);
    }
    Ok(ChangeMagnitude { delta, c_a })
}

/// Center and scale of the stationary-alternative stopping time:
/// `a_m = (c sigma M^(1/2-g) / |delta|)^(1/(1-g))`,
/// `b_m = sigma sqrt(a_m) / ((1-g) |delta|)`.
pub fn am_bm(delta: f64, m: u64, c: f64, sigma: f64, gamma: f64) -> Result<(f64, f64)> {
    if delta == 0.0 {
        return Err(Error::Parameter(
            "the change size is zero: the stopping-time center is undefined".into(),
        ));
    }
    validate_cg(c, sigma, gamma)?;
    let mf = m as f64;
    let ad = delta.abs();
    let a = (c * sigma * mf.powf(0.5 - gamma) / ad).powf(1.0 / (1.0 - gamma));
    let b = sigma * a.sqrt() / ((1.0 - gamma) * ad);
    Ok((a, b))
}

fn validate_cg(c: f64, sigma: f64, gamma: f64) -> Result<()> {
    if !(c > 0.0) {
        return Err(Error::Parameter(format!("c must be positive, got {c}")));
    }
    if !(sigma > 0.0) {
        return Err(Error::Parameter(format!(
            "sigma must be positive, got {sigma}"
        )));
    }
    if !(0.0..0.5).contains(&gamma) {
        return Err(Error::Parameter(format!(
            "gamma must lie in [0, 0.5), got {gamma}"
        )));
    }
    Ok(())
}

/// Long-run variance estimation mode for [`fa1_fb1`].
#[derive(Debug, Clone, Copy)]
pub enum LongRunEstimation {
    /// Closed form from AR(1) autocovariances (also covers independent
    /// GARCH columns, which are serially uncorrelated).
    Analytic,
    /// Bartlett HAC on a simulated path of `w' delta_bar`, bandwidth
    /// `floor(4 (n/100)^(1/4))`.
    LongSimulation { n: usize, seed: u64 },
}

/// Drift `fa1` and long-run variance `fb1^2` for the unit-root alternative.
pub fn fa1_fb1(
    delta_bar: &[f64],
    beta0_bar: &[f64],
    proc: &RegressorProcess,
    sigma_sq: f64,
    estimation: LongRunEstimation,
) -> Result<RandomWalkParams> {
    proc.validate()?;
    let k = proc.n_columns();
    if delta_bar.len() != k + 1 || beta0_bar.len() != k + 1 {
        return Err(Error::Dimension(format!(
            "coefficient vectors must have length {} (intercept + {k} regressors)",
            k + 1
        )));
    }
    if !(sigma_sq > 0.0) {
        return Err(Error::Parameter(format!(
            "sigma_sq must be positive, got {sigma_sq}"
        )));
    }
    // the built-in regressor processes are zero-mean
    let fa1 = delta_bar[0] - beta0_bar[0];
    let loadings = &delta_bar[1..];

    let cov_sum = match estimation {
        LongRunEstimation::Analytic => analytic_cov_sum(proc, loadings)?,
        LongRunEstimation::LongSimulation { n, seed } => {
            if n < 100 {
                return Err(Error::Parameter("simulation length must be >= 100".into()));
            }
            let x = crate::dgp::gen_regressors(proc, n, 500, seed)?;
            let mut z: Vec<f64> = (0..n)
                .map(|t| {
                    let row = &x[t * k..(t + 1) * k];
                    let mut v = 0.0;
                    for j in 0..k {
                        v += loadings[j] * row[j];
                    }
                    v
                })
                .collect();
            let mean = z.iter().sum::<f64>() / n as f64;
            for v in &mut z {
                *v -= mean;
            }
            bartlett_long_run_variance(&z, auto_bandwidth(n))
        }
    };
    Ok(RandomWalkParams {
        fa1,
        fb1_sq: sigma_sq + cov_sum,
    })
}

fn analytic_cov_sum(proc: &RegressorProcess, loadings: &[f64]) -> Result<f64> {
    match &proc.kind {
        RegressorKind::Ar1 { rho } => {
            if proc.shared_innovations {
                // x_{t,j} = sum_i rho_j^i eta_{t-i} with one shared eta:
                // sum_s cov(x_{0,j}, x_{s,l})
                //   = (1 + rho_j/(1-rho_j) + rho_l/(1-rho_l)) / (1 - rho_j rho_l)
                let mut acc = 0.0;
                for j in 0..rho.len() {
                    for l in 0..rho.len() {
                        let base = 1.0 / (1.0 - rho[j] * rho[l]);
                        let tails = 1.0 + rho[j] / (1.0 - rho[j]) + rho[l] / (1.0 - rho[l]);
                        acc += loadings[j] * loadings[l] * base * tails;
                    }
                }
                Ok(acc)
            } else {
                // independent columns: sum_s rho^|s| var = var (1+rho)/(1-rho)
                let mut acc = 0.0;
                for j in 0..rho.len() {
                    let var = 1.0 / (1.0 - rho[j] * rho[j]);
                    acc += loadings[j] * loadings[j] * var * (1.0 + rho[j]) / (1.0 - rho[j]);
                }
                Ok(acc)
            }
        }
        RegressorKind::Garch { omega, phi, psi } => {
            if proc.shared_innovations {
                return Err(Error::Parameter(
                    "no closed form for shared-innovation GARCH columns; \
                     use long-simulation estimation"
                        .into(),
                ));
            }
            // independent GARCH columns are serially and mutually
            // uncorrelated; only the s = 0 variances contribute
            let mut acc = 0.0;
            for j in 0..omega.len() {
                let var = omega[j] / (1.0 - phi[j] - psi[j]);
                acc += loadings[j] * loadings[j] * var;
            }
            Ok(acc)
        }
    }
}

/// Center and scale of the unit-root-alternative stopping time.
///
/// ```text
/// c_m = (2 c sigma / ((1 - beta0_d) |fa1|))^(1/(2-g)) * M^((1-2g)/(4-2g))
/// d_m = d_0 |fa1|^(-(7-4g)/(4-2g)) M^((1-2g)(3-2g)/(8-4g)) c_m^(g-1)
/// d_0 = (fb1 / ((2-g) sqrt 3)) (sigma/(1-beta0_d))^((3-2g)/(4-2g))
///         c^((3-2g)/(4-2g)) 2^((7-4g)/(4-2g))
/// ```
pub fn cm_dm(
    fa1: f64,
    fb1: f64,
    m: u64,
    c: f64,
    sigma: f64,
    gamma: f64,
    beta0_d: f64,
) -> Result<(f64, f64)> {
    if fa1 == 0.0 {
        return Err(Error::Parameter(
            "fa1 = 0: the drift-driven center is undefined (use the \
             integrated-Wiener limit instead)"
                .into(),
        ));
    }
    if fb1 < 0.0 {
        return Err(Error::Parameter(format!("fb1 must be >= 0, got {fb1}")));
    }
    if beta0_d >= 1.0 {
        return Err(Error::Parameter(format!(
            "beta0_d must be < 1, got {beta0_d}"
        )));
    }
    validate_cg(c, sigma, gamma)?;
    let mf = m as f64;
    let a = fa1.abs();
    let one_minus_b = 1.0 - beta0_d;
    let c_m = (2.0 * c * sigma / (one_minus_b * a)).powf(1.0 / (2.0 - gamma))
        * mf.powf((1.0 - 2.0 * gamma) / (4.0 - 2.0 * gamma));
    let d0 = (fb1 / ((2.0 - gamma) * 3.0f64.sqrt()))
        * (sigma / one_minus_b).powf((3.0 - 2.0 * gamma) / (4.0 - 2.0 * gamma))
        * c.powf((3.0 - 2.0 * gamma) / (4.0 - 2.0 * gamma))
        * 2.0f64.powf((7.0 - 4.0 * gamma) / (4.0 - 2.0 * gamma));
    let d_m = d0
        * a.powf(-(7.0 - 4.0 * gamma) / (4.0 - 2.0 * gamma))
        * mf.powf((1.0 - 2.0 * gamma) * (3.0 - 2.0 * gamma) / (8.0 - 4.0 * gamma))
        * c_m.powf(gamma - 1.0);
    Ok((c_m, d_m))
}

/// Terminal values of `int_0^x W(u) du` (trapezoid rule, one substream per
/// replication). The variance of the result should be `x^3 / 3`.
pub fn integrated_wiener_terminals(
    x: f64,
    grid_per_unit: usize,
    reps: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if !(x > 0.0) {
        return Err(Error::Parameter(format!("x must be positive, got {x}")));
    }
    if grid_per_unit < 10 || reps < 1 {
        return Err(Error::Parameter(
            "need grid_per_unit >= 10 and reps >= 1".into(),
        ));
    }
    let n = ((grid_per_unit as f64) * x).ceil() as usize;
    let h = x / n as f64;
    let sd = h.sqrt();
    Ok((0..reps as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = substream(seed, r);
            let mut gauss = Gaussian::new();
            let mut w = 0.0f64;
            let mut integral = 0.0f64;
            let mut prev_w = 0.0f64;
            for _ in 0..n {
                w += sd * gauss.sample(&mut rng);
                integral += 0.5 * h * (prev_w + w);
                prev_w = w;
            }
            integral
        })
        .collect())
}

/// Realizations of the unit-root limit functional
/// `max_{0 < s <= x} (1 - beta0_d) |fb1 int_0^s W + fa1_bar s^2 / 2| / s^g`.
pub fn rw_limit_functional_samples(
    x: f64,
    gamma: f64,
    beta0_d: f64,
    fb1: f64,
    fa1_bar: f64,
    grid_per_unit: usize,
    reps: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if !(x > 0.0) {
        return Err(Error::Parameter(format!("x must be positive, got {x}")));
    }
    if !(0.0..0.5).contains(&gamma) {
        return Err(Error::Parameter(format!(
            "gamma must lie in [0, 0.5), got {gamma}"
        )));
    }
    if grid_per_unit < 10 || reps < 1 {
        return Err(Error::Parameter(
            "need grid_per_unit >= 10 and reps >= 1".into(),
        ));
    }
    let n = ((grid_per_unit as f64) * x).ceil() as usize;
    let h = x / n as f64;
    let sd = h.sqrt();
    let scale = 1.0 - beta0_d;
    // per-point weights u^-g and drift term fa1_bar u^2 / 2
    let weights: Vec<f64> = (1..=n).map(|i| (i as f64 * h).powf(-gamma)).collect();
    let drifts: Vec<f64> = (1..=n)
        .map(|i| {
            let u = i as f64 * h;
            fa1_bar * u * u / 2.0
        })
        .collect();
    Ok((0..reps as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = substream(seed, r);
            let mut gauss = Gaussian::new();
            let mut w = 0.0f64;
            let mut prev_w = 0.0f64;
            let mut integral = 0.0f64;
            let mut max = 0.0f64;
            for i in 0..n {
                w += sd * gauss.sample(&mut rng);
                integral += 0.5 * h * (prev_w + w);
                prev_w = w;
                let v = scale * (fb1 * integral + drifts[i]).abs() * weights[i];
                if v > max {
                    max = v;
                }
            }
            max
        })
        .collect())
}

/// Monte Carlo estimate of the unit-root limit
/// `P{ tau <= x M^((1-2g)/(3-2g)) } = P{ max functional > c sigma }`.
#[allow(clippy::too_many_arguments)]
pub fn simulate_rw_limit(
    x: f64,
    gamma: f64,
    beta0_d: f64,
    fb1: f64,
    fa1_bar: f64,
    c: f64,
    sigma: f64,
    reps: usize,
    grid_per_unit: usize,
    seed: u64,
) -> Result<f64> {
    validate_cg(c, sigma, gamma)?;
    let samples =
        rw_limit_functional_samples(x, gamma, beta0_d, fb1, fa1_bar, grid_per_unit, reps, seed)?;
    let count = samples.iter().filter(|&&v| v > c * sigma).count();
    Ok(count as f64 / samples.len() as f64)
}

/// Threshold location and limit-CDF argument for the explosive alternative.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ExplosiveThreshold {
    /// `s* + x + ((1/2 - g) ln M + g ln ln M) / ln |delta_d_bar|`.
    pub s_location: f64,
    /// `|delta_d_bar|^-x * c sigma |delta_d_bar - 1| / |delta_d_bar - beta0_d|`.
    pub f_argument: f64,
}

/// Where the explosive-case stopping time sits, and the argument at which
/// the limit distribution `F` is evaluated:
/// `P{ tau <= s_location } -> 1 - F(f_argument)`.
pub fn explosive_threshold(
    params: &ExplosiveParams,
    m: u64,
    gamma: f64,
    c: f64,
    sigma: f64,
    x: f64,
) -> Result<ExplosiveThreshold> {
    if params.delta_d_bar.abs() <= 1.0 {
        return Err(Error::Parameter(format!(
            "explosive alternative needs |delta_d_bar| > 1, got {}",
            params.delta_d_bar
        )));
    }
    if params.beta0_d.abs() >= 1.0 {
        return Err(Error::Parameter(format!(
            "|beta0_d| must be < 1, got {}",
            params.beta0_d
        )));
    }
    if m < 3 {
        return Err(Error::Parameter(
            "need m >= 3 so log log M is defined".into(),
        ));
    }
    validate_cg(c, sigma, gamma)?;
    let mf = m as f64;
    let log_delta = params.delta_d_bar.abs().ln();
    let s_location = params.s_star as f64
        + x
        + ((0.5 - gamma) * mf.ln() + gamma * mf.ln().ln()) / log_delta;
    let f_argument = params.delta_d_bar.abs().powf(-x) * c * sigma
        * (params.delta_d_bar - 1.0).abs()
        / (params.delta_d_bar - params.beta0_d).abs();
    Ok(ExplosiveThreshold {
        s_location,
        f_argument,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use crate::dgp;

    #[test]
    fn delta_is_zero_for_identical_regimes() {
        let beta = [0.02, 0.2, 0.25, 0.15, -0.2, 0.25];
        let mag = delta_measure(&beta, &beta, &[0.0; 4]).unwrap();
        assert_eq!(mag.delta, 0.0);
        assert_eq!(mag.c_a[0], 1.0);
    }

    #[test]
    fn delta_intercept_only_single_term_series() {
        // delta_d = 0 collapses the geometric series to one term
        let beta = [0.5, 0.3, 0.1];
        let delta_m = [0.9, 0.3, 0.0];
        let mag = delta_measure(&beta, &delta_m, &[0.0]).unwrap();
        // E y_after = 0.9; c_a = (1, 0, 0.9)
        // delta = (0.5-0.9) + 0 + 0.9*(0.1-0.0) = -0.31
        assert_relative_eq!(mag.c_a[2], 0.9, max_relative = 1e-12);
        assert_relative_eq!(mag.delta, -0.31, max_relative = 1e-12);
    }

    #[test]
    fn delta_for_full_coefficient_change() {
        let beta = [0.02, 0.20, 0.25, 0.15, -0.20, 0.25];
        let delta_m = [0.04, 1.60, 0.75, 0.55, 1.20, 0.60];
        let mag = delta_measure(&beta, &delta_m, &[0.0; 4]).unwrap();
        // E y_after = .04/(1-.60) = .1; delta = (.02-.04) + .1*(.25-.60)
        assert_relative_eq!(mag.c_a[5], 0.1, max_relative = 1e-12);
        assert_relative_eq!(mag.delta, -0.055, max_relative = 1e-12);
    }

    #[test]
    fn delta_rejects_nonstationary_target() {
        let beta = [0.0, 0.0];
        let delta_m = [0.0, 1.0];
        assert!(delta_measure(&beta, &delta_m, &[]).is_err());
    }

    #[test]
    fn am_bm_hand_values() {
        let (a, b) = am_bm(0.5, 10_000, 2.2365, 1.0, 0.0).unwrap();
        assert_relative_eq!(a, 447.3, max_relative = 1e-10);
        assert_relative_eq!(b, 447.3f64.sqrt() / 0.5, max_relative = 1e-10);
        assert!((b - 42.30).abs() < 0.01);
    }

    #[test]
    fn am_bm_gamma_zero_collapse_and_homogeneity() {
        let (a1, b1) = am_bm(0.3, 400, 2.0, 1.5, 0.0).unwrap();
        assert_relative_eq!(a1, 2.0 * 1.5 * 20.0 / 0.3, max_relative = 1e-12);
        assert_relative_eq!(b1, 1.5 * a1.sqrt() / 0.3, max_relative = 1e-12);
        // doubling delta at gamma = 0 halves a and divides b by 2 sqrt 2
        let (a2, b2) = am_bm(0.6, 400, 2.0, 1.5, 0.0).unwrap();
        assert_relative_eq!(a2, a1 / 2.0, max_relative = 1e-12);
        assert_relative_eq!(b2, b1 / (2.0 * 2.0f64.sqrt()), max_relative = 1e-12);
    }

    #[test]
    fn am_bm_rejects_zero_delta() {
        assert!(am_bm(0.0, 100, 2.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn b_m_matches_its_expansion_form() {
        // alternative algebraic route: b_m = a_m^g / (1-g) *
        //   (c^(1/2-g) sigma^(3/2-2g) M^((1/2-g)^2) / delta^(3/2-2g))^(1/(1-g))
        for &(delta, m, c, sigma, gamma) in &[
            (0.5, 10_000u64, 2.2365, 1.0, 0.0),
            (0.3, 2_500, 2.7992, 0.8, 0.45),
            (1.2, 900, 2.3860, 1.3, 0.25),
        ] {
            let (a, b) = am_bm(delta, m, c, sigma, gamma).unwrap();
            let mf = m as f64;
            let alt = a.powf(gamma) / (1.0 - gamma)
                * (c.powf(0.5 - gamma) * sigma.powf(1.5 - 2.0 * gamma)
                    * mf.powf((0.5 - gamma) * (0.5 - gamma))
                    / delta.powf(1.5 - 2.0 * gamma))
                .powf(1.0 / (1.0 - gamma));
            assert_relative_eq!(b, alt, max_relative = 1e-10);
        }
    }

    #[test]
    fn fa1_is_zero_when_only_the_ar_coefficient_changes() {
        let proc = RegressorProcess {
            kind: RegressorKind::Ar1 {
                rho: dgp::REGRESSOR_RHO.to_vec(),
            },
            shared_innovations: true,
        };
        let beta = dgp::BASE_BETA_BAR.to_vec();
        let p = fa1_fb1(&beta, &beta, &proc, 1.0, LongRunEstimation::Analytic).unwrap();
        assert_eq!(p.fa1, 0.0);
    }

    #[test]
    fn intercept_only_loading_gives_sigma_sq() {
        let proc = RegressorProcess {
            kind: RegressorKind::Ar1 {
                rho: vec![0.15, 0.2],
            },
            shared_innovations: false,
        };
        // delta_bar loads only on the intercept: no covariance contribution
        let p = fa1_fb1(
            &[0.7, 0.0, 0.0],
            &[0.2, 0.0, 0.0],
            &proc,
            1.3,
            LongRunEstimation::Analytic,
        )
        .unwrap();
        assert_relative_eq!(p.fa1, 0.5, max_relative = 1e-12);
        assert_relative_eq!(p.fb1_sq, 1.3, max_relative = 1e-12);
    }

    #[test]
    fn ar1_long_run_variance_closed_form_vs_simulation() {
        let proc = RegressorProcess {
            kind: RegressorKind::Ar1 { rho: vec![0.15] },
            shared_innovations: false,
        };
        let delta_bar = [0.0, 1.0];
        let beta_bar = [0.0, 0.0];
        let analytic = fa1_fb1(
            &delta_bar,
            &beta_bar,
            &proc,
            1.0,
            LongRunEstimation::Analytic,
        )
        .unwrap();
        // sum_s cov = var (1+rho)/(1-rho) with var = 1/(1-rho^2)
        let rho: f64 = 0.15;
        let expect = (1.0 / (1.0 - rho * rho)) * (1.0 + rho) / (1.0 - rho);
        assert_relative_eq!(analytic.fb1_sq - 1.0, expect, max_relative = 1e-12);

        let simulated = fa1_fb1(
            &delta_bar,
            &beta_bar,
            &proc,
            1.0,
            LongRunEstimation::LongSimulation {
                n: 400_000,
                seed: 17,
            },
        )
        .unwrap();
        assert!(
            (simulated.fb1_sq - analytic.fb1_sq).abs() < 0.05 * analytic.fb1_sq,
            "simulated {} vs analytic {}",
            simulated.fb1_sq,
            analytic.fb1_sq
        );
    }

    #[test]
    fn shared_ar1_long_run_variance_matches_simulation() {
        let proc = RegressorProcess {
            kind: RegressorKind::Ar1 {
                rho: dgp::REGRESSOR_RHO.to_vec(),
            },
            shared_innovations: true,
        };
        let delta_bar = [0.0, 0.2, 0.25, 0.15, -0.2];
        let beta_bar = [0.0; 5];
        let analytic = fa1_fb1(
            &delta_bar,
            &beta_bar,
            &proc,
            1.0,
            LongRunEstimation::Analytic,
        )
        .unwrap();
        let simulated = fa1_fb1(
            &delta_bar,
            &beta_bar,
            &proc,
            1.0,
            LongRunEstimation::LongSimulation {
                n: 400_000,
                seed: 23,
            },
        )
        .unwrap();
        assert!(
            (simulated.fb1_sq - analytic.fb1_sq).abs() < 0.05 * analytic.fb1_sq,
            "simulated {} vs analytic {}",
            simulated.fb1_sq,
            analytic.fb1_sq
        );
    }

    #[test]
    fn cm_dm_hand_value_and_homogeneity() {
        let (c_m, _) = cm_dm(1.0, 1.0, 10_000, 2.2365, 1.0, 0.0, 0.25).unwrap();
        let expect = (2.0_f64 * 2.2365 / 0.75).sqrt() * 10.0;
        assert_relative_eq!(c_m, expect, max_relative = 1e-12);
        assert!((c_m - 24.42).abs() < 0.01, "c_m = {c_m}");

        // gamma = 0: M -> 16 M doubles c_m
        let (c_m16, _) = cm_dm(1.0, 1.0, 160_000, 2.2365, 1.0, 0.0, 0.25).unwrap();
        assert_relative_eq!(c_m16, 2.0 * c_m, max_relative = 1e-12);
    }

    #[test]
    fn dm_matches_independent_crossing_expansion() {
        // Expansion route: the crossing location solves
        //   fc1 fa1 s^2 = c sigma M^(1/2-g) s^g  with fc1 = (1-b)/2,
        // and the fluctuation scale is
        //   d_m = (fb1 (1-b) / (sigma sqrt(3) (2-g))) c_m^-(1-g) P1 M^(1/2-g)
        // with
        //   P1 = c^((3-2g)/(4-2g)) sigma^((7-4g)/(4-2g)) fc1^(-(7-4g)/(4-2g))
        //        fa1^(-(7-4g)/(4-2g)) M^(-(1/2-g)/(4-2g)).
        for &(fa1, fb1, m, c, sigma, gamma, beta_d) in &[
            (0.5f64, 1.2f64, 5_000u64, 2.2365f64, 1.0f64, 0.0f64, 0.25f64),
            (2.0, 0.7, 20_000, 2.7992, 1.4, 0.45, -0.3),
            (0.75, 1.0, 1_000, 2.3860, 0.9, 0.25, 0.5),
        ] {
            let (c_m, d_m) = cm_dm(fa1, fb1, m, c, sigma, gamma, beta_d).unwrap();
            let mf = m as f64;
            let fc1 = (1.0 - beta_d) / 2.0;
            let e = (7.0 - 4.0 * gamma) / (4.0 - 2.0 * gamma);
            let p1 = c.powf((3.0 - 2.0 * gamma) / (4.0 - 2.0 * gamma))
                * sigma.powf(e)
                * fc1.powf(-e)
                * fa1.powf(-e)
                * mf.powf(-(0.5 - gamma) / (4.0 - 2.0 * gamma));
            let c_m_alt = (c * sigma / (fc1 * fa1) * mf.powf(0.5 - gamma)).powf(1.0 / (2.0 - gamma));
            assert_relative_eq!(c_m, c_m_alt, max_relative = 1e-10);
            let d_m_alt = fb1 * (1.0 - beta_d) / (sigma * 3.0f64.sqrt() * (2.0 - gamma))
                * c_m.powf(-(1.0 - gamma))
                * p1
                * mf.powf(0.5 - gamma);
            assert_relative_eq!(d_m, d_m_alt, max_relative = 1e-10);
        }
    }

    #[test]
    fn cm_dm_rejects_zero_drift() {
        assert!(cm_dm(0.0, 1.0, 100, 2.0, 1.0, 0.0, 0.25).is_err());
    }

    #[test]
    fn rw_limit_is_deterministic_step_without_noise() {
        // fb1 = 0: the functional is (1-b) fa1_bar x^(2-g) / 2 exactly
        let x = 1.5_f64;
        let gamma = 0.25;
        let beta_d = 0.25;
        let fa1_bar = 0.8;
        let functional = (1.0 - beta_d) * fa1_bar * x.powf(2.0 - gamma) / 2.0;
        let p_below = simulate_rw_limit(
            x,
            gamma,
            beta_d,
            0.0,
            fa1_bar,
            functional * 1.001,
            1.0,
            200,
            200,
            1,
        )
        .unwrap();
        let p_above = simulate_rw_limit(
            x,
            gamma,
            beta_d,
            0.0,
            fa1_bar,
            functional * 0.999,
            1.0,
            200,
            200,
            1,
        )
        .unwrap();
        assert_eq!(p_below, 0.0);
        assert_eq!(p_above, 1.0);
    }

    #[test]
    fn rw_limit_probability_vanishes_for_huge_c() {
        let p = simulate_rw_limit(1.0, 0.0, 0.25, 1.0, 0.5, 1e9, 1.0, 500, 200, 2).unwrap();
        assert_eq!(p, 0.0);
    }

    #[test]
    fn explosive_threshold_values() {
        let params = ExplosiveParams {
            delta_d_bar: 1.25,
            beta0_d: 0.25,
            s_star: 1,
        };
        let t = explosive_threshold(&params, 10_000, 0.0, 2.2365, 1.0, 0.0).unwrap();
        assert_relative_eq!(t.f_argument, 2.2365 * 0.25 / 1.0, max_relative = 1e-12);
        assert!((t.f_argument - 0.5591).abs() < 1e-4);
        let expect_shift = 1.0 + 0.5 * (10_000f64).ln() / 1.25f64.ln();
        assert_relative_eq!(t.s_location, expect_shift, max_relative = 1e-12);
    }

    #[test]
    fn explosive_f_argument_vanishes_for_large_x() {
        let params = ExplosiveParams {
            delta_d_bar: 1.1,
            beta0_d: 0.25,
            s_star: 5,
        };
        let t = explosive_threshold(&params, 500, 0.25, 2.0, 1.0, 200.0).unwrap();
        assert!(t.f_argument < 1e-8);
    }

    #[test]
    fn explosive_threshold_rejects_non_explosive() {
        let params = ExplosiveParams {
            delta_d_bar: 1.0,
            beta0_d: 0.25,
            s_star: 1,
        };
        assert!(explosive_threshold(&params, 100, 0.0, 2.0, 1.0, 0.0).is_err());
    }
}

//! Critical values for the boundary-crossing test.
//!
//! Under the stable null, the probability that the detector ever exceeds the
//! boundary converges to `P{ sup_{0 < u <= 1} |W(u)| / u^gamma > c }` for a
//! standard Wiener process `W`. The constant `c(gamma, alpha)` solves that
//! probability equal to `alpha`.
//!
//! Two sources are available:
//!
//! * a built-in table for `gamma in {0, .15, .25, .35, .45, .49}` and
//!   `alpha in {.010, .025, .050, .100, .250}` (no interpolation: requests
//!   off the grid are refused);
//! * direct Monte Carlo simulation of the sup functional, `W` approximated
//!   on an equi-spaced grid by cumulative sums of Gaussian increments.
//!
//! Closed-end monitoring over `N = c* M` steps replaces the sup range by
//! `(0, c*/(1+c*)]`; `closed_end_critical_value` handles that variant.
//!
//! Grid bias grows as `gamma` approaches 1/2 (the functional weights the
//! singular origin more). Simulated values for `gamma >= 0.47` carry a bias
//! warning; prefer the table there.

use crate::error::{Error, Result};
use crate::rng::{substream, Gaussian};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Boundary curvatures covered by the built-in table.
pub const TABLE_GAMMAS: [f64; 6] = [0.00, 0.15, 0.25, 0.35, 0.45, 0.49];

/// Significance levels covered by the built-in table.
pub const TABLE_ALPHAS: [f64; 5] = [0.010, 0.025, 0.050, 0.100, 0.250];

/// Built-in critical values, rows indexed by gamma, columns by alpha.
pub const CRITICAL_TABLE: [[f64; 5]; 6] = [
    [2.7912, 2.4948, 2.2365, 1.9497, 1.5213],
    [2.8516, 2.5475, 2.2996, 2.0273, 1.6126],
    [2.9445, 2.6396, 2.3860, 2.1060, 1.7039],
    [3.0475, 2.7394, 2.5050, 2.2433, 1.8467],
    [3.3015, 3.0144, 2.7992, 2.5437, 2.1729],
    [3.5705, 3.2944, 3.0722, 2.8259, 2.4487],
];

/// Simulated values at or above this curvature get a grid-bias warning.
pub const BIAS_WARNING_GAMMA: f64 = 0.47;

/// A simulated sample of `sup_{0 < u <= upper} |W(u)| / u^gamma`.
#[derive(Debug, Clone)]
pub struct WienerSupSample {
    gamma: f64,
    upper: f64,
    values: Vec<f64>, // sorted ascending
    grid_size: usize,
    reps: usize,
    seed: u64,
}

impl WienerSupSample {
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    /// Sorted realizations of the sup functional.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn grid_size(&self) -> usize {
        self.grid_size
    }

    pub fn reps(&self) -> usize {
        self.reps
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Empirical `p`-quantile (order statistic `ceil(p * reps)`).
    pub fn quantile(&self, p: f64) -> f64 {
        let n = self.values.len();
        let idx = ((p * n as f64).ceil() as usize).clamp(1, n) - 1;
        self.values[idx]
    }

    /// Order-statistic estimate of the Monte Carlo standard error of the
    /// `p`-quantile.
    pub fn quantile_mc_se(&self, p: f64) -> f64 {
        let n = self.values.len() as f64;
        let half_width = (p * (1.0 - p) / n).sqrt();
        let lo = self.quantile((p - half_width).max(1.0 / n));
        let hi = self.quantile((p + half_width).min(1.0));
        (hi - lo) / 2.0
    }
}

/// Simulates the sup functional on a grid `u_i = i * upper / grid_size`.
///
/// Each replication `r` draws from substream `r` of `seed`, so the sample
/// is reproducible and independent of thread scheduling. The sup excludes
/// `u = 0` by construction: the first grid point is `upper / grid_size`.
pub fn simulate_sup_wiener(
    gamma: f64,
    upper: f64,
    grid_size: usize,
    reps: usize,
    seed: u64,
) -> Result<WienerSupSample> {
    if !(0.0..0.5).contains(&gamma) {
        return Err(Error::Parameter(format!(
            "gamma must lie in [0, 0.5), got {gamma}"
        )));
    }
    if !(upper > 0.0 && upper <= 1.0) {
        return Err(Error::Parameter(format!(
            "upper must lie in (0, 1], got {upper}"
        )));
    }
    if grid_size < 100 {
        return Err(Error::Parameter(format!(
            "grid_size must be at least 100, got {grid_size}"
        )));
    }
    if reps < 1 {
        return Err(Error::Parameter("reps must be at least 1".into()));
    }

    let h = upper / grid_size as f64;
    let sd = h.sqrt();
    // |W(u_i)| / u_i^gamma == |W(u_i)| * weight[i]; hoisting the power out
    // of the replication loop is what makes 50k x 10k runs cheap.
    let weights: Vec<f64> = (1..=grid_size)
        .map(|i| (i as f64 * h).powf(-gamma))
        .collect();

    let mut values: Vec<f64> = (0..reps as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = substream(seed, r);
            let mut gauss = Gaussian::new();
            let mut w = 0.0f64;
            let mut max = 0.0f64;
            for weight in &weights {
                w += sd * gauss.sample(&mut rng);
                let v = w.abs() * weight;
                if v > max {
                    max = v;
                }
            }
            max
        })
        .collect();
    values.sort_by(f64::total_cmp);

    Ok(WienerSupSample {
        gamma,
        upper,
        values,
        grid_size,
        reps,
        seed,
    })
}

/// Where a critical value came from.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Table,
    Simulated {
        grid_size: usize,
        reps: usize,
        seed: u64,
        mc_se: f64,
        bias_warning: bool,
    },
    Fixed,
}

/// A critical value with its provenance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CriticalValue {
    pub value: f64,
    pub gamma: f64,
    pub alpha: f64,
    pub provenance: Provenance,
}

/// How to obtain `c(gamma, alpha)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CriticalSource {
    /// Exact lookup in the built-in table; off-grid requests are refused.
    BuiltinTable,
    /// Monte Carlo simulation of the sup functional.
    Simulation {
        grid_size: usize,
        reps: usize,
        seed: u64,
    },
}

impl Default for CriticalSource {
    fn default() -> Self {
        CriticalSource::BuiltinTable
    }
}

fn table_lookup(gamma: f64, alpha: f64) -> Result<f64> {
    let gi = TABLE_GAMMAS
        .iter()
        .position(|&g| (g - gamma).abs() < 1e-12)
        .ok_or_else(|| {
            Error::Parameter(format!(
                "gamma {gamma} is not in the built-in table {TABLE_GAMMAS:?}; \
                 request simulation instead (no interpolation is performed)"
            ))
        })?;
    let ai = TABLE_ALPHAS
        .iter()
        .position(|&a| (a - alpha).abs() < 1e-12)
        .ok_or_else(|| {
            Error::Parameter(format!(
                "alpha {alpha} is not in the built-in table {TABLE_ALPHAS:?}; \
                 request simulation instead (no interpolation is performed)"
            ))
        })?;
    Ok(CRITICAL_TABLE[gi][ai])
}

/// The critical constant `c(gamma, alpha)` for open-ended monitoring.
pub fn critical_value(gamma: f64, alpha: f64, source: CriticalSource) -> Result<CriticalValue> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Parameter(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    match source {
        CriticalSource::BuiltinTable => Ok(CriticalValue {
            value: table_lookup(gamma, alpha)?,
            gamma,
            alpha,
            provenance: Provenance::Table,
        }),
        CriticalSource::Simulation {
            grid_size,
            reps,
            seed,
        } => {
            let sample = simulate_sup_wiener(gamma, 1.0, grid_size, reps, seed)?;
            let p = 1.0 - alpha;
            Ok(CriticalValue {
                value: sample.quantile(p),
                gamma,
                alpha,
                provenance: Provenance::Simulated {
                    grid_size,
                    reps,
                    seed,
                    mc_se: sample.quantile_mc_se(p),
                    bias_warning: gamma >= BIAS_WARNING_GAMMA,
                },
            })
        }
    }
}

/// Critical constant for closed-end monitoring with `N ~ c_star * M`:
/// the `(1 - alpha)` quantile of the sup over `(0, c_star / (1 + c_star)]`.
pub fn closed_end_critical_value(
    gamma: f64,
    alpha: f64,
    c_star: f64,
    grid_size: usize,
    reps: usize,
    seed: u64,
) -> Result<CriticalValue> {
    if !(c_star > 0.0) {
        return Err(Error::Parameter(format!(
            "c_star must be positive, got {c_star}"
        )));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Parameter(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    let upper = c_star / (1.0 + c_star);
    let sample = simulate_sup_wiener(gamma, upper, grid_size, reps, seed)?;
    let p = 1.0 - alpha;
    Ok(CriticalValue {
        value: sample.quantile(p),
        gamma,
        alpha,
        provenance: Provenance::Simulated {
            grid_size,
            reps,
            seed,
            mc_se: sample.quantile_mc_se(p),
            bias_warning: gamma >= BIAS_WARNING_GAMMA,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_spot_checks() {
        let c = critical_value(0.0, 0.05, CriticalSource::BuiltinTable).unwrap();
        assert_eq!(c.value, 2.2365);
        let c = critical_value(0.45, 0.01, CriticalSource::BuiltinTable).unwrap();
        assert_eq!(c.value, 3.3015);
        let c = critical_value(0.25, 0.10, CriticalSource::BuiltinTable).unwrap();
        assert_eq!(c.value, 2.1060);
    }

    #[test]
    fn off_grid_requests_are_refused() {
        assert!(critical_value(0.2, 0.05, CriticalSource::BuiltinTable).is_err());
        assert!(critical_value(0.25, 0.07, CriticalSource::BuiltinTable).is_err());
    }

    #[test]
    fn table_is_monotone_in_gamma_and_alpha() {
        for ai in 0..TABLE_ALPHAS.len() {
            for gi in 1..TABLE_GAMMAS.len() {
                assert!(
                    CRITICAL_TABLE[gi][ai] > CRITICAL_TABLE[gi - 1][ai],
                    "not increasing in gamma at ({gi}, {ai})"
                );
            }
        }
        for gi in 0..TABLE_GAMMAS.len() {
            for ai in 1..TABLE_ALPHAS.len() {
                assert!(
                    CRITICAL_TABLE[gi][ai] < CRITICAL_TABLE[gi][ai - 1],
                    "not decreasing in alpha at ({gi}, {ai})"
                );
            }
        }
    }

    #[test]
    fn single_rep_is_deterministic() {
        let a = simulate_sup_wiener(0.25, 1.0, 500, 1, 42).unwrap();
        let b = simulate_sup_wiener(0.25, 1.0, 500, 1, 42).unwrap();
        assert_eq!(a.values(), b.values());
        assert_eq!(a.values().len(), 1);
    }

    #[test]
    fn closed_end_is_below_open_end() {
        // sup over a sub-interval is stochastically smaller
        let open = critical_value(
            0.0,
            0.05,
            CriticalSource::Simulation {
                grid_size: 2_000,
                reps: 20_000,
                seed: 7,
            },
        )
        .unwrap();
        let closed = closed_end_critical_value(0.0, 0.05, 1.0, 2_000, 20_000, 7).unwrap();
        assert!(
            closed.value < open.value,
            "closed {} vs open {}",
            closed.value,
            open.value
        );
    }

    #[test]
    fn closed_end_approaches_open_end_for_huge_horizon() {
        let open = critical_value(
            0.25,
            0.05,
            CriticalSource::Simulation {
                grid_size: 2_000,
                reps: 20_000,
                seed: 11,
            },
        )
        .unwrap();
        let closed = closed_end_critical_value(0.25, 0.05, 1e6, 2_000, 20_000, 12).unwrap();
        assert!(
            (closed.value - open.value).abs() < 0.03,
            "closed {} vs open {}",
            closed.value,
            open.value
        );
    }

    #[test]
    fn invalid_parameters() {
        assert!(simulate_sup_wiener(0.5, 1.0, 1000, 10, 1).is_err());
        assert!(simulate_sup_wiener(0.1, 0.0, 1000, 10, 1).is_err());
        assert!(simulate_sup_wiener(0.1, 1.1, 1000, 10, 1).is_err());
        assert!(simulate_sup_wiener(0.1, 1.0, 50, 10, 1).is_err());
        assert!(closed_end_critical_value(0.1, 0.05, 0.0, 1000, 10, 1).is_err());
    }

    #[test]
    fn bias_warning_near_one_half() {
        let c = critical_value(
            0.49,
            0.05,
            CriticalSource::Simulation {
                grid_size: 500,
                reps: 200,
                seed: 3,
            },
        )
        .unwrap();
        match c.provenance {
            Provenance::Simulated { bias_warning, .. } => assert!(bias_warning),
            _ => panic!("expected simulated provenance"),
        }
    }
}

//! Monte Carlo harness: size studies, power studies and stopping-time
//! densities over the built-in designs.
//!
//! Seeding: each replication's world is keyed by
//! `combine(master_seed, dgp, M, s*, delta_d, rep)`. The boundary-side
//! parameters `gamma` and `alpha` are deliberately left out of the key, so
//! every `(gamma, alpha)` cell sees the same data. That makes the
//! alpha-monotonicity of power exact (a larger critical constant can only
//! delay the crossing on identical data) and lets one generated path serve
//! a whole grid of cells.
//!
//! Replication results are collected in replication order before any
//! aggregation, so reported numbers do not depend on thread scheduling.

use crate::boundary::{boundary, BoundaryParams, KahanSum};
use crate::critical::{critical_value, CriticalSource};
use crate::dgp::{make_dgp, simulate, DgpId, GeneratedWorld};
use crate::error::{Error, Result};
use crate::model::{dot, fit_ols, FittedModel, TrainingSample};
use crate::rng::combine;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::time::Instant;

/// Grid of cells to run, read from a TOML plan file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub dgps: Vec<String>,
    pub ms: Vec<u64>,
    pub gammas: Vec<f64>,
    pub alphas: Vec<f64>,
    #[serde(default = "default_s_stars")]
    pub s_stars: Vec<u64>,
    /// Post-change AR coefficients; required by designs vii-xii.
    #[serde(default)]
    pub delta_ds: Vec<f64>,
    pub reps: u64,
    #[serde(default = "default_horizon_multiple")]
    pub horizon_multiple: u64,
    pub master_seed: u64,
    #[serde(default = "default_true")]
    pub corrected_boundary: bool,
    /// Overrides the table critical value in every cell (testing hook).
    #[serde(default)]
    pub c_override: Option<f64>,
}

fn default_s_stars() -> Vec<u64> {
    vec![1]
}

fn default_horizon_multiple() -> u64 {
    10
}

fn default_true() -> bool {
    true
}

impl ExperimentPlan {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(format!("bad plan file: {e}")))
    }

    fn dgp_ids(&self) -> Result<Vec<DgpId>> {
        self.dgps.iter().map(|s| s.parse()).collect()
    }

    fn validate_grid(&self) -> Result<()> {
        if self.dgps.is_empty()
            || self.ms.is_empty()
            || self.gammas.is_empty()
            || self.alphas.is_empty()
            || self.s_stars.is_empty()
        {
            return Err(Error::Config("plan grids must be non-empty".into()));
        }
        if self.reps < 1 {
            return Err(Error::Config("reps must be >= 1".into()));
        }
        if self.horizon_multiple < 1 {
            return Err(Error::Config("horizon_multiple must be >= 1".into()));
        }
        // fail early if any (gamma, alpha) pair is off the table
        if self.c_override.is_none() {
            for &g in &self.gammas {
                for &a in &self.alphas {
                    critical_value(g, a, CriticalSource::BuiltinTable)?;
                }
            }
        }
        Ok(())
    }
}

/// Run-level metadata recorded with every report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunMeta {
    pub master_seed: u64,
    pub reps: u64,
    pub build: String,
    pub wall_secs: f64,
}

impl RunMeta {
    fn new(master_seed: u64, reps: u64, started: Instant) -> Self {
        Self {
            master_seed,
            reps,
            build: format!("breakwatch {}", env!("CARGO_PKG_VERSION")),
            wall_secs: started.elapsed().as_secs_f64(),
        }
    }
}

/// One size-study cell: cumulative false-detection rates at horizons
/// `M, 2M, ..., horizon_multiple * M`.
#[derive(Debug, Clone, Serialize)]
pub struct SizeCell {
    pub dgp: String,
    pub m: u64,
    pub gamma: f64,
    pub alpha: f64,
    pub c: f64,
    /// Percent of replications with a (false) detection by `i * M`.
    pub rates_pct: Vec<f64>,
    /// Binomial Monte Carlo standard error per horizon, in percent.
    pub se_pct: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SizeReport {
    pub cells: Vec<SizeCell>,
    pub meta: RunMeta,
}

/// One power-study cell.
#[derive(Debug, Clone, Serialize)]
pub struct PowerCell {
    pub dgp: String,
    pub m: u64,
    pub gamma: f64,
    pub alpha: f64,
    pub s_star: u64,
    pub delta_d: Option<f64>,
    pub c: f64,
    /// Percent of replications stopping before the horizon cap.
    pub power_pct: f64,
    pub se_pct: f64,
    pub mean_tau: Option<f64>,
    pub median_tau: Option<f64>,
    pub censored_pct: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PowerReport {
    pub cells: Vec<PowerCell>,
    pub meta: RunMeta,
}

/// Fits the training window of a generated world.
pub fn fit_world(world: &GeneratedWorld, m: u64) -> Result<FittedModel> {
    let m = m as usize;
    let exog: Vec<Vec<f64>> = (0..m).map(|t| world.exog_row(t).to_vec()).collect();
    let sample = TrainingSample::from_series(world.y0, &world.y[..m], &exog)?;
    fit_ols(&sample)
}

/// Running values of the cumulative post-training residual sum, one per
/// monitored step. Residuals use the same evaluation order as the online
/// engine, so a scan over this path reproduces the engine's decisions.
pub fn cumulative_residual_path(
    world: &GeneratedWorld,
    model: &FittedModel,
    m: u64,
    horizon: u64,
) -> Vec<f64> {
    let m = m as usize;
    let horizon = (horizon as usize).min(world.len() - m);
    let k = world.n_exog();
    let beta = model.beta();
    let mut cum = KahanSum::new();
    let mut path = Vec::with_capacity(horizon);
    let mut row = vec![0.0; k + 2];
    row[0] = 1.0;
    let mut lag = world.y[m - 1];
    for s in 0..horizon {
        let t = m + s;
        row[1..=k].copy_from_slice(world.exog_row(t));
        row[k + 1] = lag;
        let eps = world.y[t] - dot(&row, beta);
        cum.add(eps);
        path.push(cum.value());
        lag = world.y[t];
    }
    path
}

/// First step `s` (1-based) at which `|path[s-1]| / sigma_hat` strictly
/// exceeds the boundary, if any.
pub fn first_crossing(
    path: &[f64],
    sigma_hat: f64,
    m: u64,
    params: &BoundaryParams,
) -> Option<u64> {
    for (i, &v) in path.iter().enumerate() {
        let s = (i + 1) as u64;
        if v.abs() / sigma_hat > boundary(m, s, params) {
            return Some(s);
        }
    }
    None
}

struct CellKey {
    dgp: DgpId,
    m: u64,
    s_star: u64,
    delta_d: Option<f64>,
}

/// tau (capped) per (gamma, alpha) combination for one replication.
fn replication_taus(
    key: &CellKey,
    plan: &ExperimentPlan,
    combos: &[(f64, f64, f64)], // (gamma, alpha, c)
    rep: u64,
) -> Result<Vec<Option<u64>>> {
    let world_seed = combine(&[
        plan.master_seed,
        key.dgp.index() as u64,
        key.m,
        key.s_star,
        key.delta_d.map_or(0, f64::to_bits),
        rep,
    ]);
    let mut spec = make_dgp(key.dgp, key.m, key.s_star, key.delta_d, world_seed)?;
    spec.extra_horizon = plan.horizon_multiple * key.m;
    let world = simulate(&spec)?;
    let model = fit_world(&world, key.m)?;
    if model.sigma_hat_sq() == 0.0 {
        return Err(Error::DegenerateVariance);
    }
    let path = cumulative_residual_path(&world, &model, key.m, spec.extra_horizon);
    let sigma_hat = model.sigma_hat();
    combos
        .iter()
        .map(|&(gamma, _alpha, c)| {
            let params = if plan.corrected_boundary {
                BoundaryParams::corrected(c, gamma, sigma_hat)
            } else {
                BoundaryParams::raw(c, gamma)
            }?;
            Ok(first_crossing(&path, sigma_hat, key.m, &params))
        })
        .collect()
}

fn combos_for(plan: &ExperimentPlan) -> Result<Vec<(f64, f64, f64)>> {
    let mut combos = Vec::new();
    for &gamma in &plan.gammas {
        for &alpha in &plan.alphas {
            let c = match plan.c_override {
                Some(c) => c,
                None => critical_value(gamma, alpha, CriticalSource::BuiltinTable)?.value,
            };
            combos.push((gamma, alpha, c));
        }
    }
    Ok(combos)
}

fn binomial_se_pct(p: f64, reps: u64) -> f64 {
    (p * (1.0 - p) / reps as f64).sqrt() * 100.0
}

/// Cumulative false-detection rates for the stable designs at horizons
/// `M, 2M, ..., horizon_multiple * M`. Uses the corrected boundary and
/// built-in table critical values unless the plan overrides them.
pub fn run_size_study(plan: &ExperimentPlan) -> Result<SizeReport> {
    let started = Instant::now();
    plan.validate_grid()?;
    let dgps = plan.dgp_ids()?;
    if let Some(bad) = dgps.iter().find(|d| !d.is_null()) {
        return Err(Error::Config(format!(
            "size studies take only the stable designs i-iv; got {bad}"
        )));
    }
    let combos = combos_for(plan)?;
    let hm = plan.horizon_multiple as usize;
    let mut cells = Vec::new();

    for &dgp in &dgps {
        for &m in &plan.ms {
            let key = CellKey {
                dgp,
                m,
                s_star: 1,
                delta_d: None,
            };
            // taus[rep][combo]
            let taus: Vec<Vec<Option<u64>>> = (0..plan.reps)
                .into_par_iter()
                .map(|rep| replication_taus(&key, plan, &combos, rep))
                .collect::<Result<_>>()?;
            for (ci, &(gamma, alpha, c)) in combos.iter().enumerate() {
                let mut counts = vec![0u64; hm];
                for rep_taus in &taus {
                    if let Some(tau) = rep_taus[ci] {
                        for (i, count) in counts.iter_mut().enumerate() {
                            if tau <= (i as u64 + 1) * m {
                                *count += 1;
                            }
                        }
                    }
                }
                let rates_pct: Vec<f64> = counts
                    .iter()
                    .map(|&n| 100.0 * n as f64 / plan.reps as f64)
                    .collect();
                let se_pct = rates_pct
                    .iter()
                    .map(|&r| binomial_se_pct(r / 100.0, plan.reps))
                    .collect();
                cells.push(SizeCell {
                    dgp: dgp.to_string(),
                    m,
                    gamma,
                    alpha,
                    c,
                    rates_pct,
                    se_pct,
                });
            }
        }
    }
    Ok(SizeReport {
        cells,
        meta: RunMeta::new(plan.master_seed, plan.reps, started),
    })
}

/// Empirical power for the change designs: percent of replications that
/// stop before the horizon cap (censored replications count as
/// non-detections).
pub fn run_power_study(plan: &ExperimentPlan) -> Result<PowerReport> {
    let started = Instant::now();
    plan.validate_grid()?;
    let dgps = plan.dgp_ids()?;
    if let Some(bad) = dgps.iter().find(|d| d.is_null()) {
        return Err(Error::Config(format!(
            "power studies take only the change designs v-xii; got {bad}"
        )));
    }
    let combos = combos_for(plan)?;
    let mut cells = Vec::new();

    for &dgp in &dgps {
        let delta_choices: Vec<Option<f64>> = if matches!(dgp, DgpId::V | DgpId::Vi) {
            vec![None]
        } else {
            if plan.delta_ds.is_empty() {
                return Err(Error::Config(format!(
                    "design {dgp} needs delta_ds in the plan"
                )));
            }
            plan.delta_ds.iter().copied().map(Some).collect()
        };
        for &delta_d in &delta_choices {
            for &m in &plan.ms {
                for &s_star in &plan.s_stars {
                    let key = CellKey {
                        dgp,
                        m,
                        s_star,
                        delta_d,
                    };
                    let taus: Vec<Vec<Option<u64>>> = (0..plan.reps)
                        .into_par_iter()
                        .map(|rep| replication_taus(&key, plan, &combos, rep))
                        .collect::<Result<_>>()?;
                    for (ci, &(gamma, alpha, c)) in combos.iter().enumerate() {
                        let mut stopped: Vec<u64> = Vec::new();
                        for rep_taus in &taus {
                            if let Some(tau) = rep_taus[ci] {
                                stopped.push(tau);
                            }
                        }
                        let n_stop = stopped.len() as u64;
                        let p = n_stop as f64 / plan.reps as f64;
                        stopped.sort_unstable();
                        let mean_tau = if n_stop > 0 {
                            Some(stopped.iter().sum::<u64>() as f64 / n_stop as f64)
                        } else {
                            None
                        };
                        let median_tau = if n_stop > 0 {
                            Some(stopped[(n_stop as usize - 1) / 2] as f64)
                        } else {
                            None
                        };
                        cells.push(PowerCell {
                            dgp: dgp.to_string(),
                            m,
                            gamma,
                            alpha,
                            s_star,
                            delta_d,
                            c,
                            power_pct: 100.0 * p,
                            se_pct: binomial_se_pct(p, plan.reps),
                            mean_tau,
                            median_tau,
                            censored_pct: 100.0 * (1.0 - p),
                        });
                    }
                }
            }
        }
    }
    Ok(PowerReport {
        cells,
        meta: RunMeta::new(plan.master_seed, plan.reps, started),
    })
}

/// Stopping-time distribution for one cell.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TauDensitySpec {
    pub dgp: String,
    pub m: u64,
    pub gamma: f64,
    pub alpha: f64,
    #[serde(default = "default_s_star_one")]
    pub s_star: u64,
    #[serde(default)]
    pub delta_d: Option<f64>,
    pub reps: u64,
    #[serde(default = "default_horizon_multiple")]
    pub horizon_multiple: u64,
    pub master_seed: u64,
    #[serde(default = "default_true")]
    pub corrected_boundary: bool,
}

fn default_s_star_one() -> u64 {
    1
}

impl TauDensitySpec {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(format!("bad density spec: {e}")))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub count: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TauDensityReport {
    pub taus: Vec<u64>,
    pub histogram: Vec<HistogramBin>,
    /// Gaussian-kernel density evaluated on an even grid.
    pub density: Vec<(f64, f64)>,
    pub censored_pct: f64,
    pub kde_bandwidth: f64,
    pub meta: RunMeta,
}

/// Simulates the stopping-time distribution of one cell; only uncensored
/// replications enter the histogram and the censoring fraction is reported.
pub fn tau_density(spec: &TauDensitySpec) -> Result<TauDensityReport> {
    let started = Instant::now();
    let dgp: DgpId = spec.dgp.parse()?;
    if dgp.is_null() {
        return Err(Error::Config(
            "stopping-time densities need a change design (v-xii)".into(),
        ));
    }
    let c = critical_value(spec.gamma, spec.alpha, CriticalSource::BuiltinTable)?.value;
    let plan = ExperimentPlan {
        dgps: vec![spec.dgp.clone()],
        ms: vec![spec.m],
        gammas: vec![spec.gamma],
        alphas: vec![spec.alpha],
        s_stars: vec![spec.s_star],
        delta_ds: spec.delta_d.into_iter().collect(),
        reps: spec.reps,
        horizon_multiple: spec.horizon_multiple,
        master_seed: spec.master_seed,
        corrected_boundary: spec.corrected_boundary,
        c_override: None,
    };
    let key = CellKey {
        dgp,
        m: spec.m,
        s_star: spec.s_star,
        delta_d: spec.delta_d,
    };
    let combos = vec![(spec.gamma, spec.alpha, c)];
    let taus_nested: Vec<Vec<Option<u64>>> = (0..spec.reps)
        .into_par_iter()
        .map(|rep| replication_taus(&key, &plan, &combos, rep))
        .collect::<Result<_>>()?;
    let mut taus: Vec<u64> = taus_nested.iter().filter_map(|v| v[0]).collect();
    taus.sort_unstable();
    let censored = spec.reps as usize - taus.len();
    let censored_pct = 100.0 * censored as f64 / spec.reps as f64;

    let (histogram, density, bandwidth) = if taus.is_empty() {
        (Vec::new(), Vec::new(), 0.0)
    } else {
        let xs: Vec<f64> = taus.iter().map(|&t| t as f64).collect();
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
        let q1 = xs[(xs.len() - 1) / 4];
        let q3 = xs[(xs.len() - 1) * 3 / 4];
        let iqr = q3 - q1;
        let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
        let bandwidth = (0.9 * spread * n.powf(-0.2)).max(0.5);

        let lo = xs[0];
        let hi = *xs.last().unwrap();
        let n_bins = 50usize;
        let width = ((hi - lo) / n_bins as f64).max(1.0);
        let mut histogram: Vec<HistogramBin> = (0..n_bins)
            .map(|i| HistogramBin {
                lo: lo + i as f64 * width,
                hi: lo + (i + 1) as f64 * width,
                count: 0,
            })
            .collect();
        for &x in &xs {
            let idx = (((x - lo) / width) as usize).min(n_bins - 1);
            histogram[idx].count += 1;
        }

        let grid_n = 256;
        let glo = lo - 3.0 * bandwidth;
        let ghi = hi + 3.0 * bandwidth;
        let gstep = (ghi - glo) / (grid_n - 1) as f64;
        let inv = 1.0 / (bandwidth * (2.0 * std::f64::consts::PI).sqrt());
        let density: Vec<(f64, f64)> = (0..grid_n)
            .map(|i| {
                let g = glo + i as f64 * gstep;
                let mut acc = 0.0;
                for &x in &xs {
                    let z = (g - x) / bandwidth;
                    acc += (-0.5 * z * z).exp();
                }
                (g, inv * acc / n)
            })
            .collect();
        (histogram, density, bandwidth)
    };

    Ok(TauDensityReport {
        taus,
        histogram,
        density,
        censored_pct,
        kde_bandwidth: bandwidth,
        meta: RunMeta::new(spec.master_seed, spec.reps, started),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_plan() -> ExperimentPlan {
        ExperimentPlan {
            dgps: vec!["i".into()],
            ms: vec![50],
            gammas: vec![0.0],
            alphas: vec![0.10, 0.05, 0.01],
            s_stars: vec![1],
            delta_ds: vec![],
            reps: 200,
            horizon_multiple: 5,
            master_seed: 7,
            corrected_boundary: true,
            c_override: None,
        }
    }

    #[test]
    fn unreachable_boundary_never_rejects() {
        let mut plan = small_plan();
        plan.c_override = Some(1e9);
        plan.reps = 100;
        let report = run_size_study(&plan).unwrap();
        for cell in &report.cells {
            assert!(cell.rates_pct.iter().all(|&r| r == 0.0));
        }
    }

    #[test]
    fn size_study_rejects_change_designs() {
        let mut plan = small_plan();
        plan.dgps = vec!["v".into()];
        assert!(matches!(run_size_study(&plan), Err(Error::Config(_))));
    }

    #[test]
    fn power_study_rejects_stable_designs() {
        let plan = small_plan();
        assert!(matches!(run_power_study(&plan), Err(Error::Config(_))));
    }

    #[test]
    fn disjoint_seed_halves_agree_within_pooled_error() {
        let mut a = small_plan();
        a.reps = 400;
        let mut b = a.clone();
        b.master_seed = 7_000_007;
        let ra = run_size_study(&a).unwrap();
        let rb = run_size_study(&b).unwrap();
        for (ca, cb) in ra.cells.iter().zip(rb.cells.iter()) {
            for i in 0..ca.rates_pct.len() {
                let diff = (ca.rates_pct[i] - cb.rates_pct[i]).abs();
                let pooled = (ca.se_pct[i].powi(2) + cb.se_pct[i].powi(2)).sqrt();
                assert!(
                    diff <= 3.0 * pooled + 1e-9,
                    "horizon {}: {} vs {} (pooled se {})",
                    i + 1,
                    ca.rates_pct[i],
                    cb.rates_pct[i],
                    pooled
                );
            }
        }
    }

    #[test]
    fn power_is_monotone_in_alpha_exactly() {
        let plan = ExperimentPlan {
            dgps: vec!["v".into()],
            ms: vec![50],
            gammas: vec![0.25],
            alphas: vec![0.10, 0.05, 0.01],
            s_stars: vec![1],
            delta_ds: vec![],
            reps: 300,
            horizon_multiple: 5,
            master_seed: 11,
            corrected_boundary: true,
            c_override: None,
        };
        let report = run_power_study(&plan).unwrap();
        assert_eq!(report.cells.len(), 3);
        let by_alpha: Vec<f64> = report.cells.iter().map(|c| c.power_pct).collect();
        assert!(by_alpha[0] >= by_alpha[1] && by_alpha[1] >= by_alpha[2]);
    }

    #[test]
    fn reports_are_deterministic() {
        let plan = small_plan();
        let a = run_size_study(&plan).unwrap();
        let b = run_size_study(&plan).unwrap();
        for (ca, cb) in a.cells.iter().zip(b.cells.iter()) {
            assert_eq!(ca.rates_pct, cb.rates_pct);
        }
    }

    #[test]
    fn tau_density_is_deterministic_and_reports_censoring() {
        let spec = TauDensitySpec {
            dgp: "xii".into(),
            m: 50,
            gamma: 0.45,
            alpha: 0.05,
            s_star: 1,
            delta_d: Some(1.25),
            reps: 300,
            horizon_multiple: 5,
            master_seed: 3,
            corrected_boundary: true,
        };
        let a = tau_density(&spec).unwrap();
        let b = tau_density(&spec).unwrap();
        assert_eq!(a.taus, b.taus);
        assert!(a.censored_pct < 1.0);
        // explosive changes are caught almost immediately
        let below_100 = a.taus.iter().filter(|&&t| t < 100).count();
        assert!(below_100 as f64 >= 0.99 * a.taus.len() as f64);
    }

    #[test]
    fn plan_parses_from_toml() {
        let plan = ExperimentPlan::from_toml_str(
            r#"
            dgps = ["i", "ii"]
            ms = [50, 100]
            gammas = [0.0, 0.25]
            alphas = [0.05]
            reps = 10
            master_seed = 42
            "#,
        )
        .unwrap();
        assert_eq!(plan.s_stars, vec![1]);
        assert_eq!(plan.horizon_multiple, 10);
        assert!(plan.corrected_boundary);
    }
}

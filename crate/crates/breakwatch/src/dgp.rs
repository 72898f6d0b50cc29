//! Synthetic worlds for the Monte Carlo studies.
//!
//! Regressors are AR(1) or GARCH(1,1) sequences (optionally driven by one
//! shared innovation stream, which makes the four columns strongly
//! dependent); errors are i.i.d. normal or GARCH(1,1). The response follows
//! the autoregressive regression recursion, with an optional coefficient
//! change `s_star` steps after the training window.
//!
//! Twelve ready-made designs (`DgpId::I` .. `DgpId::Xii`) bake in the
//! parameter sets used throughout the experiment harness: I-IV are stable
//! (size studies), V-XII change the coefficients (power studies) with the
//! post-change autoregressive coefficient stationary, at unity, or
//! explosive.
//!
//! Regressor and error streams draw from disjoint RNG substreams of the
//! spec seed, so the two processes are independent by construction and a
//! seed reproduces the whole world bit for bit. Recursions start from zero
//! (AR) or the unconditional variance (GARCH) and discard `burn_in` steps
//! as a stand-in for the stationary infinite past.

use crate::error::{Error, Result};
use crate::rng::{substream, Gaussian};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Substream carrying regressor innovations.
pub const REGRESSOR_STREAM: u64 = 1;
/// Substream carrying error innovations.
pub const ERROR_STREAM: u64 = 2;

/// Exogenous regressor process for the `k = d - 2` columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressorProcess {
    pub kind: RegressorKind,
    /// One innovation sequence shared by every column.
    pub shared_innovations: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RegressorKind {
    Ar1 { rho: Vec<f64> },
    Garch {
        omega: Vec<f64>,
        phi: Vec<f64>,
        psi: Vec<f64>,
    },
}

impl RegressorProcess {
    pub fn n_columns(&self) -> usize {
        match &self.kind {
            RegressorKind::Ar1 { rho } => rho.len(),
            RegressorKind::Garch { omega, .. } => omega.len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match &self.kind {
            RegressorKind::Ar1 { rho } => {
                if rho.is_empty() {
                    return Err(Error::Parameter("ar1 needs at least one column".into()));
                }
                for (k, &r) in rho.iter().enumerate() {
                    if r.abs() >= 1.0 {
                        return Err(Error::Parameter(format!(
                            "|rho| must be < 1 for stationarity; column {k} has {r}"
                        )));
                    }
                }
            }
            RegressorKind::Garch { omega, phi, psi } => {
                if omega.is_empty() || omega.len() != phi.len() || phi.len() != psi.len() {
                    return Err(Error::Parameter(
                        "garch parameter vectors must be non-empty and equal-length".into(),
                    ));
                }
                for k in 0..omega.len() {
                    validate_garch(omega[k], phi[k], psi[k])
                        .map_err(|e| Error::Parameter(format!("column {k}: {e}")))?;
                }
            }
        }
        Ok(())
    }
}

/// Error process for the regression disturbances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ErrorProcess {
    IidNormal { variance: f64 },
    Garch { omega: f64, phi: f64, psi: f64 },
}

impl ErrorProcess {
    pub fn validate(&self) -> Result<()> {
        match self {
            ErrorProcess::IidNormal { variance } => {
                if !(*variance > 0.0) {
                    return Err(Error::Parameter(format!(
                        "error variance must be positive, got {variance}"
                    )));
                }
            }
            ErrorProcess::Garch { omega, phi, psi } => {
                validate_garch(*omega, *phi, *psi)?;
            }
        }
        Ok(())
    }

    /// Unconditional variance of the errors.
    pub fn variance(&self) -> f64 {
        match self {
            ErrorProcess::IidNormal { variance } => *variance,
            ErrorProcess::Garch { omega, phi, psi } => omega / (1.0 - phi - psi),
        }
    }
}

fn validate_garch(omega: f64, phi: f64, psi: f64) -> Result<()> {
    if !(omega > 0.0) || phi < 0.0 || psi < 0.0 {
        return Err(Error::Parameter(format!(
            "garch needs omega > 0, phi >= 0, psi >= 0; got ({omega}, {phi}, {psi})"
        )));
    }
    if phi + psi >= 1.0 {
        return Err(Error::Parameter(format!(
            "garch needs phi + psi < 1 for a finite variance; got {}",
            phi + psi
        )));
    }
    Ok(())
}

/// Coefficient change after the training window: none, or new coefficients
/// taking effect from step `s_star + 1` on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ChangeSpec {
    None,
    At {
        s_star: u64,
        delta_bar: Vec<f64>,
        delta_d: f64,
    },
}

/// Full description of a simulated world.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DgpSpec {
    pub regressors: RegressorProcess,
    pub errors: ErrorProcess,
    /// Intercept plus exogenous coefficients (length `d - 1`).
    pub beta0_bar: Vec<f64>,
    /// Autoregressive coefficient (must satisfy `|beta0_d| < 1`).
    pub beta0_d: f64,
    pub change: ChangeSpec,
    pub m: u64,
    /// Post-training steps to generate.
    pub extra_horizon: u64,
    pub burn_in: u64,
    pub seed: u64,
}

impl DgpSpec {
    pub fn validate(&self) -> Result<()> {
        self.regressors.validate()?;
        self.errors.validate()?;
        let k = self.regressors.n_columns();
        if self.beta0_bar.len() != k + 1 {
            return Err(Error::Dimension(format!(
                "beta0_bar has length {}, expected {} (intercept + {k} regressors)",
                self.beta0_bar.len(),
                k + 1
            )));
        }
        if self.beta0_d.abs() >= 1.0 {
            return Err(Error::Parameter(format!(
                "|beta0_d| must be < 1 for a stationary start, got {}",
                self.beta0_d
            )));
        }
        if let ChangeSpec::At {
            s_star, delta_bar, ..
        } = &self.change
        {
            if *s_star < 1 {
                return Err(Error::Parameter("s_star must be >= 1".into()));
            }
            if delta_bar.len() != k + 1 {
                return Err(Error::Dimension(format!(
                    "delta_bar has length {}, expected {}",
                    delta_bar.len(),
                    k + 1
                )));
            }
        }
        if self.m < 1 {
            return Err(Error::Parameter("m must be >= 1".into()));
        }
        Ok(())
    }

    /// Model dimension `d` (intercept + exogenous + lag).
    pub fn d(&self) -> usize {
        self.regressors.n_columns() + 2
    }
}

/// A generated world: training series, monitored series, and the aligned
/// exogenous rows.
#[derive(Debug, Clone)]
pub struct GeneratedWorld {
    /// Lag for the first training observation.
    pub y0: f64,
    /// Responses at times `1 ..= m + extra_horizon`.
    pub y: Vec<f64>,
    /// Exogenous rows, row-major with stride `k`, aligned with `y`.
    exog: Vec<f64>,
    k: usize,
    /// 1-based time of the last pre-change observation (`m + s_star`), if
    /// the spec contains a change.
    pub change_at: Option<u64>,
    /// Error terms, retained for debugging export.
    pub errors: Option<Vec<f64>>,
}

impl GeneratedWorld {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn n_exog(&self) -> usize {
        self.k
    }

    /// Exogenous row for the observation `y[t]`.
    pub fn exog_row(&self, t: usize) -> &[f64] {
        &self.exog[t * self.k..(t + 1) * self.k]
    }
}

/// Simulates the regressor matrix: `n` rows after discarding `burn_in`
/// internal steps. Output is row-major with stride `n_columns`.
pub fn gen_regressors(
    proc: &RegressorProcess,
    n: usize,
    burn_in: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    proc.validate()?;
    let k = proc.n_columns();
    let mut rng = substream(seed, REGRESSOR_STREAM);
    let mut gauss = Gaussian::new();
    let mut out = vec![0.0; n * k];
    match &proc.kind {
        RegressorKind::Ar1 { rho } => {
            let mut state = vec![0.0f64; k];
            for t in 0..burn_in + n {
                let shared = if proc.shared_innovations {
                    gauss.sample(&mut rng)
                } else {
                    0.0
                };
                for j in 0..k {
                    let eta = if proc.shared_innovations {
                        shared
                    } else {
                        gauss.sample(&mut rng)
                    };
                    state[j] = rho[j] * state[j] + eta;
                    if t >= burn_in {
                        out[(t - burn_in) * k + j] = state[j];
                    }
                }
            }
        }
        RegressorKind::Garch { omega, phi, psi } => {
            // start the variance recursion at its unconditional level
            let mut sig2: Vec<f64> = (0..k)
                .map(|j| omega[j] / (1.0 - phi[j] - psi[j]))
                .collect();
            let mut prev_x = vec![0.0f64; k];
            let mut have_prev = false;
            for t in 0..burn_in + n {
                let shared = if proc.shared_innovations {
                    gauss.sample(&mut rng)
                } else {
                    0.0
                };
                for j in 0..k {
                    if have_prev {
                        sig2[j] = omega[j] + phi[j] * prev_x[j] * prev_x[j] + psi[j] * sig2[j];
                    }
                    let h = if proc.shared_innovations {
                        shared
                    } else {
                        gauss.sample(&mut rng)
                    };
                    let x = sig2[j].sqrt() * h;
                    prev_x[j] = x;
                    if t >= burn_in {
                        out[(t - burn_in) * k + j] = x;
                    }
                }
                have_prev = true;
            }
        }
    }
    Ok(out)
}

/// Simulates the error sequence: `n` values after discarding `burn_in`.
pub fn gen_errors(proc: &ErrorProcess, n: usize, burn_in: usize, seed: u64) -> Result<Vec<f64>> {
    proc.validate()?;
    let mut rng = substream(seed, ERROR_STREAM);
    let mut gauss = Gaussian::new();
    let mut out = Vec::with_capacity(n);
    match proc {
        ErrorProcess::IidNormal { variance } => {
            let sd = variance.sqrt();
            for t in 0..burn_in + n {
                let e = sd * gauss.sample(&mut rng);
                if t >= burn_in {
                    out.push(e);
                }
            }
        }
        ErrorProcess::Garch { omega, phi, psi } => {
            let mut sig2 = omega / (1.0 - phi - psi);
            let mut prev = 0.0;
            let mut have_prev = false;
            for t in 0..burn_in + n {
                if have_prev {
                    sig2 = omega + phi * prev * prev + psi * sig2;
                }
                let e = sig2.sqrt() * gauss.sample(&mut rng);
                prev = e;
                have_prev = true;
                if t >= burn_in {
                    out.push(e);
                }
            }
        }
    }
    Ok(out)
}

/// Runs the response recursion over pre-generated regressors and errors.
///
/// `regressors` and `errors` must cover `burn_in + m + horizon` steps; the
/// first `burn_in` responses are discarded (the last of them becomes `y0`).
/// Under a change at `s_star`, observations `1 ..= m + s_star` follow the
/// initial coefficients and later ones the changed coefficients.
pub fn gen_response(
    regressors: &[f64],
    n_columns: usize,
    errors: &[f64],
    beta0_bar: &[f64],
    beta0_d: f64,
    change: &ChangeSpec,
    m: u64,
    burn_in: u64,
) -> Result<(f64, Vec<f64>, Option<u64>)> {
    let total = errors.len();
    if regressors.len() != total * n_columns {
        return Err(Error::Dimension(format!(
            "regressor matrix has {} entries, expected {} x {}",
            regressors.len(),
            total,
            n_columns
        )));
    }
    if beta0_bar.len() != n_columns + 1 {
        return Err(Error::Dimension(format!(
            "beta0_bar has length {}, expected {}",
            beta0_bar.len(),
            n_columns + 1
        )));
    }
    if beta0_d.abs() >= 1.0 {
        return Err(Error::Parameter(format!(
            "|beta0_d| must be < 1, got {beta0_d}"
        )));
    }
    let burn = burn_in as usize;
    if total < burn {
        return Err(Error::Dimension(format!(
            "need at least burn_in = {burn} steps, got {total}"
        )));
    }

    // absolute position (0-based) of the first post-change observation
    let change_pos = match change {
        ChangeSpec::None => usize::MAX,
        ChangeSpec::At { s_star, .. } => burn + m as usize + *s_star as usize,
    };

    let mut y = Vec::with_capacity(total);
    let mut lag = 0.0f64;
    for t in 0..total {
        let row = &regressors[t * n_columns..(t + 1) * n_columns];
        let (bar, d_coef) = if t >= change_pos {
            match change {
                ChangeSpec::At {
                    delta_bar, delta_d, ..
                } => (delta_bar.as_slice(), *delta_d),
                ChangeSpec::None => unreachable!(),
            }
        } else {
            (beta0_bar, beta0_d)
        };
        let mut v = bar[0];
        for j in 0..n_columns {
            v += bar[j + 1] * row[j];
        }
        v += d_coef * lag + errors[t];
        y.push(v);
        lag = v;
    }

    let y0 = if burn == 0 { 0.0 } else { y[burn - 1] };
    let kept = y.split_off(burn);
    let change_at = match change {
        ChangeSpec::None => None,
        ChangeSpec::At { s_star, .. } => Some(m + *s_star),
    };
    Ok((y0, kept, change_at))
}

/// Generates a full world from a spec: regressors, errors and the response
/// recursion, each with its own burn-in.
pub fn simulate(spec: &DgpSpec) -> Result<GeneratedWorld> {
    spec.validate()?;
    let k = spec.regressors.n_columns();
    let n = (spec.burn_in + spec.m + spec.extra_horizon) as usize;
    let exog_full = gen_regressors(&spec.regressors, n, spec.burn_in as usize, spec.seed)?;
    let errors_full = gen_errors(&spec.errors, n, spec.burn_in as usize, spec.seed)?;
    let (y0, y, change_at) = gen_response(
        &exog_full,
        k,
        &errors_full,
        &spec.beta0_bar,
        spec.beta0_d,
        &spec.change,
        spec.m,
        spec.burn_in,
    )?;
    let burn = spec.burn_in as usize;
    let exog = exog_full[burn * k..].to_vec();
    let errors = errors_full[burn..].to_vec();
    Ok(GeneratedWorld {
        y0,
        y,
        exog,
        k,
        change_at,
        errors: Some(errors),
    })
}

/// The twelve built-in designs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DgpId {
    I,
    Ii,
    Iii,
    Iv,
    V,
    Vi,
    Vii,
    Viii,
    Ix,
    X,
    Xi,
    Xii,
}

impl DgpId {
    pub const ALL: [DgpId; 12] = [
        DgpId::I,
        DgpId::Ii,
        DgpId::Iii,
        DgpId::Iv,
        DgpId::V,
        DgpId::Vi,
        DgpId::Vii,
        DgpId::Viii,
        DgpId::Ix,
        DgpId::X,
        DgpId::Xi,
        DgpId::Xii,
    ];

    /// Designs I-IV are stable (no coefficient change).
    pub fn is_null(self) -> bool {
        matches!(self, DgpId::I | DgpId::Ii | DgpId::Iii | DgpId::Iv)
    }

    pub fn index(self) -> usize {
        Self::ALL.iter().position(|&d| d == self).unwrap()
    }
}

impl fmt::Display for DgpId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            DgpId::I => "i",
            DgpId::Ii => "ii",
            DgpId::Iii => "iii",
            DgpId::Iv => "iv",
            DgpId::V => "v",
            DgpId::Vi => "vi",
            DgpId::Vii => "vii",
            DgpId::Viii => "viii",
            DgpId::Ix => "ix",
            DgpId::X => "x",
            DgpId::Xi => "xi",
            DgpId::Xii => "xii",
        };
        f.write_str(s)
    }
}

impl FromStr for DgpId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "i" | "1" => Ok(DgpId::I),
            "ii" | "2" => Ok(DgpId::Ii),
            "iii" | "3" => Ok(DgpId::Iii),
            "iv" | "4" => Ok(DgpId::Iv),
            "v" | "5" => Ok(DgpId::V),
            "vi" | "6" => Ok(DgpId::Vi),
            "vii" | "7" => Ok(DgpId::Vii),
            "viii" | "8" => Ok(DgpId::Viii),
            "ix" | "9" => Ok(DgpId::Ix),
            "x" | "10" => Ok(DgpId::X),
            "xi" | "11" => Ok(DgpId::Xi),
            "xii" | "12" => Ok(DgpId::Xii),
            other => Err(Error::Parameter(format!("unknown dgp id '{other}'"))),
        }
    }
}

/// Baseline coefficients shared by every built-in design (`d = 6`).
pub const BASE_BETA_BAR: [f64; 5] = [0.02, 0.20, 0.25, 0.15, -0.20];
/// Baseline autoregressive coefficient.
pub const BASE_BETA_D: f64 = 0.25;
/// Changed exogenous coefficients for designs V, VI, IX-XII.
pub const CHANGED_DELTA_BAR: [f64; 5] = [0.04, 1.60, 0.75, 0.55, 1.20];
/// AR(1) regressor coefficients.
pub const REGRESSOR_RHO: [f64; 4] = [0.15, 0.20, 0.10, 0.30];
/// GARCH regressor parameters for designs III and IV.
pub const REGRESSOR_GARCH_OMEGA: [f64; 4] = [0.3, 0.5, 0.4, 0.6];
pub const REGRESSOR_GARCH_PHI: [f64; 4] = [0.5, 0.3, 0.2, 0.6];
pub const REGRESSOR_GARCH_PSI: [f64; 4] = [0.2, 0.3, 0.6, 0.2];
/// GARCH error parameters (designs I, III, VI, VIII, X, XII).
pub const ERROR_GARCH: (f64, f64, f64) = (0.2, 0.3, 0.3);
/// Admissible post-change AR coefficients for designs VII-X.
pub const NEAR_UNIT_DELTAS: [f64; 4] = [0.90, 0.95, 0.99, 1.00];
/// Admissible post-change AR coefficients for designs XI and XII.
pub const EXPLOSIVE_DELTAS: [f64; 4] = [1.01, 1.05, 1.10, 1.25];

/// Default burn-in for both the regressor and response recursions.
pub const DEFAULT_BURN_IN: u64 = 500;

fn ar1_regressors(shared: bool) -> RegressorProcess {
    RegressorProcess {
        kind: RegressorKind::Ar1 {
            rho: REGRESSOR_RHO.to_vec(),
        },
        shared_innovations: shared,
    }
}

fn garch_regressors(shared: bool) -> RegressorProcess {
    RegressorProcess {
        kind: RegressorKind::Garch {
            omega: REGRESSOR_GARCH_OMEGA.to_vec(),
            phi: REGRESSOR_GARCH_PHI.to_vec(),
            psi: REGRESSOR_GARCH_PSI.to_vec(),
        },
        shared_innovations: shared,
    }
}

fn garch_errors() -> ErrorProcess {
    ErrorProcess::Garch {
        omega: ERROR_GARCH.0,
        phi: ERROR_GARCH.1,
        psi: ERROR_GARCH.2,
    }
}

fn iid_errors() -> ErrorProcess {
    ErrorProcess::IidNormal { variance: 1.0 }
}

fn delta_in(choice: f64, allowed: &[f64]) -> Result<f64> {
    allowed
        .iter()
        .copied()
        .find(|&d| (d - choice).abs() < 1e-12)
        .ok_or_else(|| {
            Error::Parameter(format!(
                "delta_d {choice} is not one of the admissible values {allowed:?}"
            ))
        })
}

/// Builds one of the twelve built-in designs with its exact parameters.
///
/// `delta_d_choice` selects the post-change AR coefficient for designs
/// VII-XII and must be absent otherwise. `s_star` is ignored by the stable
/// designs I-IV. The generated horizon defaults to `10 * m`.
pub fn make_dgp(
    id: DgpId,
    m: u64,
    s_star: u64,
    delta_d_choice: Option<f64>,
    seed: u64,
) -> Result<DgpSpec> {
    let base = DgpSpec {
        regressors: ar1_regressors(false),
        errors: iid_errors(),
        beta0_bar: BASE_BETA_BAR.to_vec(),
        beta0_d: BASE_BETA_D,
        change: ChangeSpec::None,
        m,
        extra_horizon: 10 * m,
        burn_in: DEFAULT_BURN_IN,
        seed,
    };
    let needs_no_delta = |id: DgpId| -> Result<()> {
        if delta_d_choice.is_some() {
            return Err(Error::Parameter(format!(
                "design {id} does not take a delta_d choice"
            )));
        }
        Ok(())
    };
    let change_full =
        |s_star: u64, delta_d: f64| ChangeSpec::At {
            s_star,
            delta_bar: CHANGED_DELTA_BAR.to_vec(),
            delta_d,
        };
    let change_ar_only = |s_star: u64, delta_d: f64| ChangeSpec::At {
        s_star,
        delta_bar: BASE_BETA_BAR.to_vec(),
        delta_d,
    };

    let spec = match id {
        DgpId::I => {
            needs_no_delta(id)?;
            DgpSpec {
                errors: garch_errors(),
                ..base
            }
        }
        DgpId::Ii => {
            needs_no_delta(id)?;
            DgpSpec {
                regressors: ar1_regressors(true),
                ..base
            }
        }
        DgpId::Iii => {
            needs_no_delta(id)?;
            DgpSpec {
                regressors: garch_regressors(false),
                errors: garch_errors(),
                ..base
            }
        }
        DgpId::Iv => {
            needs_no_delta(id)?;
            DgpSpec {
                regressors: garch_regressors(true),
                ..base
            }
        }
        DgpId::V => {
            needs_no_delta(id)?;
            DgpSpec {
                regressors: ar1_regressors(true),
                change: change_full(s_star, 0.60),
                ..base
            }
        }
        DgpId::Vi => {
            needs_no_delta(id)?;
            DgpSpec {
                regressors: ar1_regressors(true),
                errors: garch_errors(),
                change: change_full(s_star, 0.60),
                ..base
            }
        }
        DgpId::Vii | DgpId::Viii => {
            let delta = delta_in(
                delta_d_choice.ok_or_else(|| {
                    Error::Parameter(format!("design {id} requires a delta_d choice"))
                })?,
                &NEAR_UNIT_DELTAS,
            )?;
            DgpSpec {
                regressors: ar1_regressors(true),
                errors: if id == DgpId::Viii {
                    garch_errors()
                } else {
                    iid_errors()
                },
                change: change_ar_only(s_star, delta),
                ..base
            }
        }
        DgpId::Ix | DgpId::X => {
            let delta = delta_in(
                delta_d_choice.ok_or_else(|| {
                    Error::Parameter(format!("design {id} requires a delta_d choice"))
                })?,
                &NEAR_UNIT_DELTAS,
            )?;
            DgpSpec {
                regressors: ar1_regressors(true),
                errors: if id == DgpId::X {
                    garch_errors()
                } else {
                    iid_errors()
                },
                change: change_full(s_star, delta),
                ..base
            }
        }
        DgpId::Xi | DgpId::Xii => {
            let delta = delta_in(
                delta_d_choice.ok_or_else(|| {
                    Error::Parameter(format!("design {id} requires a delta_d choice"))
                })?,
                &EXPLOSIVE_DELTAS,
            )?;
            DgpSpec {
                regressors: ar1_regressors(true),
                errors: if id == DgpId::Xii {
                    garch_errors()
                } else {
                    iid_errors()
                },
                change: change_full(s_star, delta),
                ..base
            }
        }
    };
    Ok(spec)
}

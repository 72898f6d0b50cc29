//! CSV ingestion, column transforms, and the data-monitoring commands.
//!
//! Input files carry a header row, one date/label column and numeric
//! columns. Each used column passes through a transform (`identity`,
//! `diff_log`, `lag k`, or `diff_log` followed by `lag k`); rows consumed
//! by differencing and lagging are dropped from the front of *every*
//! column so the series stay aligned, and the common offset is reported.
//!
//! `monitor_command` fits the training window, monitors the remaining
//! rows, maps a detection back to its date label, and emits a JSON-ready
//! report plus an optional trajectory CSV. `remonitor_command` restarts
//! monitoring from a later training window, warning (not failing) when the
//! new window starts before a previous detection.
//!
//! Dates are opaque labels: detection dates are read off by position, no
//! calendar arithmetic. Inputs are assumed seasonally adjusted upstream.

use crate::boundary::BoundaryParams;
use crate::critical::{
    critical_value, CriticalSource, CriticalValue, Provenance,
};
use crate::error::{Error, Result};
use crate::model::{fit_ols, TrainingSample};
use crate::monitor::{init_monitor, Horizon, MonitorConfig, Outcome, StepOutcome, StoppingResult};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::sync::Arc;

/// Column transform, applied before alignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum TransformOp {
    Identity,
    /// First difference of the natural log; requires positive inputs.
    DiffLog,
    /// Shift forward by `k`: the transformed value at `t` is the source at `t - k`.
    Lag { k: usize },
    /// `diff_log` then `lag k`.
    DiffLogThenLag { k: usize },
}

impl TransformOp {
    /// Leading rows this transform consumes.
    pub fn depth(&self) -> usize {
        match self {
            TransformOp::Identity => 0,
            TransformOp::DiffLog => 1,
            TransformOp::Lag { k } => *k,
            TransformOp::DiffLogThenLag { k } => 1 + *k,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            TransformOp::Lag { k } | TransformOp::DiffLogThenLag { k } if *k < 1 => Err(
                Error::Config("lag k must be >= 1 (use identity for k = 0)".into()),
            ),
            _ => Ok(()),
        }
    }

    /// Applies the transform. Output has `input.len() - depth()` values,
    /// with output index 0 corresponding to source row `depth()`.
    pub fn apply(&self, column: &[f64], name: &str) -> Result<Vec<f64>> {
        self.validate()?;
        if column.len() <= self.depth() {
            return Err(Error::Data(format!(
                "column '{name}' has {} rows, not enough for a transform of depth {}",
                column.len(),
                self.depth()
            )));
        }
        let diff_log = |col: &[f64]| -> Result<Vec<f64>> {
            for (i, &v) in col.iter().enumerate() {
                if v <= 0.0 {
                    return Err(Error::Data(format!(
                        "diff_log needs positive values; column '{name}' row {} is {v}",
                        i + 1
                    )));
                }
            }
            Ok(col.windows(2).map(|w| w[1].ln() - w[0].ln()).collect())
        };
        match self {
            TransformOp::Identity => Ok(column.to_vec()),
            TransformOp::DiffLog => diff_log(column),
            TransformOp::Lag { k } => Ok(column[..column.len() - k].to_vec()),
            TransformOp::DiffLogThenLag { k } => {
                let d = diff_log(column)?;
                Ok(d[..d.len() - k].to_vec())
            }
        }
    }
}

/// A named source column with its transform.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    #[serde(flatten)]
    pub transform: TransformOp,
}

/// Aligned dataset: labels, response, exogenous rows.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub labels: Vec<String>,
    pub y: Vec<f64>,
    pub exog: Vec<Vec<f64>>,
    /// Leading source rows dropped to align all transformed columns.
    pub offset: usize,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }
}

/// Reads a CSV file and produces the aligned dataset.
pub fn ingest_csv(
    path: &Path,
    date_column: &str,
    response: &ColumnSpec,
    exog: &[ColumnSpec],
) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
    let col_index = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Data(format!("column '{name}' not found in {headers:?}")))
    };
    let date_idx = col_index(date_column)?;
    let resp_idx = col_index(&response.name)?;
    let exog_idx: Vec<usize> = exog
        .iter()
        .map(|c| col_index(&c.name))
        .collect::<Result<_>>()?;

    let mut labels_raw = Vec::new();
    let mut resp_raw = Vec::new();
    let mut exog_raw: Vec<Vec<f64>> = vec![Vec::new(); exog.len()];
    for (row_no, record) in reader.records().enumerate() {
        let record = record?;
        let parse = |idx: usize, name: &str| -> Result<f64> {
            let field = record.get(idx).ok_or_else(|| {
                Error::Data(format!(
                    "row {} is ragged: no field for column '{name}'",
                    row_no + 1
                ))
            })?;
            field.parse::<f64>().map_err(|_| {
                Error::Data(format!(
                    "row {}, column '{name}': cannot parse '{field}' as a number",
                    row_no + 1
                ))
            })
        };
        labels_raw.push(
            record
                .get(date_idx)
                .ok_or_else(|| Error::Data(format!("row {} has no date field", row_no + 1)))?
                .to_owned(),
        );
        resp_raw.push(parse(resp_idx, &response.name)?);
        for (j, &idx) in exog_idx.iter().enumerate() {
            exog_raw[j].push(parse(idx, &exog[j].name)?);
        }
    }
    if resp_raw.is_empty() {
        return Err(Error::Data("file has no data rows".into()));
    }

    let offset = std::iter::once(response.transform.depth())
        .chain(exog.iter().map(|c| c.transform.depth()))
        .max()
        .unwrap_or(0);
    if resp_raw.len() <= offset {
        return Err(Error::Data(format!(
            "only {} data rows but the transforms consume {offset}",
            resp_raw.len()
        )));
    }
    let n_aligned = resp_raw.len() - offset;

    // Each transformed column keeps its last n_aligned values; that lines
    // every series up on the same source rows.
    let y_t = response.transform.apply(&resp_raw, &response.name)?;
    let y = y_t[y_t.len() - n_aligned..].to_vec();
    let mut exog_cols = Vec::with_capacity(exog.len());
    for (j, spec) in exog.iter().enumerate() {
        let t = spec.transform.apply(&exog_raw[j], &spec.name)?;
        exog_cols.push(t[t.len() - n_aligned..].to_vec());
    }
    let exog_rows: Vec<Vec<f64>> = (0..n_aligned)
        .map(|t| exog_cols.iter().map(|c| c[t]).collect())
        .collect();
    let labels = labels_raw[offset..].to_vec();

    Ok(Dataset {
        labels,
        y,
        exog: exog_rows,
        offset,
    })
}

/// How to obtain the critical constant for a data run.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum CriticalConfig {
    #[default]
    Table,
    Simulate {
        #[serde(default = "default_grid")]
        grid: usize,
        #[serde(default = "default_reps")]
        reps: usize,
        #[serde(default)]
        seed: u64,
    },
    Fixed { c: f64 },
}

fn default_grid() -> usize {
    10_000
}

fn default_reps() -> usize {
    50_000
}

/// Horizon section of the run config.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HorizonConfig {
    /// Monitor until the data runs out.
    Open,
    /// Censor after `n` monitored steps.
    Closed { n: u64 },
}

impl Default for HorizonConfig {
    fn default() -> Self {
        HorizonConfig::Open
    }
}

/// Full configuration of a data-monitoring run (one TOML file per run).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MonitorRunConfig {
    /// CSV path; may be overridden on the command line.
    #[serde(default)]
    pub data: Option<PathBuf>,
    pub date_column: String,
    pub response: ColumnSpec,
    #[serde(default)]
    pub exog: Vec<ColumnSpec>,
    /// First training row in the aligned dataset (1-based). Must be >= 2:
    /// the previous row supplies the lag for the first training
    /// observation.
    #[serde(default = "default_training_start")]
    pub training_start: usize,
    pub m: usize,
    pub gamma: f64,
    pub alpha: f64,
    #[serde(default = "default_correction")]
    pub boundary_correction: bool,
    #[serde(default)]
    pub critical: CriticalConfig,
    #[serde(default)]
    pub horizon: HorizonConfig,
    /// Where to write the trajectory CSV, if anywhere.
    #[serde(default)]
    pub trajectory_out: Option<PathBuf>,
}

fn default_training_start() -> usize {
    2
}

fn default_correction() -> bool {
    true
}

impl MonitorRunConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: MonitorRunConfig =
            toml::from_str(s).map_err(|e| Error::Config(format!("bad run config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.exog.len() + 2;
        if self.m <= d {
            return Err(Error::Config(format!(
                "training window m = {} must exceed the model dimension {d}",
                self.m
            )));
        }
        if !(0.0..0.5).contains(&self.gamma) {
            return Err(Error::Config(format!(
                "gamma must lie in [0, 0.5), got {}",
                self.gamma
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        if self.training_start < 2 {
            return Err(Error::Config(
                "training_start must be >= 2: the previous row supplies the first lag".into(),
            ));
        }
        self.response.transform.validate()?;
        for c in &self.exog {
            c.transform.validate()?;
        }
        Ok(())
    }

    fn critical_value(&self) -> Result<CriticalValue> {
        match &self.critical {
            CriticalConfig::Table => {
                critical_value(self.gamma, self.alpha, CriticalSource::BuiltinTable)
            }
            CriticalConfig::Simulate { grid, reps, seed } => critical_value(
                self.gamma,
                self.alpha,
                CriticalSource::Simulation {
                    grid_size: *grid,
                    reps: *reps,
                    seed: *seed,
                },
            ),
            CriticalConfig::Fixed { c } => {
                if !(*c > 0.0) {
                    return Err(Error::Config(format!("fixed c must be positive, got {c}")));
                }
                Ok(CriticalValue {
                    value: *c,
                    gamma: self.gamma,
                    alpha: self.alpha,
                    provenance: Provenance::Fixed,
                })
            }
        }
    }
}

/// Everything a caller needs to know about a finished data run.
/// Serializes to the stable JSON schema; `manifest.timestamp_unix` is the
/// only field that varies between identical runs, and the library leaves
/// it unset.
#[derive(Debug, Clone, Serialize)]
pub struct MonitorReport {
    /// Detection step, if the detector crossed.
    pub tau: Option<u64>,
    /// Censoring marker if it did not (closed-end: `n + 1`; data exhausted:
    /// steps consumed).
    pub censored: Option<u64>,
    /// Date label of the detection row.
    pub date: Option<String>,
    pub gamma: f64,
    pub alpha: f64,
    pub c: f64,
    pub c_source: Provenance,
    pub m: usize,
    pub sigma_hat: f64,
    pub trajectory_path: Option<PathBuf>,
    pub manifest: Manifest,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub data_path: Option<PathBuf>,
    pub date_column: String,
    pub response: ColumnSpec,
    pub exog: Vec<ColumnSpec>,
    pub training_start: usize,
    pub boundary_correction: bool,
    pub horizon: HorizonConfig,
    pub alignment_offset: usize,
    pub monitored_rows: usize,
    pub beta_hat: Vec<f64>,
    pub warning: Option<String>,
    pub build: String,
    /// Set by the CLI just before printing; isolated so that everything
    /// else is byte-identical across reruns.
    pub timestamp_unix: Option<u64>,
}

/// Fits on `m` rows starting at `training_start` and monitors every later
/// row, writing the trajectory CSV when configured.
pub fn monitor_command(config: &MonitorRunConfig, dataset: &Dataset) -> Result<MonitorReport> {
    config.validate()?;
    run_window(config, dataset, config.training_start, None)
}

/// Restarts monitoring with the training window beginning at
/// `new_training_start` (1-based aligned row). If that row does not lie
/// strictly after `previous_detection_row`, the report carries a warning;
/// re-monitoring from the detection row itself is standard practice, so
/// overlap is not an error.
pub fn remonitor_command(
    config: &MonitorRunConfig,
    dataset: &Dataset,
    new_training_start: usize,
    previous_detection_row: Option<usize>,
) -> Result<MonitorReport> {
    config.validate()?;
    if new_training_start < 2 {
        return Err(Error::Config(
            "training_start must be >= 2: the previous row supplies the first lag".into(),
        ));
    }
    let warning = previous_detection_row.and_then(|prev| {
        if new_training_start < prev {
            Some(format!(
                "training window starts at row {new_training_start}, before the \
                 previous detection at row {prev}; the windows overlap"
            ))
        } else {
            None
        }
    });
    run_window(config, dataset, new_training_start, warning)
}

fn run_window(
    config: &MonitorRunConfig,
    dataset: &Dataset,
    training_start: usize,
    warning: Option<String>,
) -> Result<MonitorReport> {
    let m = config.m;
    let n = dataset.len();
    // rows are 1-based: training occupies training_start ..= training_start + m - 1
    let needed = training_start + m - 1;
    if n < needed {
        return Err(Error::Data(format!(
            "dataset has {n} aligned rows; training needs rows {training_start}..={needed}"
        )));
    }
    let expected_k = config.exog.len();
    if dataset.exog.first().map_or(expected_k != 0, |r| r.len() != expected_k) {
        return Err(Error::Data(format!(
            "dataset has {} exogenous columns, config expects {expected_k}",
            dataset.exog.first().map_or(0, Vec::len)
        )));
    }

    let t0 = training_start - 1; // 0-based index of the first training row
    let y0 = dataset.y[t0 - 1];
    let y_train = &dataset.y[t0..t0 + m];
    let exog_train: Vec<Vec<f64>> = dataset.exog[t0..t0 + m].to_vec();
    let sample = TrainingSample::from_series(y0, y_train, &exog_train)?;
    let model = Arc::new(fit_ols(&sample)?);
    let sigma_hat = model.sigma_hat();

    let crit = config.critical_value()?;
    let params = if config.boundary_correction {
        BoundaryParams::corrected(crit.value, config.gamma, sigma_hat)?
    } else {
        BoundaryParams::raw(crit.value, config.gamma)?
    };
    let monitored_rows = n - (t0 + m);
    let horizon = match config.horizon {
        HorizonConfig::Open => Horizon::Open {
            // the data bounds the run; the cap only has to be unreachable,
            // so exhaustion reports the consumed step count
            max_steps: monitored_rows as u64 + 1,
        },
        HorizonConfig::Closed { n } => Horizon::Closed { n },
    };
    let mon_config =
        MonitorConfig::new(params, horizon, m as u64)?.with_trajectory();

    let mut state = init_monitor(model.clone(), mon_config, y_train[m - 1])?;
    for t in (t0 + m)..n {
        match state.step(&dataset.exog[t], dataset.y[t])? {
            StepOutcome::Continue => {}
            StepOutcome::Stop(_) | StepOutcome::Censored(_) => break,
        }
    }
    let result: StoppingResult = state.finish();

    let (tau, censored) = match result.outcome {
        Outcome::Stopped { tau } => (Some(tau), None),
        Outcome::Censored { at } => (None, Some(at)),
    };
    // detection at step s sits at aligned row (training_start + m - 1) + s
    let date = tau.map(|s| dataset.labels[t0 + m + s as usize - 1].clone());

    let trajectory_path = if let Some(path) = &config.trajectory_out {
        write_trajectory(path, result.trajectory.as_deref().unwrap_or(&[]))?;
        Some(path.clone())
    } else {
        None
    };

    Ok(MonitorReport {
        tau,
        censored,
        date,
        gamma: config.gamma,
        alpha: config.alpha,
        c: crit.value,
        c_source: crit.provenance,
        m,
        sigma_hat,
        trajectory_path,
        manifest: Manifest {
            data_path: config.data.clone(),
            date_column: config.date_column.clone(),
            response: config.response.clone(),
            exog: config.exog.clone(),
            training_start,
            boundary_correction: config.boundary_correction,
            horizon: config.horizon.clone(),
            alignment_offset: dataset.offset,
            monitored_rows,
            beta_hat: model.beta().to_vec(),
            warning,
            build: format!("breakwatch {}", env!("CARGO_PKG_VERSION")),
            timestamp_unix: None,
        },
    })
}

/// Writes the `s, detector, boundary, decision` trajectory file.
pub fn write_trajectory(
    path: &Path,
    trajectory: &[crate::monitor::TrajectoryPoint],
) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["s", "detector", "boundary", "decision"])?;
    for pt in trajectory {
        let decision = if pt.crossed { "stop" } else { "continue" };
        w.write_record([
            pt.s.to_string(),
            format!("{:.12e}", pt.detector),
            format!("{:.12e}", pt.boundary),
            decision.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

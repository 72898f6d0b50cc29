//! Sequential structural-break monitoring for regression models with an
//! autoregressive term.
//!
//! The workflow: fit ordinary least squares once on a training window of
//! `M` observations whose design rows are `(1, exogenous regressors,
//! lagged response)`, then watch new observations arrive. Each step adds
//! the new residual (computed under the frozen training coefficients) to a
//! running sum; the normalized absolute sum is compared against a curved
//! boundary, and the first strict crossing declares a structural break at
//! that step.
//!
//! Modules:
//!
//! * [`model`] - design rows, the training fit, residuals;
//! * [`boundary`] - boundary functions and the detector;
//! * [`critical`] - critical constants `c(gamma, alpha)`: built-in table
//!   and direct simulation of the Wiener-functional quantiles;
//! * [`monitor`] - the online stepping state machine;
//! * [`dgp`] - simulated worlds (AR/GARCH regressors, i.i.d./GARCH errors,
//!   coefficient changes), including twelve ready-made designs;
//! * [`asymptotics`] - stopping-time centers/scales under stationary,
//!   unit-root and explosive post-change regimes, and the associated
//!   limit-law simulators;
//! * [`stationarity`] - KPSS level-stationarity pre-check;
//! * [`experiments`] - seeded Monte Carlo harness (size, power,
//!   stopping-time densities);
//! * [`io`] - CSV ingestion with diff-log/lag transforms and the
//!   data-monitoring commands.
//!
//! Every simulation routine takes an explicit 64-bit seed and splits it
//! into per-replication substreams, so results are reproducible and
//! independent of thread count.
//!
//! ```
//! use breakwatch::prelude::*;
//! use std::sync::Arc;
//!
//! // a stable world, training window of 100
//! let spec = make_dgp(DgpId::Ii, 100, 1, None, 7).unwrap();
//! let world = simulate(&spec).unwrap();
//!
//! // fit on the first 100 observations
//! let exog: Vec<Vec<f64>> = (0..100).map(|t| world.exog_row(t).to_vec()).collect();
//! let sample = TrainingSample::from_series(world.y0, &world.y[..100], &exog).unwrap();
//! let model = Arc::new(fit_ols(&sample).unwrap());
//!
//! // monitor the next 1000 observations at gamma = .25, alpha = .05
//! let c = critical_value(0.25, 0.05, CriticalSource::BuiltinTable).unwrap().value;
//! let params = BoundaryParams::corrected(c, 0.25, model.sigma_hat()).unwrap();
//! let config = MonitorConfig::new(params, Horizon::Open { max_steps: 1000 }, 100).unwrap();
//! let stream = (100..world.len()).map(|t| (world.exog_row(t).to_vec(), world.y[t]));
//! let result = run_stream(model, config, world.y[99], stream).unwrap();
//! println!("{:?}", result.outcome);
//! ```

pub mod asymptotics;
pub mod boundary;
pub mod critical;
pub mod dgp;
pub mod error;
pub mod experiments;
pub mod io;
pub mod model;
pub mod monitor;
pub mod rng;
pub mod stationarity;

pub use error::{Error, Result};

/// The common imports in one place.
pub mod prelude {
    pub use crate::asymptotics::{
        am_bm, cm_dm, delta_measure, explosive_threshold, fa1_fb1, simulate_rw_limit,
        ExplosiveParams, LongRunEstimation,
    };
    pub use crate::boundary::{
        boundary, boundary_corrected, boundary_raw, detector, BoundaryParams,
    };
    pub use crate::critical::{
        closed_end_critical_value, critical_value, simulate_sup_wiener, CriticalSource,
    };
    pub use crate::dgp::{make_dgp, simulate, ChangeSpec, DgpId, DgpSpec};
    pub use crate::error::{Error, Result};
    pub use crate::experiments::{run_power_study, run_size_study, tau_density, ExperimentPlan};
    pub use crate::io::{ingest_csv, monitor_command, remonitor_command, MonitorRunConfig};
    pub use crate::model::{build_design, fit_ols, residual, FittedModel, TrainingSample};
    pub use crate::monitor::{
        init_monitor, run_stream, Horizon, MonitorConfig, MonitorState, Outcome, StoppingResult,
    };
    pub use crate::stationarity::{kpss_level, Bandwidth};
}

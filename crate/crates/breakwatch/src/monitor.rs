//! The online monitoring state machine.
//!
//! After the training fit, observations arrive one at a time. Each step
//! forms the design row from the incoming regressors and the *observed*
//! previous response, computes the residual under the frozen training
//! coefficients, folds it into a compensated running sum, and compares the
//! detector against the boundary at `(M, s)`. The first strict crossing
//! stops the run at `tau = s`; ties continue.
//!
//! Horizons: closed-end monitoring censors once `N` steps have been
//! consumed and reports the conventional value `N + 1`. Open-ended
//! monitoring never censors in principle; simulations cap it (default
//! `10 M`) and report `cap + 1`. A stream that runs dry before the horizon
//! reports the number of steps it managed to consume.

use crate::boundary::{boundary, BoundaryParams, KahanSum};
use crate::error::{Error, Result};
use crate::model::{residual, DesignRow, FittedModel};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Default open-ended cap, as a multiple of the training size.
pub const DEFAULT_OPEN_CAP_MULTIPLE: u64 = 10;

/// Monitoring horizon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Horizon {
    /// Open-ended monitoring, capped at `max_steps` for practical runs.
    Open { max_steps: u64 },
    /// Closed-end monitoring over exactly `n` steps.
    Closed { n: u64 },
}

impl Horizon {
    fn limit(&self) -> u64 {
        match self {
            Horizon::Open { max_steps } => *max_steps,
            Horizon::Closed { n } => *n,
        }
    }
}

/// Static configuration of a monitoring run.
#[derive(Debug, Clone)]
pub struct MonitorConfig {
    pub boundary: BoundaryParams,
    pub horizon: Horizon,
    pub m: u64,
    pub record_trajectory: bool,
}

impl MonitorConfig {
    pub fn new(boundary: BoundaryParams, horizon: Horizon, m: u64) -> Result<Self> {
        if m < 1 {
            return Err(Error::Parameter("training size m must be >= 1".into()));
        }
        if horizon.limit() < 1 {
            return Err(Error::Parameter("horizon must allow at least one step".into()));
        }
        Ok(Self {
            boundary,
            horizon,
            m,
            record_trajectory: false,
        })
    }

    pub fn with_trajectory(mut self) -> Self {
        self.record_trajectory = true;
        self
    }
}

/// Run status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Running,
    Stopped(u64),
    Censored(u64),
}

/// Decision returned by a single step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepOutcome {
    Continue,
    Stop(u64),
    Censored(u64),
}

/// One `(s, detector, boundary)` record of the run.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TrajectoryPoint {
    pub s: u64,
    pub detector: f64,
    pub boundary: f64,
    pub crossed: bool,
}

/// Final outcome of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Outcome {
    Stopped { tau: u64 },
    Censored { at: u64 },
}

/// Stopping time (or censoring marker) with the optional trajectory.
#[derive(Debug, Clone)]
pub struct StoppingResult {
    pub outcome: Outcome,
    pub trajectory: Option<Vec<TrajectoryPoint>>,
}

impl StoppingResult {
    pub fn tau(&self) -> Option<u64> {
        match self.outcome {
            Outcome::Stopped { tau } => Some(tau),
            Outcome::Censored { .. } => None,
        }
    }
}

/// Live monitoring state. Single-writer: step it from one thread at a time.
#[derive(Debug, Clone)]
pub struct MonitorState {
    model: Arc<FittedModel>,
    config: MonitorConfig,
    cum_resid: KahanSum,
    s: u64,
    last_y: f64,
    status: Status,
    trajectory: Vec<TrajectoryPoint>,
}

/// Starts a monitoring run. `y_m` is the last training response: it feeds
/// the lag of the first monitored step.
pub fn init_monitor(
    model: Arc<FittedModel>,
    config: MonitorConfig,
    y_m: f64,
) -> Result<MonitorState> {
    if model.sigma_hat_sq() == 0.0 {
        return Err(Error::DegenerateVariance);
    }
    if config.m != model.m() as u64 {
        return Err(Error::Config(format!(
            "config says m = {} but the model was fitted on {} observations",
            config.m,
            model.m()
        )));
    }
    Ok(MonitorState {
        model,
        config,
        cum_resid: KahanSum::new(),
        s: 0,
        last_y: y_m,
        status: Status::Running,
        trajectory: Vec::new(),
    })
}

impl MonitorState {
    pub fn status(&self) -> Status {
        self.status
    }

    /// Steps consumed so far.
    pub fn steps(&self) -> u64 {
        self.s
    }

    /// Current detector value.
    pub fn detector_value(&self) -> f64 {
        self.cum_resid.value().abs() / self.model.sigma_hat()
    }

    pub fn trajectory(&self) -> &[TrajectoryPoint] {
        &self.trajectory
    }

    /// Consumes one observation and decides: continue, stop, or censor.
    pub fn step(&mut self, exog_next: &[f64], y_next: f64) -> Result<StepOutcome> {
        match self.status {
            Status::Running => {}
            Status::Stopped(at) => {
                return Err(Error::NotRunning(format!("already stopped at s = {at}")))
            }
            Status::Censored(at) => {
                return Err(Error::NotRunning(format!("already censored at {at}")))
            }
        }
        let row = DesignRow::new(exog_next, self.last_y);
        let eps = residual(&self.model, &row, y_next)?;
        self.cum_resid.add(eps);
        self.s += 1;

        let det = self.cum_resid.value().abs() / self.model.sigma_hat();
        let bound = boundary(self.config.m, self.s, &self.config.boundary);
        let crossed = det > bound;
        if self.config.record_trajectory {
            self.trajectory.push(TrajectoryPoint {
                s: self.s,
                detector: det,
                boundary: bound,
                crossed,
            });
        }

        if crossed {
            self.status = Status::Stopped(self.s);
            return Ok(StepOutcome::Stop(self.s));
        }
        self.last_y = y_next;
        if self.s >= self.config.horizon.limit() {
            let at = self.config.horizon.limit() + 1;
            self.status = Status::Censored(at);
            return Ok(StepOutcome::Censored(at));
        }
        Ok(StepOutcome::Continue)
    }

    /// Finishes the run, censoring at the consumed step count if the stream
    /// dried up before the horizon.
    pub fn finish(self) -> StoppingResult {
        let outcome = match self.status {
            Status::Stopped(tau) => Outcome::Stopped { tau },
            Status::Censored(at) => Outcome::Censored { at },
            Status::Running => Outcome::Censored { at: self.s },
        };
        StoppingResult {
            outcome,
            trajectory: if self.config.record_trajectory {
                Some(self.trajectory)
            } else {
                None
            },
        }
    }
}

/// Drives a monitor over a stream of `(exog, y)` observations.
pub fn run_stream<I>(
    model: Arc<FittedModel>,
    config: MonitorConfig,
    y_m: f64,
    stream: I,
) -> Result<StoppingResult>
where
    I: IntoIterator<Item = (Vec<f64>, f64)>,
{
    let mut state = init_monitor(model, config, y_m)?;
    for (exog, y) in stream {
        match state.step(&exog, y)? {
            StepOutcome::Continue => {}
            StepOutcome::Stop(_) | StepOutcome::Censored(_) => break,
        }
    }
    Ok(state.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundary::BoundaryParams;
    use crate::model::{fit_ols, TrainingSample};

    fn toy_model() -> Arc<FittedModel> {
        // intercept + lag, mild noise so sigma_hat > 0
        let y = [0.3, -0.1, 0.25, 0.4, 0.0, 0.6, -0.2, 0.1, 0.35, -0.05];
        let exog = vec![vec![]; 10];
        let sample = TrainingSample::from_series(0.0, &y, &exog).unwrap();
        Arc::new(fit_ols(&sample).unwrap())
    }

    #[test]
    fn init_starts_at_zero() {
        let model = toy_model();
        let cfg = MonitorConfig::new(
            BoundaryParams::raw(2.2365, 0.0).unwrap(),
            Horizon::Open { max_steps: 100 },
            10,
        )
        .unwrap();
        let state = init_monitor(model, cfg, -0.05).unwrap();
        assert_eq!(state.steps(), 0);
        assert_eq!(state.detector_value(), 0.0);
        assert_eq!(state.status(), Status::Running);
    }

    #[test]
    fn degenerate_variance_is_rejected() {
        // a model whose training residuals are identically zero
        let model = Arc::new(crate::model::degenerate_test_model(vec![0.0, 0.5], 10));
        let cfg = MonitorConfig::new(
            BoundaryParams::raw(1.0, 0.0).unwrap(),
            Horizon::Open { max_steps: 10 },
            10,
        )
        .unwrap();
        assert!(matches!(
            init_monitor(model, cfg, 1.0),
            Err(Error::DegenerateVariance)
        ));
    }

    #[test]
    fn two_inits_are_independent_states() {
        let model = toy_model();
        let cfg = MonitorConfig::new(
            BoundaryParams::raw(2.2365, 0.0).unwrap(),
            Horizon::Open { max_steps: 100 },
            10,
        )
        .unwrap();
        let mut a = init_monitor(model.clone(), cfg.clone(), -0.05).unwrap();
        let b = init_monitor(model, cfg, -0.05).unwrap();
        a.step(&[], 5.0).unwrap();
        assert_eq!(b.steps(), 0);
        assert_eq!(a.steps(), 1);
    }

    #[test]
    fn unreachable_boundary_censors_at_horizon() {
        let model = toy_model();
        let cfg = MonitorConfig::new(
            BoundaryParams::raw(1e9, 0.25).unwrap(),
            Horizon::Open { max_steps: 50 },
            10,
        )
        .unwrap();
        let stream = (0..200).map(|t| (vec![], (t as f64 * 0.37).sin()));
        let res = run_stream(model, cfg, -0.05, stream).unwrap();
        assert_eq!(res.outcome, Outcome::Censored { at: 51 });
    }

    #[test]
    fn immediate_crossing_stops_at_one() {
        let model = toy_model();
        let sigma = model.sigma_hat();
        let cfg = MonitorConfig::new(
            BoundaryParams::raw(1.0, 0.0).unwrap(),
            Horizon::Open { max_steps: 50 },
            10,
        )
        .unwrap();
        // choose y so the first residual alone exceeds boundary(10, 1) * sigma
        let bound = crate::boundary::boundary_raw(10, 1, &BoundaryParams::raw(1.0, 0.0).unwrap());
        let y_big = bound * sigma * 100.0;
        let mut state = init_monitor(model, cfg, -0.05).unwrap();
        match state.step(&[], y_big).unwrap() {
            StepOutcome::Stop(1) => {}
            other => panic!("expected Stop(1), got {other:?}"),
        }
        assert!(matches!(state.status(), Status::Stopped(1)));
        assert!(state.step(&[], 0.0).is_err());
    }

    #[test]
    fn closed_end_censors_with_n_plus_one() {
        let model = toy_model();
        let cfg = MonitorConfig::new(
            BoundaryParams::raw(1e9, 0.0).unwrap(),
            Horizon::Closed { n: 7 },
            10,
        )
        .unwrap();
        let stream = (0..100).map(|t| (vec![], (t as f64 * 0.21).cos() * 0.1));
        let res = run_stream(model, cfg, -0.05, stream).unwrap();
        assert_eq!(res.outcome, Outcome::Censored { at: 8 });
    }

    #[test]
    fn empty_stream_censors_at_zero() {
        let model = toy_model();
        let cfg = MonitorConfig::new(
            BoundaryParams::raw(2.0, 0.0).unwrap(),
            Horizon::Open { max_steps: 50 },
            10,
        )
        .unwrap();
        let res = run_stream(model, cfg, -0.05, Vec::new()).unwrap();
        assert_eq!(res.outcome, Outcome::Censored { at: 0 });
    }

    #[test]
    fn lag_chain_uses_observed_responses() {
        // Hand-built 3-step scenario: the row at step s must carry the
        // observed y from step s-1, not a model prediction.
        let model = toy_model();
        let beta = model.beta().to_vec();
        let cfg = MonitorConfig::new(
            BoundaryParams::raw(1e9, 0.0).unwrap(),
            Horizon::Open { max_steps: 10 },
            10,
        )
        .unwrap();
        let ys = [2.0, -3.0, 4.0];
        let mut state = init_monitor(model, cfg, -0.05).unwrap();
        let mut lag = -0.05;
        let mut expect_sum = 0.0;
        for &y in &ys {
            state.step(&[], y).unwrap();
            expect_sum += y - (beta[0] + beta[1] * lag);
            lag = y; // observed, not fitted
        }
        let sigma = state.model.sigma_hat();
        assert!((state.detector_value() - expect_sum.abs() / sigma).abs() < 1e-12);
    }

    #[test]
    fn trajectory_is_recorded_when_requested() {
        let model = toy_model();
        let cfg = MonitorConfig::new(
            BoundaryParams::raw(1e9, 0.0).unwrap(),
            Horizon::Open { max_steps: 5 },
            10,
        )
        .unwrap()
        .with_trajectory();
        let stream = (0..5).map(|t| (vec![], t as f64 * 0.1));
        let res = run_stream(model, cfg, -0.05, stream).unwrap();
        let traj = res.trajectory.unwrap();
        assert_eq!(traj.len(), 5);
        assert_eq!(traj[0].s, 1);
        assert!(traj.iter().all(|p| !p.crossed));
    }
}

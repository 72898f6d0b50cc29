//! Design construction and training-window least squares.
//!
//! A design row is `(1, x_{t,2}, ..., x_{t,d-1}, y_{t-1})`: an intercept,
//! `d-2` exogenous regressors and the lagged response. The model is fitted
//! once by ordinary least squares on the training window; the fitted
//! coefficients are frozen and reused for every post-training residual.
//!
//! The normal equations are solved through a Cholesky factorization of the
//! Gram matrix, with an eigenvalue-based reciprocal condition estimate as
//! the singularity guard (threshold 1e-12). `d` is small, conditioning is
//! not: several of the built-in simulation designs produce nearly collinear
//! columns in short windows.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};

/// Reciprocal condition estimates below this are treated as singular.
pub const RCOND_THRESHOLD: f64 = 1e-12;

/// One design row `(1, exog..., lag)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignRow {
    vals: Vec<f64>,
}

impl DesignRow {
    /// Builds a row from the exogenous regressors and the previous response.
    pub fn new(exog: &[f64], lag: f64) -> Self {
        let mut vals = Vec::with_capacity(exog.len() + 2);
        vals.push(1.0);
        vals.extend_from_slice(exog);
        vals.push(lag);
        Self { vals }
    }

    pub fn dim(&self) -> usize {
        self.vals.len()
    }

    pub fn exog(&self) -> &[f64] {
        &self.vals[1..self.vals.len() - 1]
    }

    pub fn lag(&self) -> f64 {
        self.vals[self.vals.len() - 1]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.vals
    }

    /// Inner product with a coefficient vector of the same dimension.
    pub fn dot(&self, beta: &[f64]) -> Result<f64> {
        if beta.len() != self.vals.len() {
            return Err(Error::Dimension(format!(
                "row has dimension {}, coefficient vector has {}",
                self.vals.len(),
                beta.len()
            )));
        }
        Ok(dot(&self.vals, beta))
    }
}

/// Plain left-to-right inner product. The monitoring loop and the batch
/// experiment kernel both use this exact evaluation order.
#[inline]
pub fn dot(xs: &[f64], ys: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        acc += x * y;
    }
    acc
}

/// The training window: `M` design rows with their responses.
///
/// Rows must chain: row `t`'s lag equals response `t-1`.
#[derive(Debug, Clone)]
pub struct TrainingSample {
    rows: Vec<DesignRow>,
    responses: Vec<f64>,
}

impl TrainingSample {
    pub fn new(rows: Vec<DesignRow>, responses: Vec<f64>) -> Result<Self> {
        if rows.len() != responses.len() {
            return Err(Error::Dimension(format!(
                "{} design rows but {} responses",
                rows.len(),
                responses.len()
            )));
        }
        if rows.is_empty() {
            return Err(Error::Dimension("empty training sample".into()));
        }
        let d = rows[0].dim();
        if rows.iter().any(|r| r.dim() != d) {
            return Err(Error::Dimension("rows have mixed dimensions".into()));
        }
        for t in 1..rows.len() {
            if rows[t].lag() != responses[t - 1] {
                return Err(Error::Dimension(format!(
                    "row {} has lag {} but the previous response is {}",
                    t + 1,
                    rows[t].lag(),
                    responses[t - 1]
                )));
            }
        }
        Ok(Self { rows, responses })
    }

    /// Builds the training sample from a response series and exogenous rows,
    /// with the pre-window response `y0` supplying the first lag.
    pub fn from_series(y0: f64, y: &[f64], exog: &[Vec<f64>]) -> Result<Self> {
        if y.len() != exog.len() {
            return Err(Error::Dimension(format!(
                "response series has length {}, exogenous series {}",
                y.len(),
                exog.len()
            )));
        }
        let mut rows = Vec::with_capacity(y.len());
        let mut lag = y0;
        for t in 0..y.len() {
            rows.push(DesignRow::new(&exog[t], lag));
            lag = y[t];
        }
        Self::new(rows, y.to_vec())
    }

    pub fn m(&self) -> usize {
        self.rows.len()
    }

    pub fn dim(&self) -> usize {
        self.rows[0].dim()
    }

    pub fn rows(&self) -> &[DesignRow] {
        &self.rows
    }

    pub fn responses(&self) -> &[f64] {
        &self.responses
    }
}

/// Pairs each time index `t >= start_index` with the row
/// `(1, exog_t, y_{t-1})` and the response `y_t`.
///
/// Indices are 1-based; `start_index >= 2` so the lag exists inside the
/// series. The first emitted row consumes one observation for its lag, so
/// the output has `len - start_index + 1` entries (empty when the series is
/// shorter than `start_index`). Use [`TrainingSample::from_series`] to
/// supply the lag for `t = 1` explicitly instead.
pub fn build_design(
    y: &[f64],
    exog: &[Vec<f64>],
    start_index: usize,
) -> Result<Vec<(DesignRow, f64)>> {
    if y.len() != exog.len() {
        return Err(Error::Dimension(format!(
            "response series has length {}, exogenous series {}",
            y.len(),
            exog.len()
        )));
    }
    if start_index < 2 {
        return Err(Error::Parameter(
            "start_index must be >= 2 so the lagged response exists".into(),
        ));
    }
    let mut out = Vec::new();
    for t in start_index..=y.len() {
        out.push((DesignRow::new(&exog[t - 1], y[t - 2]), y[t - 1]));
    }
    Ok(out)
}

/// Output of the training-window fit.
#[derive(Debug, Clone)]
pub struct FittedModel {
    beta_hat: Vec<f64>,
    sigma_hat_sq: f64,
    gram: Vec<f64>, // row-major d*d, X'X / M
    residuals: Vec<f64>,
    d: usize,
    m: usize,
}

impl FittedModel {
    pub fn beta(&self) -> &[f64] {
        &self.beta_hat
    }

    /// Residual variance estimate, sum of squared training residuals over `M - d`.
    pub fn sigma_hat_sq(&self) -> f64 {
        self.sigma_hat_sq
    }

    pub fn sigma_hat(&self) -> f64 {
        self.sigma_hat_sq.sqrt()
    }

    /// Entry `(i, j)` of the scaled Gram matrix `X'X / M`.
    pub fn gram(&self, i: usize, j: usize) -> f64 {
        self.gram[i * self.d + j]
    }

    pub fn residuals(&self) -> &[f64] {
        &self.residuals
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn m(&self) -> usize {
        self.m
    }
}

/// Fits ordinary least squares on the training sample.
///
/// Requires `M > d` (the variance divisor is `M - d`) and a numerically
/// invertible Gram matrix.
pub fn fit_ols(sample: &TrainingSample) -> Result<FittedModel> {
    let m = sample.m();
    let d = sample.dim();
    if m <= d {
        return Err(Error::Parameter(format!(
            "training window of size {m} must exceed the model dimension {d}"
        )));
    }

    let x = DMatrix::from_fn(m, d, |i, j| sample.rows[i].as_slice()[j]);
    let y = DVector::from_column_slice(&sample.responses);
    let xtx = x.transpose() * &x;
    let xty = x.transpose() * y;

    // Condition estimate on the scaled Gram matrix (symmetric PSD).
    let gram_scaled = &xtx / (m as f64);
    let eig = gram_scaled.clone().symmetric_eigen();
    let mut lambda_max = f64::MIN;
    let mut lambda_min = f64::MAX;
    let mut min_idx = 0;
    for (i, &ev) in eig.eigenvalues.iter().enumerate() {
        if ev > lambda_max {
            lambda_max = ev;
        }
        if ev < lambda_min {
            lambda_min = ev;
            min_idx = i;
        }
    }
    let rcond = if lambda_max > 0.0 {
        (lambda_min.max(0.0)) / lambda_max
    } else {
        0.0
    };
    if rcond < RCOND_THRESHOLD {
        // The eigenvector of the smallest eigenvalue names the collinear columns.
        let v = eig.eigenvectors.column(min_idx);
        let vmax = v.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
        let cols: Vec<String> = v
            .iter()
            .enumerate()
            .filter(|(_, &c)| c.abs() >= 0.5 * vmax)
            .map(|(i, _)| format!("{i}"))
            .collect();
        return Err(Error::SingularDesign(format!(
            "reciprocal condition estimate {rcond:.3e} below {RCOND_THRESHOLD:.0e}; \
             near-collinear columns: [{}]",
            cols.join(", ")
        )));
    }

    let chol = xtx.cholesky().ok_or_else(|| {
        Error::SingularDesign("Gram matrix is not positive definite".into())
    })?;
    let beta = chol.solve(&xty);
    let beta_hat: Vec<f64> = beta.iter().copied().collect();

    let mut residuals = Vec::with_capacity(m);
    let mut ssr = 0.0;
    for t in 0..m {
        let e = sample.responses[t] - dot(sample.rows[t].as_slice(), &beta_hat);
        ssr += e * e;
        residuals.push(e);
    }
    let sigma_hat_sq = ssr / ((m - d) as f64);

    let mut gram = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            gram[i * d + j] = gram_scaled[(i, j)];
        }
    }

    Ok(FittedModel {
        beta_hat,
        sigma_hat_sq,
        gram,
        residuals,
        d,
        m,
    })
}

#[cfg(test)]
pub(crate) fn degenerate_test_model(beta: Vec<f64>, m: usize) -> FittedModel {
    let d = beta.len();
    FittedModel {
        beta_hat: beta,
        sigma_hat_sq: 0.0,
        gram: vec![0.0; d * d],
        residuals: vec![0.0; m],
        d,
        m,
    }
}

/// Residual of one observation under the (frozen) training-window fit.
pub fn residual(model: &FittedModel, row: &DesignRow, y: f64) -> Result<f64> {
    if row.dim() != model.d {
        return Err(Error::Dimension(format!(
            "row has dimension {}, model has {}",
            row.dim(),
            model.d
        )));
    }
    Ok(y - dot(row.as_slice(), &model.beta_hat))
}

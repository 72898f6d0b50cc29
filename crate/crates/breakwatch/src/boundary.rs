//! Boundary functions and the residual-CUSUM detector.
//!
//! The detector at step `s` is `|sum of the last s post-training residuals| /
//! sigma_hat`. It is compared against the curved boundary
//!
//! ```text
//! g(M, s)    = c * sqrt(M) * (1 + s/M) * (s / (M + s))^gamma
//! g_hat(M,s) = c * (1 + (1 + gamma) * sigma_hat / sqrt(M)) * sqrt(M)
//!                * (1 + s/M) * (s / (M + s))^gamma
//! ```
//!
//! where `c = c(gamma, alpha)` comes from the `critical` module and
//! `gamma in [0, 1/2)` tunes how much weight early observations get. The
//! corrected form `g_hat` inflates the constant by a finite-sample factor
//! that vanishes as `M` grows; it is the default in simulations and data
//! runs because the raw boundary over-rejects in short training windows.
//!
//! All quantities are evaluated in double precision with `s` and `M` kept
//! as integers until the final conversion.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Parameters of the crossing test: critical constant, curvature, and the
/// optional finite-sample correction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryParams {
    c: f64,
    gamma: f64,
    corrected: bool,
    sigma_hat: f64,
}

impl BoundaryParams {
    /// Raw boundary `g`.
    pub fn raw(c: f64, gamma: f64) -> Result<Self> {
        Self::validate(c, gamma, 0.0)?;
        Ok(Self {
            c,
            gamma,
            corrected: false,
            sigma_hat: 0.0,
        })
    }

    /// Corrected boundary `g_hat`; `sigma_hat` is the training-window
    /// residual standard deviation.
    pub fn corrected(c: f64, gamma: f64, sigma_hat: f64) -> Result<Self> {
        Self::validate(c, gamma, sigma_hat)?;
        Ok(Self {
            c,
            gamma,
            corrected: true,
            sigma_hat,
        })
    }

    fn validate(c: f64, gamma: f64, sigma_hat: f64) -> Result<()> {
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::Parameter(format!("c must be positive, got {c}")));
        }
        if !(0.0..0.5).contains(&gamma) {
            return Err(Error::Parameter(format!(
                "gamma must lie in [0, 0.5), got {gamma}"
            )));
        }
        if !(sigma_hat >= 0.0) || !sigma_hat.is_finite() {
            return Err(Error::Parameter(format!(
                "sigma_hat must be a finite non-negative value, got {sigma_hat}"
            )));
        }
        Ok(())
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn is_corrected(&self) -> bool {
        self.corrected
    }

    pub fn sigma_hat(&self) -> f64 {
        self.sigma_hat
    }
}

/// Raw boundary `c * sqrt(M) * (1 + s/M) * (s/(M+s))^gamma`.
pub fn boundary_raw(m: u64, s: u64, params: &BoundaryParams) -> f64 {
    debug_assert!(m >= 1 && s >= 1);
    let mf = m as f64;
    let sf = s as f64;
    params.c * mf.sqrt() * (1.0 + sf / mf) * (sf / (mf + sf)).powf(params.gamma)
}

/// Corrected boundary: the raw boundary times `1 + (1 + gamma) * sigma_hat / sqrt(M)`.
pub fn boundary_corrected(m: u64, s: u64, params: &BoundaryParams) -> f64 {
    let correction = 1.0 + (1.0 + params.gamma) * params.sigma_hat / (m as f64).sqrt();
    correction * boundary_raw(m, s, params)
}

/// Evaluates whichever boundary the parameters select.
pub fn boundary(m: u64, s: u64, params: &BoundaryParams) -> f64 {
    if params.corrected {
        boundary_corrected(m, s, params)
    } else {
        boundary_raw(m, s, params)
    }
}

/// Detector value `|running residual sum| / sigma_hat`.
pub fn detector(cum_resid_sum: f64, sigma_hat: f64) -> Result<f64> {
    if sigma_hat == 0.0 {
        return Err(Error::DegenerateVariance);
    }
    if !(sigma_hat > 0.0) {
        return Err(Error::Parameter(format!(
            "sigma_hat must be positive, got {sigma_hat}"
        )));
    }
    Ok(cum_resid_sum.abs() / sigma_hat)
}

/// Compensated (Neumaier) running sum. Open-ended monitoring can add tens
/// of millions of residuals; plain accumulation drifts.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
        // Overflowed (explosive) series would otherwise poison the
        // compensation with inf - inf = NaN.
        if !self.sum.is_finite() {
            self.comp = 0.0;
        }
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn raw_boundary_hand_values() {
        let p = BoundaryParams::raw(1.0, 0.0).unwrap();
        assert_relative_eq!(boundary_raw(100, 100, &p), 20.0, max_relative = 1e-12);

        let p = BoundaryParams::raw(2.3860, 0.25).unwrap();
        let expect = 2.3860 * 10.0 * 2.0 * 0.5f64.powf(0.25);
        assert_relative_eq!(boundary_raw(100, 100, &p), expect, max_relative = 1e-12);
        assert_relative_eq!(boundary_raw(100, 100, &p), 40.128, max_relative = 1e-4);
    }

    #[test]
    fn raw_boundary_small_s_large_m() {
        let p = BoundaryParams::raw(1.0, 0.45).unwrap();
        let m = 1_000_000u64;
        let v = boundary_raw(m, 1, &p);
        let expect = (m as f64).sqrt() * (1.0 + 1.0 / m as f64) * (1.0 / (m as f64 + 1.0)).powf(0.45);
        assert_relative_eq!(v, expect, max_relative = 1e-12);
        // the early-s factor crushes the boundary well below sqrt(M)
        assert!(v < (m as f64).sqrt() * 0.01);
    }

    #[test]
    fn invalid_gamma_rejected() {
        assert!(BoundaryParams::raw(1.0, 0.5).is_err());
        assert!(BoundaryParams::raw(1.0, -0.01).is_err());
        assert!(BoundaryParams::raw(0.0, 0.1).is_err());
    }

    #[test]
    fn corrected_equals_raw_when_sigma_zero() {
        let p = BoundaryParams::corrected(1.7, 0.3, 0.0).unwrap();
        for &(m, s) in &[(50u64, 1u64), (100, 100), (300, 2999)] {
            assert_eq!(boundary_corrected(m, s, &p), boundary_raw(m, s, &p));
        }
    }

    #[test]
    fn corrected_hand_value() {
        let p = BoundaryParams::corrected(1.0, 0.0, 1.0).unwrap();
        assert_relative_eq!(boundary_corrected(100, 100, &p), 22.0, max_relative = 1e-12);
    }

    #[test]
    fn correction_factor_vanishes_for_large_m() {
        let p = BoundaryParams::corrected(1.0, 0.25, 1.0).unwrap();
        let m = 100_000_000u64;
        let ratio = boundary_corrected(m, 5, &p) / boundary_raw(m, 5, &p);
        assert!((ratio - 1.0).abs() < 1e-3);
    }

    #[test]
    fn detector_values_and_errors() {
        assert_eq!(detector(0.0, 2.0).unwrap(), 0.0);
        assert_eq!(detector(5.0, 2.0).unwrap(), 2.5);
        assert_eq!(detector(-5.0, 2.0).unwrap(), detector(5.0, 2.0).unwrap());
        assert!(matches!(
            detector(1.0, 0.0),
            Err(crate::error::Error::DegenerateVariance)
        ));
    }

    #[test]
    fn kahan_sum_tracks_many_small_terms() {
        let mut k = KahanSum::new();
        let n = 10_000_000usize;
        for _ in 0..n {
            k.add(0.1);
        }
        assert_relative_eq!(k.value(), n as f64 * 0.1, max_relative = 1e-14);
    }

    #[test]
    fn kahan_sum_survives_overflow() {
        let mut k = KahanSum::new();
        k.add(f64::MAX);
        k.add(f64::MAX);
        assert!(k.value().is_infinite());
    }

    proptest! {
        #[test]
        fn boundary_is_strictly_increasing_in_s(
            c in 0.5f64..4.0,
            gamma in 0.0f64..0.499,
            m in 20u64..500,
            s in 1u64..5000,
        ) {
            let p = BoundaryParams::raw(c, gamma).unwrap();
            prop_assert!(boundary_raw(m, s + 1, &p) > boundary_raw(m, s, &p));
        }

        #[test]
        fn boundary_is_self_normalizing(
            c in 0.5f64..4.0,
            gamma in 0.0f64..0.499,
            m in 20u64..300,
            s in 1u64..3000,
            k in 2u64..6,
        ) {
            let p = BoundaryParams::raw(c, gamma).unwrap();
            let lhs = boundary_raw(m, s, &p) / (m as f64).sqrt();
            let rhs = boundary_raw(k * m, k * s, &p) / ((k * m) as f64).sqrt();
            prop_assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(1.0));
        }
    }
}

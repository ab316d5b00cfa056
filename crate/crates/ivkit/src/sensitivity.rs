//! Sensitivity analysis for an instrument with a bounded direct effect.
//!
//! If the instrument enters the outcome equation with coefficient `δσ` and
//! `|δ| ≤ Δ`, the AR statistic at the true `β` follows a noncentral F with
//! noncentrality at most `Δ² Z*ᵀZ*`. Using that worst-case law as the null
//! gives tests and intervals that stay valid over the whole range of `δ`.

use serde::Serialize;

use crate::dataset::{IVData, ProjectedData};
use crate::dist::{ncf_quantile, ncf_sf, NoncentralFParams};
use crate::error::{IvError, Result};
use crate::linalg::{correlation, LeastSquares};
use crate::weakiv::{ar_region, ar_statistic, TestMethod, TestResult};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SensitivitySpec {
    pub delta_lo: f64,
    pub delta_hi: f64,
    pub alpha: f64,
}

impl SensitivitySpec {
    pub fn new(delta_lo: f64, delta_hi: f64, alpha: f64) -> Result<Self> {
        if !(delta_lo.is_finite() && delta_hi.is_finite()) || delta_lo > delta_hi {
            return Err(IvError::Config(format!(
                "delta range must be finite with lo <= hi, got ({delta_lo}, {delta_hi})"
            )));
        }
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(IvError::Config(format!("alpha must lie in (0, 1), got {alpha}")));
        }
        Ok(Self { delta_lo, delta_hi, alpha })
    }

    /// Symmetric range `(-Δ, Δ)`.
    pub fn symmetric(delta_max: f64, alpha: f64) -> Result<Self> {
        Self::new(-delta_max.abs(), delta_max.abs(), alpha)
    }

    /// `Δ = max(|δ_lo|, |δ_hi|)`.
    pub fn delta_max(&self) -> f64 {
        self.delta_lo.abs().max(self.delta_hi.abs())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SensitivityResult {
    #[serde(flatten)]
    pub test: TestResult,
    pub spec: SensitivitySpec,
    pub ncp: f64,
    pub critical_value: f64,
}

/// Worst-case AR test of `β = β₀` and the `1 - α` sensitivity interval.
pub fn sens_interval(data: &ProjectedData, beta0: f64, spec: &SensitivitySpec) -> Result<SensitivityResult> {
    if data.l() != 1 {
        return Err(IvError::Unsupported(format!(
            "sensitivity analysis supports a single instrument, got {}",
            data.l()
        )));
    }
    let df2 = data.n() - data.p() - 1;
    let delta = spec.delta_max();
    let ncp = delta * delta * data.cross().zz[(0, 0)];
    let params = NoncentralFParams::new(1.0, df2 as f64, ncp)?;
    let critical_value = ncf_quantile(1.0 - spec.alpha, &params)?;
    let statistic = ar_statistic(data, beta0);
    let p_value = ncf_sf(statistic, &params)?;
    Ok(SensitivityResult {
        test: TestResult {
            method: TestMethod::Sensitivity,
            beta0,
            statistic,
            p_value,
            alpha: spec.alpha,
            confidence_set: ar_region(data, critical_value, 1, df2),
            df: Some((1, df2)),
        },
        spec: *spec,
        ncp,
        critical_value,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct DeltaCalibration {
    pub covariate: String,
    /// `|corr(X_j, Z)|`.
    pub abs_corr_with_instrument: f64,
    /// Coefficient of `X_j` in the OLS regression of `Y` on `[1 : D : X]`.
    pub outcome_coef: f64,
    /// Residual standard error of that regression.
    pub sigma: f64,
    /// `|corr| · |coef| / σ`.
    pub delta: f64,
}

/// Heuristic scale for `δ`: how large it would be for a hidden confounder
/// that behaves like each observed covariate.
///
/// Uses the first instrument.
pub fn calibrate_delta(data: &IVData) -> Result<Vec<DeltaCalibration>> {
    let n = data.n();
    let px = data.covariates().ncols();
    if px == 0 {
        return Err(IvError::Config("delta calibration needs at least one covariate".into()));
    }
    let exog = data.exogenous_matrix();
    let mut w = nalgebra::DMatrix::zeros(n, exog.ncols() + 1);
    w.columns_mut(0, exog.ncols()).copy_from(&exog);
    w.set_column(exog.ncols(), data.exposure());
    let ls = LeastSquares::new(&w)?;
    let coef = ls.coefficients(data.outcome());
    let resid = ls.residuals(data.outcome());
    let sigma = (resid.norm_squared() / (n - w.ncols()) as f64).sqrt();
    let offset = usize::from(data.intercept());
    let z = data.instruments().column(0);
    Ok((0..px)
        .map(|j| {
            let xj = data.covariates().column(j);
            let r = correlation(xj.as_slice(), z.as_slice()).abs();
            let b = coef[offset + j];
            DeltaCalibration {
                covariate: data.names().covariates[j].clone(),
                abs_corr_with_instrument: r,
                outcome_coef: b,
                sigma,
                delta: r * b.abs() / sigma,
            }
        })
        .collect())
}

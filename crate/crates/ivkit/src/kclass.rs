//! k-class estimation: OLS (`k = 0`), TSLS (`k = 1`), LIML and Fuller.
//!
//! Every estimator in the family is a ratio of two scalars built from the
//! cached cross-products of [`ProjectedData`]:
//!
//! ```text
//! β̂_k = [(1-k) D*ᵀD* + k D*ᵀP D*]⁻¹ [(1-k) D*ᵀY* + k D*ᵀP Y*]
//! ```

use serde::Serialize;

use crate::dataset::ProjectedData;
use crate::dist::{f_sf, normal_quantile, t_quantile, t_two_sided_p};
use crate::error::{IvError, Result};
use crate::linalg::correlation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorModel {
    Homoskedastic,
    /// White's heteroskedasticity-consistent sandwich (HC0).
    Hc,
    /// Cluster-robust sandwich with a `C / (C - 1)` small-sample factor.
    Cluster,
}

/// Reference distribution for Wald intervals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WaldReference {
    #[default]
    StudentT,
    Normal,
}

#[derive(Debug, Clone, Serialize)]
pub struct KClassFit {
    pub k: f64,
    pub beta_hat: f64,
    /// Coefficients of `[intercept : X]` from regressing `Y - D β̂` on them.
    pub kappa_hat: Vec<f64>,
    pub sigma_hat_sq: f64,
    pub variance: f64,
    pub error_model: ErrorModel,
    /// Degrees of freedom `n - L - p` of the t reference.
    pub df_t: usize,
}

impl KClassFit {
    pub fn std_error(&self) -> f64 {
        self.variance.sqrt()
    }

    pub fn t_stat(&self) -> f64 {
        self.beta_hat / self.std_error()
    }

    /// Two-sided p-value for `β = beta0`.
    pub fn p_value_at(&self, beta0: f64) -> f64 {
        let t = (self.beta_hat - beta0) / self.std_error();
        t_two_sided_p(t, self.df_t as f64).expect("df_t >= 1")
    }

    pub fn p_value(&self) -> f64 {
        self.p_value_at(0.0)
    }

    /// `β̂ ± q · SE` with `q` the `1 - α/2` quantile of the chosen reference.
    pub fn wald_ci(&self, alpha: f64, reference: WaldReference) -> Result<(f64, f64)> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(IvError::Config(format!("alpha must lie in (0, 1), got {alpha}")));
        }
        let q = match reference {
            WaldReference::StudentT => t_quantile(1.0 - alpha / 2.0, self.df_t as f64)?,
            WaldReference::Normal => normal_quantile(1.0 - alpha / 2.0)?,
        };
        let half = q * self.std_error();
        Ok((self.beta_hat - half, self.beta_hat + half))
    }
}

/// The denominator and numerator of `β̂_k`.
fn kclass_ratio(data: &ProjectedData, k: f64) -> (f64, f64) {
    let c = data.cross();
    let den = (1.0 - k) * c.dd + k * c.dpd;
    let num = (1.0 - k) * c.dy + k * c.dpy;
    (den, num)
}

/// Fits the k-class estimator for a given `k`.
///
/// Robust error models are only defined for `k = 1`.
pub fn fit_k(data: &ProjectedData, k: f64, error_model: ErrorModel) -> Result<KClassFit> {
    if !(k >= 0.0 && k.is_finite()) {
        return Err(IvError::Domain(format!("k must be finite and nonnegative, got {k}")));
    }
    let (den, num) = kclass_ratio(data, k);
    if !(den > 0.0) {
        return Err(IvError::Degenerate(format!(
            "k-class denominator is {den:.6e} at k = {k}; k lies beyond the LIML root"
        )));
    }
    let beta_hat = num / den;
    let resid = data.structural_residuals(beta_hat);
    let n = data.n();
    let sigma_hat_sq = resid.norm_squared() / (n - data.p() - 1) as f64;
    if !(sigma_hat_sq > 0.0) {
        return Err(IvError::Degenerate("structural residuals are identically zero".into()));
    }
    let offset = data.raw_outcome() - data.raw_exposure() * beta_hat;
    let kappa_hat = data.exogenous_coefficients(&offset).iter().copied().collect();
    let mut fit = KClassFit {
        k,
        beta_hat,
        kappa_hat,
        sigma_hat_sq,
        variance: sigma_hat_sq / den,
        error_model: ErrorModel::Homoskedastic,
        df_t: data.df_resid(),
    };
    if error_model != ErrorModel::Homoskedastic {
        let ids = data.clusters().map(|c| c.ids());
        fit.variance = robust_variance(data, &fit, error_model, ids)?;
        fit.error_model = error_model;
    }
    Ok(fit)
}

/// Smallest root `k` of `det(MᵀM - k MᵀR M) = 0` with `M = [Y* : D*]`.
///
/// Writing `k = 1 + μ`, the equation becomes `det(MᵀP M - μ MᵀR M) = 0`,
/// a quadratic in `μ` whose smaller root is taken in a cancellation-free form.
pub fn liml_k(data: &ProjectedData) -> Result<f64> {
    let c = data.cross();
    let (p, r) = (c.m_projected(), c.m_residual());
    let a = r.determinant();
    if !(a > 0.0) || r[(0, 0)] <= 0.0 {
        return Err(IvError::Degenerate(
            "residual cross-product of [Y*, D*] is singular; LIML is undefined".into(),
        ));
    }
    let b = -(p[(0, 0)] * r[(1, 1)] + p[(1, 1)] * r[(0, 0)] - 2.0 * p[(0, 1)] * r[(0, 1)]);
    let c0 = p.determinant().max(0.0);
    let disc = (b * b - 4.0 * a * c0).max(0.0);
    let denom = -b + disc.sqrt();
    let mu = if denom > 0.0 { 2.0 * c0 / denom } else { 0.0 };
    Ok(1.0 + mu.max(0.0))
}

/// Fuller's modification `k_LIML - b / (n - L - p)`.
pub fn fuller_k(data: &ProjectedData, b: f64) -> Result<f64> {
    if !(b > 0.0 && b.is_finite()) {
        return Err(IvError::Domain(format!("Fuller constant must be positive, got {b}")));
    }
    Ok(liml_k(data)? - b / data.df_resid() as f64)
}

/// Sandwich variance of the TSLS estimate.
///
/// The bread is `(D̂ᵀD̂)⁻¹` with `D̂ = P D*`; the meat sums `D̂ᵢ² ε̂ᵢ²` (HC0)
/// or the squared within-cluster sums of `D̂ᵢ ε̂ᵢ` scaled by `C / (C - 1)`.
pub fn robust_variance(
    data: &ProjectedData,
    fit: &KClassFit,
    model: ErrorModel,
    cluster_ids: Option<&[usize]>,
) -> Result<f64> {
    if (fit.k - 1.0).abs() > 1e-12 {
        return Err(IvError::Unsupported(format!(
            "robust standard errors are only available for k = 1 (got k = {})",
            fit.k
        )));
    }
    let d_hat = data.d_fitted();
    let resid = data.structural_residuals(fit.beta_hat);
    let bread = 1.0 / d_hat.norm_squared();
    let meat = match model {
        ErrorModel::Homoskedastic => return Ok(fit.sigma_hat_sq * bread),
        ErrorModel::Hc => d_hat.iter().zip(resid.iter()).map(|(d, e)| (d * e).powi(2)).sum::<f64>(),
        ErrorModel::Cluster => {
            let ids = cluster_ids.ok_or_else(|| {
                IvError::Config("cluster-robust errors need a cluster column".into())
            })?;
            if ids.len() != d_hat.len() {
                return Err(IvError::Config("cluster ids do not match the sample size".into()));
            }
            let n_clusters = ids.iter().max().map_or(0, |m| m + 1);
            let mut sums = vec![0.0; n_clusters];
            let mut seen = vec![false; n_clusters];
            for ((&g, d), e) in ids.iter().zip(d_hat.iter()).zip(resid.iter()) {
                sums[g] += d * e;
                seen[g] = true;
            }
            let used = seen.iter().filter(|&&s| s).count();
            if used < 2 {
                return Err(IvError::Degenerate("cluster-robust errors need at least two clusters".into()));
            }
            let c = used as f64;
            c / (c - 1.0) * sums.iter().map(|s| s * s).sum::<f64>()
        }
    };
    Ok(bread * meat * bread)
}

#[derive(Debug, Clone, Serialize)]
pub struct FirstStageFit {
    pub gamma_hat: Vec<f64>,
    pub kappa_tilde_hat: Vec<f64>,
    pub f_stat: f64,
    pub df1: usize,
    pub df2: usize,
    pub p_value: f64,
    pub r_squared: f64,
    pub adj_r_squared: f64,
    pub resid_se: f64,
    pub resid_df: usize,
    pub omega_hat_sq: f64,
    /// Correlation between first-stage and structural residuals.
    pub rho_hat: f64,
}

/// Regression of the exposure on the instruments (after partialling out
/// the covariates), with the usual F test of instrument relevance.
///
/// The residual standard error is computed on `n - L - p` degrees of
/// freedom but reported alongside `n - p`, the convention of the
/// reference output this reproduces.
pub fn first_stage(data: &ProjectedData, fit: &KClassFit) -> Result<FirstStageFit> {
    let c = data.cross();
    let (n, l, p) = (data.n(), data.l(), data.p());
    let df2 = data.df_resid();
    let gamma = data.first_stage_coef();
    let ssr = c.drd.max(0.0);
    let omega_hat_sq = ssr / df2 as f64;
    let f_stat = if ssr > 0.0 { (c.dpd / l as f64) / omega_hat_sq } else { f64::INFINITY };
    let p_value = f_sf(f_stat, l as f64, df2 as f64)?;
    let r_squared = (c.dpd / c.dd).clamp(0.0, 1.0);
    let adj_r_squared = 1.0 - (1.0 - r_squared) * (n - p) as f64 / df2 as f64;

    let z = data.raw_instruments();
    let offset = data.raw_exposure() - z * gamma;
    let kappa_tilde_hat = data.exogenous_coefficients(&offset).iter().copied().collect();

    let eta = data.d_star() - data.d_fitted();
    let eps = data.structural_residuals(fit.beta_hat);
    let rho = correlation(eta.as_slice(), eps.as_slice());
    Ok(FirstStageFit {
        gamma_hat: gamma.iter().copied().collect(),
        kappa_tilde_hat,
        f_stat,
        df1: l,
        df2,
        p_value,
        r_squared,
        adj_r_squared,
        resid_se: omega_hat_sq.sqrt(),
        resid_df: n - p,
        omega_hat_sq,
        rho_hat: if rho.is_nan() { 0.0 } else { rho },
    })
}

/// One row of the standard estimator table.
#[derive(Debug, Clone, Serialize)]
pub struct NamedFit {
    pub name: String,
    pub fit: KClassFit,
}

/// Which `k` to fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KChoice {
    Ols,
    Tsls,
    Liml,
    Fuller(f64),
    Value(f64),
}

impl KChoice {
    pub fn label(&self) -> String {
        match self {
            KChoice::Ols => "OLS".into(),
            KChoice::Tsls => "TSLS".into(),
            KChoice::Liml => "LIML".into(),
            KChoice::Fuller(_) => "Fuller".into(),
            KChoice::Value(k) => format!("k={k}"),
        }
    }

    pub fn resolve(&self, data: &ProjectedData) -> Result<f64> {
        match *self {
            KChoice::Ols => Ok(0.0),
            KChoice::Tsls => Ok(1.0),
            KChoice::Liml => liml_k(data),
            KChoice::Fuller(b) => fuller_k(data, b),
            KChoice::Value(k) => Ok(k),
        }
    }
}

/// OLS, Fuller (`b = 1`), TSLS and LIML, in that order.
pub const DEFAULT_CHOICES: [KChoice; 4] = [KChoice::Ols, KChoice::Fuller(1.0), KChoice::Tsls, KChoice::Liml];

/// Fits each choice, applying `error_model` to the TSLS row only and
/// homoskedastic errors elsewhere.
pub fn fit_table(data: &ProjectedData, choices: &[KChoice], error_model: ErrorModel) -> Result<Vec<NamedFit>> {
    choices
        .iter()
        .map(|choice| {
            let k = choice.resolve(data)?;
            let model = if *choice == KChoice::Tsls { error_model } else { ErrorModel::Homoskedastic };
            Ok(NamedFit { name: choice.label(), fit: fit_k(data, k, model)? })
        })
        .collect()
}

//! Analytic power and minimum sample size for the TSLS Wald test, the AR
//! test and the AR sensitivity test of `β = β₀` against `β = β₀ + λ`.
//!
//! A [`PowerDesign`] holds per-observation moments of the design, so that
//! quantities such as the concentration parameter grow linearly with `n`.

use serde::Serialize;

use crate::dataset::ProjectedData;
use crate::dist::{f_quantile, ncf_quantile, ncf_sf, normal_cdf, normal_quantile, normal_sf, NoncentralFParams};
use crate::error::{IvError, Result};
use crate::kclass::{fit_k, ErrorModel};
use crate::linalg::correlation;

/// Largest sample size the search will consider.
pub const MAX_SAMPLE_SIZE: u64 = 1_000_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PowerMethod {
    Tsls,
    Ar,
    ArSens,
}

/// Population quantities that drive power.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerDesign {
    /// Structural error standard deviation.
    pub sigma: f64,
    /// First-stage error standard deviation.
    pub omega: f64,
    /// Correlation of structural and first-stage errors.
    pub rho: f64,
    /// `γᵀZ*ᵀZ*γ / n`.
    pub concentration_per_obs: f64,
    /// Variance of the (residualized) exposure.
    pub var_d: f64,
    /// Correlation between instrument and exposure.
    pub rho_zd: f64,
    /// First-stage coefficient; only meaningful with one instrument.
    pub gamma: f64,
    /// `Z*ᵀZ* / n`; only meaningful with one instrument.
    pub zz_per_obs: f64,
    /// Number of exogenous regressors, intercept included.
    pub p: usize,
    /// Number of instruments.
    pub l: usize,
}

impl PowerDesign {
    /// Plug-in estimates from a fitted design.
    ///
    /// `σ` comes from the TSLS residuals and `ω` from the first-stage
    /// residuals, both on `n - p` degrees of freedom; `ρ` is their sample
    /// correlation. Per-observation second moments of `Z*` and `D*` use
    /// `n - 1`.
    pub fn from_data(data: &ProjectedData) -> Result<Self> {
        let n = data.n();
        let c = data.cross();
        let tsls = fit_k(data, 1.0, ErrorModel::Homoskedastic)?;
        let eps = data.structural_residuals(tsls.beta_hat);
        let eta = data.d_star() - data.d_fitted();
        let dof = (n - data.p()) as f64;
        let per_obs = (n - 1) as f64;
        let rho = correlation(eps.as_slice(), eta.as_slice());
        let design = Self {
            sigma: (eps.norm_squared() / dof).sqrt(),
            omega: (eta.norm_squared() / dof).sqrt(),
            rho: if rho.is_nan() { 0.0 } else { rho },
            concentration_per_obs: c.dpd / per_obs,
            var_d: c.dd / per_obs,
            rho_zd: (c.dpd / c.dd).sqrt(),
            gamma: data.first_stage_coef()[0],
            zz_per_obs: c.zz[(0, 0)] / per_obs,
            p: data.p(),
            l: data.l(),
        };
        design.validate()?;
        Ok(design)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str, v: f64| Err(IvError::Domain(format!("invalid power design: {what} = {v}")));
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return bad("sigma", self.sigma);
        }
        if !(self.omega > 0.0 && self.omega.is_finite()) {
            return bad("omega", self.omega);
        }
        if !(self.rho.abs() < 1.0) {
            return bad("rho", self.rho);
        }
        if !(self.rho_zd.abs() < 1.0) {
            return bad("rho_zd", self.rho_zd);
        }
        if !(self.concentration_per_obs >= 0.0 && self.concentration_per_obs.is_finite()) {
            return bad("concentration_per_obs", self.concentration_per_obs);
        }
        if !(self.var_d > 0.0 && self.var_d.is_finite()) {
            return bad("var_d", self.var_d);
        }
        if self.l == 0 {
            return Err(IvError::Domain("invalid power design: no instruments".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerSpec {
    /// Effect size under the alternative, `β - β₀`.
    pub lambda: f64,
    pub alpha: f64,
    pub n: u64,
    pub method: PowerMethod,
    pub design: PowerDesign,
    /// Sensitivity bound `Δ`; used by [`PowerMethod::ArSens`] only.
    pub delta_max: f64,
}

impl PowerSpec {
    pub fn new(design: PowerDesign, method: PowerMethod, lambda: f64, alpha: f64, n: u64) -> Self {
        Self { lambda, alpha, n, method, design, delta_max: 0.0 }
    }

    pub fn with_delta(mut self, delta_max: f64) -> Self {
        self.delta_max = delta_max;
        self
    }

    pub fn with_n(mut self, n: u64) -> Self {
        self.n = n;
        self
    }

    fn check(&self) -> Result<()> {
        self.design.validate()?;
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(IvError::Domain(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if !self.lambda.is_finite() {
            return Err(IvError::Domain(format!("effect size must be finite, got {}", self.lambda)));
        }
        if !(self.delta_max >= 0.0 && self.delta_max.is_finite()) {
            return Err(IvError::Domain(format!("delta must be finite and >= 0, got {}", self.delta_max)));
        }
        Ok(())
    }

    /// Smallest `n` for which every degrees-of-freedom count is positive.
    fn min_n(&self) -> u64 {
        (self.design.p + self.design.l + 1) as u64
    }

    fn n_checked(&self) -> Result<f64> {
        if self.n < self.min_n() {
            return Err(IvError::Domain(format!(
                "sample size {} is too small for {} instrument(s) and {} exogenous column(s)",
                self.n, self.design.l, self.design.p
            )));
        }
        Ok(self.n as f64)
    }

    /// `σ² + 2ρσωλ + ω²λ²`, the variance of `Y - D(β₀)` per observation.
    fn alt_scale(&self) -> Result<f64> {
        let d = &self.design;
        let lam = self.lambda;
        let v = d.sigma * d.sigma + 2.0 * d.rho * d.sigma * d.omega * lam + d.omega * d.omega * lam * lam;
        if !(v > 0.0) {
            return Err(IvError::Domain(format!("alternative variance is not positive ({v})")));
        }
        Ok(v)
    }
}

/// Power of the two-sided TSLS Wald test under a normal reference.
pub fn power_tsls(spec: &PowerSpec) -> Result<f64> {
    spec.check()?;
    let n = spec.n_checked()?;
    let d = &spec.design;
    let z = normal_quantile(1.0 - spec.alpha / 2.0)?;
    let shift = spec.lambda * d.rho_zd * (n * d.var_d).sqrt() / d.sigma;
    Ok((normal_cdf(-z - shift) + normal_sf(z - shift)).clamp(0.0, 1.0))
}

/// Power of the AR test: `P(F_{L, n-p-L}(ncp) > F_{L, n-p-L; 1-α})` with
/// `ncp = n · concentration · λ² / (σ² + 2ρσωλ + ω²λ²)`.
pub fn power_ar(spec: &PowerSpec) -> Result<f64> {
    spec.check()?;
    let n = spec.n_checked()?;
    let d = &spec.design;
    let (df1, df2) = (d.l as f64, spec.n as f64 - (d.p + d.l) as f64);
    let crit = f_quantile(1.0 - spec.alpha, df1, df2)?;
    let ncp = n * d.concentration_per_obs * spec.lambda * spec.lambda / spec.alt_scale()?;
    ncf_sf(crit, &NoncentralFParams::new(df1, df2, ncp)?)
}

/// Power of the AR sensitivity test with bound `Δ`.
///
/// The critical value is the `1 - α` quantile of the worst-case null law,
/// a noncentral F with noncentrality `Δ² Z*ᵀZ*`. Under the alternative the
/// noncentrality is `(γλ + δσ)² Z*ᵀZ* / (σ² + 2ρσωλ + ω²λ²)`, evaluated at
/// the least favourable `|δ| ≤ Δ`.
pub fn power_ar_sens(spec: &PowerSpec) -> Result<f64> {
    spec.check()?;
    let n = spec.n_checked()?;
    let d = &spec.design;
    if d.l != 1 {
        return Err(IvError::Unsupported("sensitivity power needs a single instrument".into()));
    }
    let df2 = n - (d.p + 1) as f64;
    let zz = d.zz_per_obs * n;
    let null = NoncentralFParams::new(1.0, df2, spec.delta_max * spec.delta_max * zz)?;
    let crit = ncf_quantile(1.0 - spec.alpha, &null)?;
    let signal = ((d.gamma * spec.lambda).abs() - spec.delta_max * d.sigma).max(0.0);
    let ncp = signal * signal * zz / spec.alt_scale()?;
    ncf_sf(crit, &NoncentralFParams::new(1.0, df2, ncp)?)
}

pub fn power(spec: &PowerSpec) -> Result<f64> {
    match spec.method {
        PowerMethod::Tsls => power_tsls(spec),
        PowerMethod::Ar => power_ar(spec),
        PowerMethod::ArSens => power_ar_sens(spec),
    }
}

/// Power at each sample size in `ns`.
pub fn power_curve(spec: &PowerSpec, ns: &[u64]) -> Result<Vec<f64>> {
    ns.iter().map(|&n| power(&spec.with_n(n))).collect()
}

/// Smallest `n` with `power(n) >= target_power`.
///
/// Doubles `n` until the target is met, then bisects on the integers.
/// `spec.n` is ignored.
pub fn min_sample_size(spec: &PowerSpec, target_power: f64) -> Result<u64> {
    spec.check()?;
    if !(target_power > 0.0 && target_power < 1.0) {
        return Err(IvError::Domain(format!("target power must lie in (0, 1), got {target_power}")));
    }
    if target_power <= spec.alpha {
        return Err(IvError::Domain(format!(
            "target power {target_power} does not exceed the size {}",
            spec.alpha
        )));
    }
    let at = |n: u64| power(&spec.with_n(n));
    let start = spec.min_n();
    if at(start)? >= target_power {
        return Ok(start);
    }
    let (mut lo, mut hi) = (start, start.max(8));
    while at(hi)? < target_power {
        lo = hi;
        hi = hi.saturating_mul(2);
        if hi > MAX_SAMPLE_SIZE {
            if at(MAX_SAMPLE_SIZE)? >= target_power {
                hi = MAX_SAMPLE_SIZE;
                break;
            }
            return Err(IvError::SearchLimit(format!(
                "power {target_power} is not reached below n = {MAX_SAMPLE_SIZE}"
            )));
        }
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if at(mid)? >= target_power {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    // Guard against small non-monotone wiggles near the boundary.
    while hi > start && at(hi - 1)? >= target_power {
        hi -= 1;
    }
    Ok(hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn design() -> PowerDesign {
        PowerDesign {
            sigma: 0.39,
            omega: 1.94,
            rho: -0.29,
            concentration_per_obs: 0.337 * 0.337 * 0.184,
            var_d: 3.79,
            rho_zd: 0.0744,
            gamma: 0.337,
            zz_per_obs: 0.184,
            p: 6,
            l: 1,
        }
    }

    #[test]
    fn zero_effect_gives_size() {
        for method in [PowerMethod::Tsls, PowerMethod::Ar] {
            let spec = PowerSpec::new(design(), method, 0.0, 0.05, 3010);
            assert!((power(&spec).unwrap() - 0.05).abs() < 1e-12, "{method:?}");
        }
        let spec = PowerSpec::new(design(), PowerMethod::ArSens, 0.0, 0.05, 3010).with_delta(0.1);
        assert!(power(&spec).unwrap() <= 0.05);
    }

    #[test]
    fn tsls_limits() {
        let mut d = design();
        d.rho_zd = 0.999;
        d.var_d = 1e6;
        let spec = PowerSpec::new(d, PowerMethod::Tsls, 0.5, 0.05, 100_000);
        assert!(power_tsls(&spec).unwrap() > 1.0 - 1e-12);
        let back = PowerSpec::new(design(), PowerMethod::Tsls, -0.1, 0.05, 3010);
        let fwd = PowerSpec::new(design(), PowerMethod::Tsls, 0.1, 0.05, 3010);
        assert!((power_tsls(&back).unwrap() - power_tsls(&fwd).unwrap()).abs() < 1e-14);
    }

    #[test]
    fn ar_symmetric_without_error_correlation() {
        let mut d = design();
        d.rho = 0.0;
        let a = power_ar(&PowerSpec::new(d, PowerMethod::Ar, 0.2, 0.05, 500)).unwrap();
        let b = power_ar(&PowerSpec::new(d, PowerMethod::Ar, -0.2, 0.05, 500)).unwrap();
        assert!((a - b).abs() < 1e-14);
    }

    #[test]
    fn sens_with_zero_delta_is_ar() {
        let a = power_ar(&PowerSpec::new(design(), PowerMethod::Ar, 0.15, 0.05, 2000)).unwrap();
        let s = power_ar_sens(&PowerSpec::new(design(), PowerMethod::ArSens, 0.15, 0.05, 2000)).unwrap();
        assert!((a - s).abs() < 1e-10);
    }

    #[test]
    fn sens_power_decreases_in_delta() {
        let mut prev = 1.0;
        for k in 0..12 {
            let spec = PowerSpec::new(design(), PowerMethod::ArSens, 0.25, 0.05, 3010).with_delta(0.02 * k as f64);
            let p = power_ar_sens(&spec).unwrap();
            assert!(p <= prev + 1e-12);
            prev = p;
        }
    }

    #[test]
    fn power_increases_in_n() {
        for method in [PowerMethod::Tsls, PowerMethod::Ar] {
            let spec = PowerSpec::new(design(), method, 0.1, 0.05, 0);
            let ns: Vec<u64> = (1..=100).map(|i| 20 * i).collect();
            let curve = power_curve(&spec, &ns).unwrap();
            assert!(curve.windows(2).all(|w| w[1] >= w[0] - 1e-12), "{method:?}");
        }
    }

    #[test]
    fn sample_size_is_minimal() {
        for method in [PowerMethod::Tsls, PowerMethod::Ar] {
            let spec = PowerSpec::new(design(), method, 0.1, 0.05, 0);
            let n = min_sample_size(&spec, 0.8).unwrap();
            assert!(power(&spec.with_n(n)).unwrap() >= 0.8);
            assert!(power(&spec.with_n(n - 1)).unwrap() < 0.8);
        }
    }

    #[test]
    fn unreachable_target_hits_the_limit() {
        let spec = PowerSpec::new(design(), PowerMethod::ArSens, 0.01, 0.05, 0).with_delta(0.2);
        assert!(matches!(min_sample_size(&spec, 0.8), Err(IvError::SearchLimit(_))));
    }

    #[test]
    fn invalid_inputs() {
        let mut d = design();
        d.rho = 1.0;
        assert!(power(&PowerSpec::new(d, PowerMethod::Ar, 0.1, 0.05, 100)).is_err());
        let spec = PowerSpec::new(design(), PowerMethod::Ar, 0.1, 0.05, 100);
        assert!(min_sample_size(&spec, 0.04).is_err());
        assert!(power(&spec.with_n(3)).is_err());
    }
}

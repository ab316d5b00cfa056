//! Weak-instrument-robust inference: the Anderson-Rubin (AR) test and the
//! conditional likelihood ratio (CLR) test, with their inverted
//! confidence sets.

use nalgebra::{DMatrix, DVector, Matrix2, SymmetricEigen, Vector2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::Serialize;

use crate::dataset::ProjectedData;
use crate::dist::{chisq_quantile, chisq_sf, f_quantile, f_sf};
use crate::error::{IvError, Result};
use crate::kclass::liml_k;

pub const DEFAULT_CLR_DRAWS: usize = 100_000;
pub const MIN_CLR_DRAWS: usize = 1_000;
pub const DEFAULT_SEED: u64 = 42;

/// A confidence region on the real line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IntervalSet {
    Empty,
    /// `[lo, hi]`.
    Interval { lo: f64, hi: f64 },
    /// `(-∞, lo] ∪ [hi, ∞)`; `lo` and `hi` bound the excluded middle.
    TwoRays { lo: f64, hi: f64 },
    /// `(-∞, hi]`.
    RayBelow { hi: f64 },
    /// `[lo, ∞)`.
    RayAbove { lo: f64 },
    WholeLine,
}

impl IntervalSet {
    pub fn contains(&self, x: f64) -> bool {
        match *self {
            IntervalSet::Empty => false,
            IntervalSet::Interval { lo, hi } => lo <= x && x <= hi,
            IntervalSet::TwoRays { lo, hi } => x <= lo || x >= hi,
            IntervalSet::RayBelow { hi } => x <= hi,
            IntervalSet::RayAbove { lo } => x >= lo,
            IntervalSet::WholeLine => true,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            IntervalSet::Empty => "empty",
            IntervalSet::Interval { .. } => "interval",
            IntervalSet::TwoRays { .. } => "two_rays",
            IntervalSet::RayBelow { .. } => "ray_below",
            IntervalSet::RayAbove { .. } => "ray_above",
            IntervalSet::WholeLine => "whole_line",
        }
    }

    /// Lower and upper endpoint as they would be printed; infinite ends are
    /// `±∞` and an empty set gives `(NaN, NaN)`.
    pub fn bounds(&self) -> (f64, f64) {
        match *self {
            IntervalSet::Empty => (f64::NAN, f64::NAN),
            IntervalSet::Interval { lo, hi } => (lo, hi),
            IntervalSet::TwoRays { .. } | IntervalSet::WholeLine => (f64::NEG_INFINITY, f64::INFINITY),
            IntervalSet::RayBelow { hi } => (f64::NEG_INFINITY, hi),
            IntervalSet::RayAbove { lo } => (lo, f64::INFINITY),
        }
    }

    /// Human-readable form, e.g. `[0.0384, 0.2612]` or `(-Inf, -1] U [2, Inf)`.
    pub fn display_with(&self, fmt: impl Fn(f64) -> String) -> String {
        match *self {
            IntervalSet::Empty => "empty set".into(),
            IntervalSet::Interval { lo, hi } => format!("[{}, {}]", fmt(lo), fmt(hi)),
            IntervalSet::TwoRays { lo, hi } => format!("(-Inf, {}] U [{}, Inf)", fmt(lo), fmt(hi)),
            IntervalSet::RayBelow { hi } => format!("(-Inf, {}]", fmt(hi)),
            IntervalSet::RayAbove { lo } => format!("[{}, Inf)", fmt(lo)),
            IntervalSet::WholeLine => "(-Inf, Inf)".into(),
        }
    }

    /// `{β : a β² + b β + c ≤ 0}`.
    pub fn from_quadratic(a: f64, b: f64, c: f64) -> Self {
        let scale = a.abs().max(b.abs()).max(c.abs());
        if scale == 0.0 {
            return IntervalSet::WholeLine;
        }
        if a.abs() <= 1e-13 * scale {
            // Linear case.
            return if b.abs() <= 1e-13 * scale {
                if c <= 0.0 {
                    IntervalSet::WholeLine
                } else {
                    IntervalSet::Empty
                }
            } else if b > 0.0 {
                IntervalSet::RayBelow { hi: -c / b }
            } else {
                IntervalSet::RayAbove { lo: -c / b }
            };
        }
        let disc = b * b - 4.0 * a * c;
        if disc < 0.0 {
            return if a > 0.0 { IntervalSet::Empty } else { IntervalSet::WholeLine };
        }
        let q = -0.5 * (b + b.signum() * disc.sqrt());
        let (r1, r2) = if q == 0.0 { (0.0, 0.0) } else { (q / a, c / q) };
        let (lo, hi) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };
        if a > 0.0 {
            IntervalSet::Interval { lo, hi }
        } else {
            IntervalSet::TwoRays { lo, hi }
        }
    }
}

/// Null reference distribution of the AR statistic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ArReference {
    /// `F(L, n - L - p)`.
    #[default]
    F,
    /// `χ²_L / L`.
    ChiSquare,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TestMethod {
    Ar,
    Clr,
    Sensitivity,
}

#[derive(Debug, Clone, Serialize)]
pub struct TestResult {
    pub method: TestMethod,
    pub beta0: f64,
    pub statistic: f64,
    pub p_value: f64,
    pub alpha: f64,
    pub confidence_set: IntervalSet,
    /// Degrees of freedom of the F reference, when there is one.
    pub df: Option<(usize, usize)>,
}

/// Standardized statistics for testing `β = β₀`.
#[derive(Debug, Clone)]
pub struct QStats {
    pub s_hat: DVector<f64>,
    pub t_hat: DVector<f64>,
    pub q1: f64,
    pub q2: f64,
    pub q3: f64,
    /// `MᵀR M / (n - L - p)` ordered `[Y*, D*]`.
    pub sigma_hat: Matrix2<f64>,
    pub beta0: f64,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(IvError::Config(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

/// Symmetric inverse square root of a positive definite Gram matrix.
fn inv_sqrt(gram: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = SymmetricEigen::new(gram.clone());
    let top = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    if eig.eigenvalues.iter().any(|&v| !(v > top * 1e-14)) {
        return Err(IvError::Design("instrument Gram matrix is not positive definite".into()));
    }
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|v| 1.0 / v.sqrt()));
    Ok(&eig.eigenvectors * d * eig.eigenvectors.transpose())
}

pub fn q_stats(data: &ProjectedData, beta0: f64) -> Result<QStats> {
    let c = data.cross();
    let sigma_hat = c.m_residual() / data.df_resid() as f64;
    let sigma_inv = sigma_hat
        .try_inverse()
        .ok_or_else(|| IvError::Design("residual covariance of [Y*, D*] is singular".into()))?;
    let a0 = Vector2::new(beta0, 1.0);
    let b0 = Vector2::new(1.0, -beta0);
    let b_quad = (b0.transpose() * sigma_hat * b0)[0];
    let a_quad = (a0.transpose() * sigma_inv * a0)[0];
    if !(b_quad > 0.0 && a_quad > 0.0) {
        return Err(IvError::Design("residual covariance of [Y*, D*] is not positive definite".into()));
    }
    let root = inv_sqrt(&c.zz)?;
    let l = data.l();
    let mut ztm = DMatrix::zeros(l, 2);
    ztm.set_column(0, &c.zy);
    ztm.set_column(1, &c.zd);
    let base = root * ztm;
    let s_hat = &base * DVector::from_column_slice(b0.as_slice()) / b_quad.sqrt();
    let ta = sigma_inv * a0;
    let t_hat = &base * DVector::from_column_slice(ta.as_slice()) / a_quad.sqrt();
    Ok(QStats {
        q1: s_hat.norm_squared(),
        q2: s_hat.dot(&t_hat),
        q3: t_hat.norm_squared(),
        s_hat,
        t_hat,
        sigma_hat,
        beta0,
    })
}

/// AR statistic `Q̂₁ / L` at `β₀`, from the cached cross-products.
pub fn ar_statistic(data: &ProjectedData, beta0: f64) -> f64 {
    let c = data.cross();
    let ppart = c.ypy - 2.0 * beta0 * c.dpy + beta0 * beta0 * c.dpd;
    let rpart = c.yry - 2.0 * beta0 * c.dry + beta0 * beta0 * c.drd;
    (ppart / data.l() as f64) / (rpart / data.df_resid() as f64)
}

/// `{β : AR(β) ≤ crit}` in closed form.
///
/// `crit` is on the scale of the AR statistic and `df2` is the
/// denominator degrees of freedom used to form it.
pub fn ar_region(data: &ProjectedData, crit: f64, df1: usize, df2: usize) -> IntervalSet {
    let c = data.cross();
    let q = crit * df1 as f64 / df2 as f64;
    IntervalSet::from_quadratic(
        c.dpd - q * c.drd,
        -2.0 * (c.dpy - q * c.dry),
        c.ypy - q * c.yry,
    )
}

/// Anderson-Rubin test of `β = β₀` and its inverted `1 - α` confidence set.
pub fn ar_test(data: &ProjectedData, beta0: f64, alpha: f64, reference: ArReference) -> Result<TestResult> {
    check_alpha(alpha)?;
    let (l, df2) = (data.l(), data.df_resid());
    let stat = ar_statistic(data, beta0);
    let (p_value, crit, df) = match reference {
        ArReference::F => (
            f_sf(stat, l as f64, df2 as f64)?,
            f_quantile(1.0 - alpha, l as f64, df2 as f64)?,
            Some((l, df2)),
        ),
        ArReference::ChiSquare => (
            chisq_sf(stat * l as f64, l as f64)?,
            chisq_quantile(1.0 - alpha, l as f64)? / l as f64,
            None,
        ),
    };
    Ok(TestResult {
        method: TestMethod::Ar,
        beta0,
        statistic: stat,
        p_value,
        alpha,
        confidence_set: ar_region(data, crit, l, df2),
        df,
    })
}

/// `½ (Q₁ - Q₃ + √((Q₁ + Q₃)² - 4 (Q₁Q₃ - Q₂²)))`.
pub fn clr_statistic(q1: f64, q2: f64, q3: f64) -> f64 {
    let inner = ((q1 + q3).powi(2) - 4.0 * (q1 * q3 - q2 * q2)).max(0.0);
    (0.5 * (q1 - q3 + inner.sqrt())).max(0.0)
}

/// Draws behind the conditional null of the CLR statistic: the first
/// coordinate of a standard normal `L`-vector and the squared norm of the rest.
struct ClrNull {
    draws: Vec<(f64, f64)>,
}

impl ClrNull {
    fn new(l: usize, n_draws: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rest = (l > 1).then(|| ChiSquared::new((l - 1) as f64).expect("positive df"));
        let draws = (0..n_draws)
            .map(|_| {
                let s1: f64 = StandardNormal.sample(&mut rng);
                let tail = rest.as_ref().map_or(0.0, |d| d.sample(&mut rng));
                (s1, tail)
            })
            .collect();
        Self { draws }
    }

    /// `P(CLR ≥ m | Q₃ = q3)`.
    fn p_value(&self, m: f64, q3: f64) -> f64 {
        let sq = q3.sqrt();
        let hits = self
            .draws
            .iter()
            .filter(|&&(s1, tail)| {
                let q1 = s1 * s1 + tail;
                clr_statistic(q1, sq * s1, q3) >= m
            })
            .count();
        hits as f64 / self.draws.len() as f64
    }
}

struct ClrEvaluator<'a> {
    data: &'a ProjectedData,
    null: Option<ClrNull>,
}

impl ClrEvaluator<'_> {
    /// `(statistic, p-value)` at `β₀`.
    fn eval(&self, beta0: f64) -> Result<(f64, f64)> {
        let qs = q_stats(self.data, beta0)?;
        let stat = clr_statistic(qs.q1, qs.q2, qs.q3);
        let p = match &self.null {
            // With one instrument CLR equals Q̂₁, so its law is the AR law.
            None => f_sf(qs.q1, 1.0, self.data.df_resid() as f64)?,
            Some(null) => null.p_value(stat, qs.q3),
        };
        Ok((stat, p))
    }

    fn accepts(&self, beta: f64, alpha: f64) -> Result<bool> {
        Ok(self.eval(beta)?.1 >= alpha)
    }
}

/// Conditional likelihood ratio test of `β = β₀`.
///
/// With one instrument the p-value is exact. With several it is a Monte
/// Carlo estimate from `mc_draws` draws generated from `seed`; the same
/// draws are reused across `β` so the confidence-set search sees a
/// deterministic function.
pub fn clr_test(data: &ProjectedData, beta0: f64, alpha: f64, mc_draws: usize, seed: u64) -> Result<TestResult> {
    check_alpha(alpha)?;
    if mc_draws < MIN_CLR_DRAWS {
        return Err(IvError::Config(format!(
            "CLR needs at least {MIN_CLR_DRAWS} Monte Carlo draws, got {mc_draws}"
        )));
    }
    let null = (data.l() > 1).then(|| ClrNull::new(data.l(), mc_draws, seed));
    let ev = ClrEvaluator { data, null };
    let (statistic, p_value) = ev.eval(beta0)?;
    let confidence_set = if data.l() == 1 {
        // Same acceptance region as AR, available in closed form.
        let df2 = data.df_resid();
        ar_region(data, f_quantile(1.0 - alpha, 1.0, df2 as f64)?, 1, df2)
    } else {
        scan_region(|b| ev.accepts(b, alpha), liml_estimate(data)?)?
    };
    Ok(TestResult {
        method: TestMethod::Clr,
        beta0,
        statistic,
        p_value,
        alpha,
        confidence_set,
        df: None,
    })
}

fn liml_estimate(data: &ProjectedData) -> Result<f64> {
    let k = liml_k(data)?;
    let c = data.cross();
    let den = (1.0 - k) * c.dd + k * c.dpd;
    Ok(((1.0 - k) * c.dy + k * c.dpy) / den)
}

/// Point on the accepting side of the acceptance boundary between
/// `inside` (accepted) and `outside` (rejected).
fn bisect_boundary(accepts: &impl Fn(f64) -> Result<bool>, mut inside: f64, mut outside: f64) -> Result<f64> {
    while (inside - outside).abs() > 1e-10 * (1.0 + inside.abs()) {
        let mid = 0.5 * (inside + outside);
        if accepts(mid)? {
            inside = mid;
        } else {
            outside = mid;
        }
    }
    Ok(inside)
}

/// Walks outward from `centre` on each side until the test rejects and
/// bisects the boundary. If the far end of a side is accepted again, the
/// walk continues to locate where acceptance resumes.
///
/// Shapes that [`IntervalSet`] cannot hold (an interval plus one or two
/// rays) are widened to the smallest representable superset.
fn scan_region(accepts: impl Fn(f64) -> Result<bool>, centre: f64) -> Result<IntervalSet> {
    if !accepts(centre)? {
        return Ok(IntervalSet::Empty);
    }
    let limit = 1e6 * (1.0 + centre.abs());
    let first_step = 1e-3 * (1.0 + centre.abs());
    let mut edge = [None, None];
    let mut reentry = [None, None];
    for (side, dir) in [(0usize, -1.0), (1, 1.0)] {
        let mut inside = centre;
        let mut step = first_step;
        while step <= limit {
            let probe = centre + dir * step;
            if !accepts(probe)? {
                edge[side] = Some(bisect_boundary(&accepts, inside, probe)?);
                let far = centre + dir * limit;
                if accepts(far)? {
                    let mut rejected = probe;
                    let mut s = step * 2.0;
                    loop {
                        let p = if s >= limit { far } else { centre + dir * s };
                        if accepts(p)? {
                            reentry[side] = Some(bisect_boundary(&accepts, p, rejected)?);
                            break;
                        }
                        rejected = p;
                        s *= 2.0;
                    }
                }
                break;
            }
            inside = probe;
            step *= 2.0;
        }
    }
    Ok(match (edge, reentry) {
        ([None, None], _) => IntervalSet::WholeLine,
        ([Some(lo), None], [Some(r), _]) => IntervalSet::TwoRays { lo: r, hi: lo },
        ([Some(lo), None], _) => IntervalSet::RayAbove { lo },
        ([None, Some(hi)], [_, Some(r)]) => IntervalSet::TwoRays { lo: hi, hi: r },
        ([None, Some(hi)], _) => IntervalSet::RayBelow { hi },
        ([Some(lo), Some(hi)], [None, None]) => IntervalSet::Interval { lo, hi },
        ([Some(_), Some(hi)], [Some(_), None]) => IntervalSet::RayBelow { hi },
        ([Some(lo), Some(_)], [None, Some(_)]) => IntervalSet::RayAbove { lo },
        ([Some(_), Some(_)], [Some(_), Some(_)]) => IntervalSet::WholeLine,
    })
}

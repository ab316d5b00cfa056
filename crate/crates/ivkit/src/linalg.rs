//! Small dense helpers shared by the estimators.

use nalgebra::{DMatrix, DVector};

use crate::error::{IvError, Result};

/// Numerical rank with the usual `max_dim · eps · σ_max` cutoff.
pub(crate) fn rank(m: &DMatrix<f64>) -> usize {
    if m.ncols() == 0 {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    let tol = m.nrows().max(m.ncols()) as f64 * f64::EPSILON * smax;
    sv.iter().filter(|&&s| s > tol).count()
}

/// Index of the first column that is (numerically) a combination of the
/// columns before it, if any.
pub(crate) fn first_dependent_column(m: &DMatrix<f64>) -> Option<usize> {
    if rank(m) == m.ncols() {
        return None;
    }
    (1..=m.ncols()).find(|&j| rank(&m.columns(0, j).into_owned()) < j).map(|j| j - 1)
}

/// Thin QR of a full-column-rank matrix, used for least squares and
/// residualization without ever forming an `n × n` projector.
#[derive(Debug, Clone)]
pub(crate) struct LeastSquares {
    q: DMatrix<f64>,
    r: DMatrix<f64>,
}

impl LeastSquares {
    pub(crate) fn new(x: &DMatrix<f64>) -> Result<Self> {
        if x.ncols() > 0 && rank(x) < x.ncols() {
            return Err(IvError::Design("regressor matrix is rank deficient".into()));
        }
        let qr = x.clone().qr();
        Ok(Self { q: qr.q(), r: qr.r() })
    }

    pub(crate) fn ncols(&self) -> usize {
        self.r.ncols()
    }

    pub(crate) fn coefficients(&self, v: &DVector<f64>) -> DVector<f64> {
        if self.ncols() == 0 {
            return DVector::zeros(0);
        }
        let qtv = self.q.tr_mul(v);
        self.r
            .solve_upper_triangular(&qtv)
            .expect("R is nonsingular after the rank check")
    }

    pub(crate) fn residuals(&self, v: &DVector<f64>) -> DVector<f64> {
        if self.ncols() == 0 {
            return v.clone();
        }
        let qtv = self.q.tr_mul(v);
        v - &self.q * qtv
    }

    pub(crate) fn residualize(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        if self.ncols() == 0 {
            return m.clone();
        }
        let qtm = self.q.tr_mul(m);
        m - &self.q * qtm
    }
}

/// Slope of `y` on `[1 : x]`.
pub(crate) fn simple_slope(y: &[f64], x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (sxy, sxx) = x.iter().zip(y).fold((0.0, 0.0), |(sxy, sxx), (xi, yi)| {
        (sxy + (xi - mx) * (yi - my), sxx + (xi - mx) * (xi - mx))
    });
    sxy / sxx
}

/// Pearson correlation; NaN when either side has zero variance.
pub(crate) fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return f64::NAN;
    }
    (sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0)
}

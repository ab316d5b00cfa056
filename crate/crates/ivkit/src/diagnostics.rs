//! Pre-analysis diagnostics on the raw (unadjusted) variables.
//!
//! For each covariate `X_j` the table compares the bias that omitting it
//! would cause in a vanilla TSLS estimate with the bias it would cause in a
//! vanilla OLS estimate:
//!
//! ```text
//! bias_tsls = κ_j · slope(X_j ~ Z) / slope(D ~ Z)
//! bias_ols  = κ_j · slope(X_j ~ D)
//! ```
//!
//! where `κ_j` is the effect of `X_j` on the outcome. A ratio well above one
//! means the instrument is more imbalanced on `X_j` than the exposure is.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::dataset::IVData;
use crate::error::{IvError, Result};
use crate::linalg::{correlation, simple_slope, LeastSquares};

/// How `κ_j` is estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum KappaMode {
    /// Coefficient of `X_j` in the regression of `Y` on `[1 : D : X]`.
    #[default]
    Joint,
    /// Coefficient of `X_j` in the regression of `Y` on `[1 : D : X_j]`.
    Marginal,
}

#[derive(Debug, Clone, Serialize)]
pub struct DiagnosticsRow {
    pub covariate_name: String,
    pub kappa_hat_j: f64,
    /// Slope of `X_j` on the instrument.
    pub iv_imbalance: f64,
    /// Slope of `X_j` on the exposure.
    pub ols_imbalance: f64,
    pub d_on_z_slope: f64,
    pub bias_tsls: f64,
    pub bias_ols: f64,
    /// `bias_tsls / bias_ols`; NaN or infinite when `bias_ols` is zero.
    pub bias_ratio: f64,
}

impl DiagnosticsRow {
    pub fn ratio_defined(&self) -> bool {
        self.bias_ratio.is_finite()
    }

    /// Ratio as printed next to a bar: two decimals, `0/0` when both biases
    /// vanish and `Inf`/`-Inf` when only the OLS bias does.
    pub fn ratio_label(&self) -> String {
        if self.bias_ratio.is_finite() {
            format!("{:.2}", self.bias_ratio)
        } else if self.bias_tsls == 0.0 {
            "0/0".into()
        } else if self.bias_tsls > 0.0 {
            "Inf".into()
        } else {
            "-Inf".into()
        }
    }
}

/// Bias table, sorted by `|bias_tsls|` (largest first). Uses the first
/// instrument when there are several.
pub fn iv_diagnosis(data: &IVData, mode: KappaMode) -> Result<Vec<DiagnosticsRow>> {
    let px = data.covariates().ncols();
    if px == 0 {
        return Err(IvError::Config("diagnostics need at least one covariate".into()));
    }
    let n = data.n();
    let y = data.outcome();
    let d = data.exposure().as_slice();
    let z = data.instruments().column(0).into_owned();
    let z = z.as_slice();

    let d_on_z = simple_slope(d, z);
    let sd = |v: &[f64]| {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64).sqrt()
    };
    if !(d_on_z.is_finite() && (d_on_z * sd(z)).abs() > 1e-12 * sd(d)) {
        return Err(IvError::WeakInstrument(
            "the exposure does not vary with the instrument; TSLS bias is undefined".into(),
        ));
    }

    let regress = |cols: &[usize]| -> Result<Vec<f64>> {
        let mut w = DMatrix::zeros(n, cols.len() + 2);
        w.set_column(0, &nalgebra::DVector::from_element(n, 1.0));
        w.set_column(1, data.exposure());
        for (k, &j) in cols.iter().enumerate() {
            w.set_column(k + 2, &data.covariates().column(j));
        }
        let coef = LeastSquares::new(&w)?.coefficients(y);
        Ok(coef.iter().skip(2).copied().collect())
    };
    let kappa: Vec<f64> = match mode {
        KappaMode::Joint => regress(&(0..px).collect::<Vec<_>>())?,
        KappaMode::Marginal => (0..px).map(|j| regress(&[j]).map(|c| c[0])).collect::<Result<_>>()?,
    };

    let mut rows: Vec<DiagnosticsRow> = (0..px)
        .map(|j| {
            let xj = data.covariates().column(j).into_owned();
            let xj = xj.as_slice();
            let iv_imbalance = simple_slope(xj, z);
            let ols_imbalance = simple_slope(xj, d);
            let bias_tsls = kappa[j] * iv_imbalance / d_on_z;
            let bias_ols = kappa[j] * ols_imbalance;
            DiagnosticsRow {
                covariate_name: data.names().covariates[j].clone(),
                kappa_hat_j: kappa[j],
                iv_imbalance,
                ols_imbalance,
                d_on_z_slope: d_on_z,
                bias_tsls,
                bias_ols,
                bias_ratio: if bias_ols == 0.0 { f64::NAN } else { bias_tsls / bias_ols },
            }
        })
        .collect();
    rows.sort_by(|a, b| b.bias_tsls.abs().total_cmp(&a.bias_tsls.abs()));
    Ok(rows)
}

#[derive(Debug, Clone, Serialize)]
pub struct CorrelationMatrix {
    pub labels: Vec<String>,
    /// Row-major values; NaN marks a column with zero variance.
    pub values: Vec<Vec<f64>>,
}

impl CorrelationMatrix {
    pub fn get(&self, row: &str, col: &str) -> Option<f64> {
        let i = self.labels.iter().position(|l| l == row)?;
        let j = self.labels.iter().position(|l| l == col)?;
        Some(self.values[i][j])
    }

    /// Labels of columns whose correlations are undefined.
    pub fn degenerate_columns(&self) -> Vec<&str> {
        self.labels
            .iter()
            .zip(&self.values)
            .enumerate()
            .filter(|(i, (_, row))| row[*i].is_nan())
            .map(|(_, (l, _))| l.as_str())
            .collect()
    }
}

/// Pearson correlations of `[Z : D : X : Y]`.
pub fn correlation_matrix(data: &IVData) -> Result<CorrelationMatrix> {
    if data.n() < 2 {
        return Err(IvError::InsufficientData("correlations need at least two rows".into()));
    }
    let names = data.names();
    let mut labels = names.instruments.clone();
    labels.push(names.exposure.clone());
    labels.extend(names.covariates.iter().cloned());
    labels.push(names.outcome.clone());
    let mut cols: Vec<Vec<f64>> = data.instruments().column_iter().map(|c| c.iter().copied().collect()).collect();
    cols.push(data.exposure().iter().copied().collect());
    cols.extend(data.covariates().column_iter().map(|c| c.iter().copied().collect()));
    cols.push(data.outcome().iter().copied().collect());
    let values = cols
        .iter()
        .map(|a| {
            cols.iter()
                .map(|b| {
                    let r = correlation(a, b);
                    if std::ptr::eq(a, b) && !r.is_nan() {
                        1.0
                    } else {
                        r
                    }
                })
                .collect()
        })
        .collect();
    Ok(CorrelationMatrix { labels, values })
}

const TSLS_COLOR: &str = "#c0392b";
const OLS_COLOR: &str = "#2e6da4";

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Renders the bias table as a horizontal bar chart.
///
/// Each covariate gets two bars, `|bias_tsls|` on top and `|bias_ols|`
/// below; negative biases are drawn with a lighter fill. The signed ratio
/// is printed at the end of the row.
pub fn bias_chart_svg(rows: &[DiagnosticsRow]) -> Result<String> {
    if rows.is_empty() {
        return Err(IvError::Config("bias chart needs at least one row".into()));
    }
    let (left, bar_area, right) = (120.0, 360.0, 80.0);
    let (top, row_h, bar_h) = (48.0, 44.0, 14.0);
    let width = left + bar_area + right;
    let height = top + row_h * rows.len() as f64 + 16.0;
    let max = rows
        .iter()
        .flat_map(|r| [r.bias_tsls.abs(), r.bias_ols.abs()])
        .filter(|v| v.is_finite())
        .fold(0.0, f64::max);
    let scale = if max > 0.0 { bar_area / max } else { 0.0 };

    let mut svg = String::new();
    let _ = writeln!(svg, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect x="0" y="0" width="{width:.0}" height="{height:.0}" fill="white"/>"#);
    let _ = writeln!(svg, r#"<rect x="{left:.0}" y="12" width="12" height="12" fill="{TSLS_COLOR}"/>"#);
    let _ = writeln!(svg, r#"<text x="{:.0}" y="22">|bias| TSLS</text>"#, left + 18.0);
    let _ = writeln!(svg, r#"<rect x="{:.0}" y="12" width="12" height="12" fill="{OLS_COLOR}"/>"#, left + 120.0);
    let _ = writeln!(svg, r#"<text x="{:.0}" y="22">|bias| OLS</text>"#, left + 138.0);
    let _ = writeln!(svg, r#"<text x="{:.0}" y="22" text-anchor="end">ratio</text>"#, width - 8.0);
    for (i, row) in rows.iter().enumerate() {
        let y0 = top + row_h * i as f64;
        let _ = writeln!(
            svg,
            r#"<text x="{:.0}" y="{:.1}" text-anchor="end">{}</text>"#,
            left - 8.0,
            y0 + bar_h + 4.0,
            xml_escape(&row.covariate_name)
        );
        for (k, (value, color)) in [(row.bias_tsls, TSLS_COLOR), (row.bias_ols, OLS_COLOR)].into_iter().enumerate() {
            let w = if value.is_finite() { value.abs() * scale } else { 0.0 };
            let opacity = if value < 0.0 { 0.45 } else { 1.0 };
            let _ = writeln!(
                svg,
                r#"<rect x="{left:.0}" y="{:.1}" width="{w:.3}" height="{bar_h:.0}" fill="{color}" fill-opacity="{opacity}"/>"#,
                y0 + k as f64 * (bar_h + 2.0)
            );
        }
        let _ = writeln!(
            svg,
            r#"<text x="{:.0}" y="{:.1}" text-anchor="end">{}</text>"#,
            width - 8.0,
            y0 + bar_h + 4.0,
            row.ratio_label()
        );
    }
    let _ = writeln!(
        svg,
        r#"<line x1="{left:.0}" y1="{:.0}" x2="{left:.0}" y2="{:.0}" stroke="black"/>"#,
        top - 6.0,
        height - 12.0
    );
    svg.push_str("</svg>\n");
    Ok(svg)
}

pub fn emit_bias_chart(rows: &[DiagnosticsRow], out_path: impl AsRef<Path>) -> Result<()> {
    let svg = bias_chart_svg(rows)?;
    std::fs::write(out_path, svg)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;

    fn row(name: &str, tsls: f64, ols: f64) -> DiagnosticsRow {
        DiagnosticsRow {
            covariate_name: name.into(),
            kappa_hat_j: 1.0,
            iv_imbalance: tsls,
            ols_imbalance: ols,
            d_on_z_slope: 1.0,
            bias_tsls: tsls,
            bias_ols: ols,
            bias_ratio: if ols == 0.0 { f64::NAN } else { tsls / ols },
        }
    }

    #[test]
    fn svg_snapshot() {
        let rows = vec![row("region", 0.07, 0.005), row("age & sex", -0.02, 0.01)];
        let got = bias_chart_svg(&rows).unwrap();
        let want = include_str!("../tests/fixtures/bias_chart_two_rows.svg");
        assert_eq!(got, want);
        assert_eq!(got, bias_chart_svg(&rows).unwrap());
    }

    #[test]
    fn degenerate_row_labels() {
        let r = row("x", 0.0, 0.0);
        assert_eq!(r.ratio_label(), "0/0");
        let svg = bias_chart_svg(&[r]).unwrap();
        assert_eq!(svg.matches(r#"width="0.000""#).count(), 2);
        assert!(svg.contains(">0/0<"));
        assert_eq!(row("x", 0.2, 0.0).ratio_label(), "Inf");
        assert!(bias_chart_svg(&[]).is_err());
    }

    #[test]
    fn binary_instrument_slope_is_mean_difference() {
        let z = [0.0, 1.0, 1.0, 0.0, 1.0, 0.0, 1.0];
        let x = [2.0, 5.0, 4.0, 1.0, 7.0, 3.0, 4.5];
        let m1 = (5.0 + 4.0 + 7.0 + 4.5) / 4.0;
        let m0 = (2.0 + 1.0 + 3.0) / 3.0;
        assert!((simple_slope(&x, &z) - (m1 - m0)).abs() < 1e-14);
    }

    #[test]
    fn balanced_covariate_has_no_tsls_bias() {
        // z and x are orthogonal after centring.
        let z = [1.0, 1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0];
        let x = [1.0, -1.0, 1.0, -1.0, 2.0, -2.0, 2.0, -2.0];
        let d: Vec<f64> = (0..8).map(|i| z[i] * 2.0 + x[i] * 0.5 + (i as f64 * 0.9).sin()).collect();
        let y: Vec<f64> = (0..8).map(|i| d[i] * 0.3 + x[i] + (i as f64 * 1.7).cos()).collect();
        let data = IVData::new(
            DVector::from_vec(y),
            DVector::from_vec(d),
            DMatrix::from_column_slice(8, 1, &z),
            DMatrix::from_column_slice(8, 1, &x),
            true,
        )
        .unwrap();
        let rows = iv_diagnosis(&data, KappaMode::Joint).unwrap();
        assert!(rows[0].bias_tsls.abs() < 1e-12);
        assert!(rows[0].bias_ols.abs() > 1e-3);
    }

    #[test]
    fn correlation_matrix_hand_values() {
        let data = IVData::new(
            DVector::from_vec(vec![1.0, 3.0, 2.0, 6.0]),
            DVector::from_vec(vec![2.0, 1.0, 4.0, 3.0]),
            DMatrix::from_column_slice(4, 1, &[1.0, 2.0, 3.0, 4.0]),
            DMatrix::zeros(4, 0),
            true,
        )
        .unwrap();
        let cm = correlation_matrix(&data).unwrap();
        assert_eq!(cm.labels, ["Z1", "D", "Y"]);
        // Z and D: centred (-1.5,-.5,.5,1.5) and (-.5,-1.5,1.5,.5) give 3/5.
        assert!((cm.get("Z1", "D").unwrap() - 0.6).abs() < 1e-15);
        // Z and Y: Y centred (-2,0,-1,3): sxy = 3 + 0 - .5 + 4.5 = 7, syy = 14.
        assert!((cm.get("Z1", "Y").unwrap() - 7.0 / (5.0f64 * 14.0).sqrt()).abs() < 1e-15);
        for i in 0..3 {
            assert_eq!(cm.values[i][i], 1.0);
        }
    }

    #[test]
    fn zero_variance_column_is_flagged() {
        let data = IVData::new(
            DVector::from_vec(vec![1.0, 3.0, 2.0, 6.0]),
            DVector::from_vec(vec![2.0, 1.0, 4.0, 3.0]),
            DMatrix::from_column_slice(4, 1, &[1.0, 2.0, 3.0, 4.0]),
            DMatrix::from_column_slice(4, 1, &[5.0, 5.0, 5.0, 5.0]),
            false,
        )
        .unwrap();
        let cm = correlation_matrix(&data).unwrap();
        assert_eq!(cm.degenerate_columns(), ["X1"]);
    }
}

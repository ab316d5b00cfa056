//! Data ingestion and covariate residualization.
//!
//! [`IVData`] holds the raw columns of an IV design. [`IVData::project`]
//! partials the exogenous covariates (and the intercept) out of the
//! outcome, exposure and instruments, leaving a [`ProjectedData`] in which
//! every later computation works with starred, covariate-free variables.

use std::collections::HashMap;
use std::fmt::Display;
use std::hash::Hash;
use std::path::Path;

use nalgebra::{DMatrix, DVector, Matrix2};
use serde::{Deserialize, Serialize};

use crate::error::{IvError, Result};
use crate::linalg::{first_dependent_column, LeastSquares};

/// Which CSV columns play which role.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub outcome: String,
    pub exposure: String,
    pub instruments: Vec<String>,
    #[serde(default)]
    pub covariates: Vec<String>,
    #[serde(default)]
    pub cluster: Option<String>,
}

impl ColumnSpec {
    pub fn new(outcome: &str, exposure: &str, instruments: &[&str], covariates: &[&str]) -> Self {
        Self {
            outcome: outcome.to_string(),
            exposure: exposure.to_string(),
            instruments: instruments.iter().map(|s| s.to_string()).collect(),
            covariates: covariates.iter().map(|s| s.to_string()).collect(),
            cluster: None,
        }
    }

    pub fn with_cluster(mut self, column: &str) -> Self {
        self.cluster = Some(column.to_string());
        self
    }
}

/// Cluster membership, with labels mapped to dense ids in order of first appearance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Clusters {
    ids: Vec<usize>,
    labels: Vec<String>,
}

impl Clusters {
    pub fn from_labels<L: Hash + Eq + Display>(labels: &[L]) -> Self {
        let mut index: HashMap<&L, usize> = HashMap::new();
        let mut names = Vec::new();
        let ids = labels
            .iter()
            .map(|l| {
                *index.entry(l).or_insert_with(|| {
                    names.push(l.to_string());
                    names.len() - 1
                })
            })
            .collect();
        Self { ids, labels: names }
    }

    pub fn ids(&self) -> &[usize] {
        &self.ids
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn count(&self) -> usize {
        self.labels.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VariableNames {
    pub outcome: String,
    pub exposure: String,
    pub instruments: Vec<String>,
    pub covariates: Vec<String>,
}

/// Raw IV design: outcome `Y`, exposure `D`, instruments `Z` (n × L) and
/// exogenous covariates `X` (n × p_x, intercept kept separately).
#[derive(Debug, Clone)]
pub struct IVData {
    outcome: DVector<f64>,
    exposure: DVector<f64>,
    instruments: DMatrix<f64>,
    covariates: DMatrix<f64>,
    intercept: bool,
    clusters: Option<Clusters>,
    names: VariableNames,
    dropped_rows: usize,
}

impl IVData {
    /// Validates lengths, finiteness, sample size and the rank of `[1 : X : Z]`.
    pub fn new(
        outcome: DVector<f64>,
        exposure: DVector<f64>,
        instruments: DMatrix<f64>,
        covariates: DMatrix<f64>,
        intercept: bool,
    ) -> Result<Self> {
        let names = VariableNames {
            outcome: "Y".into(),
            exposure: "D".into(),
            instruments: (1..=instruments.ncols()).map(|j| format!("Z{j}")).collect(),
            covariates: (1..=covariates.ncols()).map(|j| format!("X{j}")).collect(),
        };
        Self::with_names(outcome, exposure, instruments, covariates, intercept, names)
    }

    pub fn with_names(
        outcome: DVector<f64>,
        exposure: DVector<f64>,
        instruments: DMatrix<f64>,
        covariates: DMatrix<f64>,
        intercept: bool,
        names: VariableNames,
    ) -> Result<Self> {
        let n = outcome.len();
        if exposure.len() != n || instruments.nrows() != n || covariates.nrows() != n {
            return Err(IvError::Config(format!(
                "column lengths differ: outcome {n}, exposure {}, instruments {}, covariates {}",
                exposure.len(),
                instruments.nrows(),
                covariates.nrows()
            )));
        }
        if instruments.ncols() == 0 {
            return Err(IvError::Config("at least one instrument is required".into()));
        }
        if names.instruments.len() != instruments.ncols() || names.covariates.len() != covariates.ncols() {
            return Err(IvError::Config("variable names do not match the column counts".into()));
        }
        let finite = outcome.iter().chain(exposure.iter()).chain(instruments.iter()).chain(covariates.iter());
        if finite.into_iter().any(|v| !v.is_finite()) {
            return Err(IvError::Domain("non-finite value in the design".into()));
        }
        let data = Self {
            outcome,
            exposure,
            instruments,
            covariates,
            intercept,
            clusters: None,
            names,
            dropped_rows: 0,
        };
        let (l, p) = (data.n_instruments(), data.n_exogenous());
        if n <= l + p {
            return Err(IvError::InsufficientData(format!(
                "{n} complete rows but at least {} are needed for {l} instrument(s) and {p} exogenous column(s)",
                l + p + 1
            )));
        }
        data.check_rank()?;
        Ok(data)
    }

    /// Attaches cluster labels (any hashable, printable type).
    pub fn with_clusters<L: Hash + Eq + Display>(mut self, labels: &[L]) -> Result<Self> {
        if labels.len() != self.n() {
            return Err(IvError::Config(format!(
                "{} cluster labels for {} observations",
                labels.len(),
                self.n()
            )));
        }
        self.clusters = Some(Clusters::from_labels(labels));
        Ok(self)
    }

    fn check_rank(&self) -> Result<()> {
        let w = self.exogenous_matrix();
        let w = concat_columns(&w, &self.instruments);
        if let Some(j) = first_dependent_column(&w) {
            let mut labels: Vec<&str> = Vec::new();
            if self.intercept {
                labels.push("(intercept)");
            }
            labels.extend(self.names.covariates.iter().map(String::as_str));
            labels.extend(self.names.instruments.iter().map(String::as_str));
            return Err(IvError::Design(format!(
                "column '{}' is collinear with the columns before it in [intercept : covariates : instruments]",
                labels[j]
            )));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.outcome.len()
    }

    /// Number of instruments `L`.
    pub fn n_instruments(&self) -> usize {
        self.instruments.ncols()
    }

    /// Number of exogenous regressors `p`, intercept included.
    pub fn n_exogenous(&self) -> usize {
        self.covariates.ncols() + usize::from(self.intercept)
    }

    pub fn outcome(&self) -> &DVector<f64> {
        &self.outcome
    }

    pub fn exposure(&self) -> &DVector<f64> {
        &self.exposure
    }

    pub fn instruments(&self) -> &DMatrix<f64> {
        &self.instruments
    }

    pub fn covariates(&self) -> &DMatrix<f64> {
        &self.covariates
    }

    pub fn intercept(&self) -> bool {
        self.intercept
    }

    pub fn clusters(&self) -> Option<&Clusters> {
        self.clusters.as_ref()
    }

    pub fn names(&self) -> &VariableNames {
        &self.names
    }

    /// Rows removed by listwise deletion when the data came from a file.
    pub fn dropped_rows(&self) -> usize {
        self.dropped_rows
    }

    /// `[1 : X]`, or just `X` without an intercept.
    pub fn exogenous_matrix(&self) -> DMatrix<f64> {
        if self.intercept {
            concat_columns(&DMatrix::from_element(self.n(), 1, 1.0), &self.covariates)
        } else {
            self.covariates.clone()
        }
    }

    /// Same design restricted to the named covariates, in the given order.
    pub fn select_covariates(&self, keep: &[&str]) -> Result<IVData> {
        let idx = keep
            .iter()
            .map(|name| {
                self.names
                    .covariates
                    .iter()
                    .position(|c| c == name)
                    .ok_or_else(|| IvError::Config(format!("unknown covariate '{name}'")))
            })
            .collect::<Result<Vec<_>>>()?;
        let covariates = self.covariates.select_columns(&idx);
        let mut names = self.names.clone();
        names.covariates = keep.iter().map(|s| s.to_string()).collect();
        let mut out = Self::with_names(
            self.outcome.clone(),
            self.exposure.clone(),
            self.instruments.clone(),
            covariates,
            self.intercept,
            names,
        )?;
        out.clusters = self.clusters.clone();
        out.dropped_rows = self.dropped_rows;
        Ok(out)
    }

    /// Residualizes `Y`, `D` and `Z` on the exogenous block.
    pub fn project(&self) -> Result<ProjectedData> {
        ProjectedData::new(self)
    }
}

fn concat_columns(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(a.nrows(), a.ncols() + b.ncols());
    out.columns_mut(0, a.ncols()).copy_from(a);
    out.columns_mut(a.ncols(), b.ncols()).copy_from(b);
    out
}

fn is_missing(cell: &str) -> bool {
    let t = cell.trim();
    t.is_empty() || t == "NA"
}

/// Reads a headed CSV file, dropping rows with missing or non-numeric cells
/// in any of the selected columns.
pub fn load_csv(path: impl AsRef<Path>, columns: &ColumnSpec, intercept: bool) -> Result<IVData> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)
        .map_err(|e| IvError::Config(format!("cannot open data file '{}': {e}", path.display())))?;
    read_csv(file, columns, intercept)
}

/// [`load_csv`] over any reader.
pub fn read_csv<R: std::io::Read>(reader: R, columns: &ColumnSpec, intercept: bool) -> Result<IVData> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| IvError::Config(format!("column '{name}' not found in data")))
    };
    if columns.instruments.is_empty() {
        return Err(IvError::Config("at least one instrument column is required".into()));
    }
    let numeric: Vec<&str> = [columns.outcome.as_str(), columns.exposure.as_str()]
        .into_iter()
        .chain(columns.instruments.iter().map(String::as_str))
        .chain(columns.covariates.iter().map(String::as_str))
        .collect();
    let numeric_idx = numeric.iter().map(|c| find(c)).collect::<Result<Vec<_>>>()?;
    let cluster_idx = columns.cluster.as_deref().map(find).transpose()?;

    let width = numeric_idx.len();
    let mut values: Vec<f64> = Vec::new();
    let mut labels: Vec<String> = Vec::new();
    let mut dropped = 0usize;
    let mut row_buf = vec![0.0; width];
    for record in rdr.records() {
        let record = record?;
        let mut complete = true;
        for (slot, &i) in row_buf.iter_mut().zip(&numeric_idx) {
            match record.get(i).filter(|c| !is_missing(c)).and_then(|c| c.parse::<f64>().ok()) {
                Some(v) if v.is_finite() => *slot = v,
                _ => {
                    complete = false;
                    break;
                }
            }
        }
        let label = match cluster_idx {
            Some(i) => match record.get(i).filter(|c| !is_missing(c)) {
                Some(c) => Some(c.to_string()),
                None => {
                    complete = false;
                    None
                }
            },
            None => None,
        };
        if !complete {
            dropped += 1;
            continue;
        }
        values.extend_from_slice(&row_buf);
        labels.extend(label);
    }

    let n = values.len() / width;
    let l = columns.instruments.len();
    let p = columns.covariates.len() + usize::from(intercept);
    if n <= l + p {
        return Err(IvError::InsufficientData(format!(
            "{n} complete rows ({dropped} dropped) but at least {} are needed",
            l + p + 1
        )));
    }
    let table = DMatrix::from_row_slice(n, width, &values);
    let names = VariableNames {
        outcome: columns.outcome.clone(),
        exposure: columns.exposure.clone(),
        instruments: columns.instruments.clone(),
        covariates: columns.covariates.clone(),
    };
    let mut data = IVData::with_names(
        table.column(0).into_owned(),
        table.column(1).into_owned(),
        table.columns(2, l).into_owned(),
        table.columns(2 + l, columns.covariates.len()).into_owned(),
        intercept,
        names,
    )?;
    if cluster_idx.is_some() {
        data = data.with_clusters(&labels)?;
    }
    data.dropped_rows = dropped;
    Ok(data)
}

/// Cached inner products of the residualized variables.
///
/// `P` and `R` denote projection onto the span of `Z*` and its orthogonal
/// complement; `M = [Y* : D*]`.
#[derive(Debug, Clone)]
pub struct CrossProducts {
    pub zz: DMatrix<f64>,
    pub zd: DVector<f64>,
    pub zy: DVector<f64>,
    pub dd: f64,
    pub dy: f64,
    pub yy: f64,
    pub dpd: f64,
    pub dpy: f64,
    pub ypy: f64,
    pub drd: f64,
    pub dry: f64,
    pub yry: f64,
}

impl CrossProducts {
    /// `MᵀM`, ordered `[Y*, D*]`.
    pub fn m_total(&self) -> Matrix2<f64> {
        Matrix2::new(self.yy, self.dy, self.dy, self.dd)
    }

    /// `MᵀP M`, ordered `[Y*, D*]`.
    pub fn m_projected(&self) -> Matrix2<f64> {
        Matrix2::new(self.ypy, self.dpy, self.dpy, self.dpd)
    }

    /// `MᵀR M`, ordered `[Y*, D*]`.
    pub fn m_residual(&self) -> Matrix2<f64> {
        Matrix2::new(self.yry, self.dry, self.dry, self.drd)
    }
}

/// Covariate-residualized design with cached cross-products.
#[derive(Debug, Clone)]
pub struct ProjectedData {
    y_star: DVector<f64>,
    d_star: DVector<f64>,
    z_star: DMatrix<f64>,
    n: usize,
    l: usize,
    p: usize,
    cross: CrossProducts,
    first_stage_coef: DVector<f64>,
    exog: LeastSquares,
    raw_y: DVector<f64>,
    raw_d: DVector<f64>,
    raw_z: DMatrix<f64>,
    clusters: Option<Clusters>,
    names: VariableNames,
}

impl ProjectedData {
    fn new(data: &IVData) -> Result<Self> {
        let exog = LeastSquares::new(&data.exogenous_matrix())
            .map_err(|_| IvError::Design("covariate matrix is numerically rank deficient".into()))?;
        let y_star = exog.residuals(&data.outcome);
        let d_star = exog.residuals(&data.exposure);
        let z_star = exog.residualize(&data.instruments);

        let zz = z_star.tr_mul(&z_star);
        let zd = z_star.tr_mul(&d_star);
        let zy = z_star.tr_mul(&y_star);
        let chol = zz
            .clone()
            .cholesky()
            .ok_or_else(|| IvError::Design("residualized instruments are collinear".into()))?;
        let gamma = chol.solve(&zd);
        let pi_y = chol.solve(&zy);
        // Fitted and residual parts computed as vectors to avoid subtractive cancellation.
        let d_fit = &z_star * &gamma;
        let y_fit = &z_star * &pi_y;
        let d_res = &d_star - &d_fit;
        let y_res = &y_star - &y_fit;
        let cross = CrossProducts {
            dd: d_star.dot(&d_star),
            dy: d_star.dot(&y_star),
            yy: y_star.dot(&y_star),
            dpd: d_fit.dot(&d_fit),
            dpy: d_fit.dot(&y_fit),
            ypy: y_fit.dot(&y_fit),
            drd: d_res.dot(&d_res),
            dry: d_res.dot(&y_res),
            yry: y_res.dot(&y_res),
            zz,
            zd,
            zy,
        };
        Ok(Self {
            n: data.n(),
            l: data.n_instruments(),
            p: data.n_exogenous(),
            y_star,
            d_star,
            z_star,
            cross,
            first_stage_coef: gamma,
            exog,
            raw_y: data.outcome.clone(),
            raw_d: data.exposure.clone(),
            raw_z: data.instruments.clone(),
            clusters: data.clusters.clone(),
            names: data.names.clone(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of instruments `L`.
    pub fn l(&self) -> usize {
        self.l
    }

    /// Number of exogenous regressors `p`, intercept included.
    pub fn p(&self) -> usize {
        self.p
    }

    /// Residual degrees of freedom `n - L - p`.
    pub fn df_resid(&self) -> usize {
        self.n - self.l - self.p
    }

    pub fn y_star(&self) -> &DVector<f64> {
        &self.y_star
    }

    pub fn d_star(&self) -> &DVector<f64> {
        &self.d_star
    }

    pub fn z_star(&self) -> &DMatrix<f64> {
        &self.z_star
    }

    pub fn cross(&self) -> &CrossProducts {
        &self.cross
    }

    /// First-stage coefficients `(Z*ᵀZ*)⁻¹ Z*ᵀD*`.
    pub fn first_stage_coef(&self) -> &DVector<f64> {
        &self.first_stage_coef
    }

    /// `P D*`, the first-stage fitted exposure.
    pub fn d_fitted(&self) -> DVector<f64> {
        &self.z_star * &self.first_stage_coef
    }

    pub fn raw_outcome(&self) -> &DVector<f64> {
        &self.raw_y
    }

    pub fn raw_exposure(&self) -> &DVector<f64> {
        &self.raw_d
    }

    pub fn raw_instruments(&self) -> &DMatrix<f64> {
        &self.raw_z
    }

    pub fn clusters(&self) -> Option<&Clusters> {
        self.clusters.as_ref()
    }

    pub fn names(&self) -> &VariableNames {
        &self.names
    }

    /// Coefficients of `v` regressed on the exogenous block.
    pub fn exogenous_coefficients(&self, v: &DVector<f64>) -> DVector<f64> {
        self.exog.coefficients(v)
    }

    /// Structural residuals `Y* - D* β`.
    pub fn structural_residuals(&self, beta: f64) -> DVector<f64> {
        &self.y_star - &self.d_star * beta
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn col(v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_column_slice(v.len(), 1, v)
    }

    #[test]
    fn intercept_only_projection_centres() {
        let data = IVData::new(
            DVector::from_vec(vec![1.0, 2.0, 3.0]),
            DVector::from_vec(vec![0.0, 1.0, 5.0]),
            col(&[1.0, 0.0, 1.5]),
            DMatrix::zeros(3, 0),
            true,
        )
        .unwrap();
        let pd = data.project().unwrap();
        let y = pd.y_star();
        assert!((y[0] + 1.0).abs() < 1e-15 && y[1].abs() < 1e-15 && (y[2] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn orthogonal_outcome_is_untouched() {
        let x = col(&[1.0, -1.0, 1.0, -1.0]);
        let y = DVector::from_vec(vec![1.0, 1.0, -2.0, -2.0]);
        let data = IVData::new(
            y.clone(),
            DVector::from_vec(vec![0.3, 1.0, 2.0, 0.1]),
            col(&[0.0, 1.0, 1.0, 0.5]),
            x,
            false,
        )
        .unwrap();
        let pd = data.project().unwrap();
        assert!((pd.y_star() - &y).norm() <= 1e-12 * y.norm());
    }

    #[test]
    fn reads_csv_with_listwise_deletion() {
        let text = "y,d,z\n1,2,3\nNA,1,1\n2,5,1\n";
        let spec = ColumnSpec::new("y", "d", &["z"], &[]);
        let data = read_csv(text.as_bytes(), &spec, false).unwrap();
        assert_eq!(data.n(), 2);
        assert_eq!(data.dropped_rows(), 1);
        // Empty and non-numeric cells count as missing too.
        let text = "y,d,z\n1,2,3\n,1,1\n2,5,1\n3,x,2\n";
        let data = read_csv(text.as_bytes(), &spec, false).unwrap();
        assert_eq!((data.n(), data.dropped_rows()), (2, 2));
    }

    #[test]
    fn unknown_column_is_a_config_error() {
        let spec = ColumnSpec::new("y", "d", &["nope"], &[]);
        let err = read_csv("y,d,z\n1,2,3\n".as_bytes(), &spec, true).unwrap_err();
        assert!(matches!(err, IvError::Config(ref m) if m.contains("nope")));
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn too_few_rows() {
        let spec = ColumnSpec::new("y", "d", &["z"], &[]);
        let err = read_csv("y,d,z\n1,2,3\n2,NA,1\n".as_bytes(), &spec, true).unwrap_err();
        assert!(matches!(err, IvError::InsufficientData(_)));
    }

    #[test]
    fn duplicated_intercept_is_named() {
        let text = "y,d,z,one\n1,2,0,1\n2,1,1,1\n3,5,0,1\n4,4,1,1\n";
        let spec = ColumnSpec::new("y", "d", &["z"], &["one"]);
        let err = read_csv(text.as_bytes(), &spec, true).unwrap_err();
        assert!(matches!(err, IvError::Design(ref m) if m.contains("'one'")), "{err}");
    }

    #[test]
    fn cluster_labels_map_to_dense_ids() {
        let c = Clusters::from_labels(&["b", "a", "b", "c", "a"]);
        assert_eq!(c.ids(), &[0, 1, 0, 2, 1]);
        assert_eq!(c.labels(), &["b", "a", "c"]);
        let text = "y,d,z,g\n1,2,0,s1\n2,1,1,s2\n3,5,0,\n4,4,1,s1\n";
        let spec = ColumnSpec::new("y", "d", &["z"], &[]).with_cluster("g");
        let data = read_csv(text.as_bytes(), &spec, true).unwrap();
        assert_eq!(data.dropped_rows(), 1);
        assert_eq!(data.clusters().unwrap().ids(), &[0, 1, 0]);
    }

    #[test]
    fn cross_products_match_direct_recomputation() {
        let n = 40;
        let f = |i: usize, a: f64| ((i as f64 + 1.0) * a).sin();
        let data = IVData::new(
            DVector::from_fn(n, |i, _| f(i, 0.7) + 0.3 * f(i, 1.9)),
            DVector::from_fn(n, |i, _| f(i, 1.3) + 0.5 * f(i, 0.2)),
            DMatrix::from_fn(n, 2, |i, j| f(i, 2.1 + j as f64)),
            DMatrix::from_fn(n, 2, |i, j| f(i, 0.45 + 0.8 * j as f64)),
            true,
        )
        .unwrap();
        let pd = data.project().unwrap();
        let c = pd.cross();
        let z = pd.z_star();
        let proj = z * (z.tr_mul(z)).try_inverse().unwrap() * z.transpose();
        let (y, d) = (pd.y_star(), pd.d_star());
        let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1e-300);
        assert!(rel(c.dpd, (d.transpose() * &proj * d)[0]) < 1e-12);
        assert!(rel(c.dpy, (d.transpose() * &proj * y)[0]) < 1e-12);
        assert!(rel(c.ypy, (y.transpose() * &proj * y)[0]) < 1e-12);
        assert!(rel(c.drd, c.dd - c.dpd) < 1e-12);
        assert!(rel(c.yry, c.yy - c.ypy) < 1e-12);
        assert!(rel(c.dry, c.dy - c.dpy) < 1e-10);
        assert!(rel(c.dd, d.dot(d)) < 1e-14);
        // Residuals are orthogonal to every exogenous column.
        let w = data.exogenous_matrix();
        for v in [y, d] {
            let dots = w.tr_mul(v);
            assert!(dots.norm() < 1e-12 * w.norm() * v.norm());
        }
    }
}

//! Instrumental-variables analysis with a single endogenous exposure.
//!
//! The crate covers the whole workflow of a linear IV study:
//!
//! - [`dataset`]: CSV ingestion, design validation and covariate residualization
//! - [`kclass`]: OLS, TSLS, LIML and Fuller estimates with classical or robust standard errors
//! - [`weakiv`]: Anderson-Rubin and conditional likelihood ratio tests and confidence sets
//! - [`sensitivity`]: inference that stays valid when the instrument has a bounded direct effect
//! - [`power`]: analytic power and minimum sample size
//! - [`diagnostics`]: covariate-imbalance bias diagnostics and correlation tables
//! - [`dist`]: the distribution functions everything above relies on
//!
//! ```no_run
//! use ivkit::dataset::{load_csv, ColumnSpec};
//! use ivkit::kclass::{fit_k, ErrorModel};
//!
//! let columns = ColumnSpec::new("lwage", "educ", &["nearc4"], &["exper", "expersq", "black", "south", "smsa"]);
//! let data = load_csv("data/card.csv", &columns, true)?.project()?;
//! let tsls = fit_k(&data, 1.0, ErrorModel::Homoskedastic)?;
//! println!("{:.6} ({:.6})", tsls.beta_hat, tsls.std_error());
//! # Ok::<(), ivkit::IvError>(())
//! ```

pub mod cli;
pub mod dataset;
pub mod diagnostics;
pub mod dist;
pub mod error;
pub mod kclass;
pub mod power;
pub mod sensitivity;
pub mod weakiv;
mod linalg;

pub use error::{IvError, Result};

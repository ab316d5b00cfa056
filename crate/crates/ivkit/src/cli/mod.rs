//! Command-line front end.
//!
//! Every option can come from a flag, from a TOML file (`--config` or the
//! `IVKIT_CONFIG` environment variable) or from a built-in default, in that
//! order of precedence. Keys in the file use the flag names:
//!
//! ```toml
//! data = "card.csv"          # relative to the config file
//! outcome = "lwage"
//! exposure = "educ"
//! instruments = ["nearc4"]
//! covariates = ["exper", "expersq", "black", "south", "smsa"]
//! alpha = 0.05
//! delta = [-0.07, 0.07]
//! ```

mod format;
mod plot;
mod report;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use crate::dataset::ColumnSpec;
use crate::diagnostics::KappaMode;
use crate::error::{IvError, Result};
use crate::kclass::{ErrorModel, KChoice, DEFAULT_CHOICES};
use crate::power::PowerMethod;
use crate::weakiv::{DEFAULT_CLR_DRAWS, DEFAULT_SEED};

pub use format::signif;
pub use plot::power_chart_svg;
pub use report::execute;

pub const CONFIG_ENV: &str = "IVKIT_CONFIG";

#[derive(Debug, Parser)]
#[command(name = "ivkit", version, about = "Instrumental-variables analysis with one endogenous exposure", args_override_self = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub options: Options,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// First stage, k-class table, AR and CLR tests
    #[command(args_override_self = true)]
    Summary,
    /// Confidence intervals for every estimator and test
    #[command(args_override_self = true)]
    Confint,
    /// Power at the observed sample size, or over --n-grid
    #[command(args_override_self = true)]
    Power,
    /// Smallest sample size reaching --target-power
    #[command(args_override_self = true)]
    Samplesize,
    /// Worst-case AR test over a range of direct instrument effects
    #[command(args_override_self = true)]
    Sensitivity,
    /// Covariate-imbalance bias table and chart
    #[command(args_override_self = true)]
    Diagnose,
    /// Correlation matrix of instruments, exposure, covariates and outcome
    #[command(args_override_self = true)]
    Cor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeArg {
    Homo,
    Hc,
    Cluster,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodArg {
    Tsls,
    Ar,
    Arsens,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Text,
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KappaArg {
    Joint,
    Marginal,
}

#[derive(Debug, Default, clap::Args)]
pub struct Options {
    /// CSV file with a header row
    #[arg(long, global = true)]
    pub data: Option<PathBuf>,
    #[arg(long, global = true)]
    pub outcome: Option<String>,
    #[arg(long, global = true)]
    pub exposure: Option<String>,
    #[arg(long, global = true, value_delimiter = ',', action = clap::ArgAction::Set)]
    pub instruments: Option<Vec<String>>,
    #[arg(long, global = true, value_delimiter = ',', action = clap::ArgAction::Set)]
    pub covariates: Option<Vec<String>>,
    /// Fit without an intercept
    #[arg(long, global = true)]
    pub no_intercept: bool,
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    /// k values: ols, tsls, liml, fuller or a number
    #[arg(long, global = true, value_delimiter = ',', action = clap::ArgAction::Set)]
    pub k: Option<Vec<String>>,
    #[arg(long, global = true)]
    pub fuller_b: Option<f64>,
    /// Standard errors for the TSLS row
    #[arg(long, global = true, value_enum)]
    pub se: Option<SeArg>,
    #[arg(long, global = true)]
    pub cluster_col: Option<String>,
    /// Null value of the effect
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub beta0: Option<f64>,
    /// Range of the direct instrument effect, `lo,hi` or a single bound `D` for `-D,D`
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub delta: Option<String>,
    /// Effect under the alternative, for power calculations
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub beta: Option<f64>,
    #[arg(long, global = true)]
    pub target_power: Option<f64>,
    #[arg(long, global = true, value_enum)]
    pub method: Option<MethodArg>,
    /// Sample-size grid `lo:hi:step`
    #[arg(long, global = true)]
    pub n_grid: Option<String>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Write an SVG chart (power curve or bias chart)
    #[arg(long, global = true)]
    pub plot: Option<PathBuf>,
    /// Seed for Monte Carlo CLR critical values
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub clr_draws: Option<usize>,
    /// How `diagnose` estimates each covariate's outcome effect
    #[arg(long, global = true, value_enum)]
    pub kappa: Option<KappaArg>,
    /// TOML file of defaults
    #[arg(long, global = true, env = CONFIG_ENV)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
struct FileConfig {
    data: Option<PathBuf>,
    outcome: Option<String>,
    exposure: Option<String>,
    instruments: Option<Vec<String>>,
    covariates: Option<Vec<String>>,
    intercept: Option<bool>,
    alpha: Option<f64>,
    k: Option<Vec<String>>,
    fuller_b: Option<f64>,
    se: Option<SeArg>,
    cluster_col: Option<String>,
    beta0: Option<f64>,
    delta: Option<[f64; 2]>,
    beta: Option<f64>,
    target_power: Option<f64>,
    method: Option<MethodArg>,
    n_grid: Option<String>,
    format: Option<Format>,
    plot: Option<PathBuf>,
    seed: Option<u64>,
    clr_draws: Option<usize>,
    kappa: Option<KappaArg>,
}

impl FileConfig {
    fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| IvError::Config(format!("cannot read config file '{}': {e}", path.display())))?;
        let mut cfg: FileConfig = toml::from_str(&text)
            .map_err(|e| IvError::Config(format!("invalid config file '{}': {}", path.display(), e.message())))?;
        if let (Some(data), Some(dir)) = (&cfg.data, path.parent()) {
            if data.is_relative() {
                cfg.data = Some(dir.join(data));
            }
        }
        Ok(cfg)
    }
}

/// Fully resolved options for one run.
#[derive(Debug, Clone)]
pub struct AnalysisConfig {
    pub data: PathBuf,
    pub columns: ColumnSpec,
    pub intercept: bool,
    pub alpha: f64,
    pub k_choices: Vec<KChoice>,
    pub error_model: ErrorModel,
    pub beta0: f64,
    pub delta: Option<(f64, f64)>,
    pub beta: Option<f64>,
    pub target_power: f64,
    pub method: PowerMethod,
    pub n_grid: Option<Vec<u64>>,
    pub format: Format,
    pub plot: Option<PathBuf>,
    pub seed: u64,
    pub clr_draws: usize,
    pub kappa_mode: KappaMode,
}

fn parse_k(token: &str, fuller_b: f64) -> Result<KChoice> {
    match token.trim().to_ascii_lowercase().as_str() {
        "ols" => Ok(KChoice::Ols),
        "tsls" => Ok(KChoice::Tsls),
        "liml" => Ok(KChoice::Liml),
        "fuller" => Ok(KChoice::Fuller(fuller_b)),
        other => match other.parse::<f64>() {
            Ok(k) if k == 0.0 => Ok(KChoice::Ols),
            Ok(k) if k == 1.0 => Ok(KChoice::Tsls),
            Ok(k) if k.is_finite() => Ok(KChoice::Value(k)),
            _ => Err(IvError::Config(format!("invalid k value '{token}'"))),
        },
    }
}

fn parse_delta(text: &str) -> Result<(f64, f64)> {
    let bad = || IvError::Config(format!("invalid delta range '{text}', expected lo,hi"));
    let parts: Vec<f64> = text
        .split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Result<_>>()?;
    match parts[..] {
        [d] => Ok((-d.abs(), d.abs())),
        [lo, hi] => Ok((lo, hi)),
        _ => Err(bad()),
    }
}

fn parse_grid(text: &str) -> Result<Vec<u64>> {
    let bad = || IvError::Config(format!("invalid sample-size grid '{text}', expected lo:hi:step"));
    let parts: Vec<u64> = text
        .split(':')
        .map(|s| s.trim().parse::<u64>().map_err(|_| bad()))
        .collect::<Result<_>>()?;
    let [lo, hi, step] = parts[..] else { return Err(bad()) };
    if step == 0 || lo == 0 || lo > hi {
        return Err(bad());
    }
    Ok((lo..=hi).step_by(step as usize).collect())
}

impl AnalysisConfig {
    /// Merges flags over the config file over defaults and checks that the
    /// options are consistent.
    pub fn resolve(opts: &Options) -> Result<Self> {
        let file = match &opts.config {
            Some(path) => FileConfig::load(path)?,
            None => FileConfig::default(),
        };
        let required = |flag: Option<String>, key: &str| {
            flag.ok_or_else(|| IvError::Config(format!("missing required option --{key}")))
        };
        let data = opts
            .data
            .clone()
            .or(file.data)
            .ok_or_else(|| IvError::Config("missing required option --data".into()))?;
        let outcome = required(opts.outcome.clone().or(file.outcome), "outcome")?;
        let exposure = required(opts.exposure.clone().or(file.exposure), "exposure")?;
        let instruments = opts.instruments.clone().or(file.instruments).unwrap_or_default();
        if instruments.is_empty() {
            return Err(IvError::Config("missing required option --instruments".into()));
        }
        let covariates = opts.covariates.clone().or(file.covariates).unwrap_or_default();

        let alpha = opts.alpha.or(file.alpha).unwrap_or(0.05);
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(IvError::Config(format!("--alpha must lie in (0, 1), got {alpha}")));
        }
        let fuller_b = opts.fuller_b.or(file.fuller_b).unwrap_or(1.0);
        let k_choices = match opts.k.clone().or(file.k) {
            Some(tokens) => tokens.iter().map(|t| parse_k(t, fuller_b)).collect::<Result<Vec<_>>>()?,
            None => DEFAULT_CHOICES
                .iter()
                .map(|c| match c {
                    KChoice::Fuller(_) => KChoice::Fuller(fuller_b),
                    other => *other,
                })
                .collect(),
        };

        let error_model = match opts.se.or(file.se).unwrap_or(SeArg::Homo) {
            SeArg::Homo => ErrorModel::Homoskedastic,
            SeArg::Hc => ErrorModel::Hc,
            SeArg::Cluster => ErrorModel::Cluster,
        };
        let cluster_col = opts.cluster_col.clone().or(file.cluster_col);
        match (error_model, &cluster_col) {
            (ErrorModel::Cluster, None) => {
                return Err(IvError::Config("--se cluster requires --cluster-col".into()));
            }
            (ErrorModel::Homoskedastic | ErrorModel::Hc, Some(_)) => {
                return Err(IvError::Config("--cluster-col is only used with --se cluster".into()));
            }
            _ => {}
        }

        let delta = match &opts.delta {
            Some(text) => Some(parse_delta(text)?),
            None => file.delta.map(|[lo, hi]| (lo, hi)),
        };
        if let Some((lo, hi)) = delta {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(IvError::Config(format!("delta range needs finite lo <= hi, got ({lo}, {hi})")));
            }
        }
        let n_grid = match opts.n_grid.clone().or(file.n_grid) {
            Some(text) => Some(parse_grid(&text)?),
            None => None,
        };
        let method = match opts.method.or(file.method).unwrap_or(MethodArg::Tsls) {
            MethodArg::Tsls => PowerMethod::Tsls,
            MethodArg::Ar => PowerMethod::Ar,
            MethodArg::Arsens => PowerMethod::ArSens,
        };
        let kappa_mode = match opts.kappa.or(file.kappa).unwrap_or(KappaArg::Joint) {
            KappaArg::Joint => KappaMode::Joint,
            KappaArg::Marginal => KappaMode::Marginal,
        };

        let mut columns = ColumnSpec { outcome, exposure, instruments, covariates, cluster: None };
        if error_model == ErrorModel::Cluster {
            columns.cluster = cluster_col;
        }
        Ok(Self {
            data,
            columns,
            intercept: !opts.no_intercept && file.intercept.unwrap_or(true),
            alpha,
            k_choices,
            error_model,
            beta0: opts.beta0.or(file.beta0).unwrap_or(0.0),
            delta,
            beta: opts.beta.or(file.beta),
            target_power: opts.target_power.or(file.target_power).unwrap_or(0.8),
            method,
            n_grid,
            format: opts.format.or(file.format).unwrap_or_default(),
            plot: opts.plot.clone().or(file.plot),
            seed: opts.seed.or(file.seed).unwrap_or(DEFAULT_SEED),
            clr_draws: opts.clr_draws.or(file.clr_draws).unwrap_or(DEFAULT_CLR_DRAWS),
            kappa_mode,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("ivkit").chain(args.iter().copied())).unwrap()
    }

    const BASE: [&str; 8] = ["--data", "x.csv", "--outcome", "y", "--exposure", "d", "--instruments", "z1,z2"];

    #[test]
    fn defaults() {
        let cli = parse(&[&["summary"], &BASE[..]].concat());
        let cfg = AnalysisConfig::resolve(&cli.options).unwrap();
        assert_eq!(cli.command, Command::Summary);
        assert_eq!(cfg.columns.instruments, ["z1", "z2"]);
        assert_eq!(cfg.alpha, 0.05);
        assert_eq!(cfg.k_choices, DEFAULT_CHOICES);
        assert!(cfg.intercept);
        assert_eq!(cfg.seed, DEFAULT_SEED);
        assert_eq!(cfg.format, Format::Text);
    }

    #[test]
    fn flag_values() {
        let cli = parse(&[
            &["power"],
            &BASE[..],
            &["--delta", "-0.07,0.05", "--beta0", "-1", "--k", "0,0.5,liml,fuller", "--fuller-b", "4", "--n-grid", "20:100:40"],
        ]
        .concat());
        let cfg = AnalysisConfig::resolve(&cli.options).unwrap();
        assert_eq!(cfg.delta, Some((-0.07, 0.05)));
        assert_eq!(cfg.beta0, -1.0);
        assert_eq!(cfg.k_choices, [KChoice::Ols, KChoice::Value(0.5), KChoice::Liml, KChoice::Fuller(4.0)]);
        assert_eq!(cfg.n_grid, Some(vec![20, 60, 100]));
    }

    #[test]
    fn inconsistent_flags_are_config_errors() {
        for extra in [
            &["--se", "cluster"][..],
            &["--cluster-col", "g"],
            &["--alpha", "1.5"],
            &["--delta", "0.1,-0.1"],
            &["--n-grid", "10:5:1"],
            &["--k", "foo"],
        ] {
            let cli = parse(&[&["summary"], &BASE[..], extra].concat());
            let err = AnalysisConfig::resolve(&cli.options).unwrap_err();
            assert_eq!(err.exit_code(), 2, "{extra:?}: {err}");
        }
    }

    #[test]
    fn config_file_supplies_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("iv.toml");
        std::fs::write(
            &path,
            "data = \"card.csv\"\noutcome = \"y\"\nexposure = \"d\"\ninstruments = [\"z\"]\nalpha = 0.1\ndelta = [-0.07, 0.07]\n",
        )
        .unwrap();
        let cli = parse(&["summary", "--config", path.to_str().unwrap(), "--alpha", "0.2"]);
        let cfg = AnalysisConfig::resolve(&cli.options).unwrap();
        assert_eq!(cfg.data, dir.path().join("card.csv"));
        assert_eq!(cfg.alpha, 0.2);
        assert_eq!(cfg.delta, Some((-0.07, 0.07)));

        std::fs::write(&path, "colour = 1\n").unwrap();
        let cli = parse(&["summary", "--config", path.to_str().unwrap()]);
        assert_eq!(AnalysisConfig::resolve(&cli.options).unwrap_err().exit_code(), 2);
    }
}

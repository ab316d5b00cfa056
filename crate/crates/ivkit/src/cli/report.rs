use serde_json::{json, Map, Value};

use super::format::{csv, fixed, full, p_value, signif, stars, table, RULE, SIGNIF_LEGEND};
use super::plot::power_chart_svg;
use super::{AnalysisConfig, Cli, Command, Format};
use crate::dataset::{load_csv, IVData, ProjectedData};
use crate::diagnostics::{correlation_matrix, emit_bias_chart, iv_diagnosis};
use crate::error::{IvError, Result};
use crate::kclass::{first_stage, fit_k, fit_table, ErrorModel, NamedFit, WaldReference};
use crate::power::{min_sample_size, power, power_curve, PowerDesign, PowerMethod, PowerSpec};
use crate::sensitivity::{calibrate_delta, sens_interval, SensitivityResult, SensitivitySpec};
use crate::weakiv::{ar_test, clr_test, ArReference, IntervalSet};

/// Runs one subcommand and returns what it prints on standard output.
/// Charts requested with `--plot` are written as a side effect.
pub fn execute(cli: &Cli) -> Result<String> {
    let cfg = AnalysisConfig::resolve(&cli.options)?;
    let raw = load_csv(&cfg.data, &cfg.columns, cfg.intercept)?;
    match cli.command {
        Command::Summary => summary(&cfg, &raw),
        Command::Confint => confint(&cfg, &raw.project()?),
        Command::Power => power_cmd(&cfg, &raw.project()?),
        Command::Samplesize => samplesize(&cfg, &raw.project()?),
        Command::Sensitivity => sensitivity(&cfg, &raw),
        Command::Diagnose => diagnose(&cfg, &raw),
        Command::Cor => cor(&cfg, &raw),
    }
}

fn to_json(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable value");
    s.push('\n');
    s
}

fn fit_key(name: &str) -> String {
    name.to_ascii_lowercase()
}

fn interval_text(set: &IntervalSet) -> String {
    set.display_with(|x| signif(x, 15))
}

fn percent(alpha: f64) -> String {
    signif(100.0 * (1.0 - alpha), 6)
}

fn sens_spec(cfg: &AnalysisConfig) -> Result<Option<SensitivitySpec>> {
    cfg.delta.map(|(lo, hi)| SensitivitySpec::new(lo, hi, cfg.alpha)).transpose()
}

fn kclass_rows(fits: &[NamedFit], beta0: f64) -> Vec<Vec<String>> {
    fits.iter()
        .map(|nf| {
            let f = &nf.fit;
            let p = f.p_value_at(beta0);
            vec![
                nf.name.clone(),
                fixed(f.k, 6),
                fixed(f.beta_hat, 6),
                fixed(f.std_error(), 6),
                fixed((f.beta_hat - beta0) / f.std_error(), 3),
                p_value(p),
                format!("{:<3}", stars(p)),
            ]
        })
        .collect()
}

fn fit_json(nf: &NamedFit, beta0: f64) -> Value {
    let f = &nf.fit;
    json!({
        "k": f.k,
        "estimate": f.beta_hat,
        "std_error": f.std_error(),
        "t_value": (f.beta_hat - beta0) / f.std_error(),
        "p_value": f.p_value_at(beta0),
        "df": f.df_t,
        "error_model": f.error_model,
    })
}

fn sensitivity_text(res: &SensitivityResult) -> String {
    let (df1, df2) = res.test.df.unwrap_or((1, 0));
    format!(
        "Anderson-Rubin test:\nSensitivity analysis with deltarange [ {} ,  {} ]:\n\
         non-central F={}, df1={df1}, df2={df2}, ncp={}, p-value is {}\n\
         {} percent confidence interval:\n {}\n",
        signif(res.spec.delta_lo, 7),
        signif(res.spec.delta_hi, 7),
        signif(res.test.statistic, 7),
        signif(res.ncp, 6),
        signif(res.test.p_value, 5),
        percent(res.spec.alpha),
        match res.test.confidence_set {
            IntervalSet::Interval { lo, hi } => format!("[ {} , {} ]", signif(lo, 15), signif(hi, 15)),
            other => interval_text(&other),
        }
    )
}

fn summary(cfg: &AnalysisConfig, raw: &IVData) -> Result<String> {
    let data = raw.project()?;
    let fits = fit_table(&data, &cfg.k_choices, cfg.error_model)?;
    let tsls = fit_k(&data, 1.0, ErrorModel::Homoskedastic)?;
    let fs = first_stage(&data, &tsls)?;
    let ar = ar_test(&data, cfg.beta0, cfg.alpha, ArReference::F)?;
    let clr = clr_test(&data, cfg.beta0, cfg.alpha, cfg.clr_draws, cfg.seed)?;
    let sens = sens_spec(cfg)?.map(|spec| sens_interval(&data, cfg.beta0, &spec)).transpose()?;

    match cfg.format {
        Format::Json => {
            let kclass: Map<String, Value> =
                fits.iter().map(|nf| (fit_key(&nf.name), fit_json(nf, cfg.beta0))).collect();
            let mut obj = json!({
                "n": data.n(),
                "dropped_rows": raw.dropped_rows(),
                "variables": data.names(),
                "first_stage": fs,
                "kclass": kclass,
                "ar": ar,
                "clr": clr,
            });
            if let Some(s) = &sens {
                obj["sensitivity"] = serde_json::to_value(s).expect("serializable");
            }
            Ok(to_json(&obj))
        }
        Format::Csv => {
            let rows: Vec<Vec<String>> = fits
                .iter()
                .map(|nf| {
                    let f = &nf.fit;
                    vec![
                        nf.name.clone(),
                        full(f.k),
                        full(f.beta_hat),
                        full(f.std_error()),
                        full((f.beta_hat - cfg.beta0) / f.std_error()),
                        full(f.p_value_at(cfg.beta0)),
                    ]
                })
                .collect();
            Ok(csv(&["estimator", "k", "estimate", "std_error", "t_value", "p_value"], &rows))
        }
        Format::Text => {
            let names = data.names();
            let mut out = String::new();
            out.push_str(&format!("Outcome: {}, exposure: {}\n", names.outcome, names.exposure));
            out.push_str(&format!("Instruments: {}\n", names.instruments.join(", ")));
            if !names.covariates.is_empty() {
                out.push_str(&format!("Covariates: {}\n", names.covariates.join(", ")));
            }
            out.push_str(&format!("sample size: {}\n", data.n()));
            if raw.dropped_rows() > 0 {
                out.push_str(&format!("rows dropped for missing values: {}\n", raw.dropped_rows()));
            }
            out.push_str(RULE);
            out.push_str("\n\nFirst Stage Regression Result:\n\n");
            out.push_str(&format!(
                "F={}, df1={}, df2={}, p-value is {}\n",
                signif(fs.f_stat, 7),
                fs.df1,
                fs.df2,
                signif(fs.p_value, 5)
            ));
            out.push_str(&format!(
                "R-squared={},   Adjusted R-squared={}\n",
                signif(fs.r_squared, 7),
                signif(fs.adj_r_squared, 7)
            ));
            out.push_str(&format!(
                "Residual standard error: {} on {} degrees of freedom\n",
                signif(fs.resid_se, 7),
                fs.resid_df
            ));
            out.push_str(RULE);
            out.push_str("\n\nCoefficients of k-Class Estimators:\n\n");
            let header: Vec<String> =
                ["", "k", "Estimate", "Std. Error", "t value", "Pr(>|t|)", ""].iter().map(|s| s.to_string()).collect();
            out.push_str(&table(&header, &kclass_rows(&fits, cfg.beta0)));
            out.push_str("---\n");
            out.push_str(SIGNIF_LEGEND);
            out.push('\n');
            if cfg.error_model != ErrorModel::Homoskedastic {
                let label = if cfg.error_model == ErrorModel::Hc { "heteroskedasticity-robust" } else { "cluster-robust" };
                out.push_str(&format!("TSLS standard error is {label}.\n"));
            }
            out.push_str(RULE);
            out.push_str(&format!(
                "\n\nAlternative tests for the treatment effect under H_0: beta={}.\n\n",
                signif(cfg.beta0, 7)
            ));
            let (df1, df2) = ar.df.unwrap_or((data.l(), data.df_resid()));
            out.push_str("Anderson-Rubin test (under F distribution):\n");
            out.push_str(&format!(
                "F={}, df1={df1}, df2={df2}, p-value is {}\n",
                signif(ar.statistic, 7),
                signif(ar.p_value, 5)
            ));
            out.push_str(&format!(
                "{} percent confidence interval:\n {}\n\n",
                percent(cfg.alpha),
                interval_text(&ar.confidence_set)
            ));
            if data.l() == 1 {
                out.push_str("Conditional Likelihood Ratio test:\n");
            } else {
                out.push_str(&format!(
                    "Conditional Likelihood Ratio test (Monte Carlo, {} draws, seed {}):\n",
                    cfg.clr_draws, cfg.seed
                ));
            }
            out.push_str(&format!(
                "Test Stat={}, p-value is {}\n",
                signif(clr.statistic, 7),
                signif(clr.p_value, 5)
            ));
            out.push_str(&format!(
                "{} percent confidence interval:\n {}\n",
                percent(cfg.alpha),
                interval_text(&clr.confidence_set)
            ));
            if let Some(s) = &sens {
                out.push('\n');
                out.push_str(&sensitivity_text(s));
            }
            Ok(out)
        }
    }
}

fn confint(cfg: &AnalysisConfig, data: &ProjectedData) -> Result<String> {
    let fits = fit_table(data, &cfg.k_choices, cfg.error_model)?;
    let mut sets: Vec<(String, IntervalSet)> = fits
        .iter()
        .map(|nf| {
            let (lo, hi) = nf.fit.wald_ci(cfg.alpha, WaldReference::StudentT)?;
            Ok((nf.name.clone(), IntervalSet::Interval { lo, hi }))
        })
        .collect::<Result<_>>()?;
    sets.push(("AR".into(), ar_test(data, cfg.beta0, cfg.alpha, ArReference::F)?.confidence_set));
    sets.push(("CLR".into(), clr_test(data, cfg.beta0, cfg.alpha, cfg.clr_draws, cfg.seed)?.confidence_set));

    // Endpoints stored in the set; for two rays these bound the excluded middle.
    let ends = |s: &IntervalSet| match *s {
        IntervalSet::TwoRays { lo, hi } => (lo, hi),
        other => other.bounds(),
    };
    match cfg.format {
        Format::Json => {
            let map: Map<String, Value> = sets
                .iter()
                .map(|(name, set)| (fit_key(name), serde_json::to_value(set).expect("serializable")))
                .collect();
            Ok(to_json(&json!({ "alpha": cfg.alpha, "intervals": map })))
        }
        Format::Csv => {
            let rows: Vec<Vec<String>> = sets
                .iter()
                .map(|(name, set)| {
                    let (lo, hi) = ends(set);
                    vec![name.clone(), set.kind().to_string(), full(lo), full(hi)]
                })
                .collect();
            Ok(csv(&["method", "kind", "lower", "upper"], &rows))
        }
        Format::Text => {
            let header = vec![
                String::new(),
                format!("{} %", signif(50.0 * cfg.alpha, 6)),
                format!("{} %", signif(100.0 - 50.0 * cfg.alpha, 6)),
                String::new(),
            ];
            let rows: Vec<Vec<String>> = sets
                .iter()
                .map(|(name, set)| {
                    let (lo, hi) = ends(set);
                    let note = match set {
                        IntervalSet::Interval { .. } => String::new(),
                        other => other.display_with(|x| signif(x, 8)),
                    };
                    vec![name.clone(), fixed(lo, 8), fixed(hi, 8), note]
                })
                .collect();
            Ok(table(&header, &rows))
        }
    }
}

fn power_spec(cfg: &AnalysisConfig, data: &ProjectedData, method: PowerMethod) -> Result<PowerSpec> {
    let beta = cfg
        .beta
        .ok_or_else(|| IvError::Config("power calculations need --beta".into()))?;
    let design = PowerDesign::from_data(data)?;
    let mut spec = PowerSpec::new(design, method, beta - cfg.beta0, cfg.alpha, data.n() as u64);
    if method == PowerMethod::ArSens {
        let spec_delta = sens_spec(cfg)?
            .ok_or_else(|| IvError::Config("--method arsens needs --delta".into()))?;
        spec = spec.with_delta(spec_delta.delta_max());
    }
    Ok(spec)
}

fn method_name(method: PowerMethod) -> &'static str {
    match method {
        PowerMethod::Tsls => "tsls",
        PowerMethod::Ar => "ar",
        PowerMethod::ArSens => "arsens",
    }
}

fn power_cmd(cfg: &AnalysisConfig, data: &ProjectedData) -> Result<String> {
    let Some(grid) = &cfg.n_grid else {
        let spec = power_spec(cfg, data, cfg.method)?;
        let value = power(&spec)?;
        return Ok(match cfg.format {
            Format::Json => to_json(&json!({
                "method": method_name(cfg.method),
                "beta": cfg.beta,
                "beta0": cfg.beta0,
                "n": spec.n,
                "power": value,
            })),
            Format::Csv => csv(&["method", "n", "power"], &[vec![method_name(cfg.method).into(), spec.n.to_string(), full(value)]]),
            Format::Text => format!("{}\n", signif(value, 7)),
        });
    };
    let tsls = power_curve(&power_spec(cfg, data, PowerMethod::Tsls)?, grid)?;
    let ar = power_curve(&power_spec(cfg, data, PowerMethod::Ar)?, grid)?;
    if let Some(path) = &cfg.plot {
        std::fs::write(path, power_chart_svg(grid, &[("TSLS", &tsls), ("AR", &ar)]))?;
    }
    let rows: Vec<Vec<String>> = grid
        .iter()
        .zip(tsls.iter().zip(&ar))
        .map(|(n, (t, a))| vec![n.to_string(), full(*t), full(*a)])
        .collect();
    Ok(match cfg.format {
        Format::Json => {
            let points: Vec<Value> = grid
                .iter()
                .zip(tsls.iter().zip(&ar))
                .map(|(n, (t, a))| json!({ "n": n, "power_tsls": t, "power_ar": a }))
                .collect();
            to_json(&json!({ "beta": cfg.beta, "beta0": cfg.beta0, "curve": points }))
        }
        Format::Csv => csv(&["n", "power_tsls", "power_ar"], &rows),
        Format::Text => {
            let pretty: Vec<Vec<String>> = grid
                .iter()
                .zip(tsls.iter().zip(&ar))
                .map(|(n, (t, a))| vec![n.to_string(), fixed(*t, 7), fixed(*a, 7)])
                .collect();
            table(&["n".into(), "power_tsls".into(), "power_ar".into()], &pretty)
        }
    })
}

fn samplesize(cfg: &AnalysisConfig, data: &ProjectedData) -> Result<String> {
    let spec = power_spec(cfg, data, cfg.method)?;
    let n = min_sample_size(&spec, cfg.target_power)?;
    Ok(match cfg.format {
        Format::Json => to_json(&json!({
            "method": method_name(cfg.method),
            "beta": cfg.beta,
            "beta0": cfg.beta0,
            "target_power": cfg.target_power,
            "n": n,
        })),
        Format::Csv => csv(
            &["method", "target_power", "n"],
            &[vec![method_name(cfg.method).into(), full(cfg.target_power), n.to_string()]],
        ),
        Format::Text => format!("{n}\n"),
    })
}

fn sensitivity(cfg: &AnalysisConfig, raw: &IVData) -> Result<String> {
    let spec = sens_spec(cfg)?.ok_or_else(|| IvError::Config("sensitivity needs --delta lo,hi".into()))?;
    let data = raw.project()?;
    let res = sens_interval(&data, cfg.beta0, &spec)?;
    let calibration = if raw.covariates().ncols() > 0 { calibrate_delta(raw)? } else { Vec::new() };
    match cfg.format {
        Format::Json => {
            let obj = json!({ "result": res, "calibration": calibration });
            Ok(to_json(&obj))
        }
        Format::Csv => {
            let (lo, hi) = match res.test.confidence_set {
                IntervalSet::TwoRays { lo, hi } => (lo, hi),
                other => other.bounds(),
            };
            let row = vec![
                full(spec.delta_lo),
                full(spec.delta_hi),
                full(cfg.beta0),
                full(res.test.statistic),
                full(res.ncp),
                full(res.test.p_value),
                res.test.confidence_set.kind().into(),
                full(lo),
                full(hi),
            ];
            Ok(csv(
                &["delta_lo", "delta_hi", "beta0", "statistic", "ncp", "p_value", "kind", "lower", "upper"],
                &[row],
            ))
        }
        Format::Text => {
            let mut out = sensitivity_text(&res);
            if !calibration.is_empty() {
                out.push_str("\nDelta implied by a confounder like each covariate:\n");
                let rows: Vec<Vec<String>> = calibration
                    .iter()
                    .map(|c| {
                        vec![
                            c.covariate.clone(),
                            signif(c.abs_corr_with_instrument, 4),
                            signif(c.outcome_coef, 4),
                            signif(c.delta, 4),
                        ]
                    })
                    .collect();
                out.push_str(&table(
                    &["".into(), "|cor with Z|".into(), "outcome coef".into(), "delta".into()],
                    &rows,
                ));
            }
            Ok(out)
        }
    }
}

fn diagnose(cfg: &AnalysisConfig, raw: &IVData) -> Result<String> {
    let rows = iv_diagnosis(raw, cfg.kappa_mode)?;
    if let Some(path) = &cfg.plot {
        emit_bias_chart(&rows, path)?;
    }
    match cfg.format {
        Format::Json => Ok(to_json(&serde_json::to_value(&rows).expect("serializable"))),
        Format::Csv => {
            let body: Vec<Vec<String>> = rows
                .iter()
                .map(|r| {
                    vec![
                        r.covariate_name.clone(),
                        full(r.kappa_hat_j),
                        full(r.iv_imbalance),
                        full(r.ols_imbalance),
                        full(r.d_on_z_slope),
                        full(r.bias_tsls),
                        full(r.bias_ols),
                        full(r.bias_ratio),
                    ]
                })
                .collect();
            Ok(csv(
                &[
                    "covariate",
                    "kappa_hat",
                    "iv_imbalance",
                    "ols_imbalance",
                    "d_on_z_slope",
                    "bias_tsls",
                    "bias_ols",
                    "bias_ratio",
                ],
                &body,
            ))
        }
        Format::Text => {
            let body: Vec<Vec<String>> = rows
                .iter()
                .map(|r| {
                    vec![
                        r.covariate_name.clone(),
                        signif(r.kappa_hat_j, 5),
                        signif(r.iv_imbalance, 5),
                        signif(r.ols_imbalance, 5),
                        signif(r.bias_tsls, 5),
                        signif(r.bias_ols, 5),
                        r.ratio_label(),
                    ]
                })
                .collect();
            let header: Vec<String> = ["", "kappa", "imbalance(Z)", "imbalance(D)", "bias TSLS", "bias OLS", "ratio"]
                .iter()
                .map(|s| s.to_string())
                .collect();
            Ok(table(&header, &body))
        }
    }
}

fn cor(cfg: &AnalysisConfig, raw: &IVData) -> Result<String> {
    let cm = correlation_matrix(raw)?;
    match cfg.format {
        Format::Json => Ok(to_json(&serde_json::to_value(&cm).expect("serializable"))),
        Format::Csv => {
            let mut header = vec![""];
            header.extend(cm.labels.iter().map(String::as_str));
            let rows: Vec<Vec<String>> = cm
                .labels
                .iter()
                .zip(&cm.values)
                .map(|(l, r)| std::iter::once(l.clone()).chain(r.iter().map(|v| full(*v))).collect())
                .collect();
            Ok(csv(&header, &rows))
        }
        Format::Text => {
            let mut header = vec![String::new()];
            header.extend(cm.labels.iter().cloned());
            let rows: Vec<Vec<String>> = cm
                .labels
                .iter()
                .zip(&cm.values)
                .map(|(l, r)| {
                    // Round first so that -0.001 prints as 0.00 rather than -0.00.
                    let cell = |v: f64| fixed((v * 100.0).round() / 100.0 + 0.0, 2);
                    std::iter::once(l.clone()).chain(r.iter().map(|v| cell(*v))).collect()
                })
                .collect();
            Ok(table(&header, &rows))
        }
    }
}

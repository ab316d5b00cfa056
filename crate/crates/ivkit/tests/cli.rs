//! End-to-end runs of the `ivkit` binary on the bundled data.

use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_ivkit");
const DATA: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/data/card.csv");

fn run(sub: &str, extra: &[&str]) -> Output {
    Command::new(BIN)
        .arg(sub)
        .args(["--data", DATA, "--outcome", "lwage", "--exposure", "educ", "--instruments", "nearc4"])
        .args(["--covariates", "exper,expersq,black,south,smsa"])
        .args(extra)
        .env_remove("IVKIT_CONFIG")
        .output()
        .unwrap()
}

fn stdout(sub: &str, extra: &[&str]) -> String {
    let out = run(sub, extra);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn interval(line: &str) -> (f64, f64) {
    let cols: Vec<f64> = line.split_whitespace().skip(1).take(2).map(|c| c.parse().unwrap()).collect();
    (cols[0], cols[1])
}

#[test]
fn summary_text() {
    let out = stdout("summary", &[]);
    assert!(out.contains("F=16.71759, df1=1, df2=3003, p-value is 4.4515e-05"), "{out}");
    let tsls = out.lines().find(|l| l.starts_with("TSLS")).unwrap();
    assert!(tsls.contains("0.132289") && tsls.contains("0.049233"), "{tsls}");
    assert!(out.contains("Signif. codes:  0 '***' 0.001 '**' 0.01 '*' 0.05 '.' 0.1 ' ' 1"));
    assert!(out.contains("[0.0383986007667"));
}

#[test]
fn summary_json_mirrors_text() {
    let out = stdout("summary", &["--format", "json"]);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    let est = v["kclass"]["tsls"]["estimate"].as_f64().unwrap();
    assert!((est - 0.132289).abs() < 1e-6);
    assert!((v["first_stage"]["f_stat"].as_f64().unwrap() - 16.71759).abs() < 1e-5);
    assert_eq!(v["ar"]["confidence_set"]["kind"], "interval");
    let text = stdout("summary", &[]);
    assert!(text.contains(&format!("{:.6}", v["kclass"]["fuller"]["estimate"].as_f64().unwrap())));
    assert!(text.contains(&format!("{:.6}", v["kclass"]["ols"]["std_error"].as_f64().unwrap())));
}

#[test]
fn unknown_column_is_a_config_error() {
    let out = run("summary", &["--covariates", "exper,nonesuch"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("nonesuch") && err.lines().count() == 1, "{err}");
}

#[test]
fn inconsistent_flags_exit_two() {
    assert_eq!(run("summary", &["--se", "cluster"]).status.code(), Some(2));
    assert_eq!(run("sensitivity", &[]).status.code(), Some(2));
    assert_eq!(run("power", &[]).status.code(), Some(2));
}

#[test]
fn unsupported_sensitivity_with_two_instruments_exits_one() {
    let out = run("sensitivity", &["--instruments", "nearc4,nearc2", "--delta", "-0.07,0.07"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8(out.stderr).unwrap().contains("unsupported"));
}

#[test]
fn confint_rows() {
    let out = stdout("confint", &[]);
    let row = |name: &str| interval(out.lines().find(|l| l.starts_with(name)).unwrap());
    let (lo, hi) = row("AR ");
    assert!((lo - 0.03839860).abs() < 1e-8 && (hi - 0.26118365).abs() < 1e-8);
    let (lo, hi) = row("OLS");
    assert!((lo - 0.06713570).abs() < 1e-8 && (hi - 0.08088229).abs() < 1e-8);

    let narrow = stdout("confint", &["--alpha", "0.5"]);
    for name in ["OLS", "Fuller", "TSLS", "LIML", "AR ", "CLR"] {
        let (a, b) = row(name);
        let (c, d) = interval(narrow.lines().find(|l| l.starts_with(name)).unwrap());
        assert!(a < c && d < b, "{name}");
    }
}

#[test]
fn power_and_sample_size() {
    assert_eq!(stdout("power", &["--beta", "0.1"]).trim(), "0.5286761");
    assert_eq!(stdout("power", &["--beta", "0.1", "--method", "ar"]).trim(), "0.5461072");
    assert_eq!(stdout("samplesize", &["--beta", "0.1"]).trim(), "5723");
    assert_eq!(stdout("samplesize", &["--beta", "0.1", "--method", "ar", "--target-power", "0.8"]).trim(), "5482");
}

#[test]
fn power_grid_csv_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    let svg = dir.path().join("power.svg");
    let out = stdout("power", &["--beta", "0.1", "--n-grid", "20:2000:20", "--format", "csv", "--plot", svg.to_str().unwrap()]);
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some("n,power_tsls,power_ar"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|c| c.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 100);
    for w in rows.windows(2) {
        assert!(w[1][1] >= w[0][1] && w[1][2] >= w[0][2]);
    }
    let chart = std::fs::read_to_string(svg).unwrap();
    assert!(chart.starts_with("<?xml") && chart.matches("<polyline").count() == 2);
}

#[test]
fn sensitivity_report() {
    let out = stdout("sensitivity", &["--delta", "-0.07,0.07"]);
    assert!(out.contains("p-value is 0.16499"), "{out}");
    assert!(out.contains("[ -0.05383840"), "{out}");
    assert!(out.contains("0.53548242"), "{out}");
    let out = stdout("sensitivity", &["--delta", "-0.07,0.07", "--covariates", "exper,expersq,black,smsa"]);
    assert!(out.contains("[ 0.03797203"), "{out}");
}

#[test]
fn diagnose_orders_by_tsls_bias() {
    let dir = tempfile::tempdir().unwrap();
    let svg = dir.path().join("bias.svg");
    let out = stdout("diagnose", &["--plot", svg.to_str().unwrap()]);
    assert!(out.lines().nth(1).unwrap().starts_with("smsa"), "{out}");
    assert!(std::fs::read_to_string(svg).unwrap().contains(">13.07<"));
    let csv = stdout("diagnose", &["--format", "csv"]);
    assert!(csv.starts_with("covariate,kappa_hat,"));
}

#[test]
fn correlation_table() {
    let out = stdout("cor", &[]);
    let smsa = out.lines().find(|l| l.starts_with("smsa")).unwrap();
    assert_eq!(smsa.split_whitespace().collect::<Vec<_>>(), ["smsa", "0.35", "0.19", "-0.14", "-0.14", "-0.04", "-0.18", "1.00", "0.23"]);
}

#[test]
fn output_is_deterministic() {
    let args = ["--instruments", "nearc4,nearc2", "--seed", "9", "--clr-draws", "5000"];
    assert_eq!(run("summary", &args).stdout, run("summary", &args).stdout);
}

#[test]
fn config_file_and_env_var() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("card.toml");
    std::fs::write(
        &cfg,
        format!(
            "data = {DATA:?}\noutcome = \"lwage\"\nexposure = \"educ\"\ninstruments = [\"nearc4\"]\n\
             covariates = [\"exper\", \"expersq\", \"black\", \"south\", \"smsa\"]\nbeta = 0.1\n"
        ),
    )
    .unwrap();
    let out = Command::new(BIN).args(["power", "--config", cfg.to_str().unwrap()]).output().unwrap();
    assert_eq!(String::from_utf8(out.stdout).unwrap().trim(), "0.5286761");
    let out = Command::new(BIN).args(["power", "--method", "ar"]).env("IVKIT_CONFIG", &cfg).output().unwrap();
    assert_eq!(String::from_utf8(out.stdout).unwrap().trim(), "0.5461072");
}

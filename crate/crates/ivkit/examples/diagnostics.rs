//! Which covariates would bias an unadjusted TSLS estimate more than an
//! unadjusted OLS estimate? Writes the bias chart to `bias_chart.svg` in
//! the system temp directory.

use ivkit::dataset::{load_csv, ColumnSpec};
use ivkit::diagnostics::{correlation_matrix, emit_bias_chart, iv_diagnosis, KappaMode};

const DATA: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/data/card.csv");

fn main() -> ivkit::Result<()> {
    let columns = ColumnSpec::new("lwage", "educ", &["nearc4"], &["exper", "expersq", "black", "south", "smsa"]);
    let raw = load_csv(DATA, &columns, true)?;

    let rows = iv_diagnosis(&raw, KappaMode::Joint)?;
    println!("{:<8} {:>10} {:>10} {:>7}", "", "bias TSLS", "bias OLS", "ratio");
    for r in &rows {
        println!("{:<8} {:>10.5} {:>10.5} {:>7}", r.covariate_name, r.bias_tsls, r.bias_ols, r.ratio_label());
    }
    let path = std::env::temp_dir().join("bias_chart.svg");
    emit_bias_chart(&rows, &path)?;
    println!("chart written to {}", path.display());

    let cm = correlation_matrix(&raw)?;
    print!("\n{:<8}", "");
    for l in &cm.labels {
        print!("{l:>8}");
    }
    println!();
    for (label, row) in cm.labels.iter().zip(&cm.values) {
        print!("{label:<8}");
        for v in row {
            print!("{v:>8.2}");
        }
        println!();
    }
    Ok(())
}

//! OLS and TSLS as geographic covariates are added one at a time. The
//! TSLS estimate falls towards OLS as `south` and `smsa` enter.

use ivkit::dataset::{load_csv, ColumnSpec};
use ivkit::kclass::{fit_k, ErrorModel};

const DATA: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/data/card.csv");

fn main() -> ivkit::Result<()> {
    let all = ["exper", "expersq", "black", "south", "smsa"];
    let raw = load_csv(DATA, &ColumnSpec::new("lwage", "educ", &["nearc4"], &all), true)?;
    let sets: [&[&str]; 5] = [
        &[],
        &["exper", "expersq", "black"],
        &["exper", "expersq", "black", "south"],
        &["exper", "expersq", "black", "smsa"],
        &all,
    ];
    println!("{:<36} {:>15} {:>15}", "adjusted for", "OLS", "TSLS");
    for set in sets {
        let data = raw.select_covariates(set)?.project()?;
        let ols = fit_k(&data, 0.0, ErrorModel::Homoskedastic)?;
        let tsls = fit_k(&data, 1.0, ErrorModel::Homoskedastic)?;
        let label = if set.is_empty() { "none".to_string() } else { set.join(", ") };
        println!(
            "{label:<36} {:>7.3} ({:.3}) {:>7.3} ({:.3})",
            ols.beta_hat,
            ols.std_error(),
            tsls.beta_hat,
            tsls.std_error()
        );
    }
    Ok(())
}

//! First stage and the default k-class table on the bundled schooling data.
//!
//! Run with `cargo run --example summary`.

use ivkit::dataset::{load_csv, ColumnSpec};
use ivkit::kclass::{first_stage, fit_k, fit_table, ErrorModel, DEFAULT_CHOICES};

const DATA: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/data/card.csv");

fn main() -> ivkit::Result<()> {
    let columns = ColumnSpec::new("lwage", "educ", &["nearc4"], &["exper", "expersq", "black", "south", "smsa"]);
    let data = load_csv(DATA, &columns, true)?.project()?;
    println!("n = {}, instruments = {}, exogenous columns = {}", data.n(), data.l(), data.p());

    let tsls = fit_k(&data, 1.0, ErrorModel::Homoskedastic)?;
    let fs = first_stage(&data, &tsls)?;
    println!(
        "first stage: F = {:.5} on ({}, {}) df, p = {:.4e}, R2 = {:.6}",
        fs.f_stat, fs.df1, fs.df2, fs.p_value, fs.r_squared
    );
    println!("corr(first-stage, structural residuals) = {:.4}", fs.rho_hat);

    println!("\n{:<8} {:>9} {:>9} {:>9} {:>10}", "", "k", "estimate", "se", "p");
    for row in fit_table(&data, &DEFAULT_CHOICES, ErrorModel::Homoskedastic)? {
        let f = &row.fit;
        println!(
            "{:<8} {:>9.6} {:>9.6} {:>9.6} {:>10.3e}",
            row.name, f.k, f.beta_hat, f.std_error(), f.p_value()
        );
    }
    Ok(())
}

//! TSLS with classical, heteroskedasticity-robust and cluster-robust
//! standard errors. Clusters here are the south/non-south regions, which
//! gives only two clusters; it is meant to show the mechanics.

use ivkit::dataset::{load_csv, ColumnSpec};
use ivkit::kclass::{fit_k, liml_k, fuller_k, ErrorModel, WaldReference};

const DATA: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/data/card.csv");

fn main() -> ivkit::Result<()> {
    let columns = ColumnSpec::new("lwage", "educ", &["nearc4"], &["exper", "expersq", "black", "smsa"])
        .with_cluster("south");
    let data = load_csv(DATA, &columns, true)?.project()?;

    for model in [ErrorModel::Homoskedastic, ErrorModel::Hc, ErrorModel::Cluster] {
        let fit = fit_k(&data, 1.0, model)?;
        let (lo, hi) = fit.wald_ci(0.05, WaldReference::StudentT)?;
        println!("{model:?}: {:.6} (se {:.6}), 95% CI [{lo:.5}, {hi:.5}]", fit.beta_hat, fit.std_error());
    }

    // Any k works; LIML and Fuller pick theirs from the data.
    let k_liml = liml_k(&data)?;
    let k_fuller = fuller_k(&data, 4.0)?;
    for (name, k) in [("k = 0.5", 0.5), ("LIML", k_liml), ("Fuller(4)", k_fuller)] {
        let fit = fit_k(&data, k, ErrorModel::Homoskedastic)?;
        println!("{name:<10} k = {k:.6}: {:.6} (se {:.6})", fit.beta_hat, fit.std_error());
    }
    Ok(())
}

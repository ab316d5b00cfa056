//! Anderson-Rubin and CLR confidence sets, first on the schooling data and
//! then on a simulated design with a nearly irrelevant instrument, where the
//! sets become unbounded.

use ivkit::dataset::{load_csv, ColumnSpec, IVData};
use ivkit::weakiv::{ar_test, clr_test, ArReference, DEFAULT_CLR_DRAWS, DEFAULT_SEED};
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};

const DATA: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/data/card.csv");

fn main() -> ivkit::Result<()> {
    let columns = ColumnSpec::new("lwage", "educ", &["nearc4"], &["exper", "expersq", "black", "south", "smsa"]);
    let data = load_csv(DATA, &columns, true)?.project()?;
    let ar = ar_test(&data, 0.0, 0.05, ArReference::F)?;
    let clr = clr_test(&data, 0.0, 0.05, DEFAULT_CLR_DRAWS, DEFAULT_SEED)?;
    let show = |x: f64| format!("{x:.8}");
    println!("AR : F = {:.6}, p = {:.7}, {}", ar.statistic, ar.p_value, ar.confidence_set.display_with(show));
    println!("CLR: stat = {:.6}, p = {:.7}, {}", clr.statistic, clr.p_value, clr.confidence_set.display_with(show));

    // Weak instrument: first-stage coefficient 0.05 with n = 200.
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
    let n = 200;
    let mut draw = || -> f64 { StandardNormal.sample(&mut rng) };
    let z = DMatrix::from_fn(n, 1, |_, _| draw());
    let u = DVector::from_fn(n, |_, _| draw());
    let v = DVector::from_fn(n, |i, _| 0.8 * u[i] + 0.6 * draw());
    let d = DVector::from_fn(n, |i, _| 0.05 * z[(i, 0)] + v[i]);
    let y = DVector::from_fn(n, |i, _| 0.5 * d[i] + u[i]);
    let weak = IVData::new(y, d, z, DMatrix::zeros(n, 0), true)?.project()?;
    let ar = ar_test(&weak, 0.0, 0.05, ArReference::F)?;
    let clr = clr_test(&weak, 0.0, 0.05, DEFAULT_CLR_DRAWS, DEFAULT_SEED)?;
    println!("\nweak instrument:");
    println!("AR  set is {} : {}", ar.confidence_set.kind(), ar.confidence_set.display_with(|x| format!("{x:.4}")));
    println!("CLR set is {} : {}", clr.confidence_set.kind(), clr.confidence_set.display_with(|x| format!("{x:.4}")));
    Ok(())
}

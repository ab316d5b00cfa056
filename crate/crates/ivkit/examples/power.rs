//! Power and sample size for a follow-up study, using the schooling data
//! as the pilot.

use ivkit::dataset::{load_csv, ColumnSpec};
use ivkit::power::{min_sample_size, power, power_curve, PowerDesign, PowerMethod, PowerSpec};

const DATA: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/data/card.csv");

fn main() -> ivkit::Result<()> {
    let columns = ColumnSpec::new("lwage", "educ", &["nearc4"], &["exper", "expersq", "black", "south", "smsa"]);
    let data = load_csv(DATA, &columns, true)?.project()?;
    let design = PowerDesign::from_data(&data)?;
    let n = data.n() as u64;
    println!("{design:#?}");

    for method in [PowerMethod::Tsls, PowerMethod::Ar] {
        let spec = PowerSpec::new(design, method, 0.1, 0.05, n);
        println!("{method:?}: power at beta = 0.1 is {:.7}, n for 80% is {}", power(&spec)?, min_sample_size(&spec, 0.8)?);
    }

    let sens = PowerSpec::new(design, PowerMethod::ArSens, 0.25, 0.05, n).with_delta(0.07);
    println!("ArSens: power at beta = 0.25 is {:.7}, n for 80% is {}", power(&sens)?, min_sample_size(&sens, 0.8)?);

    let grid: Vec<u64> = (20..=2000).step_by(220).collect();
    let tsls = power_curve(&PowerSpec::new(design, PowerMethod::Tsls, 0.1, 0.05, n), &grid)?;
    let ar = power_curve(&PowerSpec::new(design, PowerMethod::Ar, 0.1, 0.05, n), &grid)?;
    println!("\n{:>6} {:>8} {:>8}", "n", "TSLS", "AR");
    for ((n, t), a) in grid.iter().zip(&tsls).zip(&ar) {
        println!("{n:>6} {t:>8.4} {a:>8.4}");
    }
    Ok(())
}

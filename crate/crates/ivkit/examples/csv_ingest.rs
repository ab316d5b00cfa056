//! Reading data from any `io::Read`: missing cells ("" or "NA") drop the
//! row, and design problems are reported with the offending column.

use ivkit::dataset::{read_csv, ColumnSpec};
use ivkit::IvError;

fn main() -> ivkit::Result<()> {
    let text = "y,d,z,x,dup\n\
                1.2,0.5,1,3,6\n\
                2.0,1.1,0,NA,0\n\
                0.7,0.2,0,1,2\n\
                1.9,1.3,1,2,4\n\
                2.4,1.6,1,5,10\n\
                0.9,0.4,0,,0\n\
                1.1,0.3,0,4,8\n";
    let spec = ColumnSpec::new("y", "d", &["z"], &["x"]);
    let data = read_csv(text.as_bytes(), &spec, true)?;
    println!("kept {} rows, dropped {}", data.n(), data.dropped_rows());

    let collinear = ColumnSpec::new("y", "d", &["z"], &["x", "dup"]);
    match read_csv(text.as_bytes(), &collinear, true) {
        Err(e @ IvError::Design(_)) => println!("{e}"),
        other => println!("unexpected: {other:?}"),
    }
    match read_csv(text.as_bytes(), &ColumnSpec::new("y", "d", &["w"], &[]), true) {
        Err(e) => println!("{e} (exit code {})", e.exit_code()),
        Ok(_) => println!("unexpected success"),
    }
    Ok(())
}

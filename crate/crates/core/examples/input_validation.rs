// Input checks reported as JSON lines.

use std::io::Write;

use smokecast::data::{validate_inputs, ColumnMapping, E0Bounds, Schema};

pub fn run_example() -> smokecast::Result<()> {
    let dir = std::env::temp_dir().join("smokecast-input-validation");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("e0.csv");
    let mut f = std::fs::File::create(&path)?;
    writeln!(f, "country,sex,period_start,e0")?;
    writeln!(f, "A,male,1950,61.2")?;
    writeln!(f, "A,male,1955,abc")?;
    writeln!(f, "A,other,1960,63.0")?;
    writeln!(f, "A,female,1950,140.0")?;
    drop(f);
    let issues = validate_inputs(None::<(&std::path::Path, &Schema)>, None, Some((&path, &ColumnMapping::e0(), E0Bounds::default())));
    for issue in &issues {
        println!("{}", issue.to_json());
    }
    println!("{} issues", issues.len());
    Ok(())
}

#[allow(dead_code)]
fn main() -> smokecast::Result<()> {
    run_example()
}

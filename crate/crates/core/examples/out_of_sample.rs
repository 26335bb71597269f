// Out-of-sample validation: train before 2000, forecast 2000-2015, and
// compare accuracy and calibration with a Lee-Carter baseline.

use smokecast::pipeline::{out_of_sample_validate, PipelineConfig};

pub fn run_example() -> smokecast::Result<()> {
    let out = std::env::temp_dir().join("smokecast-out-of-sample");
    let config = PipelineConfig::desk(&out, 6, 3);
    let report = out_of_sample_validate(&config, 2000)?;
    println!("test periods: {:?}", report.test_periods.iter().map(|p| p.label_year()).collect::<Vec<_>>());
    report.write_csv(std::io::stdout().lock())?;
    Ok(())
}

#[allow(dead_code)]
fn main() -> smokecast::Result<()> {
    run_example()
}

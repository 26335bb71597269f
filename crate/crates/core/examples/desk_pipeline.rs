// The full forecasting pipeline on five synthetic countries with desk-scale
// chains. A second call reuses every stage from the manifest.

use smokecast::data::Sex;
use smokecast::pipeline::{run_full_pipeline, PipelineConfig};

pub fn run_example() -> smokecast::Result<()> {
    let out = std::env::temp_dir().join("smokecast-desk-pipeline");
    let config = PipelineConfig::desk(&out, 5, 1);
    let bundle = run_full_pipeline(&config)?;
    for sex in [Sex::Male, Sex::Female] {
        let t = bundle.trajectories(sex);
        for (c, name) in t.countries.iter().enumerate() {
            println!("{name} {sex:<6} e0 in {}: {:.2}", t.periods[8].label_year(), t.median(c, 8));
        }
    }
    println!("gap bounds [{:.2}, {:.2}]", bundle.coefficients.lower, bundle.coefficients.upper);
    for record in &bundle.manifest.stages {
        println!("{}: {} artifacts", record.name, record.artifacts.len());
    }
    let again = run_full_pipeline(&config)?;
    println!("rerun identical: {}", again.female == bundle.female);
    Ok(())
}

#[allow(dead_code)]
fn main() -> smokecast::Result<()> {
    run_example()
}

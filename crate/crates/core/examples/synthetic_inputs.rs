// Synthetic mortality, ASSAF and e0 inputs with a recorded truth, written
// in the CSV layouts the loaders read.

use smokecast::data::{load_e0_series, ColumnMapping, E0Bounds, Sex};
use smokecast::pipeline::{simulate_synthetic, SyntheticTruth};

pub fn run_example() -> smokecast::Result<()> {
    let truth = SyntheticTruth::desk(3, 9);
    let data = simulate_synthetic(&truth)?;
    let dir = std::env::temp_dir().join("smokecast-synthetic-inputs");
    data.write(&dir)?;
    let e0 = load_e0_series(&dir.join("e0.csv"), &ColumnMapping::e0(), E0Bounds::default())?;
    for c in e0.countries(Sex::Male) {
        let male = e0.series(&c, Sex::Male);
        let female = e0.series(&c, Sex::Female);
        let (first, last) = (0, male.len() - 1);
        println!(
            "{c}: male {:.1} -> {:.1}, gap {:.2} -> {:.2}",
            male[first].1,
            male[last].1,
            female[first].1 - male[first].1,
            female[last].1 - male[last].1
        );
    }
    println!("inputs in {}", dir.display());
    Ok(())
}

#[allow(dead_code)]
fn main() -> smokecast::Result<()> {
    run_example()
}

// Life expectancy with smoking-attributable deaths removed, next to the
// all-cause value, for a small synthetic panel.

use smokecast::data::Sex;
use smokecast::lifetable::e0ns_series;
use smokecast::pipeline::{simulate_synthetic, SyntheticTruth};

pub fn run_example() -> smokecast::Result<()> {
    let data = simulate_synthetic(&SyntheticTruth::desk(2, 11))?;
    let e0ns = e0ns_series(&data.mortality, &data.assaf)?;
    for sex in [Sex::Male, Sex::Female] {
        for (period, lost) in e0ns.series("S00", sex).into_iter().map(|(p, ns)| {
            let e0 = data.e0.get("S00", sex, p).expect("same periods");
            (p, ns - e0)
        }) {
            println!("S00 {sex:<6} {}  years lost to smoking {lost:.2}", period.label_year());
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> smokecast::Result<()> {
    run_example()
}

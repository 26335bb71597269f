// All-cause male e0 from non-smoking e0 trajectories and ASSAF forecasts,
// through Lee-Carter rate schedules matched to each target.

use smokecast::assaf::AssafForecast;
use smokecast::data::{Period, Sex};
use smokecast::reconstruct::{lee_carter_panel, reconstruct_male_e0, Coherence};
use smokecast::pipeline::{simulate_synthetic, SyntheticTruth};
use smokecast::trajectory::TrajectorySet;

pub fn run_example() -> smokecast::Result<()> {
    let data = simulate_synthetic(&SyntheticTruth::desk(3, 4))?;
    let params = lee_carter_panel(&data.mortality, &data.assaf, Sex::Male, Coherence::SharedBx)?;
    let countries: Vec<String> = params.keys().cloned().collect();
    let last = Period::estimation()[12];
    let n = 50;
    // Non-smoking e0 gaining 1.2 years per period, with spread across draws.
    let e0ns = TrajectorySet::from_fn(Sex::Male, countries.clone(), Period::forecast(), n, |c, d| {
        let start = data.record.e0ns.get(&countries[c], Sex::Male, last).unwrap();
        (1..=9).map(|h| start + 1.2 * h as f64 + 0.02 * (d as f64 - 25.0)).collect()
    });
    // Attribution fading linearly from the last observed level.
    let assaf = AssafForecast::from_fn(Sex::Male, countries.clone(), Period::forecast(), (0..n).collect(), |_, c, p| {
        let y = data.assaf.core_values(&countries[c], Sex::Male, last).unwrap();
        y.map(|v| v * (1.0 - (p + 1) as f64 / 10.0))
    });
    let male = reconstruct_male_e0(&e0ns, &assaf, &params)?;
    for (c, name) in male.countries.iter().enumerate() {
        let path: Vec<String> = (0..9).map(|p| format!("{:.1}", male.median(c, p))).collect();
        println!("{name}: non-smoking {:.1} -> all-cause {}", e0ns.median(c, 8), path.join(" "));
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> smokecast::Result<()> {
    run_example()
}

// Female-male e0 gap regression: fit on a simulated panel, compare with the
// shipped coefficients, forecast bounded gaps.

use std::collections::BTreeMap;

use smokecast::data::{Period, Sex};
use smokecast::gap::{female_e0_from_gap, fit_gap_model, forecast_gap, simulate_gap_panel, GapCoefficients, GapHistory};
use smokecast::mcmc::stream_rng;
use smokecast::trajectory::TrajectorySet;

pub fn run_example() -> smokecast::Result<()> {
    let shipped = GapCoefficients::default();
    let panel = simulate_gap_panel(&shipped, 60, 13, &mut stream_rng(5, &[]));
    let fit = fit_gap_model(&panel, shipped.hinge)?;
    let se = fit.coefficients.std_errors.unwrap_or_default();
    for i in 0..6 {
        println!("beta{i}: fitted {:+.3} ({:.3}), shipped {:+.3}", fit.coefficients.beta[i], se[i], shipped.beta[i]);
    }
    println!("R^2 {:.3}, sigma {:.3}, n {}", fit.r_squared, fit.coefficients.sigma, fit.n);

    let male = TrajectorySet::from_fn(Sex::Male, vec!["A".into()], Period::forecast(), 500, |_, d| {
        (0..9).map(|p| 76.0 + 0.9 * p as f64 + 0.002 * d as f64).collect()
    });
    let history = BTreeMap::from([(
        "A".to_string(),
        GapHistory { anchor: 63.0, last_gap: 5.2, asaf_gap: vec![0.12, 0.1, 0.08, 0.06, 0.05, 0.04, 0.03, 0.02, 0.02] },
    )]);
    let gap = forecast_gap(&shipped, &male, &history, 7)?;
    let female = female_e0_from_gap(&male, &gap)?;
    for p in 0..9 {
        println!("{}: male {:.2}, gap {:.2}, female {:.2}", male.periods[p].label_year(), male.median(0, p), gap.median(0, p), female.median(0, p));
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> smokecast::Result<()> {
    run_example()
}

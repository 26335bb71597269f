// Non-smoking life expectancy model: two-stage fit with the noise spline,
// then probabilistic forecasts from each country's last observation.

use smokecast::data::Sex;
use smokecast::e0ns::{fit_e0ns_bhm, forecast_e0ns, simulate_e0ns_panel, stored_jumpoffs, stored_spline};
use smokecast::mcmc::{stream_rng, ChainConfig};
use smokecast::trajectory::REPORT_PROBS;

pub fn run_example() -> smokecast::Result<()> {
    let sim = simulate_e0ns_panel(6, 13, Sex::Female, &mut stream_rng(8, &[]));
    let config = ChainConfig {
        n_iterations: 4_000,
        burn_in: 1_000,
        thin: 10,
        n_chains: 1,
        seed: 8,
        adaptation_window: 100,
    };
    let draws = fit_e0ns_bhm(&sim.series, Sex::Female, &config)?;
    if let Some(spline) = stored_spline(&draws) {
        let mut out = Vec::new();
        spline.write_csv(&mut out)?;
        print!("{}", String::from_utf8_lossy(&out));
    }
    let fc = forecast_e0ns(&draws, &stored_jumpoffs(&draws), 9, &mut stream_rng(8, &[1]))?;
    for row in fc.quantile_summary(&REPORT_PROBS)?.iter().filter(|r| r.country == "N00") {
        println!("{} {}: median {:.2}, 95% [{:.2}, {:.2}]", row.country, row.period.label_year(), row.quantiles[2], row.quantiles[0], row.quantiles[4]);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> smokecast::Result<()> {
    run_example()
}

// Age-cohort ASSAF model: fit on a synthetic panel, summarize cohort and
// age effects, forecast the next nine periods.

use smokecast::assaf::{effect_summaries, fit_assaf_bhm, forecast_assaf};
use smokecast::data::{Period, Sex};
use smokecast::mcmc::{stream_rng, ChainConfig};
use smokecast::pipeline::{simulate_synthetic, SyntheticTruth};
use smokecast::stats::quantiles;

pub fn run_example() -> smokecast::Result<()> {
    let data = simulate_synthetic(&SyntheticTruth::desk(4, 21))?;
    let config = ChainConfig {
        n_iterations: 4_000,
        burn_in: 1_000,
        thin: 10,
        n_chains: 1,
        seed: 3,
        adaptation_window: 100,
    };
    let draws = fit_assaf_bhm(&data.assaf, Sex::Male, &config)?;
    for s in effect_summaries(&draws)?.iter().filter(|s| s.country == "S00" && s.kind == "age") {
        println!("age effect {}: {:.3} [{:.3}, {:.3}]", s.index, s.median, s.lower, s.upper);
    }
    let fc = forecast_assaf(&draws, &Period::forecast(), None, &mut stream_rng(3, &[]))?;
    for (p, period) in fc.periods.iter().enumerate() {
        // Row 4 is the 60-64 group.
        let q = quantiles(&fc.cell(0, p, 4), &[0.1, 0.5, 0.9]);
        println!("S00 60-64 in {}: {:.3} ({:.3} to {:.3})", period.label_year(), q[1], q[0], q[2]);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> smokecast::Result<()> {
    run_example()
}

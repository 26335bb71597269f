use smokecast::data::Sex;
use smokecast::e0ns::{country_columns, fit_e0ns_bhm, simulate_e0ns_panel};
use smokecast::mcmc::{stream_rng, ChainConfig};
use smokecast::stats::quantile;

#[test]
fn intervals_cover_true_plateau_and_asymptote() {
    let sim = simulate_e0ns_panel(10, 13, Sex::Male, &mut stream_rng(2024, &[]));
    let config = ChainConfig {
        n_iterations: 30_000,
        burn_in: 10_000,
        thin: 10,
        n_chains: 1,
        seed: 7,
        adaptation_window: 100,
    };
    let draws = fit_e0ns_bhm(&sim.series, Sex::Male, &config).unwrap();
    let cols = country_columns(draws.names()).unwrap();
    let mut covered = 0;
    let mut total = 0;
    for (name, truth, _) in &sim.truth {
        let c = cols.iter().find(|c| &c.name == name).unwrap();
        for (k, value) in [(4, truth.max_gain), (5, truth.asymptote)] {
            let col = draws.column_at(c.params[k]);
            let (lo, hi) = (quantile(&col, 0.025), quantile(&col, 0.975));
            total += 1;
            if lo <= value && value <= hi {
                covered += 1;
            }
        }
    }
    println!("covered {covered}/{total}");
    assert!(covered as f64 >= 0.8 * total as f64, "covered {covered}/{total}");
}

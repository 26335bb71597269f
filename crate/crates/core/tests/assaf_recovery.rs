use smokecast::assaf::{simulate_assaf_panel, AssafLayout, AssafModel};
use smokecast::mcmc::{run_chain, stream_rng, ChainConfig};
use smokecast::stats::quantile;

#[test]
fn credible_intervals_cover_true_age_effects_and_peaks() {
    let labels: Vec<i32> = (0..13).map(|i| 1953 + 5 * i).collect();
    let sim = simulate_assaf_panel(10, &labels, &mut stream_rng(2024, &[]));
    let model = AssafModel::new(sim.matrices.clone()).unwrap();
    let cfg = ChainConfig {
        n_iterations: 12_000,
        burn_in: 4_000,
        thin: 4,
        n_chains: 1,
        seed: 77,
        adaptation_window: 100,
    };
    let draws = run_chain(&model, &cfg).unwrap();
    let layout = AssafLayout::from_names(draws.names()).unwrap();
    let (mut covered, mut total) = (0, 0);
    let mut check = |col: usize, truth: f64| {
        let c = draws.column_at(col);
        let (lo, hi) = (quantile(&c, 0.025), quantile(&c, 0.975));
        total += 1;
        covered += (lo <= truth && truth <= hi) as usize;
    };
    for (c, t) in layout.countries.iter().zip(&sim.truth) {
        for row in 1..9 {
            check(c.age_effect[row], t.age_effect[row]);
        }
        check(c.curve[4], t.curve.peak);
    }
    let rate = covered as f64 / total as f64;
    println!("coverage {covered}/{total} = {rate:.3}; acceptance {:?}", draws.acceptance);
    assert!(rate >= 0.8, "coverage {rate}");
}

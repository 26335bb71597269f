// Adaptive Metropolis-within-Gibbs on a two-parameter toy model, then the
// Raftery-Lewis table for the draws.

use smokecast::mcmc::dist::normal_ln_pdf;
use smokecast::mcmc::{
    format_two_quantile_table, raftery_lewis_report, run_chain, BlockSpec, Bounds, ChainConfig, McmcError, Model,
    SimRng, SweepContext,
};

// y ~ N(mu, sigma^2) with a flat prior on mu and sigma in (0, 10).
struct Normal {
    y: Vec<f64>,
}

impl Model for Normal {
    type State = [f64; 2];

    fn parameter_names(&self) -> Vec<String> {
        vec!["mu".into(), "sigma".into()]
    }

    fn blocks(&self) -> Vec<BlockSpec> {
        vec![
            BlockSpec::scalar("mu", 0.5, Bounds::REAL),
            BlockSpec::scalar("sigma", 0.5, Bounds::new(0.0, 10.0)),
        ]
    }

    fn initialize(&self, _: usize, _: &mut SimRng) -> Result<[f64; 2], McmcError> {
        Ok([0.0, 1.0])
    }

    fn sweep(&self, s: &mut [f64; 2], ctx: &mut SweepContext, rng: &mut SimRng) -> Result<(), McmcError> {
        let y = &self.y;
        let loglik = |mu: f64, sigma: f64| y.iter().map(|v| normal_ln_pdf(*v, mu, sigma * sigma)).sum::<f64>();
        let sigma = s[1];
        let mut mu = [s[0]];
        ctx.mh(0, &mut mu, &mut |v| loglik(v[0], sigma), rng)?;
        let mut sd = [sigma];
        ctx.mh(1, &mut sd, &mut |v| loglik(mu[0], v[0]), rng)?;
        *s = [mu[0], sd[0]];
        Ok(())
    }

    fn write_draw(&self, s: &[f64; 2], out: &mut Vec<f64>) {
        out.extend(s);
    }
}

pub fn run_example() -> smokecast::Result<()> {
    let y: Vec<f64> = (0..40).map(|i| 3.0 + ((i * 37) % 11) as f64 / 5.0 - 1.0).collect();
    let config = ChainConfig {
        n_iterations: 20_000,
        burn_in: 2_000,
        thin: 1,
        n_chains: 2,
        seed: 5,
        adaptation_window: 100,
    };
    let draws = run_chain(&Normal { y }, &config)?;
    println!("posterior mean mu = {:.3}, sigma = {:.3}", draws.mean("mu").unwrap(), draws.mean("sigma").unwrap());
    println!("acceptance {:?}", draws.acceptance);
    let lower = raftery_lewis_report(&draws, 0, 0.025, 0.0125, 0.95, |_| true)?;
    let upper = raftery_lewis_report(&draws, 0, 0.975, 0.0125, 0.95, |_| true)?;
    print!("{}", format_two_quantile_table(&lower, &upper));
    Ok(())
}

#[allow(dead_code)]
fn main() -> smokecast::Result<()> {
    run_example()
}

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::draws::PosteriorDraws;
use super::mh::{AdaptiveBlock, Bounds};
use super::rng::{stream_rng, SimRng};
use super::McmcError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainConfig {
    pub n_iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub n_chains: usize,
    pub seed: u64,
    pub adaptation_window: usize,
}

impl ChainConfig {
    /// Three chains of 100000 iterations, thinned by 20 after 2000 burn-in.
    pub fn assaf_default() -> Self {
        ChainConfig {
            n_iterations: 100_000,
            burn_in: 2_000,
            thin: 20,
            n_chains: 3,
            seed: 1,
            adaptation_window: 100,
        }
    }

    /// One chain of 100000 iterations, thinned by 50 after 1000 burn-in.
    pub fn e0ns_default() -> Self {
        ChainConfig {
            n_iterations: 100_000,
            burn_in: 1_000,
            thin: 50,
            n_chains: 1,
            seed: 1,
            adaptation_window: 100,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), McmcError> {
        let bad = |m: &str| Err(McmcError::InvalidConfig(m.to_string()));
        if self.thin == 0 {
            return bad("thin must be at least 1");
        }
        if self.burn_in >= self.n_iterations {
            return bad("burn_in must be smaller than n_iterations");
        }
        if self.n_chains == 0 {
            return bad("n_chains must be at least 1");
        }
        if self.adaptation_window == 0 {
            return bad("adaptation_window must be at least 1");
        }
        Ok(())
    }

    pub fn retained_per_chain(&self) -> usize {
        (self.n_iterations - self.burn_in) / self.thin
    }

    fn is_retained(&self, iteration: usize) -> bool {
        iteration >= self.burn_in && (iteration - self.burn_in + 1) % self.thin == 0
    }
}

/// Metropolis block declared by a model.
#[derive(Debug, Clone)]
pub struct BlockSpec {
    pub name: String,
    pub scales: Vec<f64>,
    pub bounds: Vec<Bounds>,
}

impl BlockSpec {
    pub fn new(name: impl Into<String>, scales: Vec<f64>, bounds: Vec<Bounds>) -> Self {
        BlockSpec {
            name: name.into(),
            scales,
            bounds,
        }
    }

    pub fn scalar(name: impl Into<String>, scale: f64, bounds: Bounds) -> Self {
        Self::new(name, vec![scale], vec![bounds])
    }
}

/// Per-chain mutable sampler state handed to [`Model::sweep`].
pub struct SweepContext {
    blocks: Vec<AdaptiveBlock>,
    adapting: bool,
    pub chain: usize,
    pub iteration: usize,
}

impl SweepContext {
    pub fn new(specs: Vec<BlockSpec>, window: usize, chain: usize) -> Self {
        SweepContext {
            blocks: specs
                .into_iter()
                .map(|s| AdaptiveBlock::new(s.name, s.scales, s.bounds, window))
                .collect(),
            adapting: true,
            chain,
            iteration: 0,
        }
    }

    pub fn set_adapting(&mut self, adapting: bool) {
        self.adapting = adapting;
    }

    /// Metropolis update of `current` using block `index`.
    pub fn mh(
        &mut self,
        index: usize,
        current: &mut [f64],
        log_target: &mut dyn FnMut(&[f64]) -> f64,
        rng: &mut SimRng,
    ) -> Result<bool, McmcError> {
        self.blocks[index].step(current, log_target, self.adapting, rng)
    }

    pub fn blocks(&self) -> &[AdaptiveBlock] {
        &self.blocks
    }

    fn reset_counts(&mut self) {
        self.blocks.iter_mut().for_each(AdaptiveBlock::reset_counts);
    }
}

/// A hierarchical model expressed as one Gibbs sweep over its blocks.
pub trait Model: Sync {
    type State: Send;

    fn parameter_names(&self) -> Vec<String>;

    /// Metropolis blocks, referenced by position from [`Model::sweep`].
    fn blocks(&self) -> Vec<BlockSpec>;

    fn initialize(&self, chain: usize, rng: &mut SimRng) -> Result<Self::State, McmcError>;

    fn sweep(&self, state: &mut Self::State, ctx: &mut SweepContext, rng: &mut SimRng) -> Result<(), McmcError>;

    /// Appends the current values in `parameter_names` order.
    fn write_draw(&self, state: &Self::State, out: &mut Vec<f64>);
}

struct ChainOutput {
    rows: Vec<f64>,
    acceptance: Vec<(String, f64)>,
}

fn run_one<M: Model>(model: &M, config: &ChainConfig, chain: usize, n_params: usize) -> Result<ChainOutput, McmcError> {
    let mut rng = stream_rng(config.seed, &[chain as u64]);
    let at = |iteration: usize, e: McmcError| McmcError::AtIteration {
        chain,
        iteration,
        source: Box::new(e),
    };
    let mut state = model.initialize(chain, &mut rng).map_err(|e| at(0, e))?;
    let mut ctx = SweepContext::new(model.blocks(), config.adaptation_window, chain);
    let mut rows = Vec::with_capacity(config.retained_per_chain() * n_params);
    let names = model.parameter_names();
    for i in 0..config.n_iterations {
        if i == config.burn_in {
            ctx.set_adapting(false);
            ctx.reset_counts();
        }
        ctx.iteration = i;
        model.sweep(&mut state, &mut ctx, &mut rng).map_err(|e| at(i, e))?;
        if config.is_retained(i) {
            let start = rows.len();
            model.write_draw(&state, &mut rows);
            if rows.len() - start != n_params {
                return Err(at(i, McmcError::Model(format!(
                    "draw has {} values, expected {n_params}",
                    rows.len() - start
                ))));
            }
            if let Some(j) = rows[start..].iter().position(|v| !v.is_finite()) {
                return Err(at(i, McmcError::NonFiniteDraw { parameter: names[j].clone() }));
            }
        }
    }
    Ok(ChainOutput {
        rows,
        acceptance: ctx
            .blocks()
            .iter()
            .map(|b| (b.name.clone(), b.acceptance_rate()))
            .collect(),
    })
}

/// Runs `config.n_chains` independent chains in parallel and stacks the
/// retained draws chain by chain.
pub fn run_chain<M: Model>(model: &M, config: &ChainConfig) -> Result<PosteriorDraws, McmcError> {
    config.validate()?;
    let names = model.parameter_names();
    let n_params = names.len();
    let outputs: Vec<ChainOutput> = (0..config.n_chains)
        .into_par_iter()
        .map(|c| run_one(model, config, c, n_params))
        .collect::<Result<_, _>>()?;
    let mut acceptance: BTreeMap<String, f64> = BTreeMap::new();
    for out in &outputs {
        for (name, rate) in &out.acceptance {
            *acceptance.entry(name.clone()).or_default() += rate / config.n_chains as f64;
        }
    }
    let data = outputs.into_iter().flat_map(|o| o.rows).collect();
    PosteriorDraws::new(names, data, config.n_chains, *config, acceptance)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mcmc::conjugate::{conjugate_update, ConjugateKind, NormalMeanStats, NormalPrior};
    use crate::mcmc::dist::normal_ln_pdf;

    // y_i ~ N(mu, 1), mu ~ N(0, 10): the posterior for mu is normal.
    struct NormalNormal {
        y: Vec<f64>,
        use_mh: bool,
    }

    impl Model for NormalNormal {
        type State = f64;
        fn parameter_names(&self) -> Vec<String> {
            vec!["mu".into()]
        }
        fn blocks(&self) -> Vec<BlockSpec> {
            vec![BlockSpec::scalar("mu", 0.5, Bounds::REAL)]
        }
        fn initialize(&self, _: usize, _: &mut SimRng) -> Result<f64, McmcError> {
            Ok(0.0)
        }
        fn sweep(&self, mu: &mut f64, ctx: &mut SweepContext, rng: &mut SimRng) -> Result<(), McmcError> {
            let prior = NormalPrior { mean: 0.0, variance: 10.0 };
            if self.use_mh {
                let mut x = [*mu];
                let y = &self.y;
                ctx.mh(
                    0,
                    &mut x,
                    &mut |v| {
                        normal_ln_pdf(v[0], prior.mean, prior.variance)
                            + y.iter().map(|yi| normal_ln_pdf(*yi, v[0], 1.0)).sum::<f64>()
                    },
                    rng,
                )?;
                *mu = x[0];
            } else {
                let stats = NormalMeanStats::from_observations(&self.y, 1.0);
                *mu = conjugate_update(ConjugateKind::NormalMean { stats, prior }, rng)?.value;
            }
            Ok(())
        }
        fn write_draw(&self, mu: &f64, out: &mut Vec<f64>) {
            out.push(*mu);
        }
    }

    fn config(n: usize, burn: usize, thin: usize, chains: usize) -> ChainConfig {
        ChainConfig {
            n_iterations: n,
            burn_in: burn,
            thin,
            n_chains: chains,
            seed: 42,
            adaptation_window: 50,
        }
    }

    fn toy(use_mh: bool) -> NormalNormal {
        NormalNormal {
            y: vec![1.2, 0.7, 2.1, 1.9, 1.4],
            use_mh,
        }
    }

    #[test]
    fn retained_count() {
        let d = run_chain(&toy(false), &config(100, 50, 10, 1)).unwrap();
        assert_eq!(d.n_rows(), 5);
        let d = run_chain(&toy(false), &config(1000, 100, 7, 3)).unwrap();
        assert_eq!(d.n_rows(), 3 * (900 / 7));
    }

    #[test]
    fn conjugate_chain_matches_analytic_posterior() {
        let model = toy(false);
        let d = run_chain(&model, &config(20_000, 100, 1, 1)).unwrap();
        let sum: f64 = model.y.iter().sum();
        let prec = 0.1 + 5.0;
        let post_mean = sum / prec;
        let mc_se = (1.0 / prec / d.n_rows() as f64).sqrt();
        assert!((d.mean("mu").unwrap() - post_mean).abs() < 3.0 * mc_se);
    }

    #[test]
    fn seeded_runs_are_bitwise_identical() {
        let a = run_chain(&toy(true), &config(2000, 500, 3, 2)).unwrap();
        let b = run_chain(&toy(true), &config(2000, 500, 3, 2)).unwrap();
        assert_eq!(a.data(), b.data());
        let c = run_chain(&toy(true), &config(2000, 500, 3, 2).with_seed(43)).unwrap();
        assert_ne!(a.data(), c.data());
    }

    #[test]
    fn invalid_configs() {
        assert!(run_chain(&toy(false), &config(100, 100, 1, 1)).is_err());
        assert!(run_chain(&toy(false), &config(100, 10, 0, 1)).is_err());
        assert!(ChainConfig::assaf_default().validate().is_ok());
        assert_eq!(ChainConfig::assaf_default().retained_per_chain(), 4900);
        assert_eq!(ChainConfig::e0ns_default().retained_per_chain(), 1980);
    }

    // Two-sample Kolmogorov-Smirnov p-value (asymptotic).
    fn ks_p(a: &mut [f64], b: &mut [f64]) -> f64 {
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        let (n, m) = (a.len(), b.len());
        let (mut i, mut j, mut d) = (0, 0, 0.0f64);
        while i < n && j < m {
            if a[i] <= b[j] {
                i += 1;
            } else {
                j += 1;
            }
            d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
        }
        let en = ((n * m) as f64 / (n + m) as f64).sqrt();
        let lambda = (en + 0.12 + 0.11 / en) * d;
        let p: f64 = (1..100)
            .map(|k| {
                let k = k as f64;
                2.0 * (-1f64).powf(k - 1.0) * (-2.0 * k * k * lambda * lambda).exp()
            })
            .sum();
        p.clamp(0.0, 1.0)
    }

    #[test]
    fn conjugate_and_metropolis_agree() {
        let mut a = run_chain(&toy(false), &config(22_000, 2000, 20, 1)).unwrap().column("mu").unwrap();
        let mut b = run_chain(&toy(true), &config(22_000, 2000, 20, 1)).unwrap().column("mu").unwrap();
        let p = ks_p(&mut a, &mut b);
        assert!(p > 0.01, "KS p = {p}");
    }

    #[test]
    fn block_errors_carry_iteration() {
        struct Broken;
        impl Model for Broken {
            type State = ();
            fn parameter_names(&self) -> Vec<String> {
                vec!["x".into()]
            }
            fn blocks(&self) -> Vec<BlockSpec> {
                vec![]
            }
            fn initialize(&self, _: usize, _: &mut SimRng) -> Result<(), McmcError> {
                Ok(())
            }
            fn sweep(&self, _: &mut (), ctx: &mut SweepContext, _: &mut SimRng) -> Result<(), McmcError> {
                if ctx.iteration == 7 {
                    Err(McmcError::Model("boom".into()))
                } else {
                    Ok(())
                }
            }
            fn write_draw(&self, _: &(), out: &mut Vec<f64>) {
                out.push(0.0);
            }
        }
        let err = run_chain(&Broken, &config(20, 0, 1, 1)).unwrap_err();
        assert!(matches!(err, McmcError::AtIteration { iteration: 7, chain: 0, .. }));
    }
}

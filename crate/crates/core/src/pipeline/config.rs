//! Pipeline configuration, read from TOML.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::mcmc::{label_stream, stream_rng, ChainConfig};
use crate::reconstruct::Coherence;
use crate::Error;

/// MCMC settings without the seed, which each stage derives from the
/// pipeline seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainSettings {
    pub n_iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    #[serde(default = "one")]
    pub n_chains: usize,
    #[serde(default = "window")]
    pub adaptation_window: usize,
}

fn one() -> usize {
    1
}

fn window() -> usize {
    100
}

impl ChainSettings {
    /// 10000 iterations thinned by 10 after 1000 burn-in.
    pub fn desk() -> Self {
        ChainSettings {
            n_iterations: 10_000,
            burn_in: 1_000,
            thin: 10,
            n_chains: 1,
            adaptation_window: 100,
        }
    }

    pub fn with_seed(self, seed: u64) -> ChainConfig {
        ChainConfig {
            n_iterations: self.n_iterations,
            burn_in: self.burn_in,
            thin: self.thin,
            n_chains: self.n_chains,
            seed,
            adaptation_window: self.adaptation_window,
        }
    }
}

impl Default for ChainSettings {
    fn default() -> Self {
        Self::desk()
    }
}

/// Input files in the long CSV layouts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataPaths {
    pub mortality: PathBuf,
    pub assaf: PathBuf,
    pub e0: PathBuf,
    /// Optional `country,period_start,asaf_gap` file replacing the female
    /// ASSAF fit.
    #[serde(default)]
    pub asaf_gap: Option<PathBuf>,
}

/// Generated inputs instead of files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub countries: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GapSource {
    /// Least squares on the observed panel.
    #[default]
    Fit,
    /// Coefficients bundled with the library.
    Shipped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GapSettings {
    #[serde(default)]
    pub source: GapSource,
    /// Coefficient JSON file; overrides `source`.
    #[serde(default)]
    pub coefficients: Option<PathBuf>,
    #[serde(default = "hinge")]
    pub hinge: f64,
}

fn hinge() -> f64 {
    61.0
}

impl Default for GapSettings {
    fn default() -> Self {
        GapSettings {
            source: GapSource::default(),
            coefficients: None,
            hinge: hinge(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default = "seed")]
    pub seed: u64,
    pub out_dir: PathBuf,
    #[serde(default)]
    pub data: Option<DataPaths>,
    #[serde(default)]
    pub synthetic: Option<SyntheticSpec>,
    /// Posterior mean ASSAF samples carried through the e0ns stage.
    #[serde(default = "samples")]
    pub samples: usize,
    #[serde(default = "horizon")]
    pub horizon: usize,
    #[serde(default)]
    pub coherence: Coherence,
    #[serde(default)]
    pub assaf_chain: ChainSettings,
    #[serde(default)]
    pub e0ns_chain: ChainSettings,
    #[serde(default)]
    pub gap: GapSettings,
    /// Countries dropped from every input.
    #[serde(default)]
    pub exclude: Vec<String>,
}

fn seed() -> u64 {
    1
}

fn samples() -> usize {
    5
}

fn horizon() -> usize {
    crate::data::FORECAST_PERIODS
}

impl PipelineConfig {
    /// Desk-scale run on `countries` synthetic countries.
    pub fn desk(out_dir: impl Into<PathBuf>, countries: usize, seed: u64) -> Self {
        PipelineConfig {
            seed,
            out_dir: out_dir.into(),
            data: None,
            synthetic: Some(SyntheticSpec { countries, seed }),
            samples: samples(),
            horizon: horizon(),
            coherence: Coherence::default(),
            assaf_chain: ChainSettings::desk(),
            e0ns_chain: ChainSettings::desk(),
            gap: GapSettings::default(),
            exclude: Vec::new(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, Error> {
        let config: PipelineConfig = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    /// Reads a TOML file; relative paths in it are taken from the file's
    /// directory.
    pub fn load(path: &Path) -> Result<Self, Error> {
        let mut config = Self::from_toml(&std::fs::read_to_string(path)?)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let rebase = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        rebase(&mut config.out_dir);
        if let Some(d) = config.data.as_mut() {
            rebase(&mut d.mortality);
            rebase(&mut d.assaf);
            rebase(&mut d.e0);
            if let Some(g) = d.asaf_gap.as_mut() {
                rebase(g);
            }
        }
        if let Some(c) = config.gap.coefficients.as_mut() {
            rebase(c);
        }
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), Error> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        match (&self.data, &self.synthetic) {
            (Some(_), Some(_)) => return bad("give either [data] or [synthetic], not both"),
            (None, None) => return bad("one of [data] or [synthetic] is required"),
            _ => {}
        }
        if self.samples == 0 {
            return bad("samples must be at least 1");
        }
        if self.horizon == 0 {
            return bad("horizon must be at least 1");
        }
        for c in [&self.assaf_chain, &self.e0ns_chain] {
            c.with_seed(0).validate()?;
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, excluding the output directory.
    pub fn hash(&self) -> String {
        let mut copy = self.clone();
        copy.out_dir = PathBuf::new();
        let bytes = serde_json::to_vec(&copy).expect("config serializes");
        hex::encode(Sha256::digest(bytes))
    }

    /// Seed of one stage, derived from the pipeline seed and stage labels.
    pub fn stage_seed(&self, labels: &[&str]) -> u64 {
        use rand::RngCore;
        let streams: Vec<u64> = labels.iter().map(|l| label_stream(l)).collect();
        stream_rng(self.seed, &streams).next_u64()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_toml_takes_desk_defaults() {
        let c = PipelineConfig::from_toml("out_dir = \"out\"\n[synthetic]\ncountries = 5\nseed = 2\n").unwrap();
        assert_eq!(c.samples, 5);
        assert_eq!(c.horizon, 9);
        assert_eq!(c.e0ns_chain, ChainSettings::desk());
        assert_eq!(c.coherence, Coherence::SharedBx);
        assert_eq!(c.gap.source, GapSource::Fit);
    }

    #[test]
    fn rejects_unknown_keys_and_missing_inputs() {
        assert!(PipelineConfig::from_toml("out_dir = \"o\"\nsamplez = 3\n[synthetic]\ncountries = 1\nseed = 1\n").is_err());
        assert!(matches!(PipelineConfig::from_toml("out_dir = \"o\"\n"), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn hash_ignores_output_directory() {
        let a = PipelineConfig::desk("a", 5, 1);
        let mut b = PipelineConfig::desk("b", 5, 1);
        assert_eq!(a.hash(), b.hash());
        b.samples = 6;
        assert_ne!(a.hash(), b.hash());
        assert_ne!(a.stage_seed(&["e0ns", "0"]), a.stage_seed(&["e0ns", "1"]));
    }

    #[test]
    fn toml_round_trip() {
        let c = PipelineConfig::desk("out", 3, 9);
        let text = toml::to_string(&c).unwrap();
        assert_eq!(PipelineConfig::from_toml(&text).unwrap(), c);
    }
}

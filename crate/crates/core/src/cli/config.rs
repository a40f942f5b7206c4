//! Run configuration: where the network comes from, model parameters and
//! output settings. Loaded from TOML/JSON and overridden by flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::equilibrium::{lambda_from_fraction, ModelParams};
use crate::error::{Error, Result};
use crate::network::{Network, PlantedVariant};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    FirstBest,
    Granular,
    Coarse,
    Modular,
    Heterogeneous,
    Spectral,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GeneratorSpec {
    ErdosRenyi { n: usize, p: f64, seed: u64 },
    ErdosRenyiDirected { n: usize, p: f64, seed: u64, #[serde(default)] weighted: bool },
    CompleteBipartite { n_left: usize, n_right: usize },
    Cycles { lengths: Vec<usize> },
    /// Sampled when `seed` is given, expected adjacency otherwise.
    Planted { n: usize, p: f64, q: f64, seed: Option<u64> },
    Path { n: usize },
    Star { leaves: usize, #[serde(default)] directed: bool },
    Empty { n: usize },
    Complete { n: usize },
}

impl GeneratorSpec {
    pub fn build(&self) -> Result<Network> {
        match *self {
            GeneratorSpec::ErdosRenyi { n, p, seed } => Network::erdos_renyi(n, p, seed),
            GeneratorSpec::ErdosRenyiDirected { n, p, seed, weighted } => {
                Network::erdos_renyi_directed(n, p, seed, weighted)
            }
            GeneratorSpec::CompleteBipartite { n_left, n_right } => Network::complete_bipartite(n_left, n_right),
            GeneratorSpec::Cycles { ref lengths } => Network::regular_union_of_cycles(lengths),
            GeneratorSpec::Planted { n, p, q, seed } => {
                let variant = match seed {
                    Some(seed) => PlantedVariant::Sampled { seed },
                    None => PlantedVariant::Expected,
                };
                Network::planted_partition(n, p, q, variant)
            }
            GeneratorSpec::Path { n } => Network::path(n),
            GeneratorSpec::Star { leaves, directed } => Network::star(leaves, directed),
            GeneratorSpec::Empty { n } => Network::empty(n),
            GeneratorSpec::Complete { n } => Network::complete(n),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSource {
    pub file: Option<PathBuf>,
    pub generator: Option<GeneratorSpec>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsConfig {
    pub lambda: Option<f64>,
    /// Fraction of the largest admissible lambda for the loaded network.
    pub lambda_fraction: Option<f64>,
    pub r: Option<f64>,
    pub sigma2: Option<f64>,
    pub v: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Option<Mode>,
    #[serde(default)]
    pub network: NetworkSource,
    #[serde(default)]
    pub params: ParamsConfig,
    pub partition: Option<PathBuf>,
    pub modules: Option<PathBuf>,
    pub heterogeneous: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
}

impl RunConfig {
    /// Reads a TOML or (`.json`) JSON config. Relative paths inside are
    /// resolved against the config file's directory.
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let parse_err = |message: String| Error::Parse { line: 0, message };
        let mut cfg: RunConfig = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| parse_err(e.to_string()))?
        } else {
            toml::from_str(&text).map_err(|e| parse_err(e.to_string()))?
        };
        if let Some(dir) = path.parent() {
            let rebase = |p: &mut Option<PathBuf>| {
                if let Some(inner) = p.as_mut() {
                    if inner.is_relative() {
                        *inner = dir.join(&*inner);
                    }
                }
            };
            rebase(&mut cfg.network.file);
            rebase(&mut cfg.partition);
            rebase(&mut cfg.modules);
            rebase(&mut cfg.heterogeneous);
        }
        Ok(cfg)
    }

    pub fn load_network(&self) -> Result<Network> {
        match (&self.network.file, &self.network.generator) {
            (Some(file), None) => Network::read_edge_list(file),
            (None, Some(spec)) => spec.build(),
            (Some(_), Some(_)) => Err(Error::input("give either a network file or a generator, not both")),
            (None, None) => Err(Error::input("no network source given")),
        }
    }
}

/// Parameters together with the way lambda was chosen, for output metadata.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolvedParams {
    pub params: ModelParams,
    pub lambda_fraction: Option<f64>,
}

impl ParamsConfig {
    pub fn resolve(&self, spectral_radius: f64) -> Result<ResolvedParams> {
        let r = self.r.unwrap_or(1.0);
        let sigma2 = self.sigma2.unwrap_or(1.0);
        let (lambda, fraction) = match (self.lambda, self.lambda_fraction) {
            (Some(l), None) => (l, None),
            (None, Some(k)) => (lambda_from_fraction(k, spectral_radius, r * sigma2), Some(k)),
            (None, None) => (lambda_from_fraction(0.8, spectral_radius, r * sigma2), Some(0.8)),
            (Some(_), Some(_)) => return Err(Error::input("give either lambda or lambda_fraction, not both")),
        };
        let params = ModelParams::new(lambda, r, sigma2)?.with_v(self.v.unwrap_or(1.0))?;
        Ok(ResolvedParams {
            params,
            lambda_fraction: fraction,
        })
    }
}

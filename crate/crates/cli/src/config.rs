//! Experiment configuration files (TOML, or JSON by extension).

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use weaklink::network::{gen_clique, gen_island, gen_star, NetworkFile};
use weaklink::{NetworkSpec, SimParams};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Simulate,
    Exact,
    Bounds,
    Compare,
    Sweep,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Simulate => "simulate",
            Mode::Exact => "exact",
            Mode::Bounds => "bounds",
            Mode::Compare => "compare",
            Mode::Sweep => "sweep",
        }
    }
}

/// A generator call or an explicit edge list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NetworkConfig {
    Generator(Generator),
    Inline(NetworkFile),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "generator", rename_all = "snake_case", deny_unknown_fields)]
pub enum Generator {
    Clique {
        n: usize,
    },
    /// Islands wired by `weak` (island index pairs); hub at island 0 when omitted.
    Island {
        sizes: Vec<usize>,
        #[serde(default)]
        weak: Option<Vec<[usize; 2]>>,
    },
    Star {
        n: usize,
        m: usize,
    },
}

impl NetworkConfig {
    pub fn build(&self) -> CliResult<NetworkSpec> {
        Ok(match self {
            NetworkConfig::Inline(file) => NetworkSpec::try_from(file.clone())?,
            NetworkConfig::Generator(Generator::Clique { n }) => gen_clique(*n)?,
            NetworkConfig::Generator(Generator::Star { n, m }) => gen_star(*n, *m)?,
            NetworkConfig::Generator(Generator::Island { sizes, weak }) => {
                let topology: Vec<(usize, usize)> = match weak {
                    Some(pairs) => pairs.iter().map(|p| (p[0], p[1])).collect(),
                    None => weaklink::network::hub_topology(sizes.len(), 0),
                };
                gen_island(sizes, &topology)?
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedNetwork {
    pub name: String,
    pub network: NetworkConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodChoice {
    #[default]
    Exact,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    /// `values` are star sizes n; m = ⌈√n⌉ and the rates follow the scaling recipe.
    StarScaling,
    Lambda,
    Gamma,
    Phi,
    Epsilon,
    Tau,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub axis: Axis,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<Mode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub network: Option<NetworkConfig>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub networks: Vec<NamedNetwork>,
    pub params: SimParams<f64>,
    #[serde(default = "default_epochs")]
    pub epochs: u64,
    #[serde(default)]
    pub burn_in: u64,
    #[serde(default = "default_replicas")]
    pub replicas: u64,
    #[serde(default)]
    pub method: MethodChoice,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state_cap: Option<usize>,
}

fn default_epochs() -> u64 {
    100_000
}

fn default_replicas() -> u64 {
    8
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Parse { path: path.into(), message: e.to_string() })?;
        let parsed = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| e.to_string())
        } else {
            toml::from_str(&text).map_err(|e| e.to_string())
        };
        parsed.map_err(|message| CliError::Parse { path: path.into(), message })
    }

    /// Canonical JSON of the resolved configuration.
    pub fn canonical(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    pub fn hash(&self) -> String {
        hex(&Sha256::digest(self.canonical().as_bytes()))
    }

    /// Mode named by the subcommand, checked against the file's own `mode`.
    pub fn resolve_mode(&self, requested: Option<Mode>) -> CliResult<Mode> {
        match (requested, self.mode) {
            (Some(r), Some(m)) if r != m => {
                Err(CliError::Invalid(format!("config declares mode `{}` but `{}` was requested", m.name(), r.name())))
            }
            (Some(r), _) => Ok(r),
            (None, Some(m)) => Ok(m),
            (None, None) => Err(CliError::Invalid("config has no `mode`; use a mode subcommand".into())),
        }
    }

    pub fn network(&self) -> CliResult<NetworkSpec> {
        self.network.as_ref().ok_or_else(|| CliError::Invalid("`network` is required for this mode".into()))?.build()
    }

    /// Checks everything that does not need computation.
    pub fn validate(&self, mode: Mode) -> CliResult<()> {
        self.params.validate()?;
        let needs_budget = mode == Mode::Simulate
            || (mode == Mode::Compare && self.method == MethodChoice::MonteCarlo)
            || (mode == Mode::Sweep && (self.method == MethodChoice::MonteCarlo || self.is_star_sweep()));
        if needs_budget {
            if self.epochs == 0 || self.burn_in >= self.epochs {
                return Err(CliError::Invalid(format!("need 0 ≤ burn_in < epochs, got {} and {}", self.burn_in, self.epochs)));
            }
            if self.replicas == 0 {
                return Err(CliError::Invalid("replicas must be at least 1".into()));
            }
        }
        match mode {
            Mode::Compare => {
                if self.networks.is_empty() {
                    return Err(CliError::Invalid("compare needs a non-empty `networks` list".into()));
                }
                for n in &self.networks {
                    n.network.build()?;
                }
            }
            Mode::Sweep => {
                let sweep = self.sweep.as_ref().ok_or_else(|| CliError::Invalid("sweep needs a `sweep` table".into()))?;
                if sweep.values.is_empty() {
                    return Err(CliError::Invalid("sweep `values` is empty".into()));
                }
                if sweep.axis == Axis::StarScaling {
                    if let Some(bad) = sweep.values.iter().find(|v| v.fract() != 0.0 || **v < 3.0) {
                        return Err(CliError::Invalid(format!("star sizes must be integers ≥ 3, got {bad}")));
                    }
                } else {
                    self.network()?;
                }
            }
            _ => {
                self.network()?;
            }
        }
        Ok(())
    }

    fn is_star_sweep(&self) -> bool {
        self.sweep.as_ref().is_some_and(|s| s.axis == Axis::StarScaling)
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_generator_and_inline_networks() {
        let cfg: ExperimentConfig = toml::from_str(
            r#"
            mode = "compare"
            method = "exact"
            params = { lambda = 1.0, gamma = 5.0, phi = 1e4, epsilon = 1e-4 }
            [[networks]]
            name = "clique"
            network = { generator = "clique", n = 4 }
            [[networks]]
            name = "pair"
            network = { n = 2, weak = [[0, 1]] }
            "#,
        )
        .unwrap();
        assert_eq!(cfg.networks.len(), 2);
        assert_eq!(cfg.networks[1].network.build().unwrap().weak_edges(), &[(0, 1)]);
        cfg.validate(Mode::Compare).unwrap();
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let bad = r#"
            params = { lambda = 1.0, epsilonn = 0.1 }
        "#;
        assert!(toml::from_str::<ExperimentConfig>(bad).is_err());
        let bad = r#"
            params = { lambda = 1.0 }
            epoch = 5
        "#;
        assert!(toml::from_str::<ExperimentConfig>(bad).is_err());
        let bad = r#"
            params = { lambda = 1.0 }
            network = { generator = "star", n = 5, m = 2, hub = 1 }
        "#;
        assert!(toml::from_str::<ExperimentConfig>(bad).is_err());
    }

    #[test]
    fn mode_conflicts_are_reported() {
        let cfg: ExperimentConfig = toml::from_str("mode = \"exact\"\nparams = { lambda = 1.0 }").unwrap();
        assert!(cfg.resolve_mode(Some(Mode::Simulate)).is_err());
        assert_eq!(cfg.resolve_mode(None).unwrap(), Mode::Exact);
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a: ExperimentConfig = toml::from_str("params = { lambda = 1.0, epsilon = 0.1 }").unwrap();
        let b: ExperimentConfig = toml::from_str("params = { epsilon = 0.1, lambda = 1.0 }").unwrap();
        let c: ExperimentConfig = toml::from_str("params = { lambda = 1.0, epsilon = 0.2 }").unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
    }
}

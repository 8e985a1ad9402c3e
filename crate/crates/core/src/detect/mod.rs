//! Community detection: Louvain, Infomap, degree-corrected block model and
//! SLPA, with their objective functions. Every algorithm is deterministic
//! for a given graph, configuration and seed.

mod infomap;
mod louvain;
mod multilevel;
mod objective;
mod partition;
mod sbm;
mod similarity;
mod slpa;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Hpdn;

pub use infomap::infomap;
pub use louvain::louvain;
pub use objective::{map_equation, modularity, modularity_with_resolution};
pub use partition::{read_membership_csv, write_membership_csv, Membership, Partition};
pub use sbm::{block_model, sbm_description_length, sbm_terms, DescriptionLength};
pub use similarity::adjusted_rand_index;
pub use slpa::slpa;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Louvain,
    Infomap,
    #[serde(rename = "sbm")]
    BlockModel,
    Slpa,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [Algorithm::BlockModel, Algorithm::Infomap, Algorithm::Louvain, Algorithm::Slpa];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Louvain => "louvain",
            Algorithm::Infomap => "infomap",
            Algorithm::BlockModel => "sbm",
            Algorithm::Slpa => "slpa",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "louvain" => Ok(Algorithm::Louvain),
            "infomap" => Ok(Algorithm::Infomap),
            "sbm" | "blockmodel" | "block_model" | "block-model" => Ok(Algorithm::BlockModel),
            "slpa" => Ok(Algorithm::Slpa),
            _ => Err(format!("unknown algorithm `{s}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectConfig {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub slpa_iterations: usize,
    pub slpa_threshold: f64,
    pub louvain_resolution: f64,
    pub sbm_mcmc_sweeps: usize,
}

impl DetectConfig {
    pub fn new(algorithm: Algorithm) -> Self {
        DetectConfig {
            algorithm,
            seed: 0,
            slpa_iterations: 100,
            slpa_threshold: 0.5,
            louvain_resolution: 1.0,
            sbm_mcmc_sweeps: 100,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.slpa_threshold > 0.0 && self.slpa_threshold <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "SLPA threshold must lie in (0, 1], got {}",
                self.slpa_threshold
            )));
        }
        if self.slpa_iterations == 0 {
            return Err(Error::InvalidConfig("SLPA needs at least one iteration".into()));
        }
        if !(self.louvain_resolution > 0.0 && self.louvain_resolution.is_finite()) {
            return Err(Error::InvalidConfig(format!("resolution must be positive, got {}", self.louvain_resolution)));
        }
        Ok(())
    }
}

/// Runs the configured algorithm.
pub fn detect(g: &Hpdn, config: &DetectConfig) -> Result<Partition> {
    config.validate()?;
    match config.algorithm {
        Algorithm::Louvain => Ok(louvain(g, config)),
        Algorithm::Infomap => Ok(infomap(g, config)),
        Algorithm::BlockModel => block_model(g, config),
        Algorithm::Slpa => Ok(slpa(g, config)),
    }
}

/// Objective value reported next to a partition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ObjectiveValue {
    /// `modularity`, `map_equation_bits` or `description_length_nats`.
    pub name: &'static str,
    pub value: f64,
}

/// The objective `algorithm` optimizes, evaluated on `p`. SLPA optimizes
/// nothing and reports modularity.
pub fn objective_value(g: &Hpdn, p: &Partition, algorithm: Algorithm) -> Result<ObjectiveValue> {
    Ok(match algorithm {
        Algorithm::Louvain | Algorithm::Slpa => ObjectiveValue { name: "modularity", value: modularity(g, p)? },
        Algorithm::Infomap => ObjectiveValue { name: "map_equation_bits", value: map_equation(g, p)? },
        Algorithm::BlockModel => {
            ObjectiveValue { name: "description_length_nats", value: sbm_description_length(g, p)? }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        let mut c = DetectConfig::new(Algorithm::Slpa);
        assert!(c.validate().is_ok());
        c.slpa_threshold = 0.0;
        assert!(c.validate().is_err());
        c.slpa_threshold = 1.0;
        c.slpa_iterations = 0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn algorithm_names() {
        for a in Algorithm::ALL {
            assert_eq!(a.as_str().parse::<Algorithm>().unwrap(), a);
        }
        assert!("walktrap".parse::<Algorithm>().is_err());
    }
}

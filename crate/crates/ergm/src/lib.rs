//! Exponential-family random graph models with `edges` and
//! `nodematch(attr)` statistics, `P(G = g) ∝ exp(θᵀ s(g))`.
//!
//! Simulation is Metropolis–Hastings over single dyad toggles. Parameters
//! are fitted to target statistics by stochastic approximation, and
//! [`power_analysis`] runs simulated RDS surveys over model draws.

mod fit;
mod mcmc;
mod power;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use rdsnet_core::estimators::EstimateError;
use rdsnet_core::graph::{assign_attributes, assign_attributes_exact, GraphError};
use rdsnet_core::rds::RdsError;
use rdsnet_core::{AttributedGraph, StatTerm};

pub use fit::{fit_from_targets, ErgmFit, SaOptions, SaStep, TargetStatistics};
pub use mcmc::{draw_graph, mcmc_sample, sample_statistics, Chain, McmcOptions};
pub use power::{population_truth, power_analysis, PowerOptions, PowerRow};

#[derive(Debug, Error)]
pub enum ErgmError {
    #[error("invalid model: {0}")]
    InvalidSpec(String),
    #[error("infeasible targets: {0}")]
    InfeasibleTargets(String),
    #[error("invalid options: {0}")]
    Options(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Rds(#[from] RdsError),
    #[error(transparent)]
    Estimate(#[from] EstimateError),
}

/// How node labels for one attribute are drawn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeSpec {
    pub name: String,
    pub distribution: Vec<(String, f64)>,
    /// Exact quotas (largest remainder) instead of i.i.d. draws.
    #[serde(default = "yes")]
    pub exact: bool,
}

fn yes() -> bool {
    true
}

impl AttributeSpec {
    pub fn new(name: impl Into<String>, distribution: &[(&str, f64)]) -> Self {
        AttributeSpec {
            name: name.into(),
            distribution: distribution.iter().map(|(l, p)| (l.to_string(), *p)).collect(),
            exact: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErgmSpec {
    pub n: usize,
    pub statistics: Vec<StatTerm>,
    pub theta: Vec<f64>,
    pub attributes: Vec<AttributeSpec>,
}

impl ErgmSpec {
    pub fn new(n: usize, statistics: Vec<StatTerm>, theta: Vec<f64>) -> Self {
        ErgmSpec {
            n,
            statistics,
            theta,
            attributes: Vec::new(),
        }
    }

    pub fn with_attribute(mut self, attr: AttributeSpec) -> Self {
        self.attributes.retain(|a| a.name != attr.name);
        self.attributes.push(attr);
        self
    }

    pub fn n_dyads(&self) -> u64 {
        let n = self.n as u64;
        n * n.saturating_sub(1) / 2
    }

    pub fn validate(&self) -> Result<(), ErgmError> {
        validate_terms(self.n, &self.statistics, &self.attributes)?;
        if self.theta.len() != self.statistics.len() {
            return Err(ErgmError::InvalidSpec(format!(
                "{} coefficients for {} statistics",
                self.theta.len(),
                self.statistics.len()
            )));
        }
        if self.theta.iter().any(|t| !t.is_finite()) {
            return Err(ErgmError::InvalidSpec("coefficients must be finite".into()));
        }
        Ok(())
    }

    /// Edgeless graph on `n` nodes carrying freshly drawn labels.
    pub fn labeled_graph(&self, seed: u64) -> Result<AttributedGraph, ErgmError> {
        let mut g = AttributedGraph::empty(self.n);
        for (k, a) in self.attributes.iter().enumerate() {
            let s = rdsnet_core::rng::child_seed(seed, 0x1abe1, k as u64);
            g = if a.exact {
                assign_attributes_exact(g, &a.name, &a.distribution, s)?
            } else {
                assign_attributes(g, &a.name, &a.distribution, s)?
            };
        }
        Ok(g)
    }
}

fn validate_terms(n: usize, statistics: &[StatTerm], attributes: &[AttributeSpec]) -> Result<(), ErgmError> {
    if n < 2 {
        return Err(ErgmError::InvalidSpec(format!("need at least 2 nodes, got {n}")));
    }
    if statistics.is_empty() {
        return Err(ErgmError::InvalidSpec("no statistics".into()));
    }
    for (k, t) in statistics.iter().enumerate() {
        if statistics[..k].contains(t) {
            return Err(ErgmError::InvalidSpec(format!("statistic {t} repeated")));
        }
        if let StatTerm::NodeMatch(a) = t {
            if !attributes.iter().any(|s| &s.name == a) {
                return Err(ErgmError::InvalidSpec(format!("{t} has no attribute distribution")));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        let ok = ErgmSpec::new(10, vec![StatTerm::Edges], vec![0.0]);
        assert!(ok.validate().is_ok());
        assert_eq!(ok.n_dyads(), 45);
        assert!(ErgmSpec::new(10, vec![], vec![]).validate().is_err());
        assert!(ErgmSpec::new(10, vec![StatTerm::Edges, StatTerm::Edges], vec![0.0, 0.0]).validate().is_err());
        assert!(ErgmSpec::new(10, vec![StatTerm::Edges], vec![f64::NAN]).validate().is_err());
        assert!(ErgmSpec::new(10, vec![StatTerm::Edges], vec![0.0, 1.0]).validate().is_err());
        let nm = ErgmSpec::new(10, vec![StatTerm::NodeMatch("gender".into())], vec![1.0]);
        assert!(nm.validate().is_err());
        let nm = nm.with_attribute(AttributeSpec::new("gender", &[("male", 0.5), ("female", 0.5)]));
        assert!(nm.validate().is_ok());
        let g = nm.labeled_graph(1).unwrap();
        assert_eq!(g.attribute("gender").unwrap().values.iter().filter(|&&v| v == 0).count(), 5);
    }
}

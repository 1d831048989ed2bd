use rand::Rng;
use serde::{Deserialize, Serialize};

use rdsnet_core::graph::{compute_statistics, ChangeStats};
use rdsnet_core::rng;
use rdsnet_core::{AttributedGraph, StatTerm};

use crate::{ErgmError, ErgmSpec};

/// Metropolis–Hastings chain over dyad toggles. The proposal picks an
/// unordered dyad uniformly and toggles it; the move is accepted with
/// probability `min(1, exp(θᵀ Δs))`.
#[derive(Debug, Clone)]
pub struct Chain {
    graph: AttributedGraph,
    change: ChangeStats,
    theta: Vec<f64>,
    stats: Vec<f64>,
    delta: Vec<f64>,
    rng: rng::Rng,
    proposals: u64,
    accepted: u64,
}

impl Chain {
    pub fn new(graph: AttributedGraph, terms: &[StatTerm], theta: Vec<f64>, seed: u64) -> Result<Self, ErgmError> {
        if graph.node_count() < 2 {
            return Err(ErgmError::InvalidSpec("chain needs at least 2 nodes".into()));
        }
        if theta.len() != terms.len() {
            return Err(ErgmError::InvalidSpec("theta and statistics differ in length".into()));
        }
        let change = ChangeStats::new(&graph, terms)?;
        let stats = compute_statistics(&graph, terms)?.vector(terms);
        Ok(Chain {
            delta: vec![0.0; terms.len()],
            graph,
            change,
            theta,
            stats,
            rng: rng::rng(seed),
            proposals: 0,
            accepted: 0,
        })
    }

    /// One proposal; returns whether it was accepted.
    #[inline]
    pub fn step(&mut self) -> bool {
        let n = self.graph.node_count();
        let i = self.rng.random_range(0..n);
        let mut j = self.rng.random_range(0..n - 1);
        if j >= i {
            j += 1;
        }
        self.change.delta(&self.graph, i, j, &mut self.delta);
        let log_ratio: f64 = self.theta.iter().zip(&self.delta).map(|(t, d)| t * d).sum();
        self.proposals += 1;
        let accept = log_ratio >= 0.0 || self.rng.random::<f64>() < log_ratio.exp();
        if accept {
            self.graph.toggle_edge(i, j);
            for (s, d) in self.stats.iter_mut().zip(&self.delta) {
                *s += d;
            }
            self.accepted += 1;
        }
        accept
    }

    pub fn advance(&mut self, proposals: u64) {
        for _ in 0..proposals {
            self.step();
        }
    }

    pub fn graph(&self) -> &AttributedGraph {
        &self.graph
    }

    pub fn into_graph(self) -> AttributedGraph {
        self.graph
    }

    /// Current statistics, aligned to the chain's terms.
    pub fn statistics(&self) -> &[f64] {
        &self.stats
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn set_theta(&mut self, theta: &[f64]) {
        self.theta.copy_from_slice(theta);
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.proposals == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposals as f64
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct McmcOptions {
    /// Proposals before the first sample; default ten sweeps of all dyads.
    pub burn_in: Option<u64>,
    /// Proposals between samples; default one sweep.
    pub thin: Option<u64>,
    pub n_samples: usize,
    pub rng_seed: u64,
}

impl Default for McmcOptions {
    fn default() -> Self {
        McmcOptions {
            burn_in: None,
            thin: None,
            n_samples: 100,
            rng_seed: 0,
        }
    }
}

impl McmcOptions {
    pub(crate) fn resolve(&self, n_dyads: u64) -> Result<(u64, u64), ErgmError> {
        let burn_in = self.burn_in.unwrap_or(10 * n_dyads);
        let thin = self.thin.unwrap_or(n_dyads);
        if burn_in == 0 || thin == 0 {
            return Err(ErgmError::Options("burn_in and thin must be positive".into()));
        }
        Ok((burn_in, thin))
    }
}

fn start_chain(spec: &ErgmSpec, opts: &McmcOptions) -> Result<(Chain, u64), ErgmError> {
    spec.validate()?;
    let (burn_in, thin) = opts.resolve(spec.n_dyads())?;
    let g = spec.labeled_graph(rng::child_seed(opts.rng_seed, 1, 0))?;
    let mut chain = Chain::new(g, &spec.statistics, spec.theta.clone(), rng::child_seed(opts.rng_seed, 2, 0))?;
    chain.advance(burn_in);
    Ok((chain, thin))
}

/// `n_samples` graphs from one chain started at the empty graph.
pub fn mcmc_sample(spec: &ErgmSpec, opts: &McmcOptions) -> Result<Vec<AttributedGraph>, ErgmError> {
    let (mut chain, thin) = start_chain(spec, opts)?;
    let mut out = Vec::with_capacity(opts.n_samples);
    for k in 0..opts.n_samples {
        if k > 0 {
            chain.advance(thin);
        }
        out.push(chain.graph().clone());
    }
    Ok(out)
}

/// Like [`mcmc_sample`] but keeps only the statistic vectors.
pub fn sample_statistics(spec: &ErgmSpec, opts: &McmcOptions) -> Result<Vec<Vec<f64>>, ErgmError> {
    let (mut chain, thin) = start_chain(spec, opts)?;
    let mut out = Vec::with_capacity(opts.n_samples);
    for k in 0..opts.n_samples {
        if k > 0 {
            chain.advance(thin);
        }
        out.push(chain.statistics().to_vec());
    }
    Ok(out)
}

/// A single graph after `burn_in` proposals (default ten sweeps).
pub fn draw_graph(spec: &ErgmSpec, burn_in: Option<u64>, seed: u64) -> Result<AttributedGraph, ErgmError> {
    let opts = McmcOptions {
        burn_in,
        thin: None,
        n_samples: 1,
        rng_seed: seed,
    };
    Ok(start_chain(spec, &opts)?.0.into_graph())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn running_statistics_track_the_graph() {
        let spec = ErgmSpec::new(30, vec![StatTerm::Edges, StatTerm::NodeMatch("g".into())], vec![-1.0, 0.7])
            .with_attribute(crate::AttributeSpec::new("g", &[("a", 0.5), ("b", 0.5)]));
        let g = spec.labeled_graph(3).unwrap();
        let mut chain = Chain::new(g, &spec.statistics, spec.theta.clone(), 9).unwrap();
        chain.advance(20_000);
        let direct = compute_statistics(chain.graph(), &spec.statistics).unwrap().vector(&spec.statistics);
        assert_eq!(chain.statistics(), direct.as_slice());
        assert!(chain.acceptance_rate() > 0.0);
    }

    #[test]
    fn zero_burn_in_is_rejected() {
        let spec = ErgmSpec::new(5, vec![StatTerm::Edges], vec![0.0]);
        let opts = McmcOptions {
            burn_in: Some(0),
            ..Default::default()
        };
        assert!(mcmc_sample(&spec, &opts).is_err());
    }

    #[test]
    fn seeded_samples_repeat() {
        let spec = ErgmSpec::new(12, vec![StatTerm::Edges], vec![-0.5]);
        let opts = McmcOptions {
            n_samples: 5,
            rng_seed: 4,
            ..Default::default()
        };
        let a = mcmc_sample(&spec, &opts).unwrap();
        let b = mcmc_sample(&spec, &opts).unwrap();
        let edges = |v: &[AttributedGraph]| v.iter().map(|g| g.edges_sorted()).collect::<Vec<_>>();
        assert_eq!(edges(&a), edges(&b));
    }
}

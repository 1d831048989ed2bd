//! Chain (tree) bootstrap over the recruitment forest.
//!
//! A replicate draws as many seeds as the forest has, with replacement, and
//! regrows each drawn tree top-down: a node with `k` recruits gets `k`
//! recruits drawn with replacement from its own recruits.

use rand::Rng as _;
use rayon::prelude::*;
use serde::Serialize;

use super::EstimateError;
use crate::rds::ReferralForest;
use crate::rng;

pub trait ResampleStatistic: Sync {
    /// Statistic on a resample given as record indices (with repeats).
    fn evaluate(&self, sample: &[usize]) -> Option<f64>;
    /// Variance of the mean under simple random sampling, `s²_y / n`.
    fn srs_variance(&self) -> Option<f64>;
    /// Number of records the statistic indexes into.
    fn len(&self) -> usize;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BootstrapOptions {
    pub replicates: usize,
    pub rng_seed: u64,
}

impl Default for BootstrapOptions {
    fn default() -> Self {
        BootstrapOptions {
            replicates: 500,
            rng_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BootstrapSummary {
    pub se: f64,
    /// Bootstrap variance over the SRS variance; 0 for a constant variable.
    pub design_effect: Option<f64>,
    pub replicates: Vec<f64>,
}

/// One chain-bootstrap resample of node indices.
pub fn resample_forest(forest: &ReferralForest, rng: &mut rng::Rng, out: &mut Vec<usize>) {
    out.clear();
    let roots = forest.roots();
    if roots.is_empty() {
        return;
    }
    let mut stack = Vec::new();
    for _ in 0..roots.len() {
        stack.push(roots[rng.random_range(0..roots.len())]);
        while let Some(u) = stack.pop() {
            out.push(u);
            let kids = forest.children(u);
            for _ in 0..kids.len() {
                stack.push(kids[rng.random_range(0..kids.len())]);
            }
        }
    }
}

pub fn bootstrap_se<S: ResampleStatistic>(
    forest: &ReferralForest,
    statistic: &S,
    opts: &BootstrapOptions,
) -> Result<BootstrapSummary, EstimateError> {
    if opts.replicates < 100 {
        return Err(EstimateError::TooFewReplicates(opts.replicates));
    }
    if forest.len() != statistic.len() {
        return Err(EstimateError::Misaligned {
            forest: forest.len(),
            records: statistic.len(),
        });
    }
    let results: Vec<Option<f64>> = (0..opts.replicates)
        .into_par_iter()
        .map_init(Vec::new, |buf, b| {
            let mut rng = rng::substream(opts.rng_seed, b as u64);
            resample_forest(forest, &mut rng, buf);
            statistic.evaluate(buf)
        })
        .collect();
    let replicates: Vec<f64> = results.iter().flatten().copied().collect();
    let failed = results.len() - replicates.len();
    if failed * 10 > results.len() || replicates.len() < 2 {
        return Err(EstimateError::StatisticFailed {
            failed,
            total: results.len(),
        });
    }
    let m = replicates.len() as f64;
    let mean = replicates.iter().sum::<f64>() / m;
    let var = replicates.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0);
    let design_effect = match statistic.srs_variance() {
        Some(srs) if srs > 0.0 => Some(var / srs),
        Some(_) if var == 0.0 => Some(0.0),
        _ => None,
    };
    Ok(BootstrapSummary {
        se: var.sqrt(),
        design_effect,
        replicates,
    })
}

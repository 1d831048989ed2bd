use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use rdsnet_core::estimators::{rds2_with_se, BootstrapOptions, Measure, Rds2Options, Z95};
use rdsnet_core::rds::simulate_rds;
use rdsnet_core::{rng, AttributedGraph, RdsConfig, Variable};

use crate::mcmc::draw_graph;
use crate::{ErgmError, ErgmSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PowerOptions {
    pub replicates: usize,
    /// Distinct population graphs; replicate `r` uses graph `r % populations`.
    /// The default of one gives a fixed population.
    pub populations: usize,
    pub bootstrap_replicates: usize,
    /// Proposals before each population draw; default ten sweeps.
    pub burn_in: Option<u64>,
    pub weight: Variable,
    pub rng_seed: u64,
}

impl Default for PowerOptions {
    fn default() -> Self {
        PowerOptions {
            replicates: 100,
            populations: 1,
            bootstrap_replicates: 200,
            burn_in: None,
            weight: Variable::Acquaintance,
            rng_seed: 0,
        }
    }
}

/// Accuracy of the RDS-II estimate for one survey design. Metrics are
/// absent when no replicate produced an estimate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerRow {
    pub sample_size: usize,
    pub bias: Option<f64>,
    pub rmse: Option<f64>,
    pub ci_width: Option<f64>,
    pub coverage: Option<f64>,
    pub shortfall_rate: f64,
    /// More than half of the surveys fell short of the target.
    pub flagged: bool,
    /// Replicates that produced an estimate.
    pub estimates: usize,
}

/// Population value of `measure`: the share of nodes at the indicator's
/// level, or the mean degree for the acquaintance variable.
pub fn population_truth(g: &AttributedGraph, measure: &Measure) -> Result<f64, ErgmError> {
    let n = g.node_count() as f64;
    match measure {
        Measure::Indicator { attribute, level } => {
            let attr = g
                .attribute(attribute.as_str())
                .ok_or_else(|| ErgmError::Options(format!("graph has no `{attribute}` attribute")))?;
            let hits = (0..g.node_count()).filter(|&i| attr.label(i) == level).count();
            Ok(hits as f64 / n)
        }
        Measure::Variable(Variable::Acquaintance) => Ok(g.mean_degree()),
        Measure::Variable(v) => Err(ErgmError::Options(format!("no population value for `{v}`"))),
    }
}

struct Outcome {
    error: f64,
    half_width: f64,
}

/// Runs every design in `grid` on each replicate population and summarizes
/// RDS-II estimates of `estimand` against `truth`, or against the realized
/// population value when `truth` is absent. Replicates share their
/// population draw and recruitment seed across designs. Standard errors
/// get the finite-population factor `√(1 − n/N)`.
pub fn power_analysis(
    spec: &ErgmSpec,
    grid: &[RdsConfig],
    estimand: &Measure,
    truth: Option<f64>,
    opts: &PowerOptions,
) -> Result<Vec<PowerRow>, ErgmError> {
    spec.validate()?;
    if opts.replicates < 50 {
        return Err(ErgmError::Options(format!("need at least 50 replicates, got {}", opts.replicates)));
    }
    if grid.is_empty() {
        return Err(ErgmError::Options("empty design grid".into()));
    }
    if opts.populations == 0 {
        return Err(ErgmError::Options("populations must be positive".into()));
    }
    let populations: Vec<(AttributedGraph, f64)> = (0..opts.populations.min(opts.replicates))
        .into_par_iter()
        .map(|p| {
            let g = draw_graph(spec, opts.burn_in, rng::child_seed(opts.rng_seed, 1, p as u64))?;
            let t = match truth {
                Some(t) => t,
                None => population_truth(&g, estimand)?,
            };
            Ok((g, t))
        })
        .collect::<Result<_, ErgmError>>()?;

    let rds_opts = Rds2Options {
        weight: opts.weight,
        include_seeds: true,
    };
    let per_replicate: Vec<Vec<(Option<Outcome>, bool)>> = (0..opts.replicates)
        .into_par_iter()
        .map(|r| {
            let (g, t) = &populations[r % populations.len()];
            let big_n = g.node_count() as f64;
            grid.iter()
                .map(|cfg| {
                    let cfg = RdsConfig {
                        rng_seed: rng::child_seed(opts.rng_seed, 2, r as u64),
                        ..cfg.clone()
                    };
                    let sample = simulate_rds(g, &cfg)?;
                    let boot = BootstrapOptions {
                        replicates: opts.bootstrap_replicates,
                        rng_seed: rng::child_seed(opts.rng_seed, 3, r as u64),
                    };
                    let est = rds2_with_se(&sample.dataset, &sample.forest, estimand.clone(), &rds_opts, &boot);
                    let outcome = est.ok().and_then(|e| {
                        let fpc = (1.0 - sample.nodes.len() as f64 / big_n).max(0.0).sqrt();
                        e.se.map(|se| Outcome {
                            error: e.estimate - t,
                            half_width: Z95 * se * fpc,
                        })
                    });
                    Ok((outcome, sample.shortfall))
                })
                .collect::<Result<Vec<_>, ErgmError>>()
        })
        .collect::<Result<_, ErgmError>>()?;

    Ok(grid
        .iter()
        .enumerate()
        .map(|(c, cfg)| {
            let outcomes: Vec<&Outcome> = per_replicate.iter().filter_map(|row| row[c].0.as_ref()).collect();
            let shortfalls = per_replicate.iter().filter(|row| row[c].1).count();
            let shortfall_rate = shortfalls as f64 / opts.replicates as f64;
            let m = outcomes.len() as f64;
            let avg = |f: &dyn Fn(&Outcome) -> f64| (m > 0.0).then(|| outcomes.iter().map(|o| f(o)).sum::<f64>() / m);
            PowerRow {
                sample_size: cfg.target_sample,
                bias: avg(&|o| o.error),
                rmse: avg(&|o| o.error * o.error).map(f64::sqrt),
                ci_width: avg(&|o| 2.0 * o.half_width),
                coverage: avg(&|o| if o.error.abs() <= o.half_width { 1.0 } else { 0.0 }),
                shortfall_rate,
                flagged: shortfall_rate > 0.5,
                estimates: outcomes.len(),
            }
        })
        .collect())
}

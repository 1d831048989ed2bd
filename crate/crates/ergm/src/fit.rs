use serde::{Deserialize, Serialize};

use rdsnet_core::rng;
use rdsnet_core::{AttributedGraph, StatTerm};

use crate::mcmc::{Chain, McmcOptions};
use crate::{validate_terms, AttributeSpec, ErgmError, ErgmSpec};

/// Expected statistic values, aligned to the model's statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetStatistics {
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SaOptions {
    /// Phases before the first convergence check.
    pub phases: usize,
    /// Further phases are run while the check fails, up to this many.
    pub max_phases: usize,
    /// Phase `k` (from 0) uses step size `gain / (k + 1)`.
    pub gain: f64,
    pub samples_per_phase: usize,
    /// Draws at the starting value used for the diagonal scaling.
    pub pilot_samples: usize,
    /// Draws at the fitted value used to check the targets.
    pub check_samples: usize,
    pub burn_in: Option<u64>,
    pub thin: Option<u64>,
    pub rng_seed: u64,
}

impl Default for SaOptions {
    fn default() -> Self {
        SaOptions {
            phases: 3,
            max_phases: 8,
            gain: 0.5,
            samples_per_phase: 100,
            pilot_samples: 100,
            check_samples: 200,
            burn_in: None,
            thin: None,
            rng_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SaStep {
    pub phase: usize,
    pub iteration: usize,
    pub theta: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErgmFit {
    pub spec: ErgmSpec,
    pub targets: Vec<f64>,
    /// Mean statistics over the check draws at the fitted θ.
    pub achieved: Vec<f64>,
    /// Monte Carlo standard errors of `achieved`.
    pub mc_se: Vec<f64>,
    /// Every component within two standard errors of its target.
    pub converged: bool,
    pub phases_run: usize,
    pub trajectory: Vec<SaStep>,
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn same_dyads(attr: &str, graph: &AttributedGraph) -> f64 {
    let a = graph.attribute(attr).expect("validated attribute");
    let mut counts = vec![0u64; a.levels.len()];
    for &v in &a.values {
        counts[v as usize] += 1;
    }
    counts.iter().map(|&c| (c * c.saturating_sub(1) / 2) as f64).sum()
}

/// Dyad-independent starting values: edges from the non-matching density,
/// each nodematch from the log odds ratio of matching to non-matching ties.
/// Exact for a single nodematch term.
fn starting_theta(spec: &ErgmSpec, targets: &[f64], graph: &AttributedGraph) -> Result<Vec<f64>, ErgmError> {
    let n_dyads = spec.n_dyads() as f64;
    let clamp = |p: f64, of: f64| p.clamp(0.5 / of.max(1.0), 1.0 - 0.5 / of.max(1.0));
    let edges_at = spec.statistics.iter().position(|t| *t == StatTerm::Edges);
    let edges = edges_at.map(|k| targets[k]);
    let mut theta = vec![0.0; targets.len()];
    let mut base = None;
    for (k, t) in spec.statistics.iter().enumerate() {
        let StatTerm::NodeMatch(a) = t else { continue };
        let same = same_dyads(a, graph);
        if targets[k] > same + 1e-9 {
            return Err(ErgmError::InfeasibleTargets(format!(
                "{t} target {} exceeds the {same} same-{a} dyads",
                targets[k]
            )));
        }
        let p_same = clamp(targets[k] / same.max(1.0), same);
        theta[k] = match edges {
            Some(e) => {
                let other = n_dyads - same;
                let p_other = clamp((e - targets[k]) / other.max(1.0), other);
                base.get_or_insert(logit(p_other));
                logit(p_same) - logit(p_other)
            }
            None => logit(p_same),
        };
    }
    if let (Some(k), Some(e)) = (edges_at, edges) {
        theta[k] = base.unwrap_or_else(|| logit(clamp(e / n_dyads, n_dyads)));
    }
    Ok(theta)
}

fn check_targets(statistics: &[StatTerm], targets: &[f64], n_dyads: f64) -> Result<(), ErgmError> {
    if targets.len() != statistics.len() {
        return Err(ErgmError::InfeasibleTargets(format!(
            "{} targets for {} statistics",
            targets.len(),
            statistics.len()
        )));
    }
    let edges = statistics.iter().position(|t| *t == StatTerm::Edges).map(|k| targets[k]);
    for (t, &v) in statistics.iter().zip(targets) {
        if !v.is_finite() || v < 0.0 || v > n_dyads {
            return Err(ErgmError::InfeasibleTargets(format!("{t} target {v} outside [0, {n_dyads}]")));
        }
        if let (StatTerm::NodeMatch(_), Some(e)) = (t, edges) {
            if v > e {
                return Err(ErgmError::InfeasibleTargets(format!("{t} target {v} exceeds edges target {e}")));
            }
        }
    }
    Ok(())
}

fn mean_and_se(draws: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let m = draws.len() as f64;
    let k = draws.first().map_or(0, Vec::len);
    let mean: Vec<f64> = (0..k).map(|j| draws.iter().map(|d| d[j]).sum::<f64>() / m).collect();
    let se = (0..k)
        .map(|j| {
            let var = draws.iter().map(|d| (d[j] - mean[j]).powi(2)).sum::<f64>() / (m - 1.0).max(1.0);
            (var / m).sqrt()
        })
        .collect();
    (mean, se)
}

fn collect(chain: &mut Chain, count: usize, thin: u64) -> Vec<Vec<f64>> {
    (0..count)
        .map(|_| {
            chain.advance(thin);
            chain.statistics().to_vec()
        })
        .collect()
}

/// Robbins–Monro moment matching: `θ ← θ − a·W·(s − target)` with `W` the
/// inverse pilot variances. θ is averaged over each phase; after `phases`
/// phases the averaged θ is checked against the targets and, if any
/// component misses by more than two Monte Carlo standard errors, further
/// phases run until `max_phases`.
pub fn fit_from_targets(
    statistics: &[StatTerm],
    targets: &TargetStatistics,
    n: usize,
    attributes: &[AttributeSpec],
    opts: &SaOptions,
) -> Result<ErgmFit, ErgmError> {
    validate_terms(n, statistics, attributes)?;
    let mut spec = ErgmSpec {
        n,
        statistics: statistics.to_vec(),
        theta: vec![0.0; statistics.len()],
        attributes: attributes.to_vec(),
    };
    let n_dyads = spec.n_dyads() as f64;
    let targets = targets.values.clone();
    check_targets(statistics, &targets, n_dyads)?;
    if opts.phases == 0 || opts.samples_per_phase == 0 || opts.check_samples < 2 || opts.pilot_samples < 2 {
        return Err(ErgmError::Options("phases, samples and check sizes must be positive".into()));
    }
    if !(opts.gain > 0.0) {
        return Err(ErgmError::Options(format!("gain {} must be positive", opts.gain)));
    }
    let mcmc = McmcOptions {
        burn_in: opts.burn_in,
        thin: opts.thin,
        n_samples: 0,
        rng_seed: opts.rng_seed,
    };
    let (burn_in, thin) = mcmc.resolve(spec.n_dyads())?;
    let graph = spec.labeled_graph(rng::child_seed(opts.rng_seed, 1, 0))?;
    let mut theta = starting_theta(&spec, &targets, &graph)?;
    let mut chain = Chain::new(graph, statistics, theta.clone(), rng::child_seed(opts.rng_seed, 2, 0))?;

    chain.advance(burn_in);
    let pilot = collect(&mut chain, opts.pilot_samples, thin);
    let (_, pilot_se) = mean_and_se(&pilot);
    let weight: Vec<f64> = pilot_se
        .iter()
        .map(|se| {
            let var = se * se * opts.pilot_samples as f64;
            1.0 / var.max(1.0)
        })
        .collect();

    let mut trajectory = Vec::new();
    let (mut achieved, mut mc_se) = (Vec::new(), Vec::new());
    let mut converged = false;
    let mut phases_run = 0;
    for phase in 0..opts.max_phases.max(opts.phases) {
        let a = opts.gain / (phase + 1) as f64;
        let mut sum = vec![0.0; theta.len()];
        for iteration in 0..opts.samples_per_phase {
            chain.advance(thin);
            for (k, t) in theta.iter_mut().enumerate() {
                *t = (*t - a * weight[k] * (chain.statistics()[k] - targets[k])).clamp(-50.0, 50.0);
            }
            chain.set_theta(&theta);
            for (s, t) in sum.iter_mut().zip(&theta) {
                *s += t;
            }
            trajectory.push(SaStep {
                phase,
                iteration,
                theta: theta.clone(),
            });
        }
        theta = sum.iter().map(|s| s / opts.samples_per_phase as f64).collect();
        chain.set_theta(&theta);
        phases_run = phase + 1;
        if phases_run < opts.phases {
            continue;
        }
        chain.advance(burn_in);
        let draws = collect(&mut chain, opts.check_samples, thin);
        (achieved, mc_se) = mean_and_se(&draws);
        converged = achieved
            .iter()
            .zip(&mc_se)
            .zip(&targets)
            .all(|((m, se), t)| (m - t).abs() <= 2.0 * se || (m - t).abs() < 1e-9);
        if converged {
            break;
        }
    }
    spec.theta = theta;
    Ok(ErgmFit {
        spec,
        targets,
        achieved,
        mc_se,
        converged,
        phases_run,
        trajectory,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn infeasible_targets_are_rejected() {
        let terms = [StatTerm::Edges, StatTerm::NodeMatch("g".into())];
        let attrs = [AttributeSpec::new("g", &[("a", 0.5), ("b", 0.5)])];
        let t = |v: Vec<f64>| TargetStatistics { values: v };
        let opts = SaOptions::default();
        assert!(fit_from_targets(&terms, &t(vec![50.0, 60.0]), 20, &attrs, &opts).is_err());
        assert!(fit_from_targets(&terms, &t(vec![200.0, 10.0]), 20, &attrs, &opts).is_err());
        assert!(fit_from_targets(&terms, &t(vec![-1.0, 0.0]), 20, &attrs, &opts).is_err());
        // 10 + 10 labels give 90 same-label dyads
        assert!(fit_from_targets(&terms, &t(vec![150.0, 100.0]), 20, &attrs, &opts).is_err());
    }

    #[test]
    fn starting_values_solve_the_independent_dyad_case() {
        let spec = ErgmSpec::new(20, vec![StatTerm::Edges, StatTerm::NodeMatch("g".into())], vec![0.0, 0.0])
            .with_attribute(AttributeSpec::new("g", &[("a", 0.5), ("b", 0.5)]));
        let g = spec.labeled_graph(0).unwrap();
        let theta = starting_theta(&spec, &[40.0, 30.0], &g).unwrap();
        // 90 same dyads, 100 other dyads
        assert!((theta[0] - logit(0.1)).abs() < 1e-12);
        assert!((theta[1] - (logit(30.0 / 90.0) - logit(0.1))).abs() < 1e-12);
    }
}

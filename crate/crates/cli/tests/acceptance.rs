//! Acceptance run: one PASS/FAIL line per criterion. Exits nonzero on a
//! failure only when `RDSNET_ACCEPTANCE_STRICT=1`.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::Instant;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use rdsnet_core::estimators::{
    rds2_mean, rds2_point, rds2_with_se, resolve_weights, BootstrapOptions, Measure, MixingMatrix, Rds2Options,
};
use rdsnet_core::graph::{assign_attributes, compute_statistics, erdos_renyi, NodeAttribute};
use rdsnet_core::rds::{forest_from_dataset, simulate_rds, ReferralForest};
use rdsnet_core::rng::{self, child_seed};
use rdsnet_core::trees::{canonical_code, referral_degree_distribution, wave_stats, RootedTree};
use rdsnet_core::{
    fixture, load_dataset, zero_skip_summary, Attribute, AttributedGraph, Format, Network, OrphanPolicy, RdsConfig,
    StatTerm, SurveyDataset, SurveyRecord, Variable,
};
use rdsnet_countreg::{
    family_selection, fit, loglik, loglik_gradient, simulate_response, stepwise_backward, CountData, Family,
    FitOptions, ModelSpec,
};
use rdsnet_ergm::{
    fit_from_targets, power_analysis, sample_statistics, AttributeSpec, Chain, ErgmSpec, McmcOptions, PowerOptions,
    SaOptions, TargetStatistics,
};

const Z95: f64 = 1.959_963_984_540_054;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64;
    (m, var.sqrt())
}

// ---------------------------------------------------------------- 1

/// Seed-level cluster bootstrap: whole trees resampled with replacement,
/// recruits kept as observed.
fn seed_level_se(forest: &ReferralForest, y: &[f64], w: &[f64], seed: u64) -> f64 {
    let trees: Vec<Vec<usize>> = forest.roots().iter().map(|&r| forest.tree_nodes(r)).collect();
    let mut r = rng::rng(seed);
    let reps: Vec<f64> = (0..500)
        .map(|_| {
            let mut idx = Vec::new();
            for _ in 0..trees.len() {
                idx.extend_from_slice(&trees[r.random_range(0..trees.len())]);
            }
            rds2_point(idx.iter().map(|&i| (y[i], w[i]))).unwrap()
        })
        .collect();
    mean_sd(&reps).1
}

fn rds_recovery() -> (Outcome, String) {
    let start = Instant::now();
    let measure = Measure::Indicator {
        attribute: Attribute::Veteran,
        level: "1".into(),
    };
    let dist = [("1".to_string(), 0.3), ("0".to_string(), 0.7)];
    // (estimate - truth, chain SE, covered)
    let runs: Vec<(f64, f64, bool)> = (0..100u64)
        .into_par_iter()
        .map(|r| {
            let g = erdos_renyi(2000, 8.0, child_seed(1, 1, r)).unwrap();
            let g = assign_attributes(g, "veteran", &dist, child_seed(1, 2, r)).unwrap();
            let labels = &g.attribute("veteran").unwrap().values;
            let truth = labels.iter().filter(|&&v| v == 0).count() as f64 / g.node_count() as f64;
            let cfg = RdsConfig {
                n_seeds: 6,
                coupons_per_respondent: 3,
                acceptance_prob: 0.5,
                target_sample: 500,
                rng_seed: child_seed(1, 3, r),
                ..RdsConfig::default()
            };
            let s = simulate_rds(&g, &cfg).unwrap();
            let boot = BootstrapOptions {
                replicates: 500,
                rng_seed: child_seed(1, 4, r),
            };
            let est = rds2_with_se(&s.dataset, &s.forest, measure.clone(), &Rds2Options::default(), &boot).unwrap();
            let (lo, hi) = est.ci95.unwrap();
            (est.estimate - truth, est.se.unwrap(), lo <= truth && truth <= hi)
        })
        .collect();
    let secs = start.elapsed().as_secs_f64();
    let n = runs.len() as f64;
    let abs_bias = runs.iter().map(|r| r.0.abs()).sum::<f64>() / n;
    let signed = runs.iter().map(|r| r.0).sum::<f64>() / n;
    let rmse = (runs.iter().map(|r| r.0 * r.0).sum::<f64>() / n).sqrt();
    let mean_se = runs.iter().map(|r| r.1).sum::<f64>() / n;
    let coverage = runs.iter().filter(|r| r.2).count() as f64 / n;

    // same surveys, seed-level bootstrap for comparison
    let seed_level: Vec<(f64, bool)> = (0..100u64)
        .into_par_iter()
        .map(|r| {
            let g = erdos_renyi(2000, 8.0, child_seed(1, 1, r)).unwrap();
            let g = assign_attributes(g, "veteran", &dist, child_seed(1, 2, r)).unwrap();
            let labels = &g.attribute("veteran").unwrap().values;
            let truth = labels.iter().filter(|&&v| v == 0).count() as f64 / g.node_count() as f64;
            let cfg = RdsConfig {
                n_seeds: 6,
                coupons_per_respondent: 3,
                acceptance_prob: 0.5,
                target_sample: 500,
                rng_seed: child_seed(1, 3, r),
                ..RdsConfig::default()
            };
            let s = simulate_rds(&g, &cfg).unwrap();
            let w = resolve_weights(&s.dataset, Variable::Acquaintance).unwrap();
            let y: Vec<f64> = s.nodes.iter().map(|&v| f64::from(u8::from(labels[v] == 0))).collect();
            let est = rds2_point(y.iter().zip(&w).map(|(&a, &b)| (a, b))).unwrap();
            let se = seed_level_se(&s.forest, &y, &w, child_seed(1, 5, r));
            (se, (est - truth).abs() <= Z95 * se)
        })
        .collect();
    let seed_se = seed_level.iter().map(|r| r.0).sum::<f64>() / n;
    let seed_cov = seed_level.iter().filter(|r| r.1).count() as f64 / n;
    (
        outcome(
            abs_bias < 0.05 && (0.85..=0.99).contains(&coverage) && secs < 120.0,
            format!(
                "mean |bias| {abs_bias:.4} (signed {signed:+.4}), coverage {coverage:.2}, \
                 empirical SD {rmse:.4} vs mean chain-bootstrap SE {mean_se:.4}, {secs:.1} s"
            ),
        ),
        format!("seed-level bootstrap on the same surveys: mean SE {seed_se:.4}, coverage {seed_cov:.2}"),
    )
}

// ---------------------------------------------------------------- 2

fn degree_dataset(rows: &[(u32, u32)]) -> SurveyDataset {
    let records = rows
        .iter()
        .enumerate()
        .map(|(i, &(y, d))| SurveyRecord {
            close_friend_degree: Some(y),
            acquaintance_degree: Some(d),
            ..SurveyRecord::new(format!("r{i}"))
        })
        .collect();
    SurveyDataset::from_records("2024", records, 20, OrphanPolicy::Seed).unwrap().0
}

fn weighted_mean_exactness() -> Outcome {
    let opts = Rds2Options::default();
    let hand = rds2_mean(&degree_dataset(&[(10, 1), (20, 2)]), Variable::CloseFriend, &opts).unwrap().estimate;
    let mut r = rng::rng(2);
    let mut exact = 0;
    for _ in 0..100 {
        let n = r.random_range(1..40);
        let d = r.random_range(1..50);
        let ys: Vec<u32> = (0..n).map(|_| r.random_range(0..20)).collect();
        let rows: Vec<(u32, u32)> = ys.iter().map(|&y| (y, d)).collect();
        let got = rds2_mean(&degree_dataset(&rows), Variable::CloseFriend, &opts).unwrap().estimate;
        let plain = ys.iter().map(|&y| f64::from(y)).sum::<f64>() / n as f64;
        exact += usize::from(got == plain);
    }
    outcome(
        (hand - 40.0 / 3.0).abs() < 1e-9 && exact == 100,
        format!("hand example {hand:.10}; equal degrees exact in {exact}/100"),
    )
}

// ---------------------------------------------------------------- 3, 4, 5

/// `x`, `h` standard normal; `g` two levels; `k` eight levels.
fn covariates(n: usize, seed: u64) -> CountData {
    let mut r = rng::rng(seed);
    let mut d = CountData::new("y", vec![0; n]);
    let x: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut r)).collect();
    let h: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut r)).collect();
    let g: Vec<String> = (0..n).map(|_| if r.random::<bool>() { "b" } else { "a" }.to_string()).collect();
    let k: Vec<String> = (0..n).map(|_| format!("k{}", r.random_range(0..8))).collect();
    d.add_numeric("x", x).unwrap();
    d.add_numeric("h", h).unwrap();
    d.add_categorical("g", &g, &["a".to_string(), "b".to_string()]).unwrap();
    d.add_categorical("k", &k, &[]).unwrap();
    d
}

fn simulate(spec: &ModelSpec, params: &[f64], n: usize, seed: u64) -> CountData {
    let mut d = covariates(n, child_seed(seed, 1, 0));
    d.y = simulate_response(spec, &d, params, child_seed(seed, 2, 0)).unwrap();
    d
}

/// Close-friendship profile: about 45% zeros, overdispersed counts.
fn friendship() -> (ModelSpec, Vec<f64>) {
    let spec = ModelSpec::new(Family::Zinb, "y").conditional(["x", "g"]).zero(["x"]);
    (spec, vec![1.25, 0.5, -0.2, -0.7, 0.8, (0.5f64).ln()])
}

fn zero_share(d: &CountData) -> f64 {
    d.y.iter().filter(|&&v| v == 0).count() as f64 / d.len() as f64
}

fn count_model_recovery() -> Outcome {
    let (spec, truth) = friendship();
    let covered: Vec<Vec<bool>> = (0..100u64)
        .into_par_iter()
        .map(|r| {
            let data = simulate(&spec, &truth, 1500, 3000 + r);
            match fit(&spec, &data, &FitOptions::default()) {
                Ok(f) => f
                    .coefficients()
                    .zip(&truth)
                    .map(|(c, t)| c.se.is_some_and(|se| (c.estimate - t).abs() <= Z95 * se))
                    .collect(),
                Err(_) => vec![false; truth.len()],
            }
        })
        .collect();
    let per_param: Vec<usize> = (0..truth.len()).map(|j| covered.iter().filter(|c| c[j]).count()).collect();

    let mut worst = 0.0f64;
    let mut r = rng::rng(33);
    for family in Family::ALL {
        let spec = if family.zero_inflated() {
            ModelSpec::new(family, "y").conditional(["x", "g"]).zero(["x"])
        } else {
            ModelSpec::new(family, "y").conditional(["x", "g"])
        };
        let mut base = vec![0.6, 0.4, -0.3];
        if family.zero_inflated() {
            base.extend([-0.5, 0.8]);
        }
        if family.has_dispersion() {
            base.push((0.7f64).ln());
        }
        let data = simulate(&spec, &base, 300, 5);
        for _ in 0..20 {
            let theta: Vec<f64> = base.iter().map(|v| v + r.random_range(-0.5..0.5)).collect();
            let g = loglik_gradient(&spec, &theta, &data).unwrap();
            for j in 0..theta.len() {
                let step = 1e-5;
                let mut tp = theta.clone();
                let mut tm = theta.clone();
                tp[j] += step;
                tm[j] -= step;
                let fd = (loglik(&spec, &tp, &data).unwrap() - loglik(&spec, &tm, &data).unwrap()) / (2.0 * step);
                worst = worst.max((g[j] - fd).abs() / fd.abs().max(1.0));
            }
        }
    }
    outcome(
        per_param.iter().all(|&c| c >= 90) && worst < 1e-5,
        format!("Wald coverage per parameter {per_param:?}/100; worst gradient relative error {worst:.2e}"),
    )
}

fn family_selection_fidelity() -> (Outcome, String) {
    let (spec, truth) = friendship();
    let cands: Vec<ModelSpec> = Family::ALL.iter().map(|&f| spec.with_family(f)).collect();
    let runs: Vec<(bool, bool, f64)> = (0..100u64)
        .into_par_iter()
        .map(|r| {
            let data = simulate(&spec, &truth, 1500, 4000 + r);
            let rows = family_selection(&data, &cands, &FitOptions::default()).unwrap();
            let ranked: Vec<Family> = rows.iter().filter(|r| r.rank.is_some()).map(|r| r.spec.family).collect();
            let best = ranked.first() == Some(&Family::Zinb);
            let worst = ranked.len() == 4 && ranked[3] == Family::Poisson;
            (best, worst, zero_share(&data))
        })
        .collect();
    let zinb_best = runs.iter().filter(|r| r.0).count();
    let poisson_worst = runs.iter().filter(|r| r.1).count();
    let zeros = runs.iter().map(|r| r.2).sum::<f64>() / runs.len() as f64;

    // acquaintance pattern: overdispersed without zero inflation
    let nb = ModelSpec::new(Family::NegBin, "y").conditional(["x", "g"]);
    let nb_truth = [2.5, 0.4, -0.3, (0.7f64).ln()];
    let nb_cands: Vec<ModelSpec> = Family::ALL
        .iter()
        .map(|&f| if f.zero_inflated() { nb.with_family(f).zero(["x", "g"]) } else { nb.with_family(f) })
        .collect();
    let nb_first = |r: &u64| {
        let data = simulate(&nb, &nb_truth, 1500, 5000 + r);
        let rows = family_selection(&data, &nb_cands, &FitOptions::default()).unwrap();
        rows[0].rank == Some(1) && rows[0].spec.family == Family::NegBin
    };
    let nb_best = (0..100u64).into_par_iter().filter(nb_first).count();
    let long_run = nb_best + (100..400u64).into_par_iter().filter(nb_first).count();
    (
        outcome(
            zinb_best >= 95 && poisson_worst >= 95 && nb_best >= 90,
            format!(
                "friendship profile ({:.0}% zeros): ZINB best {zinb_best}/100, Poisson worst {poisson_worst}/100; NB data: NB best {nb_best}/100",
                100.0 * zeros
            ),
        ),
        format!("NB best over 400 NB datasets: {long_run}/400"),
    )
}

fn stepwise_correctness() -> (Outcome, String) {
    let (spec, truth) = friendship();
    let has = |terms: &[String], t: &str| terms.iter().any(|s| s == t);
    let with_noise = |noise: &str| {
        let mut full = spec.clone();
        full.conditional_terms.push(noise.to_string());
        full
    };
    let factor = with_noise("k");
    let runs: Vec<(bool, bool)> = (0..100u64)
        .into_par_iter()
        .map(|r| {
            let data = simulate(&spec, &truth, 1500, 6000 + r);
            let best = stepwise_backward(&factor, &data, &FitOptions::default()).unwrap().best.spec;
            let removed = !has(&best.conditional_terms, "k");
            let kept = has(&best.conditional_terms, "x") && has(&best.zero_terms, "x");
            (removed, kept)
        })
        .collect();
    let removed = runs.iter().filter(|r| r.0).count();
    let kept = runs.iter().filter(|r| r.1).count();

    let single = with_noise("h");
    let single_removed = (0..100u64)
        .into_par_iter()
        .filter(|&r| {
            let data = simulate(&spec, &truth, 1500, 7000 + r);
            let best = stepwise_backward(&single, &data, &FitOptions::default()).unwrap().best.spec;
            !has(&best.conditional_terms, "h")
        })
        .count();
    (
        outcome(
            removed >= 90 && kept >= 95,
            format!("8-level noise factor removed {removed}/100; strong covariates kept {kept}/100"),
        ),
        format!("single 1-df noise covariate removed {single_removed}/100 (AICc limit about 84)"),
    )
}

// ---------------------------------------------------------------- 6

fn all_trees(n: usize) -> Vec<Vec<Option<usize>>> {
    fn rec(i: usize, parent: &mut Vec<Option<usize>>, out: &mut Vec<Vec<Option<usize>>>) {
        if i == parent.len() {
            out.push(parent.clone());
            return;
        }
        for p in 0..i {
            parent[i] = Some(p);
            rec(i + 1, parent, out);
        }
    }
    let mut out = Vec::new();
    let mut parent = vec![None; n];
    rec(1, &mut parent, &mut out);
    out
}

struct Plain {
    children: Vec<Vec<usize>>,
    size: Vec<usize>,
}

impl Plain {
    fn new(parent: &[Option<usize>]) -> Self {
        let n = parent.len();
        let mut children = vec![Vec::new(); n];
        let mut size = vec![1; n];
        for i in (0..n).rev() {
            if let Some(p) = parent[i] {
                children[p].push(i);
                size[p] += size[i];
            }
        }
        Plain { children, size }
    }
}

fn iso(a: &Plain, u: usize, b: &Plain, v: usize) -> bool {
    if a.size[u] != b.size[v] || a.children[u].len() != b.children[v].len() {
        return false;
    }
    fn assign(a: &Plain, cu: &[usize], b: &Plain, cv: &[usize], k: usize, used: &mut [bool]) -> bool {
        if k == cu.len() {
            return true;
        }
        for j in 0..cv.len() {
            if !used[j] && iso(a, cu[k], b, cv[j]) {
                used[j] = true;
                if assign(a, cu, b, cv, k + 1, used) {
                    return true;
                }
                used[j] = false;
            }
        }
        false
    }
    let mut used = vec![false; b.children[v].len()];
    assign(a, &a.children[u], b, &b.children[v], 0, &mut used)
}

fn tree_canonicalization() -> Outcome {
    let start = Instant::now();
    let mut counts = Vec::new();
    let mut agree = true;
    for n in 1..=8 {
        let parents = all_trees(n);
        let plain: Vec<Plain> = parents.iter().map(|p| Plain::new(p)).collect();
        let mut reps: Vec<usize> = Vec::new();
        let mut class = Vec::new();
        for (t, tree) in plain.iter().enumerate() {
            match reps.iter().position(|&r| iso(&plain[r], 0, tree, 0)) {
                Some(c) => class.push(c),
                None => {
                    class.push(reps.len());
                    reps.push(t);
                }
            }
        }
        let codes: Vec<String> = parents
            .iter()
            .map(|p| canonical_code(&RootedTree::from_parents(p).unwrap(), false))
            .collect();
        let mut by_code: BTreeMap<&str, usize> = BTreeMap::new();
        let mut by_class: BTreeMap<usize, &str> = BTreeMap::new();
        for (code, &c) in codes.iter().zip(&class) {
            agree &= *by_code.entry(code).or_insert(c) == c && *by_class.entry(c).or_insert(code) == code.as_str();
        }
        agree &= codes.iter().collect::<BTreeSet<_>>().len() == reps.len();
        counts.push(reps.len());
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        agree && secs < 60.0,
        format!("classes per size {counts:?}, partitions {}, {secs:.1} s", if agree { "identical" } else { "DIFFER" }),
    )
}

// ---------------------------------------------------------------- 7

fn mixing_exactness() -> Outcome {
    let cats = vec!["male".to_string(), "female".to_string()];
    let pairs = std::iter::repeat_n((0, 0), 79)
        .chain(std::iter::repeat_n((0, 1), 21))
        .chain(std::iter::repeat_n((1, 0), 60))
        .chain(std::iter::repeat_n((1, 1), 40));
    let m = MixingMatrix::from_pairs(cats, pairs);
    let exact = m.rates == vec![vec![0.79, 0.21], vec![0.60, 0.40]];

    let mut r = rng::rng(7);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let k = r.random_range(1..8);
        let len = r.random_range(1..500);
        let pairs: Vec<(usize, usize)> = (0..len).map(|_| (r.random_range(0..k), r.random_range(0..k))).collect();
        let m = MixingMatrix::from_pairs((0..k).map(|c| c.to_string()).collect(), pairs);
        for (row, counts) in m.rates.iter().zip(&m.counts) {
            if counts.iter().sum::<u64>() > 0 {
                worst = worst.max((row.iter().sum::<f64>() - 1.0).abs());
            }
        }
    }
    outcome(
        exact && worst < 1e-9,
        format!("rows {:?}; worst row-sum error {worst:.1e} over 1000 random inputs", m.rates),
    )
}

// ---------------------------------------------------------------- 8

fn ergm_correctness() -> Outcome {
    let spec = ErgmSpec::new(50, vec![StatTerm::Edges], vec![0.0]);
    let opts = McmcOptions {
        n_samples: 200,
        rng_seed: 1,
        ..Default::default()
    };
    let dyads = spec.n_dyads() as f64;
    let dens: Vec<f64> = sample_statistics(&spec, &opts).unwrap().iter().map(|s| s[0] / dyads).collect();
    let (m, sd) = mean_sd(&dens);
    let mc_se = sd / (dens.len() as f64).sqrt();
    let density_ok = (m - 0.5).abs() <= 3.0 * mc_se;

    // all 64 graphs on 4 nodes labeled a, a, b, b
    let mut g = AttributedGraph::empty(4);
    let labels = NodeAttribute {
        levels: vec!["a".into(), "b".into()],
        values: vec![0, 0, 1, 1],
    };
    g.set_attribute("g", labels.clone());
    let terms = vec![StatTerm::Edges, StatTerm::NodeMatch("g".into())];
    let theta = [-0.5, 1.2];
    let pairs = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];
    let weight: Vec<f64> = (0..64usize)
        .map(|code| {
            let edges = pairs.iter().enumerate().filter(|(b, _)| code >> b & 1 == 1).map(|(_, &e)| e);
            let mut h = AttributedGraph::from_edges(4, edges).unwrap();
            h.set_attribute("g", labels.clone());
            let s = compute_statistics(&h, &terms).unwrap().vector(&terms);
            (theta[0] * s[0] + theta[1] * s[1]).exp()
        })
        .collect();
    let z: f64 = weight.iter().sum();
    let mut chain = Chain::new(g, &terms, theta.to_vec(), 17).unwrap();
    chain.advance(1000);
    let mut visits = [0u64; 64];
    let proposals = 1_000_000;
    for _ in 0..proposals {
        chain.step();
        let code = pairs
            .iter()
            .enumerate()
            .filter(|(_, &(i, j))| chain.graph().has_edge(i, j))
            .fold(0usize, |c, (b, _)| c | 1 << b);
        visits[code] += 1;
    }
    let tv = 0.5 * visits.iter().zip(&weight).map(|(&v, &w)| (v as f64 / proposals as f64 - w / z).abs()).sum::<f64>();

    // gender mixing targets: 352 men, 148 women, 366/194/65 ties
    let gender = AttributeSpec::new("gender", &[("male", 0.704), ("female", 0.296)]);
    let terms = [StatTerm::Edges, StatTerm::NodeMatch("gender".into())];
    let targets = vec![625.0, 431.0];
    let sa = SaOptions {
        rng_seed: 3,
        ..Default::default()
    };
    let fit = fit_from_targets(&terms, &TargetStatistics { values: targets.clone() }, 500, &[gender], &sa).unwrap();
    let round_trip = fit.converged && (0..2).all(|k| (fit.achieved[k] - targets[k]).abs() <= 2.0 * fit.mc_se[k]);
    outcome(
        density_ok && tv < 0.02 && round_trip,
        format!(
            "density {m:.4} (MC SE {mc_se:.4}); n=4 TV {tv:.4}; targets {targets:?} achieved [{:.1}, {:.1}] (MC SE [{:.1}, {:.1}])",
            fit.achieved[0], fit.achieved[1], fit.mc_se[0], fit.mc_se[1]
        ),
    )
}

// ---------------------------------------------------------------- 9

fn ergm_population(n: usize) -> ErgmSpec {
    let p = 8.0 / (n - 1) as f64;
    ErgmSpec::new(n, vec![StatTerm::Edges], vec![(p / (1.0 - p)).ln()])
        .with_attribute(AttributeSpec::new("veteran", &[("1", 0.3), ("0", 0.7)]))
}

fn power_sanity() -> Outcome {
    let veteran = Measure::Indicator {
        attribute: Attribute::Veteran,
        level: "1".into(),
    };
    let grid: Vec<RdsConfig> = [100, 250, 500, 1000]
        .iter()
        .map(|&t| RdsConfig {
            target_sample: t,
            ..RdsConfig::default()
        })
        .collect();
    let opts = PowerOptions {
        rng_seed: 9,
        ..Default::default()
    };
    let rows = power_analysis(&ergm_population(2000), &grid, &veteran, None, &opts).unwrap();
    let widths: Vec<f64> = rows.iter().map(|r| r.ci_width.unwrap_or(f64::NAN)).collect();
    let inversions = widths.windows(2).filter(|w| !(w[1] < w[0])).count();

    let n = 300;
    let census = RdsConfig {
        n_seeds: n,
        target_sample: n,
        ..RdsConfig::default()
    };
    let census_opts = PowerOptions {
        replicates: 50,
        populations: 50,
        bootstrap_replicates: 100,
        rng_seed: 2,
        ..Default::default()
    };
    let census_row = &power_analysis(&ergm_population(n), &[census], &veteran, None, &census_opts).unwrap()[0];
    let bias = census_row.bias.unwrap_or(f64::NAN);
    outcome(
        inversions <= 1 && bias.abs() < 0.005,
        format!(
            "ci_width {:?} ({inversions} inversions); census bias {bias:+.5}",
            widths.iter().map(|w| (w * 1e4).round() / 1e4).collect::<Vec<_>>()
        ),
    )
}

// ---------------------------------------------------------------- 10

fn fixture_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/synthetic_2024.csv")
}

fn fixture_reproduction() -> Outcome {
    let (ds, _) = load_dataset(&fixture_path(), Format::Csv, fixture::TOP_CODE, OrphanPolicy::Reject).unwrap();
    let forest = forest_from_dataset(&ds).unwrap();
    let boot = BootstrapOptions {
        replicates: 500,
        rng_seed: 11,
    };
    let friends = rds2_with_se(&ds, &forest, Measure::Variable(Variable::CloseFriend), &Rds2Options::default(), &boot)
        .unwrap()
        .estimate;
    let referral = referral_degree_distribution(&forest).mean;
    let max_wave = wave_stats(&forest).max_wave;
    let published = [
        (Network::Kinship, 0.82),
        (Network::CloseFriendship, 0.45),
        (Network::Acquaintance, 0.12),
        (Network::Referral, 0.56),
    ];
    let zs = zero_skip_summary(&ds);
    let fractions: Vec<f64> = published
        .iter()
        .map(|(net, _)| zs.iter().find(|r| r.network == *net).unwrap().fraction_zero_or_skip)
        .collect();
    let zeros_ok = fractions.iter().zip(&published).all(|(f, (_, p))| (f - p).abs() <= 0.01);
    outcome(
        (2.31..=2.69).contains(&friends) && (referral - 0.789).abs() <= 0.01 && zeros_ok && max_wave == 20,
        format!(
            "close friendship {friends:.3}; referral mean {referral:.3}; zero/skip {:?}; max wave {max_wave}",
            fractions.iter().map(|f| (f * 1000.0).round() / 1000.0).collect::<Vec<_>>()
        ),
    )
}

// ---------------------------------------------------------------- 11

fn run_cli(args: &[&str], threads: usize, out: &Path) -> bool {
    Command::new(env!("CARGO_BIN_EXE_rdsnet"))
        .env_remove("RDSNET_OUT_DIR")
        .args(args)
        .args(["--threads", &threads.to_string(), "--quiet", "--out-dir"])
        .arg(out)
        .status()
        .is_ok_and(|s| s.success())
}

fn dir_bytes(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect()
}

fn determinism() -> Outcome {
    let data = fixture_path();
    let data = data.to_str().unwrap();
    let commands: Vec<(&str, Vec<&str>)> = vec![
        ("validate", vec!["validate", data]),
        ("estimate", vec!["estimate", data, "--rng-seed", "5", "--bootstrap", "200"]),
        ("fit", vec!["fit", data, "--rng-seed", "5", "--n-starts", "4"]),
        ("trees", vec!["trees", data]),
        ("mixing", vec!["mixing", data]),
        (
            "simulate",
            vec!["simulate", "--n", "1500", "--attribute", "veteran:1=0.3,0=0.7", "--rng-seed", "5", "--write-graph"],
        ),
        ("ergm-fit", vec!["ergm-fit", "--n", "200", "--targets", "800", "--rng-seed", "5"]),
        (
            "power",
            vec![
                "power", "--n", "400", "--theta", "-3.9", "--attribute", "veteran:1=0.3,0=0.7", "--estimand",
                "veteran=1", "--sample-sizes", "100,200", "--replicates", "50", "--bootstrap", "100", "--rng-seed", "5",
            ],
        ),
    ];
    let mut differing = Vec::new();
    for (name, args) in &commands {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let ok = run_cli(args, 1, a.path()) && run_cli(args, 3, b.path());
        let (da, db) = (dir_bytes(a.path()), dir_bytes(b.path()));
        if !ok || da.is_empty() || da != db {
            differing.push(*name);
        }
    }
    outcome(
        differing.is_empty(),
        if differing.is_empty() {
            format!("{} commands byte-identical under 1 and 3 threads", commands.len())
        } else {
            format!("outputs differ or failed: {differing:?}")
        },
    )
}

fn main() -> ExitCode {
    let mut failed = 0;
    let mut report = |id: usize, name: &str, o: Outcome| {
        println!("{} criterion {id:>2} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    };
    let (recovery, info) = rds_recovery();
    report(1, "RDS-II recovery", recovery);
    println!("INFO criterion  1 {info}");
    report(2, "weighted-mean exactness", weighted_mean_exactness());
    report(3, "count-model recovery", count_model_recovery());
    let (selection, info) = family_selection_fidelity();
    report(4, "family-selection fidelity", selection);
    println!("INFO criterion  4 {info}");
    let (stepwise, info) = stepwise_correctness();
    report(5, "stepwise correctness", stepwise);
    println!("INFO criterion  5 {info}");
    report(6, "tree canonicalization", tree_canonicalization());
    report(7, "mixing-matrix exactness", mixing_exactness());
    report(8, "ERGM correctness", ergm_correctness());
    report(9, "power-analysis sanity", power_sanity());
    report(10, "fixture reproduction", fixture_reproduction());
    report(11, "determinism", determinism());
    println!("{} of 11 criteria passed", 11 - failed);
    // failures are reported, not fatal, unless strict mode is requested
    let strict = std::env::var("RDSNET_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    if failed > 0 && strict {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}

use std::process::ExitCode;
use std::str::FromStr;

use anyhow::{anyhow, bail, Result};
use serde_json::json;

use rdsnet_core::estimators::Measure;
use rdsnet_core::rds::SeedSelection;
use rdsnet_core::rng::child_seed;
use rdsnet_core::{Attribute, RdsConfig, StatTerm, Variable};
use rdsnet_ergm::{
    fit_from_targets, power_analysis, AttributeSpec, ErgmFit, ErgmSpec, PowerOptions, SaOptions, TargetStatistics,
};

use super::{fresh_seed, parse_attribute, Context};
use crate::config::{require, ErgmFitSection, PowerSection};
use crate::output::{int, num, opt, text, Metadata, Output, Table};

fn terms(names: &[String]) -> Result<Vec<StatTerm>> {
    names
        .iter()
        .map(|s| StatTerm::from_str(s.trim()).map_err(|e| anyhow!("statistic `{s}`: {e}")))
        .collect()
}

fn attributes(specs: &[String]) -> Result<Vec<AttributeSpec>> {
    specs.iter().map(|s| parse_attribute(s)).collect()
}

/// `attribute=level` is a proportion, a variable name a mean.
pub fn parse_estimand(s: &str) -> Result<Measure> {
    match s.split_once('=') {
        Some((attr, level)) => Ok(Measure::Indicator {
            attribute: Attribute::from_str(attr.trim())?,
            level: level.trim().to_string(),
        }),
        None => Ok(Measure::Variable(Variable::from_str(s.trim())?)),
    }
}

fn fit_table(fit: &ErgmFit) -> Table {
    let mut t = Table::new(&["term", "theta", "target", "achieved", "mc_se"]);
    for (k, term) in fit.spec.statistics.iter().enumerate() {
        t.push(vec![
            text(term.to_string()),
            num(fit.spec.theta[k]),
            num(fit.targets[k]),
            num(fit.achieved[k]),
            num(fit.mc_se[k]),
        ]);
    }
    t
}

fn say_fit(ctx: &Context, fit: &ErgmFit) {
    ctx.say(format!(
        "{} after {} phases",
        if fit.converged { "converged" } else { "NOT converged" },
        fit.phases_run
    ));
    ctx.say(format!("  {:<20} {:>10} {:>12} {:>12}", "term", "theta", "target", "achieved"));
    for (k, term) in fit.spec.statistics.iter().enumerate() {
        ctx.say(format!(
            "  {:<20} {:>10.4} {:>12.2} {:>12.2}",
            term.to_string(),
            fit.spec.theta[k],
            fit.targets[k],
            fit.achieved[k]
        ));
    }
}

pub fn run_fit(ctx: &Context, args: ErgmFitSection) -> Result<ExitCode> {
    let sa = SaOptions::default();
    let args = args.or(ErgmFitSection {
        statistics: Some(vec!["edges".into()]),
        attributes: Some(Vec::new()),
        phases: Some(sa.phases),
        max_phases: Some(sa.max_phases),
        gain: Some(sa.gain),
        samples_per_phase: Some(sa.samples_per_phase),
        rng_seed: Some(fresh_seed()),
        ..Default::default()
    });
    let seed = require(args.rng_seed, "rng_seed")?;
    let n = require(args.n, "n")?;
    let stats = terms(&require(args.statistics.clone(), "statistics")?)?;
    let targets = require(args.targets.clone(), "targets")?;
    if targets.len() != stats.len() {
        bail!("{} targets for {} statistics", targets.len(), stats.len());
    }
    let attrs = attributes(&require(args.attributes.clone(), "attributes")?)?;
    let opts = SaOptions {
        phases: require(args.phases, "phases")?,
        max_phases: require(args.max_phases, "max_phases")?,
        gain: require(args.gain, "gain")?,
        samples_per_phase: require(args.samples_per_phase, "samples_per_phase")?,
        rng_seed: seed,
        ..sa
    };
    let fit = fit_from_targets(&stats, &TargetStatistics { values: targets }, n, &attrs, &opts)?;
    let meta = Metadata::new("ergm-fit", Some(seed), &args)?;
    let mut out = Output::new(ctx.out_dir.clone(), ctx.format, meta)?;
    out.table("ergm_fit", &fit_table(&fit))?;

    let mut traj = Table::new(&["phase", "iteration", "term", "theta"]);
    for step in &fit.trajectory {
        for (k, term) in fit.spec.statistics.iter().enumerate() {
            traj.push(vec![int(step.phase as u64), int(step.iteration as u64), text(term.to_string()), num(step.theta[k])]);
        }
    }
    out.table("ergm_trajectory", &traj)?;
    out.json(
        "ergm_result.json",
        json!({
            "n": fit.spec.n,
            "statistics": fit.spec.statistics.iter().map(ToString::to_string).collect::<Vec<_>>(),
            "theta": fit.spec.theta,
            "attributes": fit.spec.attributes,
            "targets": fit.targets,
            "achieved": fit.achieved,
            "mc_se": fit.mc_se,
            "converged": fit.converged,
            "phases_run": fit.phases_run,
        }),
    )?;
    say_fit(ctx, &fit);
    ctx.report_written(out.written());
    Ok(ExitCode::SUCCESS)
}

pub fn run_power(ctx: &Context, args: PowerSection) -> Result<ExitCode> {
    let po = PowerOptions::default();
    let base = RdsConfig::default();
    let args = args.or(PowerSection {
        n: Some(2000),
        statistics: Some(vec!["edges".into()]),
        attributes: Some(Vec::new()),
        sample_sizes: Some(vec![100, 250, 500, 1000]),
        n_seeds: Some(base.n_seeds),
        seed_selection: Some(SeedSelection::DegreeProportional),
        coupons: Some(base.coupons_per_respondent),
        acceptance_prob: Some(base.acceptance_prob),
        replicates: Some(po.replicates),
        populations: Some(po.populations),
        bootstrap: Some(po.bootstrap_replicates),
        weight: Some(po.weight),
        rng_seed: Some(fresh_seed()),
        ..Default::default()
    });
    let seed = require(args.rng_seed, "rng_seed")?;
    let n = require(args.n, "n")?;
    let stats = terms(&require(args.statistics.clone(), "statistics")?)?;
    let attrs = attributes(&require(args.attributes.clone(), "attributes")?)?;
    let estimand = parse_estimand(&require(args.estimand.clone(), "estimand")?)?;

    let spec = match (&args.theta, &args.targets) {
        (Some(theta), _) => {
            let mut spec = ErgmSpec::new(n, stats, theta.clone());
            for a in attrs {
                spec = spec.with_attribute(a);
            }
            spec
        }
        (None, Some(targets)) => {
            let sa = SaOptions {
                rng_seed: child_seed(seed, 7, 0),
                ..SaOptions::default()
            };
            let fit = fit_from_targets(&stats, &TargetStatistics { values: targets.clone() }, n, &attrs, &sa)?;
            say_fit(ctx, &fit);
            if !fit.converged {
                eprintln!("warning: ERGM fit did not converge; using its last coefficients");
            }
            fit.spec
        }
        (None, None) => bail!("power needs either `theta` or `targets`"),
    };

    let grid: Vec<RdsConfig> = require(args.sample_sizes.clone(), "sample_sizes")?
        .into_iter()
        .map(|size| -> Result<RdsConfig> {
            Ok(RdsConfig {
                n_seeds: require(args.n_seeds, "n_seeds")?,
                seed_selection: require(args.seed_selection, "seed_selection")?,
                coupons_per_respondent: require(args.coupons, "coupons")?,
                acceptance_prob: require(args.acceptance_prob, "acceptance_prob")?,
                target_sample: size,
                max_waves: u32::MAX,
                rng_seed: seed,
            })
        })
        .collect::<Result<_>>()?;
    let opts = PowerOptions {
        replicates: require(args.replicates, "replicates")?,
        populations: require(args.populations, "populations")?,
        bootstrap_replicates: require(args.bootstrap, "bootstrap")?,
        burn_in: None,
        weight: require(args.weight, "weight")?,
        rng_seed: seed,
    };
    let rows = power_analysis(&spec, &grid, &estimand, args.truth, &opts)?;
    let meta = Metadata::new("power", Some(seed), &args)?;
    let mut out = Output::new(ctx.out_dir.clone(), ctx.format, meta)?;
    let mut table = Table::new(&[
        "sample_size",
        "bias",
        "rmse",
        "ci_width",
        "coverage",
        "shortfall_rate",
        "flagged",
        "estimates",
    ]);
    ctx.say(format!("  {:>8} {:>10} {:>10} {:>10} {:>9} {:>10}", "n", "bias", "rmse", "ci_width", "coverage", "shortfall"));
    for r in &rows {
        table.push(vec![
            int(r.sample_size as u64),
            opt(r.bias),
            opt(r.rmse),
            opt(r.ci_width),
            opt(r.coverage),
            num(r.shortfall_rate),
            serde_json::Value::Bool(r.flagged),
            int(r.estimates as u64),
        ]);
        let show = |x: Option<f64>| x.map_or_else(|| "---".to_string(), |v| format!("{v:.4}"));
        ctx.say(format!(
            "  {:>8} {:>10} {:>10} {:>10} {:>9} {:>10.2}{}",
            r.sample_size,
            show(r.bias),
            show(r.rmse),
            show(r.ci_width),
            show(r.coverage),
            r.shortfall_rate,
            if r.flagged { "  flagged: shortfall above 50%" } else { "" }
        ));
    }
    out.table("power", &table)?;
    out.json(
        "power_model.json",
        json!({
            "n": spec.n,
            "statistics": spec.statistics.iter().map(ToString::to_string).collect::<Vec<_>>(),
            "theta": spec.theta,
            "attributes": spec.attributes,
        }),
    )?;
    ctx.report_written(out.written());
    Ok(ExitCode::SUCCESS)
}

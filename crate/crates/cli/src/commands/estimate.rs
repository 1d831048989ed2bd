use std::process::ExitCode;

use anyhow::Result;

use rdsnet_core::estimators::{rds2_with_se, subgroup_table, BootstrapOptions, EstimateError, Measure, Rds2Options};
use rdsnet_core::rds::forest_from_dataset;
use rdsnet_core::rng::child_seed;
use rdsnet_core::{Attribute, Network, OrphanPolicy, RdsEstimate, Variable};

use super::{fresh_seed, load, Context, DEFAULT_TOP_CODE};
use crate::config::{require, EstimateSection};
use crate::output::{int, num, opt, text, Metadata, Output, Table};

const COLUMNS: [&str; 7] = ["term", "estimate", "ci_low", "ci_high", "se", "de", "n"];

fn row(term: String, est: Option<&RdsEstimate>) -> Vec<serde_json::Value> {
    match est {
        Some(e) => vec![
            text(term),
            num(e.estimate),
            opt(e.ci95.map(|c| c.0)),
            opt(e.ci95.map(|c| c.1)),
            opt(e.se),
            opt(e.design_effect),
            int(e.n as u64),
        ],
        None => vec![text(term), opt(None), opt(None), opt(None), opt(None), opt(None), int(0u64)],
    }
}

fn fmt_est(e: Option<&RdsEstimate>) -> String {
    match e {
        Some(e) => match e.ci95 {
            Some((lo, hi)) => format!("{:.2} ({:.2}, {:.2})", e.estimate, lo, hi),
            None => format!("{:.2}", e.estimate),
        },
        None => "---".into(),
    }
}

pub fn run(ctx: &Context, args: EstimateSection) -> Result<ExitCode> {
    let args = args.or(EstimateSection {
        top_code: Some(DEFAULT_TOP_CODE),
        orphan_policy: Some(OrphanPolicy::Seed),
        weight: Some(Variable::Acquaintance),
        bootstrap: Some(500),
        by: Some(vec![Attribute::Gender, Attribute::Race]),
        networks: Some(Network::ALL.to_vec()),
        rng_seed: Some(fresh_seed()),
        ..Default::default()
    });
    let path = require(args.dataset.clone(), "dataset")?;
    let seed = require(args.rng_seed, "rng_seed")?;
    let networks = require(args.networks.clone(), "networks")?;
    let by = require(args.by.clone(), "by")?;
    let replicates = require(args.bootstrap, "bootstrap")?;
    let weight = require(args.weight, "weight")?;
    let ds = load(&path, args.top_code.unwrap_or(DEFAULT_TOP_CODE), args.orphan_policy.unwrap_or_default())?;
    let forest = forest_from_dataset(&ds)?;
    let meta = Metadata::new("estimate", Some(seed), &args)?;
    let mut out = Output::new(ctx.out_dir.clone(), ctx.format, meta)?;

    let panels = [("with_seeds", true), ("without_seeds", false)];
    for (p, &(panel, include_seeds)) in panels.iter().enumerate() {
        let opts = Rds2Options { weight, include_seeds };
        ctx.say(format!("RDS-II mean degree, {}", panel.replace('_', " ")));
        let mut table = Table::new(&COLUMNS);
        for (k, &network) in networks.iter().enumerate() {
            let boot = BootstrapOptions {
                replicates,
                rng_seed: child_seed(seed, p as u64, k as u64),
            };
            let est = match rds2_with_se(&ds, &forest, Measure::Variable(network.variable()), &opts, &boot) {
                Ok(e) => Some(e),
                Err(EstimateError::NoUsableRecords) => None,
                Err(e) => return Err(e.into()),
            };
            ctx.say(format!("  {:<18} {}", network.label(), fmt_est(est.as_ref())));
            table.push(row(network.label().to_string(), est.as_ref()));
        }
        out.table(&format!("estimate_{panel}_all"), &table)?;

        for (a, &attr) in by.iter().enumerate() {
            let boot = BootstrapOptions {
                replicates,
                rng_seed: child_seed(seed, p as u64, 1000 + a as u64),
            };
            let rows = subgroup_table(&ds, Some(&forest), attr, &networks, &opts, Some(&boot))?;
            let mut table = Table::new(&COLUMNS);
            for r in &rows {
                table.push(row(format!("{} | {}", r.level, r.network.label()), r.estimate.as_ref()));
            }
            out.table(&format!("estimate_{panel}_{}", attr.name()), &table)?;
        }
    }
    ctx.report_written(out.written());
    Ok(ExitCode::SUCCESS)
}

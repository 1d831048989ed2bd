use std::fs;
use std::io::BufReader;
use std::process::ExitCode;

use anyhow::{Context as _, Result};
use serde_json::json;

use rdsnet_core::estimators::Rds2Options;
use rdsnet_core::graph::{
    assign_attributes, assign_attributes_exact, erdos_renyi, read_attributes, read_edge_list, write_attributes,
    write_edge_list,
};
use rdsnet_core::rds::{simulate_rds, wave_trajectory, SeedSelection};
use rdsnet_core::rng::child_seed;
use rdsnet_core::{data, AttributedGraph, RdsConfig, Variable};

use super::{fresh_seed, parse_attribute, Context};
use crate::config::{require, SimulateSection};
use crate::output::{int, num, text, Format, Metadata, Output, Table};

fn population(args: &SimulateSection, seed: u64) -> Result<AttributedGraph> {
    let mut g = match &args.edge_list {
        Some(path) => {
            let f = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
            read_edge_list(BufReader::new(f)).with_context(|| format!("reading {}", path.display()))?
        }
        None => erdos_renyi(require(args.n, "n")?, require(args.mean_degree, "mean_degree")?, child_seed(seed, 1, 0))?,
    };
    if let Some(path) = &args.node_attributes {
        let f = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
        read_attributes(&mut g, f).with_context(|| format!("reading {}", path.display()))?;
    }
    for (k, spec) in args.attributes.iter().flatten().enumerate() {
        let a = parse_attribute(spec)?;
        let s = child_seed(seed, 2, k as u64);
        g = if a.exact {
            assign_attributes_exact(g, &a.name, &a.distribution, s)?
        } else {
            assign_attributes(g, &a.name, &a.distribution, s)?
        };
    }
    Ok(g)
}

pub fn run(ctx: &Context, args: SimulateSection) -> Result<ExitCode> {
    let base = RdsConfig::default();
    let args = args.or(SimulateSection {
        n: Some(2000),
        mean_degree: Some(8.0),
        attributes: Some(Vec::new()),
        n_seeds: Some(base.n_seeds),
        seed_selection: Some(SeedSelection::DegreeProportional),
        coupons: Some(base.coupons_per_respondent),
        acceptance_prob: Some(base.acceptance_prob),
        target_sample: Some(base.target_sample),
        max_waves: Some(base.max_waves),
        write_graph: Some(false),
        rng_seed: Some(fresh_seed()),
        ..Default::default()
    });
    let seed = require(args.rng_seed, "rng_seed")?;
    let g = population(&args, seed)?;
    let cfg = RdsConfig {
        n_seeds: require(args.n_seeds, "n_seeds")?,
        seed_selection: require(args.seed_selection, "seed_selection")?,
        coupons_per_respondent: require(args.coupons, "coupons")?,
        acceptance_prob: require(args.acceptance_prob, "acceptance_prob")?,
        target_sample: require(args.target_sample, "target_sample")?,
        max_waves: require(args.max_waves, "max_waves")?,
        rng_seed: child_seed(seed, 3, 0),
    };
    let sample = simulate_rds(&g, &cfg)?;
    let meta = Metadata::new("simulate", Some(seed), &args)?;
    let mut out = Output::new(ctx.out_dir.clone(), ctx.format, meta)?;

    match ctx.format {
        Format::Csv => {
            let mut body = Vec::new();
            data::write_records(&mut body, &sample.dataset.records, data::Format::Csv)?;
            out.csv_bytes("simulate_sample.csv", &body)?;
        }
        Format::Json => {
            let mut body = Vec::new();
            data::write_records(&mut body, &sample.dataset.records, data::Format::Json)?;
            let records: serde_json::Value = serde_json::from_slice(&body)?;
            out.json("simulate_sample.json", json!({ "records": records }))?;
        }
    }
    let mut body = Vec::new();
    sample.forest.write_csv(&mut body)?;
    out.csv_bytes("simulate_forest.csv", &body)?;

    let mut summary = Table::new(&["metric", "value"]);
    summary.push(vec![text("population_nodes"), int(g.node_count() as u64)]);
    summary.push(vec![text("population_edges"), int(g.edge_count() as u64)]);
    summary.push(vec![text("population_mean_degree"), num(g.mean_degree())]);
    summary.push(vec![text("sample_size"), int(sample.dataset.len() as u64)]);
    summary.push(vec![text("shortfall"), serde_json::Value::Bool(sample.shortfall)]);
    summary.push(vec![text("max_wave"), int(sample.forest.max_wave())]);
    for (name, attr) in g.attributes() {
        for (k, level) in attr.levels.iter().enumerate() {
            let share = attr.values.iter().filter(|&&v| usize::from(v) == k).count() as f64 / g.node_count().max(1) as f64;
            summary.push(vec![text(format!("population_share:{name}={level}")), num(share)]);
        }
    }
    out.table("simulate_summary", &summary)?;

    if let Ok(rows) = wave_trajectory(&sample.forest, &sample.dataset, Variable::Acquaintance, &Rds2Options::default()) {
        let mut traj = Table::new(&["wave", "n", "estimate"]);
        for r in rows {
            traj.push(vec![int(r.wave), int(r.n as u64), num(r.estimate)]);
        }
        out.table("simulate_trajectory", &traj)?;
    }

    if args.write_graph.unwrap_or(false) {
        let mut body = Vec::new();
        write_edge_list(&g, &mut body)?;
        out.text("simulate_edges.txt", std::str::from_utf8(&body)?)?;
        let mut body = Vec::new();
        write_attributes(&g, &mut body)?;
        out.csv_bytes("simulate_nodes.csv", &body)?;
    }

    ctx.say(format!(
        "population: {} nodes, {} edges; sample: {} respondents over {} waves{}",
        g.node_count(),
        g.edge_count(),
        sample.dataset.len(),
        sample.forest.max_wave() + u32::from(!sample.forest.is_empty()),
        if sample.shortfall { " (recruitment died out before the target)" } else { "" }
    ));
    ctx.report_written(out.written());
    Ok(ExitCode::SUCCESS)
}

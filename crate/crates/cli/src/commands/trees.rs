use std::fs;
use std::path::Path;
use std::process::ExitCode;

use anyhow::{Context as _, Result};

use rdsnet_core::rds::forest_from_dataset;
use rdsnet_core::trees::{iso_census, referral_degree_distribution, wave_stats};
use rdsnet_core::{OrphanPolicy, ReferralForest};

use super::{load, Context, DEFAULT_TOP_CODE};
use crate::config::{require, TreesSection};
use crate::output::{int, num, text, Metadata, Output, Table};

const FOREST_HEADER: &str = "respondent_id,parent_id,wave";

fn is_forest_csv(path: &Path) -> Result<bool> {
    if path.extension().and_then(|e| e.to_str()) != Some("csv") {
        return Ok(false);
    }
    let body = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let first = body.lines().find(|l| !l.starts_with('#'));
    Ok(first.map(str::trim) == Some(FOREST_HEADER))
}

fn read_forest(path: &Path, top_code: u32, policy: OrphanPolicy) -> Result<ReferralForest> {
    if is_forest_csv(path)? {
        let f = fs::File::open(path)?;
        return ReferralForest::read_csv(f).with_context(|| format!("reading forest {}", path.display()));
    }
    let ds = load(path, top_code, policy)?;
    Ok(forest_from_dataset(&ds)?)
}

pub fn run(ctx: &Context, args: TreesSection) -> Result<ExitCode> {
    let args = args.or(TreesSection {
        top_code: Some(DEFAULT_TOP_CODE),
        orphan_policy: Some(OrphanPolicy::Seed),
        labeled: Some(false),
        label_attrs: Some(vec!["gender".into()]),
        columns: Some(8),
        ..Default::default()
    });
    let path = require(args.input.clone(), "input")?;
    let labeled = args.labeled.unwrap_or(false);
    let label_attrs = require(args.label_attrs.clone(), "label_attrs")?;
    let forest = read_forest(&path, args.top_code.unwrap_or(DEFAULT_TOP_CODE), args.orphan_policy.unwrap_or_default())?;
    let meta = Metadata::new("trees", None, &args)?;
    let mut out = Output::new(ctx.out_dir.clone(), ctx.format, meta)?;

    let census = iso_census(&forest, labeled, &label_attrs)?;
    let mut table = Table::new(&["rank", "code", "multiplicity", "size", "depth"]);
    for (k, e) in census.entries.iter().enumerate() {
        table.push(vec![
            int(k as u64 + 1),
            text(&e.code),
            int(e.multiplicity as u64),
            int(e.example.len() as u64),
            int(e.example.depth() as u64),
        ]);
    }
    out.table("trees_census", &table)?;

    let layout = census.grid_layout(args.columns.unwrap_or(8));
    let mut nodes = Table::new(&["cell", "row", "col", "multiplicity", "node", "parent", "x", "y", "label"]);
    for (k, cell) in layout.cells.iter().enumerate() {
        let mut parent = vec![None; cell.nodes.len()];
        for &[u, c] in &cell.edges {
            parent[c] = Some(u);
        }
        for (v, node) in cell.nodes.iter().enumerate() {
            nodes.push(vec![
                int(k as u64 + 1),
                int(cell.row as u64),
                int(cell.col as u64),
                int(cell.multiplicity as u64),
                int(v as u64),
                parent[v].map_or(serde_json::Value::Null, |p| int(p as u64)),
                num(node.x),
                num(node.y),
                node.label.clone().map_or(serde_json::Value::Null, text),
            ]);
        }
    }
    out.table("trees_layout", &nodes)?;

    let stats = wave_stats(&forest);
    let mut waves = Table::new(&["wave", "respondents"]);
    for (w, &c) in stats.histogram.iter().enumerate() {
        waves.push(vec![int(w as u64), int(c)]);
    }
    out.table("trees_waves", &waves)?;
    let mut depth = Table::new(&["root_id", "size", "depth"]);
    for t in &stats.trees {
        depth.push(vec![text(&t.root_id), int(t.size as u64), int(t.depth)]);
    }
    out.table("trees_depth", &depth)?;

    let referrals = referral_degree_distribution(&forest);
    let mut deg = Table::new(&["referrals", "respondents"]);
    for (k, &c) in referrals.counts.iter().enumerate() {
        deg.push(vec![int(k as u64), int(c)]);
    }
    out.table("trees_referrals", &deg)?;

    ctx.say(format!(
        "{} respondents in {} trees, {} isomorphism classes{}",
        forest.len(),
        census.tree_count(),
        census.entries.len(),
        if labeled { format!(" (labeled by {})", label_attrs.join(",")) } else { String::new() }
    ));
    if !forest.is_empty() {
        ctx.say(format!("max wave {}, mean referrals {:.3}", stats.max_wave, referrals.mean));
    }
    ctx.report_written(out.written());
    Ok(ExitCode::SUCCESS)
}

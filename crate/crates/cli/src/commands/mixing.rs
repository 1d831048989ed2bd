use std::process::ExitCode;

use anyhow::Result;

use rdsnet_core::estimators::mixing_matrix;
use rdsnet_core::rds::forest_from_dataset;
use rdsnet_core::{Attribute, OrphanPolicy};

use super::{load, Context, DEFAULT_TOP_CODE};
use crate::config::{require, MixingSection};
use crate::output::{int, num, text, Metadata, Output, Table};

pub fn run(ctx: &Context, args: MixingSection) -> Result<ExitCode> {
    let args = args.or(MixingSection {
        top_code: Some(DEFAULT_TOP_CODE),
        orphan_policy: Some(OrphanPolicy::Seed),
        attribute: Some(Attribute::Gender),
        drop: Some(Vec::new()),
        ..Default::default()
    });
    let path = require(args.dataset.clone(), "dataset")?;
    let attribute = require(args.attribute, "attribute")?;
    let drop = require(args.drop.clone(), "drop")?;
    let ds = load(&path, args.top_code.unwrap_or(DEFAULT_TOP_CODE), args.orphan_policy.unwrap_or_default())?;
    let forest = forest_from_dataset(&ds)?;
    let m = mixing_matrix(&forest, &ds, attribute, &drop)?;
    let meta = Metadata::new("mixing", None, &args)?;
    let mut out = Output::new(ctx.out_dir.clone(), ctx.format, meta)?;

    let mut table = Table::new(&["recruiter", "recruitee", "count", "rate"]);
    for (i, from) in m.categories.iter().enumerate() {
        for (j, to) in m.categories.iter().enumerate() {
            table.push(vec![text(from), text(to), int(m.counts[i][j]), num(m.rates[i][j])]);
        }
    }
    out.table("mixing", &table)?;

    let width = m.categories.iter().map(String::len).max().unwrap_or(0).max(9);
    ctx.say(format!("Mixing by {} over {} referrals", attribute.name(), m.total()));
    let mut header = format!("  {:<width$}", "recruiter");
    for c in &m.categories {
        header.push_str(&format!(" {c:>width$}"));
    }
    ctx.say(header);
    for (i, from) in m.categories.iter().enumerate() {
        let mut line = format!("  {from:<width$}");
        for r in &m.rates[i] {
            line.push_str(&format!(" {r:>width$.2}"));
        }
        ctx.say(line);
    }
    ctx.report_written(out.written());
    Ok(ExitCode::SUCCESS)
}

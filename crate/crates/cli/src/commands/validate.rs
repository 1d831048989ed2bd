use std::process::ExitCode;

use anyhow::{Context as _, Result};

use rdsnet_core::data::ViolationKind;
use rdsnet_core::{load_dataset, zero_skip_summary, DataError, OrphanPolicy};

use super::{data_format, Context, DEFAULT_TOP_CODE};
use crate::config::{require, ValidateSection};
use crate::output::{int, num, text, Metadata, Output, Table};

fn kind_name(kind: &ViolationKind) -> &'static str {
    match kind {
        ViolationKind::DuplicateRespondent => "duplicate_respondent",
        ViolationKind::DuplicateCoupon => "duplicate_coupon",
        ViolationKind::CouponLimit => "coupon_limit",
        ViolationKind::TopCode => "top_code",
        ViolationKind::SelfRecruit => "self_recruit",
        ViolationKind::Orphan => "orphan",
        ViolationKind::UnknownLevel => "unknown_level",
    }
}

pub fn run(ctx: &Context, args: ValidateSection) -> Result<ExitCode> {
    let args = args.or(ValidateSection {
        top_code: Some(DEFAULT_TOP_CODE),
        orphan_policy: Some(OrphanPolicy::Seed),
        ..Default::default()
    });
    let path = require(args.dataset.clone(), "dataset")?;
    let meta = Metadata::new("validate", None, &args)?;
    let mut out = Output::new(ctx.out_dir.clone(), ctx.format, meta)?;
    let top_code = args.top_code.unwrap_or(DEFAULT_TOP_CODE);
    let policy = args.orphan_policy.unwrap_or_default();

    let mut issues = Table::new(&["severity", "kind", "rows", "message"]);
    let loaded = load_dataset(&path, data_format(&path)?, top_code, policy);
    let (report, dataset) = match loaded {
        Ok((ds, report)) => (report, Some(ds)),
        Err(DataError::Invalid(report)) => (report, None),
        Err(e) => return Err(e).with_context(|| format!("loading {}", path.display())),
    };
    for v in &report.violations {
        let rows: Vec<String> = v.rows.iter().map(ToString::to_string).collect();
        issues.push(vec![text("error"), text(kind_name(&v.kind)), text(rows.join(" ")), text(&v.message)]);
    }
    for &row in &report.orphan_rows {
        issues.push(vec![
            text("warning"),
            text("orphan"),
            text(row.to_string()),
            text("recruiter coupon matches nobody; kept as a seed"),
        ]);
    }
    out.table("validate_report", &issues)?;

    ctx.say(format!("{}: {}", path.display(), report.summary()));
    for v in &report.violations {
        ctx.say(format!("  {v}"));
    }
    let Some(ds) = dataset else {
        ctx.report_written(out.written());
        return Ok(ExitCode::from(1));
    };

    let mut zeros = Table::new(&["network", "n_nonmissing", "n_missing", "n_zero", "fraction_zero_or_skip"]);
    for row in zero_skip_summary(&ds) {
        zeros.push(vec![
            text(row.network.label()),
            int(row.n_nonmissing as u64),
            int(row.n_missing as u64),
            int(row.n_zero as u64),
            num(row.fraction_zero_or_skip),
        ]);
    }
    out.table("validate_zero_skip", &zeros)?;
    ctx.say(format!("{} respondents, {} seeds", ds.len(), (0..ds.len()).filter(|&i| ds.is_seed(i)).count()));
    ctx.report_written(out.written());
    Ok(ExitCode::SUCCESS)
}

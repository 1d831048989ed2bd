use std::process::ExitCode;

use anyhow::{bail, Result};
use serde_json::json;

use rdsnet_core::{OrphanPolicy, Variable};
use rdsnet_countreg::{
    family_selection, render_table, stepwise_backward, table_rows, CountData, Family, FitOptions, ModelSpec,
};

use super::{fresh_seed, load, Context, DEFAULT_TOP_CODE};
use crate::config::{require, FitSection};
use crate::output::{int, opt, text, Metadata, Output, Table};

pub fn run(ctx: &Context, args: FitSection) -> Result<ExitCode> {
    let defaults = FitOptions::default();
    let args = args.or(FitSection {
        top_code: Some(DEFAULT_TOP_CODE),
        orphan_policy: Some(OrphanPolicy::Seed),
        response: Some(Variable::CloseFriend),
        terms: Some(Vec::new()),
        zero_terms: Some(Vec::new()),
        families: Some(Family::ALL.to_vec()),
        stepwise: Some(true),
        n_starts: Some(defaults.n_starts),
        tol: Some(defaults.tol),
        max_iter: Some(defaults.max_iter),
        rng_seed: Some(fresh_seed()),
        ..Default::default()
    });
    let path = require(args.dataset.clone(), "dataset")?;
    let response = require(args.response, "response")?;
    let terms = require(args.terms.clone(), "terms")?;
    let zero_terms = require(args.zero_terms.clone(), "zero_terms")?;
    let families = require(args.families.clone(), "families")?;
    let opts = FitOptions {
        tol: require(args.tol, "tol")?,
        max_iter: require(args.max_iter, "max_iter")?,
        n_starts: require(args.n_starts, "n_starts")?,
        rng_seed: require(args.rng_seed, "rng_seed")?,
    };
    if families.len() < 2 {
        bail!("family selection needs at least two families");
    }
    let ds = load(&path, args.top_code.unwrap_or(DEFAULT_TOP_CODE), args.orphan_policy.unwrap_or_default())?;
    let mut all_terms = terms.clone();
    for t in &zero_terms {
        if !all_terms.contains(t) {
            all_terms.push(t.clone());
        }
    }
    let data = CountData::from_dataset(&ds, response, &all_terms)?;
    let meta = Metadata::new("fit", Some(opts.rng_seed), &args)?;
    let mut out = Output::new(ctx.out_dir.clone(), ctx.format, meta)?;

    let full = ModelSpec::new(families[0], response.as_str())
        .conditional(terms.iter().cloned())
        .zero(zero_terms.iter().cloned());
    let candidates: Vec<ModelSpec> = families.iter().map(|&f| full.with_family(f)).collect();
    let ranking = family_selection(&data, &candidates, &opts)?;

    let mut sel = Table::new(&["rank", "family", "aicc", "aic", "bic", "loglik", "k", "n", "rmse", "converged", "note"]);
    ctx.say(format!("Model fit diagnostics for {} (n = {})", response.as_str(), data.len()));
    ctx.say(format!("  {:<34} {:>10} {:>10}", "family", "AICc", "RMSE"));
    for r in &ranking {
        let f = r.fit.as_ref();
        let note = match (&r.error, f) {
            (Some(e), _) => e.clone(),
            (None, Some(f)) if !f.converged => "did not converge".into(),
            (None, Some(f)) if f.aicc.is_none() => "AICc undefined".into(),
            _ => String::new(),
        };
        sel.push(vec![
            r.rank.map_or(serde_json::Value::Null, |k| int(k as u64)),
            text(r.spec.family.name()),
            opt(r.aicc()),
            opt(f.map(|f| f.aic)),
            opt(f.map(|f| f.bic)),
            opt(f.map(|f| f.loglik)),
            f.map_or(serde_json::Value::Null, |f| int(f.k as u64)),
            f.map_or(serde_json::Value::Null, |f| int(f.n as u64)),
            opt(f.map(|f| f.rmse)),
            f.map_or(serde_json::Value::Null, |f| serde_json::Value::Bool(f.converged)),
            text(note),
        ]);
        let show = |x: Option<f64>| x.map_or_else(|| "---".to_string(), |v| format!("{v:.2}"));
        ctx.say(format!(
            "  {:<34} {:>10} {:>10}",
            r.spec.family.label(),
            show(r.aicc()),
            show(r.aicc().and(f.map(|f| f.rmse)))
        ));
    }
    out.table("fit_selection", &sel)?;

    let Some(best) = ranking.iter().find(|r| r.rank == Some(1)).and_then(|r| r.fit.clone()) else {
        bail!("no family converged with a defined AICc");
    };
    let (model, trace) = if args.stepwise.unwrap_or(true) {
        let sw = stepwise_backward(&best.spec, &data, &opts)?;
        (sw.best, sw.trace)
    } else {
        (best, Vec::new())
    };

    let mut coef = Table::new(&["panel", "term", "estimate", "se", "z", "p_value", "stars"]);
    for r in table_rows(&model) {
        coef.push(vec![text(r.panel), text(r.term), opt(r.estimate), opt(r.se), opt(r.z), opt(r.p_value), text(r.stars)]);
    }
    out.table("fit_model", &coef)?;

    let mut tr = Table::new(&["step", "component", "term", "aicc", "converged", "accepted"]);
    for t in &trace {
        tr.push(vec![
            int(t.step as u64),
            text(format!("{:?}", t.component).to_lowercase()),
            text(&t.term),
            opt(t.aicc),
            serde_json::Value::Bool(t.converged),
            serde_json::Value::Bool(t.accepted),
        ]);
    }
    out.table("fit_trace", &tr)?;

    let rendered = render_table(&model);
    out.text("fit_model.txt", &rendered)?;
    out.json(
        "fit_result.json",
        json!({
            "spec": model.spec,
            "coefficients": {
                "conditional": model.beta,
                "zero_inflation": model.gamma,
                "log_alpha": model.log_alpha,
            },
            "criteria": model.criteria(),
            "loglik": model.loglik,
            "k": model.k,
            "n": model.n,
            "rmse": model.rmse,
            "converged": model.converged,
            "boundary": model.boundary,
            "trace": trace,
        }),
    )?;
    ctx.say("");
    ctx.say(rendered.trim_end());
    ctx.report_written(out.written());
    Ok(ExitCode::SUCCESS)
}

use std::fmt::Write;

use serde::Serialize;

use crate::{Coefficient, CountModelFit};

/// Flat row of a regression table; `panel` is `conditional`,
/// `zero-inflation`, `dispersion` or `fit`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableRow {
    pub panel: &'static str,
    pub term: String,
    pub estimate: Option<f64>,
    pub se: Option<f64>,
    pub z: Option<f64>,
    pub p_value: Option<f64>,
    pub stars: &'static str,
}

fn coef_row(panel: &'static str, c: &Coefficient) -> TableRow {
    TableRow {
        panel,
        term: c.term.clone(),
        estimate: Some(c.estimate),
        se: c.se,
        z: c.z,
        p_value: c.p_value,
        stars: c.stars,
    }
}

fn stat_row(term: &str, value: Option<f64>) -> TableRow {
    TableRow {
        panel: "fit",
        term: term.to_string(),
        estimate: value,
        se: None,
        z: None,
        p_value: None,
        stars: "",
    }
}

pub fn table_rows(fit: &CountModelFit) -> Vec<TableRow> {
    let mut rows: Vec<TableRow> = fit.beta.iter().map(|c| coef_row("conditional", c)).collect();
    rows.extend(fit.gamma.iter().map(|c| coef_row("zero-inflation", c)));
    rows.extend(fit.log_alpha.iter().map(|c| coef_row("dispersion", c)));
    rows.push(stat_row("n", Some(fit.n as f64)));
    rows.push(stat_row("loglik", Some(fit.loglik)));
    rows.push(stat_row("AICc", fit.aicc));
    rows.push(stat_row("AIC", Some(fit.aic)));
    rows.push(stat_row("BIC", Some(fit.bic)));
    rows.push(stat_row("RMSE", Some(fit.rmse)));
    rows
}

fn num(v: Option<f64>, digits: usize) -> String {
    match v {
        Some(v) if v.is_finite() => format!("{v:.digits$}"),
        Some(v) => format!("{v}"),
        None => "---".to_string(),
    }
}

/// Aligned text table with a conditional panel, a zero-inflation panel
/// when present, and fit statistics.
pub fn render_table(fit: &CountModelFit) -> String {
    let rows = table_rows(fit);
    let width = rows.iter().map(|r| r.term.len()).max().unwrap_or(0).max(12);
    let mut out = String::new();
    let _ = writeln!(out, "{} model for {}", fit.spec.family.label(), fit.spec.response);
    if !fit.converged {
        let _ = writeln!(out, "warning: optimizer did not converge after {} iterations", fit.iterations);
    }
    if fit.boundary {
        let _ = writeln!(out, "warning: inflation probability at the boundary");
    }
    let mut panel = "";
    for r in &rows {
        if r.panel != panel {
            panel = r.panel;
            let title = match panel {
                "conditional" => "Conditional model (log link)",
                "zero-inflation" => "Zero-inflation model (logit link)",
                "dispersion" => "Dispersion",
                _ => "Goodness of fit",
            };
            let _ = writeln!(out, "\n{title}");
            if panel != "fit" {
                let _ = writeln!(
                    out,
                    "  {:<width$} {:>10} {:>10} {:>8} {:>9}",
                    "term", "estimate", "s.e.", "z", "p"
                );
            }
        }
        if panel == "fit" {
            let digits = if r.term == "n" { 0 } else { 2 };
            let _ = writeln!(out, "  {:<width$} {:>10}", r.term, num(r.estimate, digits));
        } else {
            let _ = writeln!(
                out,
                "  {:<width$} {:>10} {:>10} {:>8} {:>9} {}",
                r.term,
                num(r.estimate, 4),
                num(r.se, 4),
                num(r.z, 2),
                num(r.p_value, 4),
                r.stars
            );
        }
    }
    let _ = writeln!(out, "\nSignif. codes: *** 0.001  ** 0.01  * 0.05  + 0.1");
    out
}

use rayon::prelude::*;
use serde::Serialize;

use crate::{fit, fit_with_start, CountData, CountError, CountModelFit, FitOptions, ModelSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Component {
    Conditional,
    Zero,
}

/// One candidate removal considered by the stepwise search.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceEntry {
    pub step: usize,
    pub component: Component,
    pub term: String,
    pub aicc: Option<f64>,
    pub converged: bool,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepwiseResult {
    pub best: CountModelFit,
    pub trace: Vec<TraceEntry>,
}

impl StepwiseResult {
    pub fn removed(&self) -> impl Iterator<Item = &TraceEntry> {
        self.trace.iter().filter(|t| t.accepted)
    }
}

fn score(f: &CountModelFit) -> Option<f64> {
    f.aicc.filter(|a| f.converged && a.is_finite())
}

/// Parameter positions of `term` in `spec`'s layout.
fn param_range(spec: &ModelSpec, data: &CountData, component: Component, term: &str) -> std::ops::Range<usize> {
    let width = |t: &String| data.covariate(t).map_or(0, |c| c.columns.len());
    let p = 1 + spec.conditional_terms.iter().map(width).sum::<usize>();
    let (terms, offset) = match component {
        Component::Conditional => (&spec.conditional_terms, 1),
        Component::Zero => (&spec.zero_terms, p + 1),
    };
    let mut start = offset;
    for t in terms {
        if t == term {
            return start..start + width(t);
        }
        start += width(t);
    }
    unreachable!("term belongs to the spec")
}

fn fit_candidate(spec: &ModelSpec, data: &CountData, opts: &FitOptions, warm: &[f64]) -> Option<CountModelFit> {
    let warm_fit = fit_with_start(spec, data, opts, Some(warm)).ok();
    if warm_fit.as_ref().is_some_and(|f| f.converged) {
        return warm_fit;
    }
    let cold = fit(spec, data, opts).ok();
    match (warm_fit, cold) {
        (Some(w), Some(c)) => Some(if (c.converged, c.loglik) > (w.converged, w.loglik) { c } else { w }),
        (w, c) => c.or(w),
    }
}

/// Backward elimination on AICc. Each step tries dropping every remaining
/// term from either component and keeps the single removal with the lowest
/// AICc, provided it is strictly lower than the current model's.
pub fn stepwise_backward(full: &ModelSpec, data: &CountData, opts: &FitOptions) -> Result<StepwiseResult, CountError> {
    let mut current = fit(full, data, opts)?;
    let mut trace = Vec::new();
    for step in 1.. {
        let spec = current.spec.clone();
        let mut moves: Vec<(Component, String)> =
            spec.conditional_terms.iter().map(|t| (Component::Conditional, t.clone())).collect();
        if spec.family.zero_inflated() {
            moves.extend(spec.zero_terms.iter().map(|t| (Component::Zero, t.clone())));
        }
        if moves.is_empty() {
            break;
        }
        let fits: Vec<Option<CountModelFit>> = moves
            .par_iter()
            .map(|(component, term)| {
                let mut reduced = spec.clone();
                let list = match component {
                    Component::Conditional => &mut reduced.conditional_terms,
                    Component::Zero => &mut reduced.zero_terms,
                };
                list.retain(|t| t != term);
                let range = param_range(&spec, data, *component, term);
                let warm: Vec<f64> = current
                    .params
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| !range.contains(j))
                    .map(|(_, v)| *v)
                    .collect();
                fit_candidate(&reduced, data, opts, &warm)
            })
            .collect();
        let best = fits
            .iter()
            .enumerate()
            .filter_map(|(i, f)| f.as_ref().and_then(score).map(|s| (i, s)))
            .min_by(|a, b| a.1.total_cmp(&b.1));
        let current_score = score(&current).unwrap_or(f64::INFINITY);
        let chosen = best.filter(|&(_, s)| s < current_score).map(|(i, _)| i);
        for (i, ((component, term), f)) in moves.into_iter().zip(&fits).enumerate() {
            trace.push(TraceEntry {
                step,
                component,
                term,
                aicc: f.as_ref().and_then(|f| f.aicc),
                converged: f.as_ref().is_some_and(|f| f.converged),
                accepted: chosen == Some(i),
            });
        }
        match chosen {
            Some(i) => current = fits.into_iter().nth(i).flatten().expect("chosen fit exists"),
            None => break,
        }
    }
    Ok(StepwiseResult { best: current, trace })
}

/// One family in a selection ranking. `rank` is absent for candidates that
/// failed, did not converge or have no AICc.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectionRow {
    pub rank: Option<usize>,
    pub spec: ModelSpec,
    pub fit: Option<CountModelFit>,
    pub error: Option<String>,
}

impl SelectionRow {
    pub fn aicc(&self) -> Option<f64> {
        self.rank.and(self.fit.as_ref().and_then(|f| f.aicc))
    }
}

/// Fits every candidate and ranks them by AICc, absent candidates last in
/// input order.
pub fn family_selection(
    data: &CountData,
    candidates: &[ModelSpec],
    opts: &FitOptions,
) -> Result<Vec<SelectionRow>, CountError> {
    if candidates.len() < 2 {
        return Err(CountError::TooFewCandidates);
    }
    let results: Vec<Result<CountModelFit, CountError>> =
        candidates.par_iter().map(|spec| fit(spec, data, opts)).collect();
    if results.iter().all(|r| r.is_err()) {
        return Err(CountError::AllFailed);
    }
    let mut rows: Vec<SelectionRow> = candidates
        .iter()
        .zip(results)
        .map(|(spec, r)| {
            let (fit, error) = match r {
                Ok(f) => (Some(f), None),
                Err(e) => (None, Some(e.to_string())),
            };
            SelectionRow {
                rank: None,
                spec: spec.clone(),
                fit,
                error,
            }
        })
        .collect();
    let mut ranked: Vec<(usize, f64)> = rows
        .iter()
        .enumerate()
        .filter_map(|(i, r)| r.fit.as_ref().and_then(score).map(|s| (i, s)))
        .collect();
    ranked.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    for (rank, &(i, _)) in ranked.iter().enumerate() {
        rows[i].rank = Some(rank + 1);
    }
    rows.sort_by_key(|r| r.rank.unwrap_or(usize::MAX));
    Ok(rows)
}

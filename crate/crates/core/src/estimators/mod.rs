//! RDS-II (inverse-degree weighted) estimation.
//!
//! For usable records `i` the estimate of a mean is
//! `Σ (y_i / d_i) / Σ (1 / d_i)` where `d_i` is the weight degree.
//! Records lacking `y` are dropped per estimate; missing or zero degrees are
//! imputed with the median positive degree of the whole dataset.

mod bootstrap;
mod mixing;

use serde::Serialize;
use thiserror::Error;

use crate::data::{Attribute, Network, SurveyDataset, Variable};
use crate::rds::ReferralForest;

pub use bootstrap::{bootstrap_se, resample_forest, BootstrapOptions, BootstrapSummary, ResampleStatistic};
pub use mixing::{mixing_matrix, MixingMatrix};

/// Normal quantile for a two-sided 95% interval.
pub const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimateError {
    #[error("all weight degrees are missing or zero")]
    AllWeightsMissing,
    #[error("no usable records")]
    NoUsableRecords,
    #[error("forest has {forest} nodes but the dataset has {records} records")]
    Misaligned { forest: usize, records: usize },
    #[error("bootstrap needs at least 100 replicates, got {0}")]
    TooFewReplicates(usize),
    #[error("statistic failed on {failed} of {total} bootstrap replicates")]
    StatisticFailed { failed: usize, total: usize },
    #[error("indicator values must be 0 or 1")]
    NotAnIndicator,
    #[error("no referral edges with both attributes observed")]
    NoUsableEdges,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RdsEstimate {
    pub estimate: f64,
    /// Absent when it cannot be computed (single respondent, no bootstrap).
    pub se: Option<f64>,
    pub ci95: Option<(f64, f64)>,
    pub design_effect: Option<f64>,
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Rds2Options {
    /// Degree used for the inverse-probability weights.
    pub weight: Variable,
    pub include_seeds: bool,
}

impl Default for Rds2Options {
    fn default() -> Self {
        Rds2Options {
            weight: Variable::Acquaintance,
            include_seeds: true,
        }
    }
}

/// What is being averaged.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum Measure {
    Variable(Variable),
    /// 1 when the attribute equals `level`, 0 for other observed levels.
    Indicator { attribute: Attribute, level: String },
}

impl Measure {
    fn values(&self, ds: &SurveyDataset) -> Vec<Option<f64>> {
        ds.records
            .iter()
            .map(|r| match self {
                Measure::Variable(v) => r.value(*v),
                Measure::Indicator { attribute, level } => {
                    r.category(*attribute).map(|c| if c == level { 1.0 } else { 0.0 })
                }
            })
            .collect()
    }

    fn bounds(&self) -> (Option<f64>, Option<f64>) {
        match self {
            Measure::Variable(v) if v.is_degree() => (Some(0.0), None),
            Measure::Variable(_) | Measure::Indicator { .. } => (Some(0.0), Some(1.0)),
        }
    }
}

/// Weight degree per record, with missing/zero values replaced by the
/// median positive value.
pub fn resolve_weights(ds: &SurveyDataset, weight: Variable) -> Result<Vec<f64>, EstimateError> {
    let mut positive: Vec<f64> = ds
        .records
        .iter()
        .filter_map(|r| r.value(weight))
        .filter(|&d| d > 0.0)
        .collect();
    if positive.is_empty() {
        return Err(EstimateError::AllWeightsMissing);
    }
    positive.sort_by(f64::total_cmp);
    let m = positive.len();
    let median = if m % 2 == 1 {
        positive[m / 2]
    } else {
        0.5 * (positive[m / 2 - 1] + positive[m / 2])
    };
    Ok(ds
        .records
        .iter()
        .map(|r| r.value(weight).filter(|&d| d > 0.0).unwrap_or(median))
        .collect())
}

/// `Σ(y/d) / Σ(1/d)` over `(y, d)` pairs.
pub fn rds2_point(pairs: impl IntoIterator<Item = (f64, f64)>) -> Option<f64> {
    let (mut num, mut den) = (0.0, 0.0);
    let mut reference = None;
    for (y, d) in pairs {
        // relative to the first degree, so equal degrees give weight exactly 1
        let w = *reference.get_or_insert(d) / d;
        num += y * w;
        den += w;
    }
    (den > 0.0).then(|| num / den)
}

/// RDS-II statistic over a fixed dataset, evaluable on resampled index sets.
#[derive(Debug, Clone)]
pub struct Rds2Statistic {
    values: Vec<Option<f64>>,
    weights: Vec<f64>,
    eligible: Vec<bool>,
    bounds: (Option<f64>, Option<f64>),
}

impl Rds2Statistic {
    pub fn new(ds: &SurveyDataset, measure: Measure, opts: &Rds2Options) -> Result<Self, EstimateError> {
        let weights = resolve_weights(ds, opts.weight)?;
        let eligible = (0..ds.len()).map(|i| opts.include_seeds || !ds.is_seed(i)).collect();
        Ok(Rds2Statistic {
            values: measure.values(ds),
            weights,
            eligible,
            bounds: measure.bounds(),
        })
    }

    /// Restricts to records for which `keep` holds (domain estimation).
    pub fn restricted(mut self, keep: impl Fn(usize) -> bool) -> Self {
        for (i, e) in self.eligible.iter_mut().enumerate() {
            *e = *e && keep(i);
        }
        self
    }

    fn usable_at(&self, i: usize) -> Option<f64> {
        if self.eligible[i] {
            self.values[i]
        } else {
            None
        }
    }

    /// Indices with an observed value inside the domain.
    pub fn usable(&self) -> Vec<usize> {
        (0..self.values.len()).filter(|&i| self.usable_at(i).is_some()).collect()
    }

    pub fn evaluate(&self, sample: &[usize]) -> Option<f64> {
        rds2_point(sample.iter().filter_map(|&i| self.usable_at(i).map(|y| (y, self.weights[i]))))
    }

    fn finish(&self, estimate: f64, se: Option<f64>, design_effect: Option<f64>, n: usize) -> RdsEstimate {
        let ci95 = se.map(|se| {
            let (lo_bound, hi_bound) = self.bounds;
            let mut lo = estimate - Z95 * se;
            let mut hi = estimate + Z95 * se;
            if let Some(b) = lo_bound {
                lo = lo.max(b);
            }
            if let Some(b) = hi_bound {
                hi = hi.min(b);
            }
            (lo, hi)
        });
        RdsEstimate {
            estimate,
            se,
            ci95,
            design_effect,
            n,
        }
    }

    /// Point estimate with optional chain-bootstrap uncertainty.
    pub fn estimate(
        &self,
        forest: Option<&ReferralForest>,
        boot: Option<&BootstrapOptions>,
    ) -> Result<RdsEstimate, EstimateError> {
        let usable = self.usable();
        let estimate = self.evaluate(&usable).ok_or(EstimateError::NoUsableRecords)?;
        let n = usable.len();
        match (forest, boot) {
            (Some(forest), Some(opts)) if n > 1 => {
                let summary = bootstrap_se(forest, self, opts)?;
                Ok(self.finish(estimate, Some(summary.se), summary.design_effect, n))
            }
            _ => Ok(self.finish(estimate, None, None, n)),
        }
    }
}

impl ResampleStatistic for Rds2Statistic {
    fn evaluate(&self, sample: &[usize]) -> Option<f64> {
        Rds2Statistic::evaluate(self, sample)
    }

    fn srs_variance(&self) -> Option<f64> {
        let ys: Vec<f64> = (0..self.values.len()).filter_map(|i| self.usable_at(i)).collect();
        let n = ys.len();
        if n < 2 {
            return None;
        }
        let mean = ys.iter().sum::<f64>() / n as f64;
        let s2 = ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        Some(s2 / n as f64)
    }

    fn len(&self) -> usize {
        self.values.len()
    }
}

/// Weighted mean of `y`; `se` and `ci95` are left absent.
pub fn rds2_mean(ds: &SurveyDataset, y: Variable, opts: &Rds2Options) -> Result<RdsEstimate, EstimateError> {
    Rds2Statistic::new(ds, Measure::Variable(y), opts)?.estimate(None, None)
}

/// Weighted proportion for a 0/1 measure.
pub fn rds2_proportion(ds: &SurveyDataset, indicator: &Measure, opts: &Rds2Options) -> Result<RdsEstimate, EstimateError> {
    let stat = Rds2Statistic::new(ds, indicator.clone(), opts)?;
    if stat.values.iter().flatten().any(|&v| v != 0.0 && v != 1.0) {
        return Err(EstimateError::NotAnIndicator);
    }
    stat.estimate(None, None)
}

/// Full estimate (point, bootstrap SE, CI, design effect) for a measure.
pub fn rds2_with_se(
    ds: &SurveyDataset,
    forest: &ReferralForest,
    measure: Measure,
    opts: &Rds2Options,
    boot: &BootstrapOptions,
) -> Result<RdsEstimate, EstimateError> {
    if forest.len() != ds.len() {
        return Err(EstimateError::Misaligned {
            forest: forest.len(),
            records: ds.len(),
        });
    }
    Rds2Statistic::new(ds, measure, opts)?.estimate(Some(forest), Some(boot))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubgroupRow {
    pub level: String,
    pub network: Network,
    /// Absent for empty cells.
    pub estimate: Option<RdsEstimate>,
}

/// One estimate per (level, network) cell, each with its own listwise deletion.
pub fn subgroup_table(
    ds: &SurveyDataset,
    forest: Option<&ReferralForest>,
    by: Attribute,
    networks: &[Network],
    opts: &Rds2Options,
    boot: Option<&BootstrapOptions>,
) -> Result<Vec<SubgroupRow>, EstimateError> {
    let mut rows = Vec::new();
    for level in ds.levels(by) {
        for &network in networks {
            let stat = Rds2Statistic::new(ds, Measure::Variable(network.variable()), opts)?
                .restricted(|i| ds.records[i].category(by) == Some(level.as_str()));
            let estimate = if stat.usable().is_empty() {
                None
            } else {
                Some(stat.estimate(forest, boot)?)
            };
            rows.push(SubgroupRow {
                level: level.clone(),
                network,
                estimate,
            });
        }
    }
    Ok(rows)
}

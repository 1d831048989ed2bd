use serde::Serialize;

use super::EstimateError;
use crate::data::{Attribute, SurveyDataset};
use crate::rds::ReferralForest;

/// Recruiter (rows) × recruitee (columns) counts and row-normalized rates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MixingMatrix {
    pub categories: Vec<String>,
    pub counts: Vec<Vec<u64>>,
    /// Rows with no edges are all zero.
    pub rates: Vec<Vec<f64>>,
}

impl MixingMatrix {
    pub fn from_pairs(categories: Vec<String>, pairs: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let k = categories.len();
        let mut counts = vec![vec![0u64; k]; k];
        for (from, to) in pairs {
            counts[from][to] += 1;
        }
        let rates = counts
            .iter()
            .map(|row| {
                let total: u64 = row.iter().sum();
                row.iter()
                    .map(|&c| if total == 0 { 0.0 } else { c as f64 / total as f64 })
                    .collect()
            })
            .collect();
        MixingMatrix {
            categories,
            counts,
            rates,
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }
}

/// Mixing over recruiter → recruitee edges where both ends have the
/// attribute observed and neither level is in `drop_levels`.
pub fn mixing_matrix(
    forest: &ReferralForest,
    ds: &SurveyDataset,
    attribute: Attribute,
    drop_levels: &[String],
) -> Result<MixingMatrix, EstimateError> {
    if forest.len() != ds.len() {
        return Err(EstimateError::Misaligned {
            forest: forest.len(),
            records: ds.len(),
        });
    }
    let label = |i: usize| {
        ds.records[i]
            .category(attribute)
            .filter(|l| !drop_levels.iter().any(|d| d == l))
    };
    let edges: Vec<(&str, &str)> = (0..forest.len())
        .filter_map(|child| {
            let parent = forest.parent(child)?;
            Some((label(parent)?, label(child)?))
        })
        .collect();
    if edges.is_empty() {
        return Err(EstimateError::NoUsableEdges);
    }
    let categories: Vec<String> = ds
        .levels(attribute)
        .into_iter()
        .filter(|l| edges.iter().any(|(a, b)| a == l || b == l))
        .collect();
    let index = |l: &str| categories.iter().position(|c| c == l).expect("level listed");
    Ok(MixingMatrix::from_pairs(
        categories.clone(),
        edges.iter().map(|(a, b)| (index(a), index(b))),
    ))
}

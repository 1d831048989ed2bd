//! Respondent-driven sampling toolkit: survey records, population graphs,
//! recruitment simulation, RDS-II estimation and referral-tree analysis.

pub mod data;
pub mod estimators;
pub mod fixture;
pub mod graph;
pub mod rds;
pub mod rng;
pub mod trees;

pub use data::{
    load_dataset, save_dataset, zero_skip_summary, Attribute, DataError, Format, Network,
    OrphanPolicy, SurveyDataset, SurveyRecord, Variable,
};
pub use estimators::{MixingMatrix, RdsEstimate};
pub use graph::{AttributedGraph, GraphStatistics, StatTerm};
pub use rds::{ReferralForest, RdsConfig};

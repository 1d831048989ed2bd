//! Poisson, negative binomial (NB2), zero-inflated Poisson and zero-inflated
//! negative binomial regression for degree counts, with AICc-based family
//! selection and backward stepwise term removal.

mod data;
mod fit;
mod likelihood;
mod optim;
mod report;
mod select;
mod simulate;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use data::{CountData, Covariate, Design};
pub use fit::{
    fit, fit_with_start, information_criteria, rmse, Coefficient, CountModelFit, Criteria, FitOptions,
};
pub use likelihood::{loglik, loglik_gradient, pmf};
pub use optim::{minimize, OptimResult};
pub use report::{render_table, table_rows, TableRow};
pub use select::{family_selection, stepwise_backward, Component, SelectionRow, StepwiseResult, TraceEntry};
pub use simulate::simulate_response;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CountError {
    #[error("unknown term `{0}`")]
    UnknownTerm(String),
    #[error("unknown family `{0}`")]
    UnknownFamily(String),
    #[error("{0} takes no zero-inflation terms")]
    ZeroTermsNotAllowed(Family),
    #[error("{component} design matrix is rank deficient ({rank} of {columns} columns independent)")]
    RankDeficient {
        component: &'static str,
        rank: usize,
        columns: usize,
    },
    #[error("{n} observations cannot support {k} parameters")]
    TooFewObservations { n: usize, k: usize },
    #[error("parameter vector has length {got}, expected {expected}")]
    ParamLength { expected: usize, got: usize },
    #[error("log-likelihood is not finite")]
    NonFinite,
    #[error("covariate `{name}` has {got} values, expected {expected}")]
    Length { name: String, expected: usize, got: usize },
    #[error("response `{0}` must be a count variable")]
    Response(String),
    #[error("family selection needs at least two candidates")]
    TooFewCandidates,
    #[error("no candidate model could be fitted")]
    AllFailed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Poisson,
    NegBin,
    Zip,
    Zinb,
}

impl Family {
    pub const ALL: [Family; 4] = [Family::Poisson, Family::NegBin, Family::Zip, Family::Zinb];

    pub fn zero_inflated(self) -> bool {
        matches!(self, Family::Zip | Family::Zinb)
    }

    pub fn has_dispersion(self) -> bool {
        matches!(self, Family::NegBin | Family::Zinb)
    }

    pub fn name(self) -> &'static str {
        match self {
            Family::Poisson => "poisson",
            Family::NegBin => "negbin",
            Family::Zip => "zip",
            Family::Zinb => "zinb",
        }
    }

    /// Label used in printed tables.
    pub fn label(self) -> &'static str {
        match self {
            Family::Poisson => "Poisson",
            Family::NegBin => "Negative Binomial",
            Family::Zip => "Zero-inflated Poisson",
            Family::Zinb => "Zero-inflated Negative Binomial",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = CountError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "poisson" => Ok(Family::Poisson),
            "negbin" | "nb" | "negative_binomial" => Ok(Family::NegBin),
            "zip" => Ok(Family::Zip),
            "zinb" => Ok(Family::Zinb),
            _ => Err(CountError::UnknownFamily(s.to_string())),
        }
    }
}

/// Family plus the terms of the log-link count part and the logit-link
/// zero-inflation part. Both parts always carry an intercept.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModelSpec {
    pub family: Family,
    pub response: String,
    pub conditional_terms: Vec<String>,
    #[serde(default)]
    pub zero_terms: Vec<String>,
}

impl ModelSpec {
    pub fn new(family: Family, response: impl Into<String>) -> Self {
        ModelSpec {
            family,
            response: response.into(),
            conditional_terms: Vec::new(),
            zero_terms: Vec::new(),
        }
    }

    pub fn conditional<S: Into<String>>(mut self, terms: impl IntoIterator<Item = S>) -> Self {
        self.conditional_terms = terms.into_iter().map(Into::into).collect();
        self
    }

    pub fn zero<S: Into<String>>(mut self, terms: impl IntoIterator<Item = S>) -> Self {
        self.zero_terms = terms.into_iter().map(Into::into).collect();
        self
    }

    /// Same terms under another family; zero terms are dropped for
    /// families without an inflation part.
    pub fn with_family(&self, family: Family) -> Self {
        ModelSpec {
            family,
            response: self.response.clone(),
            conditional_terms: self.conditional_terms.clone(),
            zero_terms: if family.zero_inflated() { self.zero_terms.clone() } else { Vec::new() },
        }
    }

    pub fn validate(&self) -> Result<(), CountError> {
        if !self.family.zero_inflated() && !self.zero_terms.is_empty() {
            return Err(CountError::ZeroTermsNotAllowed(self.family));
        }
        Ok(())
    }
}

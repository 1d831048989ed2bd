use std::str::FromStr;

use serde::Serialize;

use rdsnet_core::{Attribute, SurveyDataset, Variable};

use crate::CountError;

/// One model term and the design columns it expands to.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Covariate {
    pub name: String,
    pub columns: Vec<String>,
    /// Column-major values, one inner vector per column.
    pub values: Vec<Vec<f64>>,
}

/// Response counts with the covariates available to model specs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CountData {
    pub response: String,
    pub y: Vec<u32>,
    pub covariates: Vec<Covariate>,
}

/// Row-major design matrix with a leading intercept column.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub names: Vec<String>,
    pub ncol: usize,
    pub values: Vec<f64>,
}

impl Design {
    pub fn nrow(&self) -> usize {
        self.values.len().checked_div(self.ncol).unwrap_or(0)
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.ncol..(i + 1) * self.ncol]
    }

    /// Numerical rank from the singular values of the column-scaled matrix.
    pub fn rank(&self) -> usize {
        let n = self.nrow();
        let m = nalgebra::DMatrix::from_row_slice(n, self.ncol, &self.values);
        let norms: Vec<f64> = (0..self.ncol).map(|j| m.column(j).norm().max(1e-300)).collect();
        let scaled = nalgebra::DMatrix::from_fn(n, self.ncol, |i, j| m[(i, j)] / norms[j]);
        let sv = scaled.svd(false, false).singular_values;
        let max = sv.iter().cloned().fold(0.0, f64::max);
        sv.iter().filter(|&&s| s > max * 1e-10).count()
    }
}

impl CountData {
    pub fn new(response: impl Into<String>, y: Vec<u32>) -> Self {
        CountData {
            response: response.into(),
            y,
            covariates: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    fn check_len(&self, name: &str, got: usize) -> Result<(), CountError> {
        if got != self.len() {
            return Err(CountError::Length {
                name: name.to_string(),
                expected: self.len(),
                got,
            });
        }
        Ok(())
    }

    pub fn add_numeric(&mut self, name: impl Into<String>, values: Vec<f64>) -> Result<(), CountError> {
        let name = name.into();
        self.check_len(&name, values.len())?;
        self.covariates.retain(|c| c.name != name);
        self.covariates.push(Covariate {
            columns: vec![name.clone()],
            name,
            values: vec![values],
        });
        Ok(())
    }

    /// Dummy-codes `labels` against the first of `levels` that occurs.
    /// Levels that never occur get no column; labels outside `levels` are
    /// appended in sorted order.
    pub fn add_categorical(
        &mut self,
        name: impl Into<String>,
        labels: &[String],
        levels: &[String],
    ) -> Result<(), CountError> {
        let name = name.into();
        self.check_len(&name, labels.len())?;
        let mut order: Vec<String> = levels.iter().filter(|l| labels.contains(l)).cloned().collect();
        let mut extra: Vec<String> = labels.iter().filter(|l| !order.contains(l)).cloned().collect();
        extra.sort();
        extra.dedup();
        order.extend(extra);
        let dummies = order.iter().skip(1);
        let columns = dummies.clone().map(|l| format!("{name}:{l}")).collect();
        let values = dummies
            .map(|l| labels.iter().map(|v| if v == l { 1.0 } else { 0.0 }).collect())
            .collect();
        self.covariates.retain(|c| c.name != name);
        self.covariates.push(Covariate { name, columns, values });
        Ok(())
    }

    pub fn covariate(&self, name: &str) -> Option<&Covariate> {
        self.covariates.iter().find(|c| c.name == name)
    }

    pub fn term_names(&self) -> Vec<&str> {
        self.covariates.iter().map(|c| c.name.as_str()).collect()
    }

    /// Intercept plus the columns of each term, in order.
    pub fn design(&self, terms: &[String]) -> Result<Design, CountError> {
        let covs: Vec<&Covariate> = terms
            .iter()
            .map(|t| self.covariate(t).ok_or_else(|| CountError::UnknownTerm(t.clone())))
            .collect::<Result<_, _>>()?;
        let mut names = vec!["(Intercept)".to_string()];
        for c in &covs {
            names.extend(c.columns.iter().cloned());
        }
        let ncol = names.len();
        let mut values = Vec::with_capacity(ncol * self.len());
        for i in 0..self.len() {
            values.push(1.0);
            for c in &covs {
                values.extend(c.values.iter().map(|col| col[i]));
            }
        }
        Ok(Design { names, ncol, values })
    }

    /// Subset (or reorder) of the rows.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        CountData {
            response: self.response.clone(),
            y: rows.iter().map(|&i| self.y[i]).collect(),
            covariates: self
                .covariates
                .iter()
                .map(|c| Covariate {
                    name: c.name.clone(),
                    columns: c.columns.clone(),
                    values: c.values.iter().map(|col| rows.iter().map(|&i| col[i]).collect()).collect(),
                })
                .collect(),
        }
    }

    /// Complete cases of `response` and `terms` from a survey. Categorical
    /// attributes are dummy-coded against their first dictionary level;
    /// count variables enter as numeric columns.
    pub fn from_dataset(ds: &SurveyDataset, response: Variable, terms: &[String]) -> Result<Self, CountError> {
        if !response.is_degree() {
            return Err(CountError::Response(response.as_str().to_string()));
        }
        enum Kind {
            Cat(Attribute),
            Num(Variable),
        }
        let kinds: Vec<Kind> = terms
            .iter()
            .map(|t| {
                Attribute::from_str(t)
                    .map(Kind::Cat)
                    .or_else(|_| Variable::from_str(t).map(Kind::Num))
                    .map_err(|_| CountError::UnknownTerm(t.clone()))
            })
            .collect::<Result<_, _>>()?;
        let rows: Vec<usize> = (0..ds.len())
            .filter(|&i| {
                let r = &ds.records[i];
                r.value(response).is_some()
                    && kinds.iter().all(|k| match k {
                        Kind::Cat(a) => r.category(*a).is_some(),
                        Kind::Num(v) => r.value(*v).is_some(),
                    })
            })
            .collect();
        let y = rows
            .iter()
            .map(|&i| ds.records[i].value(response).expect("complete case") as u32)
            .collect();
        let mut data = CountData::new(response.as_str(), y);
        for (t, k) in terms.iter().zip(&kinds) {
            match k {
                Kind::Cat(a) => {
                    let labels: Vec<String> = rows
                        .iter()
                        .map(|&i| ds.records[i].category(*a).expect("complete case").to_string())
                        .collect();
                    data.add_categorical(t.clone(), &labels, &ds.levels(*a))?;
                }
                Kind::Num(v) => {
                    let values = rows.iter().map(|&i| ds.records[i].value(*v).expect("complete case")).collect();
                    data.add_numeric(t.clone(), values)?;
                }
            }
        }
        Ok(data)
    }
}

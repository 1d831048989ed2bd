pub mod ergm;
pub mod estimate;
pub mod fit;
pub mod mixing;
pub mod simulate;
pub mod trees;
pub mod validate;

use std::hash::BuildHasher;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context as _, Result};

use rdsnet_core::Format as DataFormat;
use rdsnet_core::{load_dataset, DataError, OrphanPolicy, SurveyDataset};
use rdsnet_ergm::AttributeSpec;

use crate::output::Format;

pub const DEFAULT_TOP_CODE: u32 = 20;

pub struct Context {
    pub out_dir: PathBuf,
    pub format: Format,
    pub verbosity: u8,
}

impl Context {
    pub fn say(&self, msg: impl AsRef<str>) {
        if self.verbosity >= 1 {
            println!("{}", msg.as_ref());
        }
    }

    pub fn debug(&self, msg: impl AsRef<str>) {
        if self.verbosity >= 2 {
            eprintln!("{}", msg.as_ref());
        }
    }

    pub fn report_written(&self, paths: &[PathBuf]) {
        for p in paths {
            self.debug(format!("wrote {}", p.display()));
        }
    }
}

pub fn is_validation_failure(err: &anyhow::Error) -> bool {
    err.chain()
        .any(|e| matches!(e.downcast_ref::<DataError>(), Some(DataError::Invalid(_))))
}

pub fn data_format(path: &Path) -> Result<DataFormat> {
    DataFormat::from_path(path).ok_or_else(|| anyhow!("{}: expected a .csv or .json file", path.display()))
}

/// Loads a survey, failing with the validation report if it has violations.
pub fn load(path: &Path, top_code: u32, orphan_policy: OrphanPolicy) -> Result<SurveyDataset> {
    let (ds, report) = load_dataset(path, data_format(path)?, top_code, orphan_policy)
        .with_context(|| format!("loading {}", path.display()))?;
    if report.warning_count() > 0 {
        eprintln!("warning: {} orphan coupon(s) kept as seeds", report.warning_count());
    }
    Ok(ds)
}

/// Seed for runs that were not given one; recorded in the output metadata.
pub fn fresh_seed() -> u64 {
    std::collections::hash_map::RandomState::new().hash_one(std::time::SystemTime::now())
}

/// Parses `name:level=p,level=p`.
pub fn parse_attribute(s: &str) -> Result<AttributeSpec> {
    let (name, rest) = s
        .split_once(':')
        .ok_or_else(|| anyhow!("attribute `{s}`: expected name:level=p,level=p"))?;
    let mut distribution = Vec::new();
    for part in rest.split(',') {
        let (level, p) = part
            .split_once('=')
            .ok_or_else(|| anyhow!("attribute `{s}`: expected level=p, found `{part}`"))?;
        let p: f64 = p.trim().parse().with_context(|| format!("attribute `{s}`: bad probability `{p}`"))?;
        distribution.push((level.trim().to_string(), p));
    }
    if name.trim().is_empty() || distribution.is_empty() {
        bail!("attribute `{s}`: expected name:level=p,level=p");
    }
    Ok(AttributeSpec {
        name: name.trim().to_string(),
        distribution,
        exact: true,
    })
}

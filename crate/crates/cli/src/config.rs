//! Run configuration. Each subcommand has one section whose fields can come
//! from a TOML file or from flags; flags win, then the file, then defaults.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use rdsnet_core::rds::SeedSelection;
use rdsnet_core::{Attribute, Network, OrphanPolicy, Variable};
use rdsnet_countreg::Family;

use crate::output::Format;

/// Declares a section whose fields are all optional, usable both as clap
/// arguments and as a TOML table, plus `or` to layer two of them.
macro_rules! section {
    ($(#[$m:meta])* $name:ident { $($(#[$fm:meta])* $field:ident : $ty:ty),* $(,)? }) => {
        $(#[$m])*
        #[derive(Debug, Clone, Default, clap::Args, Serialize, Deserialize)]
        #[serde(deny_unknown_fields)]
        pub struct $name {
            $($(#[$fm])* pub $field: Option<$ty>,)*
        }

        impl $name {
            pub fn or(self, base: Self) -> Self {
                $name { $($field: self.$field.or(base.$field),)* }
            }
        }
    };
}

section!(GlobalSection {
    out_dir: PathBuf,
    format: Format,
    threads: usize,
    verbosity: u8,
});

section!(ValidateSection {
    /// Survey file (.csv or .json)
    #[arg(value_name = "DATASET")]
    dataset: PathBuf,
    /// Instrument maximum for close-friend counts
    #[arg(long)]
    top_code: u32,
    /// What to do with unmatched recruiter coupons: seed or reject
    #[arg(long)]
    orphan_policy: OrphanPolicy,
});

section!(EstimateSection {
    #[arg(value_name = "DATASET")]
    dataset: PathBuf,
    #[arg(long)]
    top_code: u32,
    #[arg(long)]
    orphan_policy: OrphanPolicy,
    /// Degree used for the RDS-II weights
    #[arg(long)]
    weight: Variable,
    /// Bootstrap replicates
    #[arg(long)]
    bootstrap: usize,
    /// Attributes for subgroup tables
    #[arg(long, value_delimiter = ',')]
    by: Vec<Attribute>,
    #[arg(long, value_delimiter = ',')]
    networks: Vec<Network>,
    #[arg(long)]
    rng_seed: u64,
});

section!(FitSection {
    #[arg(value_name = "DATASET")]
    dataset: PathBuf,
    #[arg(long)]
    top_code: u32,
    #[arg(long)]
    orphan_policy: OrphanPolicy,
    /// Degree variable to model
    #[arg(long)]
    response: Variable,
    /// Count-part terms
    #[arg(long, value_delimiter = ',')]
    terms: Vec<String>,
    /// Zero-inflation terms
    #[arg(long, value_delimiter = ',')]
    zero_terms: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    families: Vec<Family>,
    /// Run backward stepwise selection on the best family
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    stepwise: bool,
    #[arg(long)]
    n_starts: usize,
    #[arg(long)]
    tol: f64,
    #[arg(long)]
    max_iter: usize,
    #[arg(long)]
    rng_seed: u64,
});

section!(TreesSection {
    /// Survey file, or a forest CSV with respondent_id,parent_id,wave
    #[arg(value_name = "INPUT")]
    input: PathBuf,
    #[arg(long)]
    top_code: u32,
    #[arg(long)]
    orphan_policy: OrphanPolicy,
    /// Distinguish trees by node labels
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    labeled: bool,
    #[arg(long, value_delimiter = ',')]
    label_attrs: Vec<String>,
    /// Cells per row in the layout grid
    #[arg(long)]
    columns: usize,
});

section!(MixingSection {
    #[arg(value_name = "DATASET")]
    dataset: PathBuf,
    #[arg(long)]
    top_code: u32,
    #[arg(long)]
    orphan_policy: OrphanPolicy,
    #[arg(long)]
    attribute: Attribute,
    /// Levels left out of the matrix
    #[arg(long, value_delimiter = ',')]
    drop: Vec<String>,
});

section!(SimulateSection {
    /// Population edge list; an Erdős–Rényi graph is drawn when absent
    #[arg(long)]
    edge_list: PathBuf,
    /// Node attribute CSV for the edge list
    #[arg(long)]
    node_attributes: PathBuf,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    mean_degree: f64,
    /// Random attribute, e.g. `veteran:1=0.3,0=0.7`; repeatable
    #[arg(long = "attribute")]
    attributes: Vec<String>,
    #[arg(long)]
    n_seeds: usize,
    #[arg(long)]
    seed_selection: SeedSelection,
    #[arg(long)]
    coupons: usize,
    #[arg(long)]
    acceptance_prob: f64,
    #[arg(long)]
    target_sample: usize,
    #[arg(long)]
    max_waves: u32,
    /// Write the population edge list too
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    write_graph: bool,
    #[arg(long)]
    rng_seed: u64,
});

section!(ErgmFitSection {
    #[arg(long)]
    n: usize,
    /// Model terms, e.g. `edges,nodematch(gender)`
    #[arg(long, value_delimiter = ',')]
    statistics: Vec<String>,
    /// Target value per term
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    targets: Vec<f64>,
    /// Node attribute, e.g. `gender:male=0.704,female=0.296`; repeatable
    #[arg(long = "attribute")]
    attributes: Vec<String>,
    #[arg(long)]
    phases: usize,
    #[arg(long)]
    max_phases: usize,
    #[arg(long)]
    gain: f64,
    #[arg(long)]
    samples_per_phase: usize,
    #[arg(long)]
    rng_seed: u64,
});

section!(PowerSection {
    #[arg(long)]
    n: usize,
    #[arg(long, value_delimiter = ',')]
    statistics: Vec<String>,
    /// Coefficients; fitted from `targets` when absent
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    theta: Vec<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    targets: Vec<f64>,
    #[arg(long = "attribute")]
    attributes: Vec<String>,
    /// Target sample sizes to compare
    #[arg(long, value_delimiter = ',')]
    sample_sizes: Vec<usize>,
    #[arg(long)]
    n_seeds: usize,
    #[arg(long)]
    seed_selection: SeedSelection,
    #[arg(long)]
    coupons: usize,
    #[arg(long)]
    acceptance_prob: f64,
    /// `attribute=level` for a proportion, or a degree variable for a mean
    #[arg(long)]
    estimand: String,
    /// Population value; the realized population value when absent
    #[arg(long, allow_hyphen_values = true)]
    truth: f64,
    #[arg(long)]
    replicates: usize,
    /// Distinct population graphs cycled through by the replicates
    #[arg(long)]
    populations: usize,
    #[arg(long)]
    bootstrap: usize,
    #[arg(long)]
    weight: Variable,
    #[arg(long)]
    rng_seed: u64,
});

/// Contents of a config file.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default)]
    pub global: GlobalSection,
    #[serde(default)]
    pub validate: ValidateSection,
    #[serde(default)]
    pub estimate: EstimateSection,
    #[serde(default)]
    pub fit: FitSection,
    #[serde(default)]
    pub trees: TreesSection,
    #[serde(default)]
    pub mixing: MixingSection,
    #[serde(default)]
    pub simulate: SimulateSection,
    #[serde(default, rename = "ergm-fit")]
    pub ergm_fit: ErgmFitSection,
    #[serde(default)]
    pub power: PowerSection,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}

pub fn require<T>(value: Option<T>, name: &str) -> Result<T> {
    match value {
        Some(v) => Ok(v),
        None => bail!("missing required setting `{name}` (flag or config file)"),
    }
}

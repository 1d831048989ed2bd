//! Survey records, dataset validation and the zero/skip summary.
//!
//! A missing answer (a skip) is always `None`; an explicit zero is `Some(0)`.
//! The two are never merged at this layer.

mod io;
mod schema;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use io::{load_dataset, read_records, save_dataset, write_records, Format, CSV_COLUMNS};
pub use schema::{AgeBracket, Attribute, Ethnicity, Gender, ShelterStatus, Variable};

/// Maximum number of coupons a respondent can hold.
pub const COUPON_LIMIT: usize = 3;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },
    #[error("header mismatch: expected `{expected}`, found `{found}`")]
    Header { expected: String, found: String },
    #[error("{}", .0.summary())]
    Invalid(ValidationReport),
    #[error("unknown {kind} `{name}`")]
    Unknown { kind: &'static str, name: String },
}

/// One respondent row.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SurveyRecord {
    pub respondent_id: String,
    pub recruiter_coupon: Option<String>,
    pub own_coupons: Vec<String>,
    pub hub_id: Option<String>,
    pub age_bracket: Option<AgeBracket>,
    pub gender: Option<Gender>,
    pub race: Option<String>,
    pub ethnicity: Option<Ethnicity>,
    pub shelter_status: Option<ShelterStatus>,
    pub veteran: Option<bool>,
    pub chronic: Option<bool>,
    pub mental_health: Option<bool>,
    pub substance_use: Option<bool>,
    pub disability: Option<bool>,
    pub acquaintance_degree: Option<u32>,
    pub close_friend_degree: Option<u32>,
    pub kinship_degree: Option<u32>,
    /// Derived from coupon linkage; recomputed by [`SurveyDataset::from_records`].
    pub referral_out_degree: u32,
}

impl SurveyRecord {
    pub fn new(respondent_id: impl Into<String>) -> Self {
        SurveyRecord {
            respondent_id: respondent_id.into(),
            ..Default::default()
        }
    }

    /// Numeric value of a variable; `None` for a skip.
    pub fn value(&self, var: Variable) -> Option<f64> {
        let flag = |b: Option<bool>| b.map(|v| if v { 1.0 } else { 0.0 });
        match var {
            Variable::Acquaintance => self.acquaintance_degree.map(f64::from),
            Variable::CloseFriend => self.close_friend_degree.map(f64::from),
            Variable::Kinship => self.kinship_degree.map(f64::from),
            Variable::Referral => Some(f64::from(self.referral_out_degree)),
            Variable::Veteran => flag(self.veteran),
            Variable::Chronic => flag(self.chronic),
            Variable::MentalHealth => flag(self.mental_health),
            Variable::SubstanceUse => flag(self.substance_use),
            Variable::Disability => flag(self.disability),
        }
    }

    /// Level of a categorical attribute as a string.
    pub fn category(&self, attr: Attribute) -> Option<&str> {
        let flag = |b: Option<bool>| b.map(|v| if v { "1" } else { "0" });
        match attr {
            Attribute::Hub => self.hub_id.as_deref(),
            Attribute::AgeBracket => self.age_bracket.map(AgeBracket::as_str),
            Attribute::Gender => self.gender.map(Gender::as_str),
            Attribute::Race => self.race.as_deref(),
            Attribute::Ethnicity => self.ethnicity.map(Ethnicity::as_str),
            Attribute::ShelterStatus => self.shelter_status.map(ShelterStatus::as_str),
            Attribute::Veteran => flag(self.veteran),
            Attribute::Chronic => flag(self.chronic),
            Attribute::MentalHealth => flag(self.mental_health),
            Attribute::SubstanceUse => flag(self.substance_use),
            Attribute::Disability => flag(self.disability),
        }
    }
}

/// Per-attribute ordered level lists. The first level is the reference
/// level for dummy coding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryDictionaries {
    pub levels: BTreeMap<String, Vec<String>>,
}

/// Last run of four digits in a label such as `synthetic_2023`.
fn survey_year(label: &str) -> Option<u32> {
    label
        .split(|c: char| !c.is_ascii_digit())
        .rfind(|run| run.len() == 4)
        .and_then(|run| run.parse().ok())
}

/// Race codes used from 2024 on.
pub const RACE_CODES_2024: &[&str] = &["W", "AIANI", "AAA", "BAA", "HL", "MENA", "NHOPI", "MR"];
/// Race codes used up to 2023.
pub const RACE_CODES_2023: &[&str] = &["W", "AIANI", "AAA", "BAA", "NHOPI", "MR"];

impl CategoryDictionaries {
    pub fn for_year(year_label: &str) -> Self {
        let race = if survey_year(year_label).is_some_and(|y| y < 2024) {
            RACE_CODES_2023
        } else {
            RACE_CODES_2024
        };
        let mut levels = BTreeMap::new();
        let own = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        levels.insert(Attribute::Race.name().to_string(), own(race));
        for attr in Attribute::ALL {
            if let Some(fixed) = attr.fixed_levels() {
                levels.insert(attr.name().to_string(), own(fixed));
            }
        }
        CategoryDictionaries { levels }
    }

    /// Configured levels, or `None` when the attribute is open-ended (hubs).
    pub fn levels(&self, attr: Attribute) -> Option<&[String]> {
        self.levels.get(attr.name()).map(Vec::as_slice)
    }

    /// Levels in dictionary order, followed by any observed levels the
    /// dictionary does not list (sorted).
    pub fn ordered_levels(&self, attr: Attribute, records: &[SurveyRecord]) -> Vec<String> {
        let mut out: Vec<String> = self.levels(attr).map(<[String]>::to_vec).unwrap_or_default();
        let mut extra: Vec<String> = records
            .iter()
            .filter_map(|r| r.category(attr))
            .filter(|v| !out.iter().any(|l| l == v))
            .map(str::to_string)
            .collect::<HashSet<_>>()
            .into_iter()
            .collect();
        extra.sort();
        out.extend(extra);
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OrphanPolicy {
    Reject,
    /// Respondents whose recruiter coupon matches nobody become seeds.
    #[default]
    Seed,
}

impl FromStr for OrphanPolicy {
    type Err = DataError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "reject" => Ok(OrphanPolicy::Reject),
            "seed" => Ok(OrphanPolicy::Seed),
            _ => Err(DataError::Unknown {
                kind: "orphan policy",
                name: s.to_string(),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ViolationKind {
    DuplicateRespondent,
    DuplicateCoupon,
    CouponLimit,
    TopCode,
    SelfRecruit,
    Orphan,
    UnknownLevel,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    /// 1-based data row numbers involved.
    pub rows: Vec<usize>,
    pub kind: ViolationKind,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<String> = self.rows.iter().map(ToString::to_string).collect();
        write!(f, "rows {}: {}", rows.join(","), self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    /// Rows whose recruiter coupon matched nobody and were kept as seeds.
    pub orphan_rows: Vec<usize>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn warning_count(&self) -> usize {
        self.orphan_rows.len()
    }

    pub fn summary(&self) -> String {
        match self.violations.first() {
            None => format!("0 violations, {} warnings", self.warning_count()),
            Some(first) => format!("{} violations; first: {first}", self.violations.len()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurveyDataset {
    pub year_label: String,
    pub records: Vec<SurveyRecord>,
    pub top_code: u32,
    pub category_dictionaries: CategoryDictionaries,
    /// Index of the recruiter of each record, resolved from coupons.
    recruiter_index: Vec<Option<usize>>,
}

impl SurveyDataset {
    /// Validates linkage and invariants, derives referral out-degrees.
    pub fn from_records(
        year_label: impl Into<String>,
        records: Vec<SurveyRecord>,
        top_code: u32,
        orphan_policy: OrphanPolicy,
    ) -> Result<(Self, ValidationReport), DataError> {
        let year_label = year_label.into();
        let dicts = CategoryDictionaries::for_year(&year_label);
        Self::with_dictionaries(year_label, records, top_code, orphan_policy, dicts)
    }

    pub fn with_dictionaries(
        year_label: impl Into<String>,
        mut records: Vec<SurveyRecord>,
        top_code: u32,
        orphan_policy: OrphanPolicy,
        category_dictionaries: CategoryDictionaries,
    ) -> Result<(Self, ValidationReport), DataError> {
        let (report, recruiter_index) =
            validate(&records, top_code, orphan_policy, &category_dictionaries);
        if !report.is_valid() {
            return Err(DataError::Invalid(report));
        }
        let mut out_degree = vec![0u32; records.len()];
        for parent in recruiter_index.iter().flatten() {
            out_degree[*parent] += 1;
        }
        for (rec, d) in records.iter_mut().zip(out_degree) {
            rec.referral_out_degree = d;
        }
        let ds = SurveyDataset {
            year_label: year_label.into(),
            records,
            top_code,
            category_dictionaries,
            recruiter_index,
        };
        Ok((ds, report))
    }

    /// Trusted constructor for generated data whose linkage is known.
    pub(crate) fn from_linked(
        year_label: impl Into<String>,
        records: Vec<SurveyRecord>,
        recruiter_index: Vec<Option<usize>>,
        top_code: u32,
    ) -> Self {
        let year_label = year_label.into();
        SurveyDataset {
            category_dictionaries: CategoryDictionaries::for_year(&year_label),
            year_label,
            records,
            top_code,
            recruiter_index,
        }
    }

    pub fn empty(year_label: impl Into<String>, top_code: u32) -> Self {
        let year_label = year_label.into();
        SurveyDataset {
            category_dictionaries: CategoryDictionaries::for_year(&year_label),
            year_label,
            records: Vec::new(),
            top_code,
            recruiter_index: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Recruiter of record `i`; `None` for seeds and orphans.
    pub fn recruiter_of(&self, i: usize) -> Option<usize> {
        self.recruiter_index[i]
    }

    pub fn recruiter_links(&self) -> &[Option<usize>] {
        &self.recruiter_index
    }

    pub fn is_seed(&self, i: usize) -> bool {
        self.recruiter_index[i].is_none()
    }

    pub fn levels(&self, attr: Attribute) -> Vec<String> {
        self.category_dictionaries.ordered_levels(attr, &self.records)
    }
}

fn validate(
    records: &[SurveyRecord],
    top_code: u32,
    policy: OrphanPolicy,
    dicts: &CategoryDictionaries,
) -> (ValidationReport, Vec<Option<usize>>) {
    let mut report = ValidationReport::default();
    let mut push = |rows: Vec<usize>, kind, message: String| {
        report.violations.push(Violation { rows, kind, message });
    };

    let mut ids: HashMap<&str, usize> = HashMap::new();
    let mut coupons: HashMap<&str, usize> = HashMap::new();
    for (i, rec) in records.iter().enumerate() {
        let row = i + 1;
        if let Some(&prev) = ids.get(rec.respondent_id.as_str()) {
            push(
                vec![prev + 1, row],
                ViolationKind::DuplicateRespondent,
                format!("duplicate respondent_id `{}`", rec.respondent_id),
            );
        } else {
            ids.insert(&rec.respondent_id, i);
        }
        if rec.own_coupons.len() > COUPON_LIMIT {
            push(
                vec![row],
                ViolationKind::CouponLimit,
                format!(
                    "coupon limit exceeded: {} coupons (max {COUPON_LIMIT})",
                    rec.own_coupons.len()
                ),
            );
        }
        for c in &rec.own_coupons {
            if let Some(&prev) = coupons.get(c.as_str()) {
                push(
                    vec![prev + 1, row],
                    ViolationKind::DuplicateCoupon,
                    format!("duplicate coupon `{c}`"),
                );
            } else {
                coupons.insert(c, i);
            }
        }
        if let Some(d) = rec.close_friend_degree {
            if d > top_code {
                push(
                    vec![row],
                    ViolationKind::TopCode,
                    format!("close_friend_degree {d} exceeds top code {top_code}"),
                );
            }
        }
        if let (Some(race), Some(levels)) = (&rec.race, dicts.levels(Attribute::Race)) {
            if !levels.iter().any(|l| l == race) {
                push(
                    vec![row],
                    ViolationKind::UnknownLevel,
                    format!("race `{race}` not in the configured code set"),
                );
            }
        }
    }

    let mut links = vec![None; records.len()];
    for (i, rec) in records.iter().enumerate() {
        let Some(rc) = rec.recruiter_coupon.as_deref() else { continue };
        match coupons.get(rc) {
            Some(&owner) if owner == i => push(
                vec![i + 1],
                ViolationKind::SelfRecruit,
                format!("recruiter coupon `{rc}` belongs to the respondent itself"),
            ),
            Some(&owner) => links[i] = Some(owner),
            None => match policy {
                OrphanPolicy::Seed => report.orphan_rows.push(i + 1),
                OrphanPolicy::Reject => push(
                    vec![i + 1],
                    ViolationKind::Orphan,
                    format!("recruiter coupon `{rc}` matches no respondent"),
                ),
            },
        }
    }
    (report, links)
}

/// The four personal networks measured per respondent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Network {
    Kinship,
    CloseFriendship,
    Acquaintance,
    Referral,
}

impl Network {
    pub const ALL: [Network; 4] = [
        Network::Kinship,
        Network::CloseFriendship,
        Network::Acquaintance,
        Network::Referral,
    ];

    pub fn variable(self) -> Variable {
        match self {
            Network::Kinship => Variable::Kinship,
            Network::CloseFriendship => Variable::CloseFriend,
            Network::Acquaintance => Variable::Acquaintance,
            Network::Referral => Variable::Referral,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Network::Kinship => "Kinship",
            Network::CloseFriendship => "Close Friendship",
            Network::Acquaintance => "Acquaintance",
            Network::Referral => "Referral",
        }
    }
}

impl FromStr for Network {
    type Err = DataError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace(['-', ' '], "_").as_str() {
            "kinship" | "kin" => Ok(Network::Kinship),
            "close_friendship" | "friend" | "close_friend" => Ok(Network::CloseFriendship),
            "acquaintance" | "acq" => Ok(Network::Acquaintance),
            "referral" => Ok(Network::Referral),
            _ => Err(DataError::Unknown {
                kind: "network",
                name: s.to_string(),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ZeroSkipRow {
    pub network: Network,
    pub n_nonmissing: usize,
    pub n_missing: usize,
    pub n_zero: usize,
    /// (missing + explicit zeros) / total records.
    pub fraction_zero_or_skip: f64,
}

pub fn zero_skip_summary(ds: &SurveyDataset) -> Vec<ZeroSkipRow> {
    let total = ds.len();
    Network::ALL
        .iter()
        .map(|&network| {
            let var = network.variable();
            let (mut missing, mut zero) = (0usize, 0usize);
            for r in &ds.records {
                match r.value(var) {
                    None => missing += 1,
                    Some(0.0) => zero += 1,
                    Some(_) => {}
                }
            }
            let fraction = if total == 0 {
                0.0
            } else {
                (missing + zero) as f64 / total as f64
            };
            ZeroSkipRow {
                network,
                n_nonmissing: total - missing,
                n_missing: missing,
                n_zero: zero,
                fraction_zero_or_skip: fraction,
            }
        })
        .collect()
}

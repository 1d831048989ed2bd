//! CSV and JSON persistence. Column order is fixed:
//!
//! `respondent_id, recruiter_coupon, coupon1, coupon2, coupon3, hub_id,
//! age_bracket, gender, race, ethnicity, shelter_status, veteran, chronic,
//! mental_health, substance_use, disability, acq_degree, friend_degree,
//! kin_degree`
//!
//! Skips are empty cells (CSV) or `null` (JSON); booleans are `0`/`1`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{
    CategoryDictionaries, DataError, OrphanPolicy, SurveyDataset, SurveyRecord, ValidationReport,
    COUPON_LIMIT,
};

pub const CSV_COLUMNS: [&str; 19] = [
    "respondent_id",
    "recruiter_coupon",
    "coupon1",
    "coupon2",
    "coupon3",
    "hub_id",
    "age_bracket",
    "gender",
    "race",
    "ethnicity",
    "shelter_status",
    "veteran",
    "chronic",
    "mental_health",
    "substance_use",
    "disability",
    "acq_degree",
    "friend_degree",
    "kin_degree",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn from_path(path: &Path) -> Option<Format> {
        match path.extension()?.to_str()? {
            "csv" => Some(Format::Csv),
            "json" => Some(Format::Json),
            _ => None,
        }
    }
}

impl FromStr for Format {
    type Err = DataError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(DataError::Unknown {
                kind: "format",
                name: s.to_string(),
            }),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
struct RawRow {
    respondent_id: String,
    recruiter_coupon: Option<String>,
    coupon1: Option<String>,
    coupon2: Option<String>,
    coupon3: Option<String>,
    hub_id: Option<String>,
    age_bracket: Option<String>,
    gender: Option<String>,
    race: Option<String>,
    ethnicity: Option<String>,
    shelter_status: Option<String>,
    veteran: Option<u8>,
    chronic: Option<u8>,
    mental_health: Option<u8>,
    substance_use: Option<u8>,
    disability: Option<u8>,
    acq_degree: Option<u32>,
    friend_degree: Option<u32>,
    kin_degree: Option<u32>,
}

fn parse_opt<T: FromStr<Err = DataError>>(v: Option<String>, row: usize) -> Result<Option<T>, DataError> {
    v.filter(|s| !s.is_empty())
        .map(|s| {
            s.parse().map_err(|e: DataError| DataError::Parse {
                row,
                message: e.to_string(),
            })
        })
        .transpose()
}

fn parse_flag(v: Option<u8>, column: &str, row: usize) -> Result<Option<bool>, DataError> {
    match v {
        None => Ok(None),
        Some(0) => Ok(Some(false)),
        Some(1) => Ok(Some(true)),
        Some(x) => Err(DataError::Parse {
            row,
            message: format!("{column} must be 0, 1 or empty, found {x}"),
        }),
    }
}

fn nonempty(v: Option<String>) -> Option<String> {
    v.filter(|s| !s.is_empty())
}

impl RawRow {
    fn into_record(self, row: usize) -> Result<SurveyRecord, DataError> {
        if self.respondent_id.is_empty() {
            return Err(DataError::Parse {
                row,
                message: "empty respondent_id".into(),
            });
        }
        let own_coupons = [self.coupon1, self.coupon2, self.coupon3]
            .into_iter()
            .filter_map(nonempty)
            .collect();
        Ok(SurveyRecord {
            respondent_id: self.respondent_id,
            recruiter_coupon: nonempty(self.recruiter_coupon),
            own_coupons,
            hub_id: nonempty(self.hub_id),
            age_bracket: parse_opt(self.age_bracket, row)?,
            gender: parse_opt(self.gender, row)?,
            race: nonempty(self.race),
            ethnicity: parse_opt(self.ethnicity, row)?,
            shelter_status: parse_opt(self.shelter_status, row)?,
            veteran: parse_flag(self.veteran, "veteran", row)?,
            chronic: parse_flag(self.chronic, "chronic", row)?,
            mental_health: parse_flag(self.mental_health, "mental_health", row)?,
            substance_use: parse_flag(self.substance_use, "substance_use", row)?,
            disability: parse_flag(self.disability, "disability", row)?,
            acquaintance_degree: self.acq_degree,
            close_friend_degree: self.friend_degree,
            kinship_degree: self.kin_degree,
            referral_out_degree: 0,
        })
    }

    fn from_record(r: &SurveyRecord, row: usize) -> Result<RawRow, DataError> {
        if r.own_coupons.len() > COUPON_LIMIT {
            return Err(DataError::Parse {
                row,
                message: format!("coupon limit exceeded: {} coupons", r.own_coupons.len()),
            });
        }
        let coupon = |k: usize| r.own_coupons.get(k).cloned();
        let flag = |b: Option<bool>| b.map(u8::from);
        Ok(RawRow {
            respondent_id: r.respondent_id.clone(),
            recruiter_coupon: r.recruiter_coupon.clone(),
            coupon1: coupon(0),
            coupon2: coupon(1),
            coupon3: coupon(2),
            hub_id: r.hub_id.clone(),
            age_bracket: r.age_bracket.map(|v| v.as_str().to_string()),
            gender: r.gender.map(|v| v.as_str().to_string()),
            race: r.race.clone(),
            ethnicity: r.ethnicity.map(|v| v.as_str().to_string()),
            shelter_status: r.shelter_status.map(|v| v.as_str().to_string()),
            veteran: flag(r.veteran),
            chronic: flag(r.chronic),
            mental_health: flag(r.mental_health),
            substance_use: flag(r.substance_use),
            disability: flag(r.disability),
            acq_degree: r.acquaintance_degree,
            friend_degree: r.close_friend_degree,
            kin_degree: r.kinship_degree,
        })
    }
}

/// Parses records without linkage validation.
pub fn read_records<R: Read>(reader: R, format: Format) -> Result<Vec<SurveyRecord>, DataError> {
    match format {
        Format::Csv => {
            let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(reader);
            let header = rdr.headers().map_err(|e| DataError::Parse {
                row: 0,
                message: e.to_string(),
            })?;
            let found: Vec<&str> = header.iter().collect();
            if found != CSV_COLUMNS {
                return Err(DataError::Header {
                    expected: CSV_COLUMNS.join(","),
                    found: found.join(","),
                });
            }
            rdr.deserialize::<RawRow>()
                .enumerate()
                .map(|(i, row)| {
                    row.map_err(|e| DataError::Parse {
                        row: i + 1,
                        message: e.to_string(),
                    })
                    .and_then(|raw| raw.into_record(i + 1))
                })
                .collect()
        }
        Format::Json => {
            let json_err = |e: serde_json::Error| DataError::Parse {
                row: e.line(),
                message: e.to_string(),
            };
            // a bare array, or an object carrying it under `records`
            let mut value: serde_json::Value = serde_json::from_reader(reader).map_err(json_err)?;
            if let Some(records) = value.get_mut("records") {
                value = records.take();
            }
            let rows: Vec<RawRow> = serde_json::from_value(value).map_err(json_err)?;
            rows.into_iter()
                .enumerate()
                .map(|(i, raw)| raw.into_record(i + 1))
                .collect()
        }
    }
}

pub fn write_records<W: Write>(writer: W, records: &[SurveyRecord], format: Format) -> Result<(), DataError> {
    let rows = records
        .iter()
        .enumerate()
        .map(|(i, r)| RawRow::from_record(r, i + 1))
        .collect::<Result<Vec<_>, _>>()?;
    let io_err = |e: std::io::Error| DataError::Io {
        path: "<writer>".into(),
        source: e,
    };
    match format {
        Format::Csv => {
            let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
            w.write_record(CSV_COLUMNS).map_err(|e| io_err(e.into()))?;
            for row in &rows {
                w.serialize(row).map_err(|e| io_err(e.into()))?;
            }
            w.flush().map_err(io_err)
        }
        Format::Json => {
            let mut writer = writer;
            serde_json::to_writer_pretty(&mut writer, &rows).map_err(|e| io_err(e.into()))?;
            writer.write_all(b"\n").map_err(io_err)
        }
    }
}

/// Loads and validates a dataset. The year label is taken from the file stem.
pub fn load_dataset(
    path: &Path,
    format: Format,
    top_code: u32,
    orphan_policy: OrphanPolicy,
) -> Result<(SurveyDataset, ValidationReport), DataError> {
    let file = File::open(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let records = read_records(BufReader::new(file), format)?;
    let year_label = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or_default()
        .to_string();
    let dicts = CategoryDictionaries::for_year(&year_label);
    SurveyDataset::with_dictionaries(year_label, records, top_code, orphan_policy, dicts)
}

pub fn save_dataset(ds: &SurveyDataset, path: &Path, format: Format) -> Result<(), DataError> {
    let file = File::create(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })?;
    write_records(BufWriter::new(file), &ds.records, format)
}

//! Output files. Every file starts with provenance: CSV and text files get
//! `#` comment lines, JSON files a `metadata` object.

use std::fs;
use std::io::Write;
use std::path::PathBuf;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// Provenance shared by every file a command writes.
#[derive(Debug, Clone)]
pub struct Metadata {
    pub command: &'static str,
    pub rng_seed: Option<u64>,
    /// Fully resolved settings, enough to re-run the command.
    pub config: Value,
}

impl Metadata {
    pub fn new(command: &'static str, rng_seed: Option<u64>, config: &impl Serialize) -> Result<Self> {
        Ok(Metadata {
            command,
            rng_seed,
            config: serde_json::to_value(config)?,
        })
    }

    pub fn config_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.command.as_bytes());
        h.update(b"\n");
        h.update(self.config.to_string().as_bytes());
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    fn seed_text(&self) -> String {
        self.rng_seed.map_or_else(|| "none".to_string(), |s| s.to_string())
    }

    pub fn comment_lines(&self) -> String {
        format!(
            "# tool: rdsnet {}\n# command: {}\n# rng_seed: {}\n# config_sha256: {}\n# config: {}\n",
            env!("CARGO_PKG_VERSION"),
            self.command,
            self.seed_text(),
            self.config_hash(),
            self.config
        )
    }

    pub fn json(&self) -> Value {
        json!({
            "tool": "rdsnet",
            "version": env!("CARGO_PKG_VERSION"),
            "command": self.command,
            "rng_seed": self.rng_seed,
            "config_sha256": self.config_hash(),
            "config": self.config,
        })
    }
}

/// A table of JSON cells; `null` cells are written as empty CSV fields.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    fn csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(cell_text))?;
        }
        Ok(w.into_inner().map_err(|e| e.into_error())?)
    }

    fn records(&self) -> Value {
        Value::Array(
            self.rows
                .iter()
                .map(|row| {
                    let obj: Map<String, Value> = self.columns.iter().cloned().zip(row.iter().cloned()).collect();
                    Value::Object(obj)
                })
                .collect(),
        )
    }
}

fn cell_text(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Number cell; non-finite values become null.
pub fn num(x: f64) -> Value {
    serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
}

pub fn opt(x: Option<f64>) -> Value {
    x.map_or(Value::Null, num)
}

pub fn text(s: impl Into<String>) -> Value {
    Value::String(s.into())
}

pub fn int(x: impl Into<u64>) -> Value {
    Value::from(x.into())
}

pub struct Output {
    pub dir: PathBuf,
    pub format: Format,
    pub meta: Metadata,
    written: Vec<PathBuf>,
}

impl Output {
    pub fn new(dir: PathBuf, format: Format, meta: Metadata) -> Result<Self> {
        fs::create_dir_all(&dir).with_context(|| format!("creating output directory {}", dir.display()))?;
        Ok(Output {
            dir,
            format,
            meta,
            written: Vec::new(),
        })
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }

    fn put(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        let mut f = fs::File::create(&path).with_context(|| format!("writing {}", path.display()))?;
        f.write_all(bytes)?;
        self.written.push(path);
        Ok(())
    }

    /// Writes `stem.csv` or `stem.json` depending on the format.
    pub fn table(&mut self, stem: &str, table: &Table) -> Result<()> {
        match self.format {
            Format::Csv => {
                let mut bytes = self.meta.comment_lines().into_bytes();
                bytes.extend(table.csv()?);
                self.put(&format!("{stem}.csv"), &bytes)
            }
            Format::Json => {
                let doc = json!({ "metadata": self.meta.json(), "columns": table.columns, "records": table.records() });
                self.json_file(&format!("{stem}.json"), &doc)
            }
        }
    }

    /// CSV body produced elsewhere, prefixed with the comment header.
    pub fn csv_bytes(&mut self, name: &str, body: &[u8]) -> Result<()> {
        let mut bytes = self.meta.comment_lines().into_bytes();
        bytes.extend_from_slice(body);
        self.put(name, &bytes)
    }

    /// JSON document with `metadata` added as its first key.
    pub fn json(&mut self, name: &str, payload: Value) -> Result<()> {
        let mut doc = Map::new();
        doc.insert("metadata".into(), self.meta.json());
        match payload {
            Value::Object(m) => doc.extend(m),
            other => {
                doc.insert("data".into(), other);
            }
        }
        self.json_file(name, &Value::Object(doc))
    }

    fn json_file(&mut self, name: &str, doc: &Value) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(doc)?;
        bytes.push(b'\n');
        self.put(name, &bytes)
    }

    pub fn text(&mut self, name: &str, body: &str) -> Result<()> {
        let mut s = self.meta.comment_lines();
        s.push_str(body);
        self.put(name, s.as_bytes())
    }
}

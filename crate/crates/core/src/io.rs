//! File formats: the sessions CSV, encoded-sequence and distance CSVs,
//! configuration JSON, and the run manifest written next to every output.

use std::collections::BTreeMap;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::distance::DistanceMatrix;
use crate::encoding::EncodedSequence;
use crate::error::{Error, Result};
use crate::model::{AnalysisConfig, RawSessionRow, SessionRecord, Skill};

pub const SESSION_HEADER: [&str; 7] = [
    "learner_id",
    "session_index",
    "tutor_id",
    "fluency",
    "grammar",
    "vocabulary",
    "pronunciation",
];

/// Parses a sessions CSV.
///
/// `learner_id` and `tutor_id` columns are required. `session_index` may be
/// omitted (or left empty) when `timestamp_column` names a column to order
/// by instead. Score columns are optional and empty cells mean "not scored".
/// Row numbers in errors count data rows from 1.
pub fn read_sessions<R: Read>(reader: R, timestamp_column: Option<&str>) -> Result<Vec<RawSessionRow>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let learner_col = col("learner_id").ok_or_else(|| Error::InvalidRow {
        row: 0,
        message: "missing `learner_id` column".into(),
    })?;
    let tutor_col = col("tutor_id").ok_or_else(|| Error::InvalidRow {
        row: 0,
        message: "missing `tutor_id` column".into(),
    })?;
    let index_col = col("session_index");
    let ts_col = match timestamp_column {
        Some(name) => Some(col(name).ok_or_else(|| Error::InvalidRow {
            row: 0,
            message: format!("missing timestamp column `{name}`"),
        })?),
        None => None,
    };
    if index_col.is_none() && ts_col.is_none() {
        return Err(Error::InvalidRow {
            row: 0,
            message: "missing `session_index` column (or pass a timestamp column)".into(),
        });
    }
    let score_cols: Vec<(Skill, usize)> = Skill::ALL.iter().filter_map(|&s| col(s.as_str()).map(|c| (s, c))).collect();

    let mut rows = Vec::new();
    for (n, record) in rdr.records().enumerate() {
        let row = n + 1;
        let record = record?;
        let cell = |c: usize| record.get(c).unwrap_or("");
        let session_index = match index_col.map(cell).filter(|s| !s.is_empty()) {
            Some(s) => Some(s.parse::<u32>().map_err(|_| Error::InvalidRow {
                row,
                message: format!("session_index `{s}` is not a positive integer"),
            })?),
            None => None,
        };
        if session_index.is_none() && ts_col.is_none() {
            return Err(Error::InvalidRow {
                row,
                message: "empty session_index".into(),
            });
        }
        let mut scores = BTreeMap::new();
        for &(skill, c) in &score_cols {
            let s = cell(c);
            if s.is_empty() {
                continue;
            }
            let v: f64 = s.parse().map_err(|_| Error::InvalidRow {
                row,
                message: format!("{skill} score `{s}` is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::InvalidRow {
                    row,
                    message: format!("{skill} score `{s}` is not finite"),
                });
            }
            scores.insert(skill, v);
        }
        rows.push(RawSessionRow {
            row,
            learner_id: cell(learner_col).to_string(),
            session_index,
            timestamp: ts_col.map(|c| cell(c).to_string()),
            tutor_id: cell(tutor_col).to_string(),
            scores,
        });
    }
    Ok(rows)
}

pub fn read_sessions_file(path: &Path, timestamp_column: Option<&str>) -> Result<Vec<RawSessionRow>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_sessions(std::io::BufReader::new(file), timestamp_column)
}

pub fn write_sessions<W: Write>(writer: W, sessions: &[SessionRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(SESSION_HEADER)?;
    for s in sessions {
        let mut rec = vec![s.learner_id.clone(), s.session_index.to_string(), s.tutor_id.clone()];
        rec.extend(Skill::ALL.iter().map(|k| s.scores.get(k).map(|v| v.to_string()).unwrap_or_default()));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("<output>", e))?;
    Ok(())
}

pub fn write_encoded<W: Write>(writer: W, encs: &[EncodedSequence]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["learner_id", "encoded"])?;
    for e in encs {
        w.write_record([e.learner_id.as_str(), e.to_field().as_str()])?;
    }
    w.flush().map_err(|e| Error::io("<output>", e))?;
    Ok(())
}

/// Square matrix with a `learner_id` header row and column.
pub fn write_distance_matrix<W: Write>(writer: W, d: &DistanceMatrix) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["learner_id".to_string()];
    header.extend(d.ids().iter().cloned());
    w.write_record(&header)?;
    for (i, id) in d.ids().iter().enumerate() {
        let mut rec = vec![id.clone()];
        rec.extend(d.row(i).iter().map(f64::to_string));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("<output>", e))?;
    Ok(())
}

pub fn load_config(path: &Path) -> Result<AnalysisConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let config: AnalysisConfig = serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    config.validate()?;
    Ok(config)
}

/// Hex SHA-256 of the configuration in canonical JSON (sorted keys, no
/// whitespace), so key order in the source file does not matter.
pub fn config_hash(config: &AnalysisConfig) -> Result<String> {
    let value = serde_json::to_value(config)?;
    Ok(hex::encode(Sha256::digest(canonical_json(&value).as_bytes())))
}

pub fn canonical_json(value: &serde_json::Value) -> String {
    use serde_json::Value;
    match value {
        Value::Object(map) => {
            let sorted: BTreeMap<&String, &Value> = map.iter().collect();
            let parts: Vec<String> = sorted
                .into_iter()
                .map(|(k, v)| format!("{}:{}", Value::String(k.clone()), canonical_json(v)))
                .collect();
            format!("{{{}}}", parts.join(","))
        }
        Value::Array(items) => format!("[{}]", items.iter().map(canonical_json).collect::<Vec<_>>().join(",")),
        other => other.to_string(),
    }
}

pub fn file_digest(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

/// Record of one CLI run. The timestamp lives only here so report files
/// stay byte-identical across reruns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub config_hash: String,
    pub input_digests: Vec<InputDigest>,
    pub seed: u64,
    pub timestamp: String,
    pub tool_version: String,
}

impl RunManifest {
    pub fn new(subcommand: &str, config: &AnalysisConfig, inputs: &[&Path]) -> Result<Self> {
        Self::with_hash(subcommand, config_hash(config)?, config.rng_seed, inputs)
    }

    /// For runs whose configuration is only known by its hash.
    pub fn with_hash(subcommand: &str, config_hash: String, seed: u64, inputs: &[&Path]) -> Result<Self> {
        let input_digests = inputs
            .iter()
            .map(|p| {
                Ok(InputDigest {
                    path: p.display().to_string(),
                    sha256: file_digest(p)?,
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            subcommand: subcommand.to_string(),
            config_hash,
            input_digests,
            seed,
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            tool_version: crate::TOOL_VERSION.to_string(),
        })
    }

    pub fn write(&self, dir: &Path) -> Result<std::path::PathBuf> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join(format!("{}.manifest.json", self.subcommand));
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }
}

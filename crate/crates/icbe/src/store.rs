//! Persistence: line-oriented record files with versioned headers for
//! sentences and event records, run manifests, and gold-data ingestion.
//!
//! All writers go through a temp-file-and-rename so an aborted run never
//! leaves a torn file. One writer per file; concurrent readers are fine.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use chrono::{DateTime, Utc};
use serde::{de::DeserializeOwned, Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::evaluator::{CoderTier, GoldCoding};
use crate::extractor::{CodedEvent, PipelineConfig};
use crate::segmenter::SentenceRecord;

pub const EVENTS_SCHEMA: &str = "icbe-events";
pub const SENTENCES_SCHEMA: &str = "icbe-sentences";
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("I/O error at {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}:{line}: malformed record: {message}")]
    Malformed {
        path: String,
        line: usize,
        message: String,
    },
    #[error("{path}: expected schema {expected} v{expected_version}, found {found} v{found_version}")]
    SchemaMismatch {
        path: String,
        expected: String,
        expected_version: u32,
        found: String,
        found_version: u32,
    },
    #[error("{path}: missing header line")]
    MissingHeader { path: String },
    #[error("gold mapping is missing required column mapping {column:?}")]
    UnmappedColumn { column: String },
    #[error("gold file {path} is missing mapped column {column:?}")]
    MissingGoldColumn { path: String, column: String },
    #[error("failed to parse {path}: {message}")]
    Parse { path: String, message: String },
}

fn io_err(path: &Path, source: std::io::Error) -> StoreError {
    StoreError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Writes content atomically: temp file in the same directory, then
/// rename over the target.
pub fn write_atomic(path: &Path, content: &[u8]) -> Result<(), StoreError> {
    let parent = path.parent().unwrap_or_else(|| Path::new("."));
    let tmp = parent.join(format!(
        ".{}.tmp",
        path.file_name()
            .map(|n| n.to_string_lossy().to_string())
            .unwrap_or_else(|| "out".to_string())
    ));
    {
        let mut file = std::fs::File::create(&tmp).map_err(|e| io_err(&tmp, e))?;
        file.write_all(content).map_err(|e| io_err(&tmp, e))?;
        file.sync_all().map_err(|e| io_err(&tmp, e))?;
    }
    std::fs::rename(&tmp, path).map_err(|e| io_err(path, e))
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    schema: String,
    version: u32,
}

fn render_records<T: Serialize>(schema: &str, records: &[T]) -> String {
    let mut out = serde_json::to_string(&Header {
        schema: schema.to_string(),
        version: SCHEMA_VERSION,
    })
    .expect("header serializes");
    out.push('\n');
    for record in records {
        out.push_str(&serde_json::to_string(record).expect("record serializes"));
        out.push('\n');
    }
    out
}

fn read_records<T: DeserializeOwned>(path: &Path, schema: &str) -> Result<Vec<T>, StoreError> {
    let file = std::fs::File::open(path).map_err(|e| io_err(path, e))?;
    let mut lines = BufReader::new(file).lines().enumerate();
    let (_, header_line) = lines.next().ok_or_else(|| StoreError::MissingHeader {
        path: path.display().to_string(),
    })?;
    let header_line = header_line.map_err(|e| io_err(path, e))?;
    let header: Header =
        serde_json::from_str(&header_line).map_err(|e| StoreError::Malformed {
            path: path.display().to_string(),
            line: 1,
            message: e.to_string(),
        })?;
    if header.schema != schema || header.version != SCHEMA_VERSION {
        return Err(StoreError::SchemaMismatch {
            path: path.display().to_string(),
            expected: schema.to_string(),
            expected_version: SCHEMA_VERSION,
            found: header.schema,
            found_version: header.version,
        });
    }
    let mut out = Vec::new();
    for (idx, line) in lines {
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: T = serde_json::from_str(&line).map_err(|e| StoreError::Malformed {
            path: path.display().to_string(),
            line: idx + 1,
            message: e.to_string(),
        })?;
        out.push(record);
    }
    Ok(out)
}

/// Serializes events to the on-disk form without writing; also the input
/// to the manifest's output digest.
pub fn render_events(events: &[CodedEvent]) -> String {
    render_records(EVENTS_SCHEMA, events)
}

pub fn write_events(path: &Path, events: &[CodedEvent]) -> Result<(), StoreError> {
    write_atomic(path, render_events(events).as_bytes())
}

pub fn read_events(path: &Path) -> Result<Vec<CodedEvent>, StoreError> {
    read_records(path, EVENTS_SCHEMA)
}

pub fn write_sentences(path: &Path, sentences: &[SentenceRecord]) -> Result<(), StoreError> {
    write_atomic(path, render_records(SENTENCES_SCHEMA, sentences).as_bytes())
}

pub fn read_sentences(path: &Path) -> Result<Vec<SentenceRecord>, StoreError> {
    read_records(path, SENTENCES_SCHEMA)
}

/// Digest of the serialized event records. A pure function of the
/// events: two runs that emit the same records share a digest.
pub fn events_digest(events: &[CodedEvent]) -> String {
    hex::encode(Sha256::digest(render_events(events).as_bytes()))
}

/// What one pipeline run did: identities, per-stage call counts, and
/// the digest of its outputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub crisis_id: String,
    pub codebook_version: String,
    pub backend_identity: String,
    pub config_digest: String,
    pub stage_calls: BTreeMap<String, u64>,
    pub total_calls: u64,
    pub fallback_count: u64,
    pub abstention_count: u64,
    pub output_digest: String,
    pub started_at: DateTime<Utc>,
    pub finished_at: DateTime<Utc>,
}

impl RunManifest {
    #[allow(clippy::too_many_arguments)]
    pub fn build(
        crisis_id: &str,
        codebook_version: &str,
        backend_identity: &str,
        config: &PipelineConfig,
        stage_calls: BTreeMap<String, u64>,
        total_calls: u64,
        fallback_count: u64,
        abstention_count: u64,
        events: &[CodedEvent],
        started_at: DateTime<Utc>,
        finished_at: DateTime<Utc>,
    ) -> Self {
        let config_digest = hex::encode(Sha256::digest(
            serde_json::to_vec(config).expect("config serializes"),
        ));
        let output_digest = events_digest(events);
        let run_id = hex::encode(
            &Sha256::digest(
                format!("{crisis_id}\0{codebook_version}\0{backend_identity}\0{config_digest}")
                    .as_bytes(),
            )[..8],
        );
        Self {
            run_id,
            crisis_id: crisis_id.to_string(),
            codebook_version: codebook_version.to_string(),
            backend_identity: backend_identity.to_string(),
            config_digest,
            stage_calls,
            total_calls,
            fallback_count,
            abstention_count,
            output_digest,
            started_at,
            finished_at,
        }
    }

    pub fn write(&self, path: &Path) -> Result<(), StoreError> {
        let mut body = serde_json::to_string_pretty(self).expect("manifest serializes");
        body.push('\n');
        write_atomic(path, body.as_bytes())
    }

    pub fn read(path: &Path) -> Result<Self, StoreError> {
        let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        serde_json::from_str(&text).map_err(|e| StoreError::Parse {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }
}

/// A manifest of narratives to process: one file per crisis.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NarrativeEntry {
    pub crisis_id: String,
    pub title: String,
    pub file: String,
}

pub fn read_narratives_manifest(path: &Path) -> Result<Vec<NarrativeEntry>, StoreError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| StoreError::Parse {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

/// Column mapping from a gold delimited file onto [`GoldCoding`] fields.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GoldMapping {
    pub crisis: String,
    pub sentence: String,
    pub coder: String,
    pub tier: String,
    pub node: String,
    pub tokens: String,
    /// Separator between tokens within the tokens cell.
    #[serde(default = "default_token_separator")]
    pub token_separator: String,
    /// Field delimiter of the gold file.
    #[serde(default = "default_delimiter")]
    pub delimiter: String,
}

fn default_token_separator() -> String {
    ";".to_string()
}
fn default_delimiter() -> String {
    ",".to_string()
}

impl GoldMapping {
    pub fn load(path: &Path) -> Result<Self, StoreError> {
        let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        let mapping: GoldMapping =
            serde_json::from_str(&text).map_err(|e| StoreError::Parse {
                path: path.display().to_string(),
                message: e.to_string(),
            })?;
        for (name, value) in [
            ("crisis", &mapping.crisis),
            ("sentence", &mapping.sentence),
            ("coder", &mapping.coder),
            ("tier", &mapping.tier),
            ("node", &mapping.node),
            ("tokens", &mapping.tokens),
        ] {
            if value.trim().is_empty() {
                return Err(StoreError::UnmappedColumn {
                    column: name.to_string(),
                });
            }
        }
        Ok(mapping)
    }
}

/// A gold row that failed validation, with the reason it was dropped.
#[derive(Debug, Clone, Serialize)]
pub struct DroppedRow {
    pub line: usize,
    pub reason: String,
}

/// Reads a delimited gold table into validated codings. Rows with blank
/// tokens or unparseable fields are dropped and reported, not fatal.
pub fn ingest_gold(
    path: &Path,
    mapping: &GoldMapping,
) -> Result<(Vec<GoldCoding>, Vec<DroppedRow>), StoreError> {
    let delimiter = mapping.delimiter.as_bytes().first().copied().unwrap_or(b',');
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .from_path(path)
        .map_err(|e| StoreError::Parse {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
    let headers = reader
        .headers()
        .map_err(|e| StoreError::Parse {
            path: path.display().to_string(),
            message: e.to_string(),
        })?
        .clone();
    let column = |name: &str| -> Result<usize, StoreError> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| StoreError::MissingGoldColumn {
                path: path.display().to_string(),
                column: name.to_string(),
            })
    };
    let crisis_col = column(&mapping.crisis)?;
    let sentence_col = column(&mapping.sentence)?;
    let coder_col = column(&mapping.coder)?;
    let tier_col = column(&mapping.tier)?;
    let node_col = column(&mapping.node)?;
    let tokens_col = column(&mapping.tokens)?;

    let mut records = Vec::new();
    let mut dropped = Vec::new();
    for (idx, row) in reader.records().enumerate() {
        let line = idx + 2; // header is line 1
        let row = match row {
            Ok(r) => r,
            Err(e) => {
                dropped.push(DroppedRow {
                    line,
                    reason: format!("unreadable row: {e}"),
                });
                continue;
            }
        };
        let get = |col: usize| row.get(col).unwrap_or("").trim().to_string();
        let tokens: Vec<String> = get(tokens_col)
            .split(&mapping.token_separator)
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(str::to_string)
            .collect();
        if tokens.is_empty() {
            dropped.push(DroppedRow {
                line,
                reason: "blank tokens cell".to_string(),
            });
            continue;
        }
        let tier_raw = get(tier_col);
        let Some(coder_tier) = CoderTier::parse(&tier_raw) else {
            dropped.push(DroppedRow {
                line,
                reason: format!("unknown coder tier {tier_raw:?}"),
            });
            continue;
        };
        let sentence_raw = get(sentence_col);
        let Ok(sentence_index) = sentence_raw.parse::<usize>() else {
            dropped.push(DroppedRow {
                line,
                reason: format!("sentence index {sentence_raw:?} is not a non-negative integer"),
            });
            continue;
        };
        records.push(GoldCoding {
            crisis_id: get(crisis_col),
            sentence_index,
            coder_id: get(coder_col),
            coder_tier,
            node_id: get(node_col),
            tokens,
        });
    }
    Ok((records, dropped))
}

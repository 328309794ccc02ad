//! Append-only JSONL rating log.
//!
//! Every accepted rating is one line. A line is acknowledged only after
//! `sync_data` returns. On open the whole log is replayed; a final line
//! without its newline is a torn write and is cut off, anything unreadable
//! before that is corruption and refuses to open.

use std::fs::{File, OpenOptions};
use std::io::{self, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use metaphor_forge_core::eval::ratings::{Comparison, Dimension, RatingRecord, System};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogRecord {
    pub task_id: String,
    pub item_id: String,
    pub system: System,
    pub dimension: Dimension,
    pub comparison: Comparison,
    pub worker_id: String,
    pub score: u8,
    pub is_test: bool,
    /// Expected score of a test item.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected: Option<u8>,
}

impl LogRecord {
    pub fn rating(&self) -> RatingRecord {
        RatingRecord {
            item_id: self.item_id.clone(),
            dimension: self.dimension,
            worker_id: self.worker_id.clone(),
            score: self.score,
            is_test_item: self.is_test,
        }
    }
}

#[derive(Debug, Error)]
pub enum LogError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: line {line}: {reason}")]
    Corrupt { path: PathBuf, line: usize, reason: String },
}

/// Parses log text. Returns the records and the byte length of the intact
/// prefix; a torn last line is reported through `torn`.
pub fn parse_log(bytes: &[u8]) -> Result<(Vec<LogRecord>, usize, bool), (usize, String)> {
    let mut records = Vec::new();
    let mut offset = 0;
    let mut line = 0;
    while offset < bytes.len() {
        line += 1;
        let rest = &bytes[offset..];
        let Some(end) = rest.iter().position(|&b| b == b'\n') else {
            return Ok((records, offset, true));
        };
        let text = &rest[..end];
        if !text.iter().all(u8::is_ascii_whitespace) {
            let rec: LogRecord = serde_json::from_slice(text).map_err(|e| (line, e.to_string()))?;
            records.push(rec);
        }
        offset += end + 1;
    }
    Ok((records, offset, false))
}

pub struct RatingLog {
    path: PathBuf,
    file: File,
}

impl RatingLog {
    /// Opens or creates the log and returns every record already in it.
    pub fn open(path: &Path) -> Result<(Self, Vec<LogRecord>), LogError> {
        let io_err = |source| LogError::Io {
            path: path.to_owned(),
            source,
        };
        let mut file = OpenOptions::new()
            .read(true)
            .append(true)
            .create(true)
            .open(path)
            .map_err(io_err)?;
        let mut bytes = Vec::new();
        file.read_to_end(&mut bytes).map_err(io_err)?;
        let (records, intact, torn) = parse_log(&bytes).map_err(|(line, reason)| LogError::Corrupt {
            path: path.to_owned(),
            line,
            reason,
        })?;
        if torn {
            log::warn!(
                "{}: dropping {} bytes of an incomplete final record",
                path.display(),
                bytes.len() - intact
            );
            file.set_len(intact as u64).map_err(io_err)?;
            file.seek(SeekFrom::End(0)).map_err(io_err)?;
            file.sync_data().map_err(io_err)?;
        }
        Ok((
            Self {
                path: path.to_owned(),
                file,
            },
            records,
        ))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Writes one line and waits for it to reach the disk.
    pub fn append(&mut self, record: &LogRecord) -> io::Result<()> {
        let mut line = serde_json::to_vec(record).map_err(io::Error::other)?;
        line.push(b'\n');
        self.file.write_all(&line)?;
        self.file.sync_data()
    }
}

pub fn read_log(path: &Path) -> Result<Vec<LogRecord>, LogError> {
    let bytes = std::fs::read(path).map_err(|source| LogError::Io {
        path: path.to_owned(),
        source,
    })?;
    let (records, _, torn) = parse_log(&bytes).map_err(|(line, reason)| LogError::Corrupt {
        path: path.to_owned(),
        line,
        reason,
    })?;
    if torn {
        log::warn!("{}: ignoring an incomplete final record", path.display());
    }
    Ok(records)
}

//! Rating collection service: task assignment, a durable rating log and
//! the HTTP API that the browser client talks to.

pub mod http;
pub mod log;
pub mod store;

use std::fs;
use std::path::{Path, PathBuf};

use metaphor_forge_core::eval::ratings::{Dimension, EvalItem};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use self::http::{router, serve, AppState};
pub use self::log::{LogRecord, RatingLog};
pub use self::store::{Store, StoreConfig, TestItem};

#[derive(Debug, Error)]
pub enum SetupError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: line {line}: {reason}")]
    Parse { path: PathBuf, line: usize, reason: String },
    #[error("{path}: {reason}")]
    Guidelines { path: PathBuf, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Guideline {
    pub guideline: String,
    pub low: String,
    pub high: String,
}

/// Instruction text per dimension, read from a TOML file with one table
/// per dimension.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Guidelines {
    pub metaphoricity: Guideline,
    pub fluency: Guideline,
    pub paraphrase: Guideline,
}

impl Guidelines {
    pub fn get(&self, d: Dimension) -> &Guideline {
        match d {
            Dimension::Metaphoricity => &self.metaphoricity,
            Dimension::Fluency => &self.fluency,
            Dimension::Paraphrase => &self.paraphrase,
        }
    }

    pub fn load(path: &Path) -> Result<Self, SetupError> {
        let text = fs::read_to_string(path).map_err(|source| SetupError::Io {
            path: path.to_owned(),
            source,
        })?;
        toml::from_str(&text).map_err(|e| SetupError::Guidelines {
            path: path.to_owned(),
            reason: e.to_string(),
        })
    }
}

fn read_jsonl<T: for<'de> Deserialize<'de>>(
    path: &Path,
    check: impl Fn(&T) -> Result<(), String>,
) -> Result<Vec<T>, SetupError> {
    let text = fs::read_to_string(path).map_err(|source| SetupError::Io {
        path: path.to_owned(),
        source,
    })?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let err = |reason: String| SetupError::Parse {
            path: path.to_owned(),
            line: i + 1,
            reason,
        };
        let v: T = serde_json::from_str(line).map_err(|e| err(e.to_string()))?;
        check(&v).map_err(err)?;
        out.push(v);
    }
    Ok(out)
}

fn check_item(it: &EvalItem) -> Result<(), String> {
    EvalItem::new(
        it.item_id.clone(),
        it.x.clone(),
        it.y.clone(),
        it.y_prime.clone(),
        it.system,
        it.comparison,
    )
    .map(drop)
    .map_err(|e| e.to_string())
}

/// One [`EvalItem`] JSON object per line.
pub fn load_items(path: &Path) -> Result<Vec<EvalItem>, SetupError> {
    read_jsonl(path, check_item)
}

/// One [`TestItem`] per line: the item fields plus an `expected` object
/// mapping dimensions to scores.
pub fn load_test_items(path: &Path) -> Result<Vec<TestItem>, SetupError> {
    read_jsonl(path, |t: &TestItem| {
        check_item(&t.item)?;
        if t.expected.is_empty() {
            return Err("test item has no expected scores".into());
        }
        match t.expected.values().find(|s| !(1..=4).contains(*s)) {
            Some(s) => Err(format!("expected score {s} is outside 1..=4")),
            None => Ok(()),
        }
    })
}


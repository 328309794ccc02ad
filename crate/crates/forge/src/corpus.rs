//! Corpus files, test sets and persisted datasets.
//!
//! A dataset directory holds three files:
//!
//! * `dataset.tsv`: `source-ids TAB target-ids` per pair
//! * `vocab.txt`: one token per line in id order
//! * `counts.txt`: `pairs=N masked=M`

use std::collections::BTreeSet;
use std::fs;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use metaphor_forge_core::masking::{
    format_dataset_line, parse_corpus_line, parse_dataset_line, sentence_hash, CorpusError, Dataset, DatasetCounts,
    EncodedPair, LabeledVerbInstance, Vocab,
};
use metaphor_forge_core::text::{tokenize, TextError};
use thiserror::Error;

pub const DATASET_FILE: &str = "dataset.tsv";
pub const VOCAB_FILE: &str = "vocab.txt";
pub const COUNTS_FILE: &str = "counts.txt";

#[derive(Debug, Error)]
pub enum CorpusIoError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Corpus { path: PathBuf, source: CorpusError },
    #[error("{path}: line {line}: {reason}")]
    Format { path: PathBuf, line: usize, reason: String },
}

pub(crate) fn io_err(path: &Path) -> impl Fn(io::Error) -> CorpusIoError + '_ {
    move |source| CorpusIoError::Io {
        path: path.to_owned(),
        source,
    }
}

/// Streams a corpus file in the `label TAB verb_index TAB tokens` format.
pub fn read_corpus_file(path: &Path) -> Result<Vec<LabeledVerbInstance>, CorpusIoError> {
    let source = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let r = BufReader::new(fs::File::open(path).map_err(io_err(path))?);
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        let parsed = parse_corpus_line(i + 1, &line, &source).map_err(|source| CorpusIoError::Corpus {
            path: path.to_owned(),
            source,
        })?;
        out.extend(parsed);
    }
    Ok(out)
}

/// One held-out evaluation pair: a literal sentence with its verb position
/// and the gold metaphoric paraphrase.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TestPair {
    pub literal: Vec<String>,
    pub verb_index: usize,
    pub metaphoric: Vec<String>,
}

/// Reads `literal TAB verb_index TAB metaphoric` lines of raw text.
pub fn read_test_set(path: &Path) -> Result<Vec<TestPair>, CorpusIoError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let fmt = |line: usize, reason: String| CorpusIoError::Format {
        path: path.to_owned(),
        line,
        reason,
    };
    let tok = |line: usize, s: &str| -> Result<Vec<String>, CorpusIoError> {
        tokenize(s)
            .map(|t| t.into_tokens())
            .map_err(|e: TextError| fmt(line, e.to_string()))
    };
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let n = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 3 {
            return Err(fmt(n, format!("expected 3 tab-separated fields, got {}", f.len())));
        }
        let literal = tok(n, f[0])?;
        let verb_index: usize = f[1]
            .trim()
            .parse()
            .map_err(|_| fmt(n, format!("bad verb index {:?}", f[1])))?;
        if verb_index >= literal.len() {
            return Err(fmt(n, format!("verb index {verb_index} out of range for {} tokens", literal.len())));
        }
        out.push(TestPair {
            literal,
            verb_index,
            metaphoric: tok(n, f[2])?,
        });
    }
    Ok(out)
}

/// Hashes of both sides of every test pair.
pub fn exclusion_hashes(pairs: &[TestPair]) -> BTreeSet<String> {
    pairs
        .iter()
        .flat_map(|p| [sentence_hash(&p.literal), sentence_hash(&p.metaphoric)])
        .collect()
}

pub fn write_dataset(dir: &Path, dataset: &Dataset) -> Result<(), CorpusIoError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let path = dir.join(DATASET_FILE);
    let mut w = BufWriter::new(fs::File::create(&path).map_err(io_err(&path))?);
    for pair in &dataset.pairs {
        writeln!(w, "{}", format_dataset_line(&EncodedPair::encode(pair, &dataset.vocab))).map_err(io_err(&path))?;
    }
    w.flush().map_err(io_err(&path))?;
    let path = dir.join(VOCAB_FILE);
    fs::write(&path, dataset.vocab.to_text()).map_err(io_err(&path))?;
    let path = dir.join(COUNTS_FILE);
    fs::write(&path, format!("{}\n", dataset.counts)).map_err(io_err(&path))?;
    Ok(())
}

pub fn read_vocab(path: &Path) -> Result<Vocab, CorpusIoError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    Vocab::from_text(&text).map_err(|source| CorpusIoError::Corpus {
        path: path.to_owned(),
        source,
    })
}

pub fn read_encoded(path: &Path) -> Result<Vec<EncodedPair>, CorpusIoError> {
    let r = BufReader::new(fs::File::open(path).map_err(io_err(path))?);
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(parse_dataset_line(i + 1, &line).map_err(|source| CorpusIoError::Corpus {
            path: path.to_owned(),
            source,
        })?);
    }
    Ok(out)
}

pub fn read_counts(path: &Path) -> Result<DatasetCounts, CorpusIoError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let bad = || CorpusIoError::Format {
        path: path.to_owned(),
        line: 1,
        reason: format!("expected `pairs=N masked=M`, got {:?}", text.trim()),
    };
    let mut counts = DatasetCounts::default();
    for field in text.split_whitespace() {
        let (k, v) = field.split_once('=').ok_or_else(bad)?;
        let v: usize = v.parse().map_err(|_| bad())?;
        match k {
            "pairs" => counts.pairs = v,
            "masked" => counts.masked = v,
            _ => return Err(bad()),
        }
    }
    Ok(counts)
}

/// Encoded pairs and vocabulary of a dataset directory.
pub fn read_dataset_dir(dir: &Path) -> Result<(Vec<EncodedPair>, Vocab), CorpusIoError> {
    Ok((read_encoded(&dir.join(DATASET_FILE))?, read_vocab(&dir.join(VOCAB_FILE))?))
}

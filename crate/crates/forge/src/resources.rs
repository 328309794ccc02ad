//! Streaming loaders for WordNet and word2vec files.

use std::collections::HashSet;
use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use metaphor_forge_core::embedding::{parse_header, parse_text_entry, EmbeddingError};
use metaphor_forge_core::wordnet::{WordNetBuilder, WordNetError};
use metaphor_forge_core::{EmbeddingTable, WordNetGraph};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ResourceError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    WordNet { path: PathBuf, source: WordNetError },
    #[error("{path}: {source}")]
    Embedding { path: PathBuf, source: EmbeddingError },
    #[error("{path}: truncated while reading {what}")]
    Truncated { path: PathBuf, what: String },
    #[error("{path}: word at entry {entry} is not UTF-8")]
    BadWord { path: PathBuf, entry: usize },
}

fn open(path: &Path) -> Result<BufReader<File>, ResourceError> {
    File::open(path).map(BufReader::new).map_err(|source| ResourceError::Io {
        path: path.to_owned(),
        source,
    })
}

/// Reads `index.verb` then `data.verb` line by line.
pub fn load_wordnet(index: &Path, data: &Path) -> Result<WordNetGraph, ResourceError> {
    let mut b = WordNetBuilder::default();
    feed_lines(index, |n, l| b.index_line(n, l))?;
    feed_lines(data, |n, l| b.data_line(n, l))?;
    b.finish().map_err(|source| ResourceError::WordNet {
        path: data.to_owned(),
        source,
    })
}

fn feed_lines(
    path: &Path,
    mut f: impl FnMut(usize, &str) -> Result<(), WordNetError>,
) -> Result<(), ResourceError> {
    let mut r = open(path)?;
    let mut buf = Vec::new();
    let mut line_no = 0;
    loop {
        buf.clear();
        let n = r.read_until(b'\n', &mut buf).map_err(|source| ResourceError::Io {
            path: path.to_owned(),
            source,
        })?;
        if n == 0 {
            return Ok(());
        }
        line_no += 1;
        // the license header of the Princeton files is Latin-1 in places
        let line = String::from_utf8_lossy(&buf);
        f(line_no, line.trim_end_matches(['\n', '\r'])).map_err(|source| ResourceError::WordNet {
            path: path.to_owned(),
            source,
        })?;
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum EmbeddingFormat {
    #[default]
    Text,
    Binary,
}

impl FromStr for EmbeddingFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "text" => Ok(Self::Text),
            "binary" => Ok(Self::Binary),
            _ => Err(format!("unknown embeddings format {s:?} (expected text or binary)")),
        }
    }
}

/// Loads a word2vec file. With `filter`, only the listed (lowercase) words
/// are kept.
pub fn load_embeddings(
    path: &Path,
    format: EmbeddingFormat,
    filter: Option<&HashSet<String>>,
) -> Result<EmbeddingTable, ResourceError> {
    let r = open(path)?;
    match format {
        EmbeddingFormat::Text => read_text_embeddings(r, path, filter),
        EmbeddingFormat::Binary => read_binary_embeddings(r, path, filter),
    }
}

fn emb_err(path: &Path) -> impl Fn(EmbeddingError) -> ResourceError + '_ {
    move |source| ResourceError::Embedding {
        path: path.to_owned(),
        source,
    }
}

fn keep(filter: Option<&HashSet<String>>, word: &str) -> bool {
    filter.is_none_or(|f| f.contains(&word.to_lowercase()))
}

fn warn_count(path: &Path, declared: usize, seen: usize) {
    if declared != seen {
        log::warn!(
            "{}: header declares {declared} entries but {seen} were read",
            path.display()
        );
    }
}

pub fn read_text_embeddings<R: BufRead>(
    mut r: R,
    path: &Path,
    filter: Option<&HashSet<String>>,
) -> Result<EmbeddingTable, ResourceError> {
    let io_err = |source| ResourceError::Io {
        path: path.to_owned(),
        source,
    };
    let mut line = String::new();
    r.read_line(&mut line).map_err(io_err)?;
    let (count, dim) = parse_header(&line).map_err(emb_err(path))?;
    let mut table = EmbeddingTable::new(dim).map_err(emb_err(path))?;
    let mut seen = 0;
    let mut line_no = 1;
    loop {
        line.clear();
        if r.read_line(&mut line).map_err(io_err)? == 0 {
            break;
        }
        line_no += 1;
        if line.trim().is_empty() {
            continue;
        }
        seen += 1;
        if let Some(word) = line.split_ascii_whitespace().next() {
            if !keep(filter, word) {
                continue;
            }
        }
        let (word, v) = parse_text_entry(line_no, &line, dim).map_err(emb_err(path))?;
        table.insert(&word, &v).map_err(emb_err(path))?;
    }
    warn_count(path, count, seen);
    Ok(table)
}

pub fn read_binary_embeddings<R: BufRead>(
    mut r: R,
    path: &Path,
    filter: Option<&HashSet<String>>,
) -> Result<EmbeddingTable, ResourceError> {
    let truncated = |what: &str| ResourceError::Truncated {
        path: path.to_owned(),
        what: what.to_owned(),
    };
    let mut header = Vec::new();
    r.read_until(b'\n', &mut header).map_err(|source| ResourceError::Io {
        path: path.to_owned(),
        source,
    })?;
    if header.last() != Some(&b'\n') {
        return Err(truncated("header"));
    }
    let (count, dim) = parse_header(&String::from_utf8_lossy(&header)).map_err(emb_err(path))?;
    let mut table = EmbeddingTable::new(dim).map_err(emb_err(path))?;
    let mut word = Vec::new();
    let mut raw = vec![0u8; dim * 4];
    let mut v = vec![0f32; dim];
    for entry in 0..count {
        word.clear();
        // a newline left over from the previous entry is skipped here
        loop {
            let buf = r.fill_buf().map_err(|source| ResourceError::Io {
                path: path.to_owned(),
                source,
            })?;
            match buf.first() {
                Some(b'\n') => r.consume(1),
                Some(_) => break,
                None => {
                    warn_count(path, count, entry);
                    return Ok(table);
                }
            }
        }
        r.read_until(b' ', &mut word).map_err(|source| ResourceError::Io {
            path: path.to_owned(),
            source,
        })?;
        if word.pop() != Some(b' ') {
            return Err(truncated(&format!("word of entry {}", entry + 1)));
        }
        r.read_exact(&mut raw).map_err(|e| match e.kind() {
            io::ErrorKind::UnexpectedEof => truncated(&format!("vector of entry {}", entry + 1)),
            _ => ResourceError::Io {
                path: path.to_owned(),
                source: e,
            },
        })?;
        let w = std::str::from_utf8(&word).map_err(|_| ResourceError::BadWord {
            path: path.to_owned(),
            entry: entry + 1,
        })?;
        if !keep(filter, w) {
            continue;
        }
        for (x, b) in v.iter_mut().zip(raw.chunks_exact(4)) {
            *x = f32::from_le_bytes([b[0], b[1], b[2], b[3]]);
        }
        table.insert(w, &v).map_err(emb_err(path))?;
    }
    Ok(table)
}

/// Writes the classic binary layout with a newline after every vector.
pub fn write_binary_embeddings<W: Write>(table: &EmbeddingTable, mut w: W) -> io::Result<()> {
    writeln!(w, "{} {}", table.len(), table.dim())?;
    for (word, v) in table.iter() {
        w.write_all(word.as_bytes())?;
        w.write_all(b" ")?;
        for x in v {
            w.write_all(&x.to_le_bytes())?;
        }
        w.write_all(b"\n")?;
    }
    w.flush()
}

pub fn write_text_embeddings<W: Write>(table: &EmbeddingTable, mut w: W) -> io::Result<()> {
    writeln!(w, "{} {}", table.len(), table.dim())?;
    for (word, v) in table.iter() {
        write!(w, "{word}")?;
        for x in v {
            write!(w, " {x}")?;
        }
        writeln!(w)?;
    }
    w.flush()
}

//! Word vector table with the cosine and mean operations used for ranking.
//!
//! Words are lowercased on insertion and the first occurrence of a word wins,
//! so a frequency-sorted source keeps its most frequent casing variant.
//! Vectors are stored raw as `f32`; arithmetic is done in `f64`.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use hashbrown::HashMap;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EmbeddingError {
    #[error("embedding dimension must be at least 1")]
    ZeroDimension,
    #[error("malformed header {0:?}: expected `<count> <dim>`")]
    MalformedHeader(String),
    #[error("line {line}: word {word:?} has {got} components, expected {expected}")]
    ComponentCount {
        line: usize,
        word: String,
        expected: usize,
        got: usize,
    },
    #[error("line {line}: bad component in entry for {word:?}")]
    BadComponent { line: usize, word: String },
    #[error("line {0}: missing word")]
    MissingWord(usize),
    #[error("vector dimension {got} does not match {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("cosine of a zero vector is undefined")]
    ZeroVector,
    #[error("context is empty")]
    EmptyContext,
    #[error("no context word is in the vocabulary")]
    AllOutOfVocabulary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    words: Vec<String>,
    data: Vec<f32>,
    index: HashMap<String, usize>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Result<Self, EmbeddingError> {
        if dim == 0 {
            return Err(EmbeddingError::ZeroDimension);
        }
        Ok(Self {
            dim,
            words: Vec::new(),
            data: Vec::new(),
            index: HashMap::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Inserts a vector. Returns `false` when the (lowercased) word was
    /// already present; the existing entry is kept.
    pub fn insert(&mut self, word: &str, vector: &[f32]) -> Result<bool, EmbeddingError> {
        if vector.len() != self.dim {
            return Err(EmbeddingError::DimensionMismatch {
                expected: self.dim,
                got: vector.len(),
            });
        }
        let word = word.to_lowercase();
        if self.index.contains_key(&word) {
            return Ok(false);
        }
        self.index.insert(word.clone(), self.words.len());
        self.words.push(word);
        self.data.extend_from_slice(vector);
        Ok(true)
    }

    pub fn contains(&self, word: &str) -> bool {
        self.index.contains_key(word)
    }

    pub fn get(&self, word: &str) -> Option<&[f32]> {
        self.index
            .get(word)
            .map(|&i| &self.data[i * self.dim..(i + 1) * self.dim])
    }

    pub fn get_f64(&self, word: &str) -> Option<Vec<f64>> {
        self.get(word).map(|v| v.iter().map(|&x| f64::from(x)).collect())
    }

    /// Entries in insertion order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f32])> {
        self.words
            .iter()
            .zip(self.data.chunks_exact(self.dim))
            .map(|(w, v)| (w.as_str(), v))
    }

    /// Multiplies every component by `factor`.
    pub fn scaled(&self, factor: f32) -> Self {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|x| *x *= factor);
        out
    }
}

/// Parses a `<count> <dim>` header line.
pub fn parse_header(line: &str) -> Result<(usize, usize), EmbeddingError> {
    let bad = || EmbeddingError::MalformedHeader(line.trim_end().to_string());
    let mut it = line.split_ascii_whitespace();
    let count = it.next().and_then(|t| t.parse().ok()).ok_or_else(bad)?;
    let dim: usize = it.next().and_then(|t| t.parse().ok()).ok_or_else(bad)?;
    if it.next().is_some() {
        return Err(bad());
    }
    if dim == 0 {
        return Err(EmbeddingError::ZeroDimension);
    }
    Ok((count, dim))
}

/// Parses one `word c1 ... c_dim` line of the text format.
pub fn parse_text_entry(line_no: usize, line: &str, dim: usize) -> Result<(String, Vec<f32>), EmbeddingError> {
    let mut it = line.split_ascii_whitespace();
    let word = it.next().ok_or(EmbeddingError::MissingWord(line_no))?;
    let mut v = Vec::with_capacity(dim);
    for tok in it {
        let x: f32 = tok.parse().map_err(|_| EmbeddingError::BadComponent {
            line: line_no,
            word: word.to_string(),
        })?;
        v.push(x);
    }
    if v.len() != dim {
        return Err(EmbeddingError::ComponentCount {
            line: line_no,
            word: word.to_string(),
            expected: dim,
            got: v.len(),
        });
    }
    Ok((word.to_string(), v))
}

pub fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

pub fn norm(u: &[f64]) -> f64 {
    libm::sqrt(dot(u, u))
}

/// `dot(u, v) / (|u| |v|)`, clamped to `[-1, 1]`.
pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64, EmbeddingError> {
    if u.len() != v.len() {
        return Err(EmbeddingError::DimensionMismatch {
            expected: u.len(),
            got: v.len(),
        });
    }
    let (nu, nv) = (norm(u), norm(v));
    if nu == 0.0 || nv == 0.0 {
        return Err(EmbeddingError::ZeroVector);
    }
    Ok((dot(u, v) / (nu * nv)).clamp(-1.0, 1.0))
}

/// Mean of the vectors of all in-vocabulary `words`; unknown words are skipped.
pub fn mean_context_vector<S: AsRef<str>>(table: &EmbeddingTable, words: &[S]) -> Result<Vec<f64>, EmbeddingError> {
    if words.is_empty() {
        return Err(EmbeddingError::EmptyContext);
    }
    let mut sum = alloc::vec![0.0f64; table.dim()];
    let mut n = 0usize;
    for w in words {
        if let Some(v) = table.get(w.as_ref()) {
            for (s, &x) in sum.iter_mut().zip(v) {
                *s += f64::from(x);
            }
            n += 1;
        }
    }
    if n == 0 {
        return Err(EmbeddingError::AllOutOfVocabulary);
    }
    let n = n as f64;
    sum.iter_mut().for_each(|s| *s /= n);
    Ok(sum)
}

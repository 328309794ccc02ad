use alloc::vec::Vec;

use hashbrown::HashMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::{cosine, mean_context_vector, EmbeddingError, EmbeddingTable};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OverlapError {
    #[error("n must be at least 1")]
    ZeroN,
    #[error("candidate has {len} tokens, fewer than n = {n}")]
    CandidateTooShort { len: usize, n: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricError {
    #[error(transparent)]
    Overlap(#[from] OverlapError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
}

fn ngram_counts<S: AsRef<str>>(tokens: &[S], n: usize) -> HashMap<Vec<&str>, usize> {
    let mut m = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *m.entry(w.iter().map(AsRef::as_ref).collect()).or_insert(0) += 1;
        }
    }
    m
}

/// Clipped n-gram precision of `candidate` against `reference`.
pub fn ngram_overlap<S: AsRef<str>, T: AsRef<str>>(candidate: &[S], reference: &[T], n: usize) -> Result<f64, OverlapError> {
    if n == 0 {
        return Err(OverlapError::ZeroN);
    }
    if candidate.len() < n {
        return Err(OverlapError::CandidateTooShort {
            len: candidate.len(),
            n,
        });
    }
    let cand = ngram_counts(candidate, n);
    let refs = ngram_counts(reference, n);
    let total = candidate.len() - n + 1;
    let matched: usize = cand
        .iter()
        .map(|(g, &c)| c.min(refs.get(g).copied().unwrap_or(0)))
        .sum();
    Ok(matched as f64 / total as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricConfig {
    /// Weight of the unigram-copy penalty.
    pub lambda: f64,
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self { lambda: 0.25 }
    }
}

/// Heuristic paraphrase score of our own design: cosine of the mean
/// embeddings of `x` and `y_prime`, minus `lambda` times the unigram overlap
/// of `y_prime` with `x`. It rewards meaning preservation and penalises
/// copying; it is not a validated measure of metaphoricity.
pub fn mpg_score<S: AsRef<str>, T: AsRef<str>>(
    x: &[S],
    y_prime: &[T],
    table: &EmbeddingTable,
    config: &MetricConfig,
) -> Result<f64, MetricError> {
    let mx = mean_context_vector(table, x)?;
    let my = mean_context_vector(table, y_prime)?;
    let cos = cosine(&mx, &my)?;
    let overlap = ngram_overlap(y_prime, x, 1)?;
    Ok(cos - config.lambda * overlap)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<&str> {
        s.split(' ').collect()
    }

    #[test]
    fn overlap_examples() {
        let s = toks("the cat sat on the mat");
        for n in 1..=6 {
            assert_eq!(ngram_overlap(&s, &s, n).unwrap(), 1.0);
        }
        assert_eq!(ngram_overlap(&toks("a b"), &toks("c d"), 1).unwrap(), 0.0);
        let (c, r) = (toks("a b c"), toks("a c b"));
        assert_eq!(ngram_overlap(&c, &r, 1).unwrap(), 1.0);
        assert_eq!(ngram_overlap(&c, &r, 2).unwrap(), 0.0);
        assert_eq!(
            ngram_overlap(&c, &r, 4),
            Err(OverlapError::CandidateTooShort { len: 3, n: 4 })
        );
        assert_eq!(ngram_overlap(&c, &r, 0), Err(OverlapError::ZeroN));
    }

    #[test]
    fn clipping() {
        // "the the the" against one "the": 1 of 3 unigrams count
        let v = ngram_overlap(&toks("the the the"), &toks("the cat"), 1).unwrap();
        assert!((v - 1.0 / 3.0).abs() < 1e-15);
    }

    fn table() -> EmbeddingTable {
        let mut t = EmbeddingTable::new(2).unwrap();
        for (w, v) in [
            ("a", [1.0, 0.0]),
            ("b", [0.0, 1.0]),
            ("c", [0.75, 0.25]),
            ("d", [0.25, 0.75]),
            ("e", [1.0, -1.0]),
        ] {
            t.insert(w, &v).unwrap();
        }
        t
    }

    #[test]
    fn mpg_examples() {
        let t = table();
        let cfg = MetricConfig::default();
        let x = toks("a b");
        let same = mpg_score(&x, &x, &t, &cfg).unwrap();
        assert!((same - 0.75).abs() < 1e-12);
        // {a, b} and {c, d} share the mean (0.5, 0.5)
        let disjoint = mpg_score(&x, &toks("c d"), &t, &cfg).unwrap();
        assert!((disjoint - 1.0).abs() < 1e-12);
        let pure = mpg_score(&x, &toks("a e"), &t, &MetricConfig { lambda: 0.0 }).unwrap();
        let mx = mean_context_vector(&t, &x).unwrap();
        let my = mean_context_vector(&t, &toks("a e")).unwrap();
        assert_eq!(pure, cosine(&mx, &my).unwrap());
        assert!(matches!(
            mpg_score(&x, &toks("zz"), &t, &cfg),
            Err(MetricError::Embedding(EmbeddingError::AllOutOfVocabulary))
        ));
    }
}

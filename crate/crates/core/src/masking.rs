//! Metaphor-masked parallel data and its vocabulary.
//!
//! Each labeled verb becomes one training pair. Metaphoric verbs are replaced
//! by the reserved mask token on the source side; literal instances are
//! copied unchanged to both sides.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write as _;

use hashbrown::HashMap;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const PAD: u32 = 0;
pub const BOS: u32 = 1;
pub const EOS: u32 = 2;
pub const UNK: u32 = 3;
pub const MET: u32 = 4;

/// Surface strings of the reserved ids, in id order.
pub const RESERVED: [&str; 5] = ["<pad>", "<s>", "</s>", "<unk>", "<met>"];
pub const MET_TOKEN: &str = RESERVED[MET as usize];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CorpusError {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("line {line}: verb index {index} out of range for {len} tokens")]
    VerbIndexOutOfRange { line: usize, index: usize, len: usize },
    #[error("no instances to build a dataset from")]
    EmptyCorpus,
    #[error("instance {index} ({hash}) is on the exclusion list")]
    ExcludedSentence { index: usize, hash: String },
    #[error("vocabulary line {line}: {reason}")]
    Vocab { line: usize, reason: String },
    #[error("dataset line {line}: {reason}")]
    Dataset { line: usize, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VerbLabel {
    Metaphoric,
    Literal,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledVerbInstance {
    pub tokens: Vec<String>,
    pub verb_index: usize,
    pub label: VerbLabel,
    pub source_corpus: String,
}

impl LabeledVerbInstance {
    pub fn new(
        tokens: Vec<String>,
        verb_index: usize,
        label: VerbLabel,
        source_corpus: impl Into<String>,
    ) -> Result<Self, CorpusError> {
        if verb_index >= tokens.len() {
            return Err(CorpusError::VerbIndexOutOfRange {
                line: 0,
                index: verb_index,
                len: tokens.len(),
            });
        }
        Ok(Self {
            tokens,
            verb_index,
            label,
            source_corpus: source_corpus.into(),
        })
    }
}

/// Parses one `label TAB verb_index TAB tokens` corpus line; `label` is `M`
/// or `L`. Blank lines yield `None`.
pub fn parse_corpus_line(line_no: usize, line: &str, source: &str) -> Result<Option<LabeledVerbInstance>, CorpusError> {
    let line = line.trim_end_matches(['\r', '\n']);
    if line.trim().is_empty() {
        return Ok(None);
    }
    let err = |reason: &str| CorpusError::Parse {
        line: line_no,
        reason: reason.to_string(),
    };
    let mut fields = line.splitn(3, '\t');
    let label = match fields.next() {
        Some("M") => VerbLabel::Metaphoric,
        Some("L") => VerbLabel::Literal,
        _ => return Err(err("label must be M or L")),
    };
    let verb_index: usize = fields
        .next()
        .and_then(|f| f.trim().parse().ok())
        .ok_or_else(|| err("bad verb index"))?;
    let tokens: Vec<String> = fields
        .next()
        .ok_or_else(|| err("missing tokens"))?
        .split(' ')
        .filter(|t| !t.is_empty())
        .map(ToString::to_string)
        .collect();
    if verb_index >= tokens.len() {
        return Err(CorpusError::VerbIndexOutOfRange {
            line: line_no,
            index: verb_index,
            len: tokens.len(),
        });
    }
    Ok(Some(LabeledVerbInstance {
        tokens,
        verb_index,
        label,
        source_corpus: source.to_string(),
    }))
}

/// Parses a whole corpus text.
pub fn read_corpus(text: &str, source: &str) -> Result<Vec<LabeledVerbInstance>, CorpusError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if let Some(inst) = parse_corpus_line(i + 1, line, source)? {
            out.push(inst);
        }
    }
    Ok(out)
}

pub fn format_corpus_line(inst: &LabeledVerbInstance) -> String {
    let label = match inst.label {
        VerbLabel::Metaphoric => "M",
        VerbLabel::Literal => "L",
    };
    alloc::format!("{label}\t{}\t{}", inst.verb_index, inst.tokens.join(" "))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct MaskingConfig {
    /// Context tokens kept on each side of the verb.
    pub window: usize,
    pub vocab_cap: usize,
}

impl Default for MaskingConfig {
    fn default() -> Self {
        Self {
            window: 7,
            vocab_cap: 30_000,
        }
    }
}

/// Restricts the instance to `window` tokens on each side of the verb.
pub fn window_trim(inst: &LabeledVerbInstance, config: &MaskingConfig) -> LabeledVerbInstance {
    let v = inst.verb_index;
    let start = v.saturating_sub(config.window);
    let end = (v + config.window + 1).min(inst.tokens.len());
    LabeledVerbInstance {
        tokens: inst.tokens[start..end].to_vec(),
        verb_index: v - start,
        label: inst.label,
        source_corpus: inst.source_corpus.clone(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParallelPair {
    pub source: Vec<String>,
    pub target: Vec<String>,
}

impl ParallelPair {
    pub fn is_masked(&self) -> bool {
        self.source.iter().any(|t| t == MET_TOKEN)
    }
}

/// Masks the verb of metaphoric instances; literal instances mirror.
pub fn make_pair(inst: &LabeledVerbInstance) -> ParallelPair {
    let mut source = inst.tokens.clone();
    if inst.label == VerbLabel::Metaphoric {
        source[inst.verb_index] = MET_TOKEN.to_string();
    }
    ParallelPair {
        source,
        target: inst.tokens.clone(),
    }
}

/// Stable hex digest of a token sequence, used for test-set exclusion.
pub fn sentence_hash<S: AsRef<str>>(tokens: &[S]) -> String {
    let mut h = Sha256::new();
    for (i, t) in tokens.iter().enumerate() {
        if i > 0 {
            h.update(b" ");
        }
        h.update(t.as_ref().to_lowercase().as_bytes());
    }
    let mut out = String::with_capacity(64);
    for b in h.finalize().iter() {
        let _ = write!(out, "{b:02x}");
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    id_of: HashMap<String, u32>,
    token_of: Vec<String>,
}

impl Default for Vocab {
    fn default() -> Self {
        Self::from_tokens(core::iter::empty::<&str>())
    }
}

impl Vocab {
    /// Reserved tokens followed by `tokens` in order. Duplicates and tokens
    /// spelled like a reserved token are skipped.
    pub fn from_tokens<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut v = Self {
            id_of: HashMap::new(),
            token_of: Vec::new(),
        };
        for t in RESERVED.iter().copied() {
            v.push(t);
        }
        for t in tokens {
            v.push(t.as_ref());
        }
        v
    }

    fn push(&mut self, tok: &str) {
        if !self.id_of.contains_key(tok) {
            self.id_of.insert(tok.to_string(), self.token_of.len() as u32);
            self.token_of.push(tok.to_string());
        }
    }

    /// Keeps the `cap` most frequent tokens, ties broken lexicographically.
    pub fn build<'a, I>(sentences: I, cap: usize) -> Self
    where
        I: IntoIterator<Item = &'a [String]>,
    {
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for s in sentences {
            for t in s {
                if !RESERVED.contains(&t.as_str()) {
                    *counts.entry(t.as_str()).or_default() += 1;
                }
            }
        }
        let mut ranked: Vec<(&str, usize)> = counts.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        Self::from_tokens(ranked.into_iter().take(cap).map(|(t, _)| t))
    }

    pub fn len(&self) -> usize {
        self.token_of.len()
    }

    pub fn is_empty(&self) -> bool {
        self.token_of.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.id_of.get(token).copied()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.token_of.get(id as usize).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.token_of
    }

    /// `BOS`, the token ids (unknown tokens become `UNK`), `EOS`.
    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<u32> {
        let mut out = Vec::with_capacity(tokens.len() + 2);
        out.push(BOS);
        out.extend(tokens.iter().map(|t| self.id(t.as_ref()).unwrap_or(UNK)));
        out.push(EOS);
        out
    }

    /// Maps ids back to tokens, dropping `PAD`, `BOS` and `EOS` and stopping
    /// at the first `EOS`. `UNK` and `MET` are kept as their surface strings;
    /// ids outside the vocabulary are dropped.
    pub fn decode(&self, ids: &[u32]) -> Vec<String> {
        let mut out = Vec::new();
        for &id in ids {
            match id {
                EOS => break,
                PAD | BOS => {}
                _ => {
                    if let Some(t) = self.token(id) {
                        out.push(t.to_string());
                    }
                }
            }
        }
        out
    }

    /// One token per line in id order.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for t in &self.token_of {
            s.push_str(t);
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self, CorpusError> {
        let lines: Vec<&str> = text.lines().collect();
        for (i, want) in RESERVED.iter().enumerate() {
            if lines.get(i) != Some(want) {
                return Err(CorpusError::Vocab {
                    line: i + 1,
                    reason: alloc::format!("expected reserved token {want}"),
                });
            }
        }
        let mut seen = BTreeSet::new();
        for (i, l) in lines.iter().enumerate() {
            if l.is_empty() || l.contains(char::is_whitespace) {
                return Err(CorpusError::Vocab {
                    line: i + 1,
                    reason: "tokens must be non-empty without whitespace".into(),
                });
            }
            if !seen.insert(*l) {
                return Err(CorpusError::Vocab {
                    line: i + 1,
                    reason: alloc::format!("duplicate token {l:?}"),
                });
            }
        }
        Ok(Self::from_tokens(lines[RESERVED.len()..].iter()))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetCounts {
    pub pairs: usize,
    pub masked: usize,
}

impl core::fmt::Display for DatasetCounts {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "pairs={} masked={}", self.pairs, self.masked)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    pub pairs: Vec<ParallelPair>,
    pub vocab: Vocab,
    pub counts: DatasetCounts,
}

/// Trims and masks every instance, then builds the target-side vocabulary.
/// Fails if any instance's full sentence hash is in `exclude`.
pub fn build_dataset(
    instances: &[LabeledVerbInstance],
    config: &MaskingConfig,
    exclude: &BTreeSet<String>,
) -> Result<Dataset, CorpusError> {
    if instances.is_empty() {
        return Err(CorpusError::EmptyCorpus);
    }
    if !exclude.is_empty() {
        for (index, inst) in instances.iter().enumerate() {
            let hash = sentence_hash(&inst.tokens);
            if exclude.contains(&hash) {
                return Err(CorpusError::ExcludedSentence { index, hash });
            }
        }
    }
    let pairs: Vec<ParallelPair> = instances
        .iter()
        .map(|i| make_pair(&window_trim(i, config)))
        .collect();
    let vocab = Vocab::build(pairs.iter().map(|p| p.target.as_slice()), config.vocab_cap);
    let counts = DatasetCounts {
        pairs: pairs.len(),
        masked: pairs.iter().filter(|p| p.is_masked()).count(),
    };
    Ok(Dataset { pairs, vocab, counts })
}

/// An encoded pair: both sides bracketed by `BOS`/`EOS`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedPair {
    pub source: Vec<u32>,
    pub target: Vec<u32>,
}

impl EncodedPair {
    pub fn encode(pair: &ParallelPair, vocab: &Vocab) -> Self {
        Self {
            source: vocab.encode(&pair.source),
            target: vocab.encode(&pair.target),
        }
    }
}

fn join_ids(ids: &[u32]) -> String {
    let mut s = String::new();
    for (i, id) in ids.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        let _ = write!(s, "{id}");
    }
    s
}

/// `source-ids TAB target-ids`.
pub fn format_dataset_line(pair: &EncodedPair) -> String {
    alloc::format!("{}\t{}", join_ids(&pair.source), join_ids(&pair.target))
}

pub fn parse_dataset_line(line_no: usize, line: &str) -> Result<EncodedPair, CorpusError> {
    let err = |reason: &str| CorpusError::Dataset {
        line: line_no,
        reason: reason.to_string(),
    };
    let (src, tgt) = line.trim_end().split_once('\t').ok_or_else(|| err("missing tab"))?;
    let parse = |s: &str| {
        s.split(' ')
            .map(|t| t.parse::<u32>().map_err(|_| err("bad id")))
            .collect::<Result<Vec<_>, _>>()
    };
    Ok(EncodedPair {
        source: parse(src)?,
        target: parse(tgt)?,
    })
}

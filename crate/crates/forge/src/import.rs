//! Converters from the annotation layouts of the source corpora into
//! [`LabeledVerbInstance`]s.
//!
//! Supported layouts:
//!
//! * `vua`: `tokens TAB labels TAB tags`, one sentence per line. Labels are
//!   `0`/`1` per token, tags are part-of-speech tags per token. Every token
//!   whose tag starts with `V` becomes one instance.
//! * `mohammad`, `stowe`: `term TAB sentence TAB label [TAB ...]`. The verb
//!   is the word wrapped in `<b>..</b>` if present, otherwise the first token
//!   whose lemma is `term`. Labels: `metaphorical`, `metaphoric`, `m`, `1`,
//!   `literal`, `l`, `0`. A first line without a valid label is a header.
//! * `trofi`: a `***verb***` line opens a block; sentence lines are
//!   `id L|N sentence` (`N` is nonliteral). Other lines are skipped.
//!
//! Lines starting with `#` are comments in every layout.

use std::fs;
use std::path::Path;
use std::str::FromStr;

use metaphor_forge_core::masking::{LabeledVerbInstance, VerbLabel};
use metaphor_forge_core::text::{lemmatize, tokenize};

use crate::corpus::{io_err, CorpusIoError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusFormat {
    Vua,
    Mohammad,
    Stowe,
    Trofi,
}

impl CorpusFormat {
    pub fn name(self) -> &'static str {
        match self {
            CorpusFormat::Vua => "vua",
            CorpusFormat::Mohammad => "mohammad",
            CorpusFormat::Stowe => "stowe",
            CorpusFormat::Trofi => "trofi",
        }
    }
}

impl FromStr for CorpusFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "vua" => Ok(Self::Vua),
            "mohammad" => Ok(Self::Mohammad),
            "stowe" => Ok(Self::Stowe),
            "trofi" => Ok(Self::Trofi),
            _ => Err(format!("unknown corpus format {s:?} (expected vua, mohammad, stowe or trofi)")),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ImportReport {
    pub instances: Vec<LabeledVerbInstance>,
    /// `(line, reason)` for every line that was not imported.
    pub skipped: Vec<(usize, String)>,
}

pub fn import_file(path: &Path, format: CorpusFormat) -> Result<ImportReport, CorpusIoError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let report = import_str(&text, format);
    for (line, reason) in &report.skipped {
        log::debug!("{}:{line}: skipped: {reason}", path.display());
    }
    if !report.skipped.is_empty() {
        log::warn!(
            "{}: imported {} instances, skipped {} lines",
            path.display(),
            report.instances.len(),
            report.skipped.len()
        );
    }
    Ok(report)
}

pub fn import_str(text: &str, format: CorpusFormat) -> ImportReport {
    let mut report = ImportReport::default();
    let mut trofi_verb: Option<String> = None;
    for (i, line) in text.lines().enumerate() {
        let n = i + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let result = match format {
            CorpusFormat::Vua => vua_line(line, format.name()),
            CorpusFormat::Mohammad | CorpusFormat::Stowe => {
                let third = line.split('\t').nth(2).unwrap_or("");
                if n == 1 && parse_label(third).is_err() {
                    continue;
                }
                term_line(line, format.name()).map(|i| vec![i])
            }
            CorpusFormat::Trofi => {
                if let Some(v) = trimmed.strip_prefix("***").and_then(|s| s.strip_suffix("***")) {
                    trofi_verb = Some(v.trim().to_lowercase());
                    continue;
                }
                if trimmed.starts_with('*') {
                    continue;
                }
                trofi_line(trimmed, trofi_verb.as_deref(), format.name()).map(|i| vec![i])
            }
        };
        match result {
            Ok(list) => report.instances.extend(list),
            Err(reason) => report.skipped.push((n, reason)),
        }
    }
    report
}

fn vua_line(line: &str, source: &str) -> Result<Vec<LabeledVerbInstance>, String> {
    let f: Vec<&str> = line.split('\t').collect();
    if f.len() < 3 {
        return Err("expected tokens, labels and tags".into());
    }
    let tokens: Vec<String> = f[0].split_whitespace().map(str::to_lowercase).collect();
    let labels: Vec<&str> = f[1].split_whitespace().collect();
    let tags: Vec<&str> = f[2].split_whitespace().collect();
    if labels.len() != tokens.len() || tags.len() != tokens.len() {
        return Err(format!(
            "{} tokens, {} labels, {} tags",
            tokens.len(),
            labels.len(),
            tags.len()
        ));
    }
    let mut out = Vec::new();
    for (i, (&l, &t)) in labels.iter().zip(&tags).enumerate() {
        if !t.to_uppercase().starts_with('V') {
            continue;
        }
        let label = match l {
            "1" => VerbLabel::Metaphoric,
            "0" => VerbLabel::Literal,
            other => return Err(format!("bad label {other:?}")),
        };
        out.push(LabeledVerbInstance::new(tokens.clone(), i, label, source).map_err(|e| e.to_string())?);
    }
    Ok(out)
}

fn parse_label(s: &str) -> Result<VerbLabel, String> {
    match s.trim().to_lowercase().as_str() {
        "metaphorical" | "metaphoric" | "m" | "1" => Ok(VerbLabel::Metaphoric),
        "literal" | "l" | "0" => Ok(VerbLabel::Literal),
        other => Err(format!("bad label {other:?}")),
    }
}

/// Tokenizes word by word so that a marked word can be located afterwards.
fn tokenize_marked(sentence: &str) -> Result<(Vec<String>, Option<usize>), String> {
    let mut tokens = Vec::new();
    let mut marked = None;
    for word in sentence.split_whitespace() {
        let is_marked = word.contains("<b>");
        let clean = word.replace("<b>", "").replace("</b>", "");
        if clean.is_empty() {
            continue;
        }
        let t = tokenize(&clean).map_err(|e| e.to_string())?.into_tokens();
        if is_marked && marked.is_none() {
            let first_word = t.iter().position(|x| x.chars().any(char::is_alphanumeric)).unwrap_or(0);
            marked = Some(tokens.len() + first_word);
        }
        tokens.extend(t);
    }
    if tokens.is_empty() {
        return Err("empty sentence".into());
    }
    Ok((tokens, marked))
}

fn find_verb(tokens: &[String], lemma: &str) -> Option<usize> {
    tokens
        .iter()
        .position(|t| t == lemma || lemmatize(t, |c| c == lemma) == lemma)
}

fn term_line(line: &str, source: &str) -> Result<LabeledVerbInstance, String> {
    let f: Vec<&str> = line.split('\t').collect();
    if f.len() < 3 {
        return Err("expected term, sentence and label".into());
    }
    let term = f[0].trim().to_lowercase();
    let label = parse_label(f[2])?;
    let (tokens, marked) = tokenize_marked(f[1])?;
    let verb = marked
        .or_else(|| find_verb(&tokens, &term))
        .ok_or_else(|| format!("term {term:?} not found in sentence"))?;
    LabeledVerbInstance::new(tokens, verb, label, source).map_err(|e| e.to_string())
}

fn trofi_line(line: &str, verb: Option<&str>, source: &str) -> Result<LabeledVerbInstance, String> {
    let verb = verb.ok_or("sentence before any ***verb*** header")?;
    let mut parts = line.splitn(3, char::is_whitespace);
    let _id = parts.next();
    let label = match parts.next() {
        Some("N") => VerbLabel::Metaphoric,
        Some("L") => VerbLabel::Literal,
        other => return Err(format!("unsupported label {other:?}")),
    };
    let sentence = parts.next().ok_or("missing sentence")?;
    let (tokens, marked) = tokenize_marked(sentence)?;
    let index = marked
        .or_else(|| find_verb(&tokens, verb))
        .ok_or_else(|| format!("verb {verb:?} not found in sentence"))?;
    LabeledVerbInstance::new(tokens, index, label, source).map_err(|e| e.to_string())
}

use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use super::model::{validate_source, Graph, ModelParams};
use super::NnError;
use crate::masking::{window_trim, EncodedPair, LabeledVerbInstance, MaskingConfig, Vocab, VerbLabel, BOS, EOS, MET_TOKEN};
use crate::text::{TextError, TokenSentence};

/// Argmax decoding from `BOS`. Returns the generated ids (without `BOS`),
/// ending with `EOS` when it was produced within `max_len` tokens.
pub fn greedy_decode(params: &ModelParams, source: &[u32], max_len: usize) -> Result<Vec<u32>, NnError> {
    validate_source(source, params.config())?;
    // the prefix fed back into the decoder may not exceed the model limit
    let cap = max_len.min(params.config().max_len);
    let mut g = Graph::new(params);
    let memory = g.encode(source);
    let mut prefix = vec![BOS];
    let mut out = Vec::new();
    while out.len() < cap {
        let logits = g.decode(memory, source, &prefix);
        let v = g.tape.value(logits);
        let last = v.row(v.rows() - 1);
        let mut best = 0;
        for (i, &x) in last.iter().enumerate() {
            if x > last[best] {
                best = i;
            }
        }
        let id = best as u32;
        out.push(id);
        if id == EOS {
            break;
        }
        prefix.push(id);
    }
    Ok(out)
}

/// Fraction of pairs whose greedy decode reproduces the target exactly
/// (every token after `BOS`, up to and including `EOS`).
pub fn exact_match_rate(params: &ModelParams, pairs: &[EncodedPair]) -> Result<f64, NnError> {
    if pairs.is_empty() {
        return Err(NnError::EmptyBatch);
    }
    let mut hits = 0usize;
    for p in pairs {
        let want = &p.target[1.min(p.target.len())..];
        let got = greedy_decode(params, &p.source, want.len().max(1))?;
        if got == want {
            hits += 1;
        }
    }
    Ok(hits as f64 / pairs.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GenerateError {
    #[error(transparent)]
    Text(#[from] TextError),
    #[error(transparent)]
    Model(#[from] NnError),
    #[error("sentence has no marked verb")]
    MissingVerb,
    #[error("decoder produced no tokens")]
    EmptyOutput,
}

/// Masks the verb of `literal` inside its training window and decodes a
/// filled-in sentence. The verb index is carried over when the output has
/// the same length as the masked input.
pub fn generate_metaphor(
    params: &ModelParams,
    vocab: &Vocab,
    literal: &TokenSentence,
    masking: &MaskingConfig,
) -> Result<TokenSentence, GenerateError> {
    let verb = literal.verb_index().ok_or(GenerateError::MissingVerb)?;
    let inst = LabeledVerbInstance {
        tokens: literal.tokens().to_vec(),
        verb_index: verb,
        label: VerbLabel::Metaphoric,
        source_corpus: "input".to_string(),
    };
    let trimmed = window_trim(&inst, masking);
    let mut source = trimmed.tokens.clone();
    source[trimmed.verb_index] = MET_TOKEN.to_string();
    let ids = vocab.encode(&source);
    let max_len = params.config().max_len;
    let out = greedy_decode(params, &ids, max_len)?;
    let tokens = vocab.decode(&out);
    if tokens.is_empty() {
        return Err(GenerateError::EmptyOutput);
    }
    let same_len = tokens.len() == source.len();
    let sentence = TokenSentence::new(tokens)?;
    Ok(if same_len {
        sentence.with_verb(trimmed.verb_index)?
    } else {
        sentence
    })
}

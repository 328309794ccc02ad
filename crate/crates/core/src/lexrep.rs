//! Lexical replacement: swap the marked verb for the troponym that best fits
//! the sentence context.
//!
//! Candidates come from [`WordNetGraph::candidate_lemmas`], and are scored by
//! cosine similarity between the candidate vector and the mean vector of the
//! context words (every token except the verb, and except the particle when
//! it is replaced too).

use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::{cosine, mean_context_vector, EmbeddingError, EmbeddingTable};
use crate::text::{inflect_like, lemmatize, TextError, TokenSentence};
use crate::wordnet::{CandidateOptions, WordNetGraph};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LexRepError {
    #[error("sentence has no marked verb")]
    MissingVerbIndex,
    #[error("candidate set is empty")]
    NoCandidates,
    #[error("no candidate is in the embedding vocabulary")]
    NoCandidateInVocabulary,
    #[error("traversal depth must be at least 1")]
    ZeroDepth,
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Text(#[from] TextError),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParticlePolicy {
    /// Replace the verb and keep its particle.
    #[default]
    VerbOnly,
    /// Replace the verb and drop the particle.
    VerbAndParticle,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    /// Highest cosine first.
    #[default]
    BestFit,
    /// Lowest cosine first.
    WorstFit,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct LexRepConfig {
    pub depth: usize,
    pub include_multiword: bool,
    pub include_sisters: bool,
    /// Re-inflect the chosen lemma like the original verb. When off, the
    /// raw lemma is inserted.
    pub inflect: bool,
    pub particle: ParticlePolicy,
    pub selection: Selection,
}

impl Default for LexRepConfig {
    fn default() -> Self {
        Self {
            depth: 1,
            include_multiword: false,
            include_sisters: false,
            inflect: true,
            particle: ParticlePolicy::VerbOnly,
            selection: Selection::BestFit,
        }
    }
}

impl LexRepConfig {
    pub fn validate(&self) -> Result<(), LexRepError> {
        if self.depth == 0 {
            return Err(LexRepError::ZeroDepth);
        }
        Ok(())
    }

    pub fn candidate_options(&self) -> CandidateOptions {
        CandidateOptions {
            depth: self.depth,
            include_multiword: self.include_multiword,
            include_sisters: self.include_sisters,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplacementResult {
    pub input: TokenSentence,
    pub verb_lemma: String,
    pub chosen_lemma: String,
    pub chosen_surface: String,
    pub output: TokenSentence,
    pub ranked_candidates: Vec<(String, f64)>,
}

/// Scores every in-vocabulary candidate against `context_mean` and sorts by
/// score (descending for best fit), breaking ties by lemma.
pub fn rank_candidates<'a, I>(
    candidates: I,
    context_mean: &[f64],
    table: &EmbeddingTable,
    selection: Selection,
) -> Result<Vec<(String, f64)>, LexRepError>
where
    I: IntoIterator<Item = &'a String>,
{
    let mut any = false;
    let mut scored = Vec::new();
    for lemma in candidates {
        any = true;
        if let Some(v) = table.get_f64(lemma) {
            scored.push((lemma.clone(), cosine(&v, context_mean)?));
        }
    }
    if !any {
        return Err(LexRepError::NoCandidates);
    }
    if scored.is_empty() {
        return Err(LexRepError::NoCandidateInVocabulary);
    }
    scored.sort_by(|a, b| {
        let by_score = match selection {
            Selection::BestFit => b.1.partial_cmp(&a.1),
            Selection::WorstFit => a.1.partial_cmp(&b.1),
        };
        by_score.unwrap_or(Ordering::Equal).then_with(|| a.0.cmp(&b.0))
    });
    Ok(scored)
}

/// Runs the full replacement for one sentence with a marked verb.
pub fn generate_lexical_paraphrase(
    sentence: &TokenSentence,
    graph: &WordNetGraph,
    table: &EmbeddingTable,
    config: &LexRepConfig,
) -> Result<ReplacementResult, LexRepError> {
    config.validate()?;
    let verb_index = sentence.verb_index().ok_or(LexRepError::MissingVerbIndex)?;
    let surface = sentence.tokens()[verb_index].as_str();
    let verb_lemma = lemmatize(surface, |l| graph.contains_lemma(l));
    let candidates: BTreeSet<String> = graph.candidate_lemmas(&verb_lemma, &config.candidate_options());

    let drop_particle = match config.particle {
        ParticlePolicy::VerbOnly => None,
        ParticlePolicy::VerbAndParticle => sentence.particle_index(),
    };
    let context: Vec<&str> = sentence
        .tokens()
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != verb_index && Some(i) != drop_particle)
        .map(|(_, t)| t.as_str())
        .collect();
    let mean = mean_context_vector(table, &context)?;
    let ranked = rank_candidates(&candidates, &mean, table, config.selection)?;
    let chosen_lemma = ranked[0].0.clone();

    let chosen_surface = if chosen_lemma == verb_lemma {
        surface.to_string()
    } else if config.inflect {
        inflect_multiword(&chosen_lemma, surface, &verb_lemma)
    } else {
        chosen_lemma.replace('_', " ")
    };

    let mut tokens = Vec::with_capacity(sentence.len());
    let mut new_verb = 0;
    for (i, tok) in sentence.tokens().iter().enumerate() {
        if i == verb_index {
            new_verb = tokens.len();
            tokens.extend(chosen_surface.split(' ').map(ToString::to_string));
        } else if Some(i) != drop_particle {
            tokens.push(tok.clone());
        }
    }
    let mut output = TokenSentence::new(tokens)?.with_verb(new_verb)?;
    if let (None, Some(p)) = (drop_particle, sentence.particle_index()) {
        let shift = output.len() - sentence.len();
        output = output.with_particle(p + shift)?;
    }

    Ok(ReplacementResult {
        input: sentence.clone(),
        verb_lemma,
        chosen_lemma,
        chosen_surface,
        output,
        ranked_candidates: ranked,
    })
}

fn inflect_multiword(lemma: &str, surface: &str, verb_lemma: &str) -> String {
    let mut parts = lemma.split('_');
    let head = parts.next().unwrap_or(lemma);
    let mut out = inflect_like(head, surface, verb_lemma);
    for p in parts {
        out.push(' ');
        out.push_str(p);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::tokenize;

    fn table(entries: &[(&str, [f32; 2])]) -> EmbeddingTable {
        let mut t = EmbeddingTable::new(2).unwrap();
        for (w, v) in entries {
            t.insert(w, v).unwrap();
        }
        t
    }

    fn set(items: &[&str]) -> BTreeSet<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn rank_examples() {
        let t = table(&[("a", [0.9, 0.1]), ("b", [-1.0, 0.0]), ("c", [0.0, 1.0])]);
        let ranked = rank_candidates(&set(&["a", "b", "c"]), &[1.0, 0.0], &t, Selection::BestFit).unwrap();
        let order: Vec<&str> = ranked.iter().map(|(l, _)| l.as_str()).collect();
        assert_eq!(order, ["a", "c", "b"]);
        assert!((ranked[0].1 - 0.9 / libm::sqrt(0.82)).abs() < 1e-6);
        assert_eq!(ranked[2].1, -1.0);

        let worst = rank_candidates(&set(&["a", "b", "c"]), &[1.0, 0.0], &t, Selection::WorstFit).unwrap();
        assert_eq!(worst[0].0, "b");

        let single = rank_candidates(&set(&["a"]), &[0.3, 0.2], &t, Selection::BestFit).unwrap();
        assert_eq!(single.len(), 1);
    }

    #[test]
    fn rank_ties_and_errors() {
        let t = table(&[("y", [1.0, 1.0]), ("x", [1.0, 1.0])]);
        let ranked = rank_candidates(&set(&["y", "x"]), &[1.0, 0.0], &t, Selection::BestFit).unwrap();
        assert_eq!(ranked[0].0, "x");
        assert_eq!(
            rank_candidates(&set(&["q"]), &[1.0, 0.0], &t, Selection::BestFit),
            Err(LexRepError::NoCandidateInVocabulary)
        );
        assert_eq!(
            rank_candidates(&BTreeSet::new(), &[1.0, 0.0], &t, Selection::BestFit),
            Err(LexRepError::NoCandidates)
        );
    }

    const DATA: &str = "\
00000100 38 v 01 move 0 002 ~ 00000200 v 0000 ~ 00000300 v 0000 | a
00000200 38 v 01 march 0 001 @ 00000100 v 0000 | b
00000300 38 v 01 slide 0 001 @ 00000100 v 0000 | c
00000400 38 v 01 a 0 000 | d
";

    #[test]
    fn degenerate_verb_keeps_sentence() {
        let g = WordNetGraph::parse("", DATA).unwrap();
        let t = table(&[("x", [1.0, 0.0]), ("a", [0.0, 1.0]), ("y", [0.5, 0.5])]);
        let s = tokenize("x a y").unwrap().with_verb(1).unwrap();
        let r = generate_lexical_paraphrase(&s, &g, &t, &LexRepConfig::default()).unwrap();
        assert_eq!(r.chosen_lemma, "a");
        assert_eq!(r.output.tokens(), s.tokens());
    }

    #[test]
    fn picks_best_troponym_and_inflects() {
        let g = WordNetGraph::parse("", DATA).unwrap();
        let t = table(&[
            ("he", [1.0, 0.2]),
            ("fast", [0.9, 0.1]),
            ("move", [0.0, 1.0]),
            ("march", [1.0, 0.1]),
            ("slide", [-0.2, 1.0]),
        ]);
        let s = tokenize("he moved fast").unwrap().with_verb(1).unwrap();
        let r = generate_lexical_paraphrase(&s, &g, &t, &LexRepConfig::default()).unwrap();
        assert_eq!(r.verb_lemma, "move");
        assert_eq!(r.chosen_lemma, "march");
        assert_eq!(r.output.tokens(), ["he", "marched", "fast"]);
        assert_eq!(r.ranked_candidates.len(), 3);

        let raw = LexRepConfig {
            inflect: false,
            ..LexRepConfig::default()
        };
        let r = generate_lexical_paraphrase(&s, &g, &t, &raw).unwrap();
        assert_eq!(r.output.tokens(), ["he", "march", "fast"]);
    }

    #[test]
    fn particle_policies() {
        let g = WordNetGraph::parse("", DATA).unwrap();
        let t = table(&[("they", [1.0, 0.0]), ("up", [-0.5, 0.0]), ("march", [1.0, 0.0]), ("slide", [-1.0, 0.1])]);
        let s = tokenize("they move up").unwrap().with_verb(1).unwrap().with_particle(2).unwrap();
        let keep = generate_lexical_paraphrase(&s, &g, &t, &LexRepConfig::default()).unwrap();
        assert_eq!(keep.output.len(), 3);
        assert_eq!(keep.output.particle_index(), Some(2));
        let cfg = LexRepConfig {
            particle: ParticlePolicy::VerbAndParticle,
            ..LexRepConfig::default()
        };
        let drop = generate_lexical_paraphrase(&s, &g, &t, &cfg).unwrap();
        assert_eq!(drop.output.tokens(), ["they", "march"]);
    }

    #[test]
    fn config_and_input_errors() {
        let g = WordNetGraph::parse("", DATA).unwrap();
        let t = table(&[("x", [1.0, 0.0])]);
        let s = tokenize("x a").unwrap();
        assert_eq!(
            generate_lexical_paraphrase(&s, &g, &t, &LexRepConfig::default()),
            Err(LexRepError::MissingVerbIndex)
        );
        let cfg = LexRepConfig {
            depth: 0,
            ..LexRepConfig::default()
        };
        assert_eq!(
            generate_lexical_paraphrase(&s.clone().with_verb(1).unwrap(), &g, &t, &cfg),
            Err(LexRepError::ZeroDepth)
        );
        let s = tokenize("q a").unwrap().with_verb(1).unwrap();
        assert_eq!(
            generate_lexical_paraphrase(&s, &g, &t, &LexRepConfig::default()),
            Err(LexRepError::Embedding(EmbeddingError::AllOutOfVocabulary))
        );
    }
}

//! Tokenization, detokenization and heuristic verb morphology.
//!
//! Tokens are lowercased. The characters `. , ! ? " ; :` always form their
//! own tokens, and an apostrophe inside a word starts a clitic token
//! (`lake's` becomes `lake` `'s`). Irregular verbs are not handled.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TextError {
    #[error("input is empty after trimming whitespace")]
    EmptyInput,
    #[error("sentence has no tokens")]
    NoTokens,
    #[error("token {0} is empty")]
    EmptyToken(usize),
    #[error("verb index {index} out of range for {len} tokens")]
    VerbIndexOutOfRange { index: usize, len: usize },
    #[error("particle index {particle} must follow verb index {verb} and be below {len}")]
    BadParticleIndex {
        particle: usize,
        verb: usize,
        len: usize,
    },
    #[error("particle index given without a verb index")]
    ParticleWithoutVerb,
}

/// A tokenized sentence with an optional marked target verb.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawSentence")]
pub struct TokenSentence {
    tokens: Vec<String>,
    verb_index: Option<usize>,
    particle_index: Option<usize>,
}

#[derive(Deserialize)]
struct RawSentence {
    tokens: Vec<String>,
    verb_index: Option<usize>,
    particle_index: Option<usize>,
}

impl TryFrom<RawSentence> for TokenSentence {
    type Error = TextError;

    fn try_from(raw: RawSentence) -> Result<Self, TextError> {
        let mut s = TokenSentence::new(raw.tokens)?;
        if let Some(v) = raw.verb_index {
            s = s.with_verb(v)?;
        }
        if let Some(p) = raw.particle_index {
            s = s.with_particle(p)?;
        }
        Ok(s)
    }
}

impl TokenSentence {
    pub fn new(tokens: Vec<String>) -> Result<Self, TextError> {
        if tokens.is_empty() {
            return Err(TextError::NoTokens);
        }
        if let Some(i) = tokens.iter().position(|t| t.is_empty()) {
            return Err(TextError::EmptyToken(i));
        }
        Ok(Self {
            tokens,
            verb_index: None,
            particle_index: None,
        })
    }

    /// Marks the target verb. Clears a particle that would no longer follow it.
    pub fn with_verb(mut self, index: usize) -> Result<Self, TextError> {
        if index >= self.tokens.len() {
            return Err(TextError::VerbIndexOutOfRange {
                index,
                len: self.tokens.len(),
            });
        }
        self.verb_index = Some(index);
        if self.particle_index.is_some_and(|p| p <= index) {
            self.particle_index = None;
        }
        Ok(self)
    }

    pub fn with_particle(mut self, index: usize) -> Result<Self, TextError> {
        let verb = self.verb_index.ok_or(TextError::ParticleWithoutVerb)?;
        if index <= verb || index >= self.tokens.len() {
            return Err(TextError::BadParticleIndex {
                particle: index,
                verb,
                len: self.tokens.len(),
            });
        }
        self.particle_index = Some(index);
        Ok(self)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn verb_index(&self) -> Option<usize> {
        self.verb_index
    }

    pub fn particle_index(&self) -> Option<usize> {
        self.particle_index
    }

    pub fn verb(&self) -> Option<&str> {
        self.verb_index.map(|i| self.tokens[i].as_str())
    }

    pub fn into_tokens(self) -> Vec<String> {
        self.tokens
    }
}

impl fmt::Display for TokenSentence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&detokenize(self))
    }
}

const SPLIT_PUNCT: &[char] = &['.', ',', '!', '?', '"', ';', ':'];
const CLOSING_PUNCT: &[&str] = &[".", ",", "!", "?", ";", ":"];

fn is_apostrophe(c: char) -> bool {
    c == '\'' || c == '\u{2019}'
}

/// Splits `text` into lowercase tokens.
pub fn tokenize(text: &str) -> Result<TokenSentence, TextError> {
    let text = text.trim();
    if text.is_empty() {
        return Err(TextError::EmptyInput);
    }
    let mut tokens = Vec::new();
    for word in text.split_whitespace() {
        let chars: Vec<char> = word.chars().flat_map(char::to_lowercase).collect();
        let mut current = String::new();
        for (i, &c) in chars.iter().enumerate() {
            if SPLIT_PUNCT.contains(&c) {
                flush(&mut current, &mut tokens);
                tokens.push(c.to_string());
            } else if is_apostrophe(c) {
                let next_is_letter = chars.get(i + 1).is_some_and(|n| n.is_alphabetic());
                flush(&mut current, &mut tokens);
                if next_is_letter && i > 0 && !tokens.is_empty() {
                    // clitic: keep the apostrophe with the letters that follow
                    current.push('\'');
                } else {
                    tokens.push("'".to_string());
                }
            } else {
                current.push(c);
            }
        }
        flush(&mut current, &mut tokens);
    }
    TokenSentence::new(tokens)
}

fn flush(current: &mut String, tokens: &mut Vec<String>) {
    if !current.is_empty() {
        tokens.push(core::mem::take(current));
    }
}

fn attaches_left(token: &str) -> bool {
    if CLOSING_PUNCT.contains(&token) {
        return true;
    }
    let mut chars = token.chars();
    chars.next() == Some('\'') && chars.next().is_some_and(char::is_alphabetic)
}

/// Joins tokens with single spaces, reattaching clitics and closing
/// punctuation to the preceding token.
pub fn detokenize(sentence: &TokenSentence) -> String {
    detokenize_tokens(sentence.tokens())
}

pub fn detokenize_tokens<S: AsRef<str>>(tokens: &[S]) -> String {
    let mut out = String::new();
    for (i, tok) in tokens.iter().enumerate() {
        let tok = tok.as_ref();
        if i > 0 && !attaches_left(tok) {
            out.push(' ');
        }
        out.push_str(tok);
    }
    out
}

/// Verb form categories recognised by the suffix rules.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerbForm {
    Base,
    ThirdSingular,
    Past,
    Progressive,
}

fn is_vowel(c: char) -> bool {
    matches!(c, 'a' | 'e' | 'i' | 'o' | 'u')
}

fn vowel_groups(word: &str) -> usize {
    let mut groups = 0;
    let mut prev = false;
    for (i, c) in word.chars().enumerate() {
        let v = is_vowel(c) || (c == 'y' && i > 0);
        if v && !prev {
            groups += 1;
        }
        prev = v;
    }
    groups
}

/// Consonant-vowel-consonant monosyllable whose final consonant doubles
/// before `-ed`/`-ing` (`stop` -> `stopped`).
fn doubles_final(word: &str) -> bool {
    let c: Vec<char> = word.chars().collect();
    if c.len() < 3 || vowel_groups(word) != 1 {
        return false;
    }
    let (a, b, z) = (c[c.len() - 3], c[c.len() - 2], c[c.len() - 1]);
    !is_vowel(a) && is_vowel(b) && !is_vowel(z) && !matches!(z, 'w' | 'x' | 'y')
}

fn ends_consonant_y(word: &str) -> bool {
    let c: Vec<char> = word.chars().collect();
    c.len() >= 2 && c[c.len() - 1] == 'y' && !is_vowel(c[c.len() - 2])
}

fn takes_es(word: &str) -> bool {
    ["s", "x", "z", "ch", "sh", "o"]
        .iter()
        .any(|s| word.ends_with(s))
}

/// Detects which form `surface` takes relative to its lemma.
pub fn detect_form(surface: &str, lemma: &str) -> Option<VerbForm> {
    if surface == lemma {
        Some(VerbForm::Base)
    } else if surface.ends_with("ing") {
        Some(VerbForm::Progressive)
    } else if surface.ends_with("ed") || (lemma.ends_with('e') && surface.ends_with('d')) {
        Some(VerbForm::Past)
    } else if surface.ends_with('s') {
        Some(VerbForm::ThirdSingular)
    } else {
        None
    }
}

/// Applies the regular suffix rules for `form` to `lemma`.
pub fn inflect(lemma: &str, form: VerbForm) -> String {
    let stem_no_last = &lemma[..lemma.len() - lemma.chars().last().map_or(0, char::len_utf8)];
    let last = lemma.chars().last();
    match form {
        VerbForm::Base => lemma.to_string(),
        VerbForm::ThirdSingular => {
            if ends_consonant_y(lemma) {
                alloc::format!("{stem_no_last}ies")
            } else if takes_es(lemma) {
                alloc::format!("{lemma}es")
            } else {
                alloc::format!("{lemma}s")
            }
        }
        VerbForm::Past => {
            if last == Some('e') {
                alloc::format!("{lemma}d")
            } else if ends_consonant_y(lemma) {
                alloc::format!("{stem_no_last}ied")
            } else if doubles_final(lemma) {
                alloc::format!("{lemma}{}ed", last.unwrap())
            } else {
                alloc::format!("{lemma}ed")
            }
        }
        VerbForm::Progressive => {
            if let Some(stem) = lemma.strip_suffix("ie") {
                alloc::format!("{stem}ying")
            } else if last == Some('e')
                && lemma.len() > 2
                && !["ee", "oe", "ye"].iter().any(|s| lemma.ends_with(s))
            {
                alloc::format!("{stem_no_last}ing")
            } else if doubles_final(lemma) {
                alloc::format!("{lemma}{}ing", last.unwrap())
            } else {
                alloc::format!("{lemma}ing")
            }
        }
    }
}

/// Inflects `lemma` into the same form that `exemplar_surface` takes relative
/// to `exemplar_lemma`. Undetectable forms return the lemma unchanged.
pub fn inflect_like(lemma: &str, exemplar_surface: &str, exemplar_lemma: &str) -> String {
    match detect_form(exemplar_surface, exemplar_lemma) {
        Some(form) => inflect(lemma, form),
        None => lemma.to_string(),
    }
}

fn undo_doubling(stem: &str) -> Option<String> {
    let c: Vec<char> = stem.chars().collect();
    if c.len() >= 3 && c[c.len() - 1] == c[c.len() - 2] {
        let base: String = c[..c.len() - 1].iter().collect();
        if doubles_final(&base) {
            return Some(base);
        }
    }
    None
}

/// Candidate lemmas for a surface verb form, most plausible first. The
/// surface form itself always comes first.
pub fn lemma_candidates(surface: &str) -> Vec<String> {
    let mut out = alloc::vec![surface.to_string()];
    let mut push = |s: String| {
        if !s.is_empty() && !out.contains(&s) {
            out.push(s);
        }
    };
    if let Some(stem) = surface.strip_suffix("ing") {
        if let Some(s) = surface.strip_suffix("ying") {
            push(alloc::format!("{s}ie"));
        }
        if let Some(base) = undo_doubling(stem) {
            push(base);
        }
        if !doubles_final(stem) {
            push(stem.to_string());
        }
        push(alloc::format!("{stem}e"));
    } else if let Some(stem) = surface.strip_suffix("ed") {
        if let Some(s) = surface.strip_suffix("ied") {
            push(alloc::format!("{s}y"));
        }
        if let Some(base) = undo_doubling(stem) {
            push(base);
        }
        if !doubles_final(stem) {
            push(stem.to_string());
        }
        push(alloc::format!("{stem}e"));
    } else if let Some(stem) = surface.strip_suffix('s') {
        if let Some(s) = surface.strip_suffix("ies") {
            push(alloc::format!("{s}y"));
        }
        if let Some(s) = surface.strip_suffix("es") {
            if takes_es(s) {
                push(s.to_string());
            }
        }
        push(stem.to_string());
    }
    out
}

/// Returns the first candidate lemma accepted by `known`, or the surface
/// form when none is.
pub fn lemmatize(surface: &str, known: impl Fn(&str) -> bool) -> String {
    lemma_candidates(surface)
        .into_iter()
        .find(|c| known(c))
        .unwrap_or_else(|| surface.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn toks(s: &TokenSentence) -> Vec<&str> {
        s.tokens().iter().map(String::as_str).collect()
    }

    #[test]
    fn tokenize_examples() {
        let s = tokenize("He was lavished with praise").unwrap();
        assert_eq!(toks(&s), ["he", "was", "lavished", "with", "praise"]);
        assert_eq!(toks(&tokenize("a").unwrap()), ["a"]);
        let s = tokenize("the lake's surface.").unwrap();
        assert_eq!(toks(&s), ["the", "lake", "'s", "surface", "."]);
    }

    #[test]
    fn tokenize_rejects_blank() {
        assert_eq!(tokenize("  \t\n"), Err(TextError::EmptyInput));
    }

    #[test]
    fn tokenize_quotes_and_punct() {
        let s = tokenize("\"Stop,\" she said; 'go!'").unwrap();
        assert_eq!(
            toks(&s),
            ["\"", "stop", ",", "\"", "she", "said", ";", "'", "go", "!", "'"]
        );
    }

    #[test]
    fn detokenize_examples() {
        let s = TokenSentence::new(vec!["the".into(), "lake".into(), "'s".into(), "surface".into(), ".".into()]).unwrap();
        assert_eq!(detokenize(&s), "the lake's surface.");
        let s = TokenSentence::new(vec!["a".into()]).unwrap();
        assert_eq!(detokenize(&s), "a");
        let s = tokenize("he was lavished with praise").unwrap();
        assert_eq!(detokenize(&s), "he was lavished with praise");
    }

    #[test]
    fn sentence_invariants() {
        let s = tokenize("she appears among royalty").unwrap();
        assert!(s.clone().with_verb(4).is_err());
        let s = s.with_verb(1).unwrap();
        assert_eq!(s.verb(), Some("appears"));
        assert!(s.clone().with_particle(1).is_err());
        assert!(s.clone().with_particle(2).is_ok());
        assert!(TokenSentence::new(vec![String::new()]).is_err());
        assert_eq!(
            tokenize("a b").unwrap().with_particle(1),
            Err(TextError::ParticleWithoutVerb)
        );
    }

    #[test]
    fn inflect_like_examples() {
        assert_eq!(inflect_like("shower", "lavished", "lavish"), "showered");
        assert_eq!(inflect_like("run", "run", "run"), "run");
        assert_eq!(inflect_like("crush", "saddened", "sadden"), "crushed");
    }

    #[test]
    fn inflection_rules() {
        assert_eq!(inflect("move", VerbForm::Progressive), "moving");
        assert_eq!(inflect("stop", VerbForm::Past), "stopped");
        assert_eq!(inflect("carry", VerbForm::Past), "carried");
        assert_eq!(inflect("carry", VerbForm::ThirdSingular), "carries");
        assert_eq!(inflect("crush", VerbForm::ThirdSingular), "crushes");
        assert_eq!(inflect("see", VerbForm::Progressive), "seeing");
        assert_eq!(inflect("die", VerbForm::Progressive), "dying");
        assert_eq!(inflect("play", VerbForm::Past), "played");
        assert_eq!(inflect("move", VerbForm::Past), "moved");
        assert_eq!(inflect("rain", VerbForm::Progressive), "raining");
    }

    #[test]
    fn irregular_forms_pass_through() {
        assert_eq!(inflect_like("march", "ran", "run"), "march");
    }

    #[test]
    fn lemmatize_with_lexicon() {
        let lex = ["appear", "lavish", "sadden", "move", "hope", "hop", "stop", "carry", "crush", "agree", "top"];
        let known = |w: &str| lex.contains(&w);
        assert_eq!(lemmatize("appears", known), "appear");
        assert_eq!(lemmatize("lavished", known), "lavish");
        assert_eq!(lemmatize("saddened", known), "sadden");
        assert_eq!(lemmatize("moving", known), "move");
        assert_eq!(lemmatize("hoped", known), "hope");
        assert_eq!(lemmatize("hopped", known), "hop");
        assert_eq!(lemmatize("stopped", known), "stop");
        assert_eq!(lemmatize("carried", known), "carry");
        assert_eq!(lemmatize("crushes", known), "crush");
        assert_eq!(lemmatize("agreed", known), "agree");
        assert_eq!(lemmatize("tops", known), "top");
        assert_eq!(lemmatize("zzz", known), "zzz");
    }
}

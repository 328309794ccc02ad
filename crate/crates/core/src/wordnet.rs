//! Verb synset graph parsed from the WordNet database grammar.
//!
//! Only `index.verb` / `data.verb` content is understood. Of the pointer
//! symbols, `~` (troponym) and `@` (hypernym) are kept and everything else is
//! skipped. Lines starting with two spaces are the license header and are
//! ignored.

use alloc::borrow::ToOwned;
use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceFile {
    Index,
    Data,
}

impl fmt::Display for SourceFile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SourceFile::Index => "index.verb",
            SourceFile::Data => "data.verb",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WordNetError {
    #[error("{file} line {line}: {reason}")]
    Malformed {
        file: SourceFile,
        line: usize,
        reason: String,
    },
    #[error("synset {from} references missing verb synset {missing:08}")]
    Dangling { from: String, missing: u64 },
    #[error("duplicate synset offset {0:08}")]
    DuplicateSynset(u64),
}

/// Byte-offset key of a verb synset in `data.verb`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SynsetId(u64);

impl SynsetId {
    pub const fn new(offset: u64) -> Self {
        Self(offset)
    }

    pub fn offset(self) -> u64 {
        self.0
    }

    /// Part of speech tag; only verbs are loaded.
    pub fn pos(self) -> char {
        'v'
    }
}

impl fmt::Display for SynsetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:08}-v", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Synset {
    pub id: SynsetId,
    pub lemmas: Vec<String>,
    pub troponyms: Vec<SynsetId>,
    pub hypernyms: Vec<SynsetId>,
    pub gloss: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct IndexEntry {
    declared: usize,
    senses: Vec<SynsetId>,
}

/// Traversal options for [`WordNetGraph::candidate_lemmas`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CandidateOptions {
    /// Troponym edges to descend below each sense.
    pub depth: usize,
    pub include_multiword: bool,
    /// Also pool the direct troponyms of each sense's hypernyms.
    pub include_sisters: bool,
}

impl Default for CandidateOptions {
    fn default() -> Self {
        Self {
            depth: 1,
            include_multiword: false,
            include_sisters: false,
        }
    }
}

impl CandidateOptions {
    pub fn with_depth(depth: usize) -> Self {
        Self {
            depth,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct WordNetGraph {
    by_id: BTreeMap<SynsetId, Synset>,
    by_lemma: BTreeMap<String, Vec<SynsetId>>,
    index: BTreeMap<String, IndexEntry>,
}

impl WordNetGraph {
    /// Parses complete `index.verb` and `data.verb` texts.
    pub fn parse(index: &str, data: &str) -> Result<Self, WordNetError> {
        let mut b = WordNetBuilder::default();
        for (i, line) in index.lines().enumerate() {
            b.index_line(i + 1, line)?;
        }
        for (i, line) in data.lines().enumerate() {
            b.data_line(i + 1, line)?;
        }
        b.finish()
    }

    pub fn len(&self) -> usize {
        self.by_id.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_id.is_empty()
    }

    pub fn synset(&self, id: SynsetId) -> Option<&Synset> {
        self.by_id.get(&id)
    }

    pub fn synsets(&self) -> impl Iterator<Item = &Synset> {
        self.by_id.values()
    }

    pub fn lemmas(&self) -> impl Iterator<Item = &str> {
        self.by_lemma.keys().map(String::as_str)
    }

    pub fn contains_lemma(&self, lemma: &str) -> bool {
        self.by_lemma.contains_key(lemma)
    }

    /// Sense count declared for `lemma` by its `index.verb` line.
    pub fn declared_sense_count(&self, lemma: &str) -> Option<usize> {
        self.index.get(lemma).map(|e| e.declared)
    }

    /// Synsets containing `lemma`, in sense order. Empty when unknown.
    pub fn synsets_of(&self, lemma: &str) -> &[SynsetId] {
        self.by_lemma.get(lemma).map_or(&[], Vec::as_slice)
    }

    /// Lemmas of every troponym synset reachable within `opts.depth` edges
    /// below any sense of `verb_lemma`, plus `verb_lemma` itself.
    pub fn candidate_lemmas(&self, verb_lemma: &str, opts: &CandidateOptions) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        out.insert(verb_lemma.to_owned());
        let senses = self.synsets_of(verb_lemma);

        let mut visited: BTreeSet<SynsetId> = senses.iter().copied().collect();
        let mut queue: VecDeque<(SynsetId, usize)> = senses.iter().map(|&s| (s, 0)).collect();
        let mut reached = Vec::new();
        while let Some((id, d)) = queue.pop_front() {
            if d == opts.depth {
                continue;
            }
            for &t in &self.by_id[&id].troponyms {
                if visited.insert(t) {
                    reached.push(t);
                    queue.push_back((t, d + 1));
                }
            }
        }
        if opts.include_sisters {
            for &s in senses {
                for h in &self.by_id[&s].hypernyms {
                    reached.extend(self.by_id[h].troponyms.iter().copied());
                }
            }
        }
        for id in reached {
            for lemma in &self.by_id[&id].lemmas {
                if opts.include_multiword || !lemma.contains('_') {
                    out.insert(lemma.clone());
                }
            }
        }
        out
    }
}

/// Incremental line-by-line loader, used when streaming from files.
#[derive(Debug, Default)]
pub struct WordNetBuilder {
    synsets: BTreeMap<SynsetId, Synset>,
    data_order: Vec<SynsetId>,
    index: BTreeMap<String, IndexEntry>,
    index_order: Vec<String>,
}

fn malformed(file: SourceFile, line: usize, reason: impl Into<String>) -> WordNetError {
    WordNetError::Malformed {
        file,
        line,
        reason: reason.into(),
    }
}

fn is_comment(line: &str) -> bool {
    line.starts_with("  ")
}

fn parse_offset(tok: &str, file: SourceFile, line: usize) -> Result<SynsetId, WordNetError> {
    if tok.len() != 8 || !tok.bytes().all(|b| b.is_ascii_digit()) {
        return Err(malformed(file, line, alloc::format!("bad synset offset {tok:?}")));
    }
    tok.parse()
        .map(SynsetId)
        .map_err(|_| malformed(file, line, alloc::format!("bad synset offset {tok:?}")))
}

fn parse_count(tok: Option<&str>, what: &str, file: SourceFile, line: usize) -> Result<usize, WordNetError> {
    let tok = tok.ok_or_else(|| malformed(file, line, alloc::format!("missing {what}")))?;
    tok.parse()
        .map_err(|_| malformed(file, line, alloc::format!("bad {what} {tok:?}")))
}

fn push_unique(list: &mut Vec<SynsetId>, id: SynsetId) {
    if !list.contains(&id) {
        list.push(id);
    }
}

impl WordNetBuilder {
    /// Parses one `index.verb` line:
    /// `lemma pos synset_cnt p_cnt [ptr_symbol...] sense_cnt tagsense_cnt synset_offset...`
    pub fn index_line(&mut self, line_no: usize, line: &str) -> Result<(), WordNetError> {
        const F: SourceFile = SourceFile::Index;
        if is_comment(line) || line.trim().is_empty() {
            return Ok(());
        }
        let mut it = line.split_ascii_whitespace();
        let lemma = it.next().ok_or_else(|| malformed(F, line_no, "empty line"))?;
        match it.next() {
            Some("v") => {}
            Some(p) => return Err(malformed(F, line_no, alloc::format!("unsupported pos {p:?}"))),
            None => return Err(malformed(F, line_no, "missing pos")),
        }
        let synset_cnt = parse_count(it.next(), "synset_cnt", F, line_no)?;
        let p_cnt = parse_count(it.next(), "p_cnt", F, line_no)?;
        for _ in 0..p_cnt {
            it.next()
                .ok_or_else(|| malformed(F, line_no, "truncated pointer symbol list"))?;
        }
        parse_count(it.next(), "sense_cnt", F, line_no)?;
        parse_count(it.next(), "tagsense_cnt", F, line_no)?;
        let senses = it
            .map(|t| parse_offset(t, F, line_no))
            .collect::<Result<Vec<_>, _>>()?;
        if senses.len() != synset_cnt {
            return Err(malformed(
                F,
                line_no,
                alloc::format!("synset_cnt {synset_cnt} but {} offsets", senses.len()),
            ));
        }
        let lemma = lemma.to_lowercase();
        if self.index.contains_key(&lemma) {
            return Err(malformed(F, line_no, alloc::format!("duplicate lemma {lemma:?}")));
        }
        self.index_order.push(lemma.clone());
        self.index.insert(
            lemma,
            IndexEntry {
                declared: synset_cnt,
                senses,
            },
        );
        Ok(())
    }

    /// Parses one `data.verb` line:
    /// `offset lex_filenum ss_type w_cnt word lex_id [...] p_cnt [ptr...] [frames] | gloss`
    pub fn data_line(&mut self, line_no: usize, line: &str) -> Result<(), WordNetError> {
        const F: SourceFile = SourceFile::Data;
        if is_comment(line) || line.trim().is_empty() {
            return Ok(());
        }
        let (fields, gloss) = match line.split_once(" | ") {
            Some((f, g)) => (f, g.trim_end()),
            None => match line.trim_end().strip_suffix(" |") {
                Some(f) => (f, ""),
                None => (line, ""),
            },
        };
        let mut it = fields.split_ascii_whitespace();
        let id = parse_offset(it.next().unwrap_or(""), F, line_no)?;
        it.next()
            .filter(|t| t.len() == 2 && t.bytes().all(|b| b.is_ascii_digit()))
            .ok_or_else(|| malformed(F, line_no, "bad lex_filenum"))?;
        match it.next() {
            Some("v") => {}
            other => return Err(malformed(F, line_no, alloc::format!("unsupported ss_type {other:?}"))),
        }
        let w_cnt = it
            .next()
            .and_then(|t| usize::from_str_radix(t, 16).ok())
            .ok_or_else(|| malformed(F, line_no, "bad w_cnt"))?;
        if w_cnt == 0 {
            return Err(malformed(F, line_no, "synset without words"));
        }
        let mut lemmas: Vec<String> = Vec::with_capacity(w_cnt);
        for _ in 0..w_cnt {
            let word = it.next().ok_or_else(|| malformed(F, line_no, "truncated word list"))?;
            it.next()
                .filter(|t| t.len() == 1 && u8::from_str_radix(t, 16).is_ok())
                .ok_or_else(|| malformed(F, line_no, "bad lex_id"))?;
            let word = word.to_lowercase();
            if !lemmas.contains(&word) {
                lemmas.push(word);
            }
        }
        let p_cnt = it
            .next()
            .filter(|t| t.len() == 3)
            .and_then(|t| t.parse::<usize>().ok())
            .ok_or_else(|| malformed(F, line_no, "bad p_cnt"))?;
        let mut troponyms = Vec::new();
        let mut hypernyms = Vec::new();
        for _ in 0..p_cnt {
            let (sym, off, pos, st) = (it.next(), it.next(), it.next(), it.next());
            let (Some(sym), Some(off), Some(pos), Some(st)) = (sym, off, pos, st) else {
                return Err(malformed(F, line_no, "truncated pointer list"));
            };
            if st.len() != 4 || u16::from_str_radix(st, 16).is_err() {
                return Err(malformed(F, line_no, alloc::format!("bad source/target {st:?}")));
            }
            let target = parse_offset(off, F, line_no)?;
            if pos != "v" {
                continue;
            }
            match sym {
                "~" => push_unique(&mut troponyms, target),
                "@" => push_unique(&mut hypernyms, target),
                _ => {}
            }
        }
        // anything left before the gloss is the verb frame list, which is not used
        if self.synsets.contains_key(&id) {
            return Err(WordNetError::DuplicateSynset(id.0));
        }
        self.data_order.push(id);
        self.synsets.insert(
            id,
            Synset {
                id,
                lemmas,
                troponyms,
                hypernyms,
                gloss: gloss.to_string(),
            },
        );
        Ok(())
    }

    /// Validates references and builds the lemma index.
    pub fn finish(self) -> Result<WordNetGraph, WordNetError> {
        for s in self.synsets.values() {
            for t in s.troponyms.iter().chain(&s.hypernyms) {
                if !self.synsets.contains_key(t) {
                    return Err(WordNetError::Dangling {
                        from: s.id.to_string(),
                        missing: t.0,
                    });
                }
            }
        }
        let mut by_lemma: BTreeMap<String, Vec<SynsetId>> = BTreeMap::new();
        for lemma in &self.index_order {
            let entry = &self.index[lemma];
            for s in &entry.senses {
                if !self.synsets.contains_key(s) {
                    return Err(WordNetError::Dangling {
                        from: alloc::format!("index entry {lemma:?}"),
                        missing: s.0,
                    });
                }
            }
            by_lemma.insert(lemma.clone(), entry.senses.clone());
        }
        // lemmas missing from the index are appended in data-file order
        for id in &self.data_order {
            for lemma in &self.synsets[id].lemmas {
                let senses = by_lemma.entry(lemma.clone()).or_default();
                if !self.index.contains_key(lemma) {
                    push_unique(senses, *id);
                }
            }
        }
        Ok(WordNetGraph {
            by_id: self.synsets,
            by_lemma,
            index: self.index,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    // A = move (~ B, ~ C), B = march, C = slide
    const DATA3: &str = "  1 license header line
00000100 38 v 01 move 0 002 ~ 00000200 v 0000 ~ 00000300 v 0000 01 + 02 00 | change location
00000200 38 v 01 march 0 001 @ 00000100 v 0000 | walk with measured steps
00000300 38 v 01 slide 0 001 @ 00000100 v 0000 | move smoothly
";
    const INDEX3: &str = "  1 license header line
march v 1 1 @ 1 0 00000200
move v 1 1 ~ 1 0 00000100
slide v 1 1 @ 1 0 00000300
";

    fn set(items: &[&str]) -> BTreeSet<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn three_synset_fixture() {
        let g = WordNetGraph::parse(INDEX3, DATA3).unwrap();
        assert_eq!(g.len(), 3);
        let a = SynsetId::new(100);
        assert_eq!(g.synset(a).unwrap().troponyms, vec![SynsetId::new(200), SynsetId::new(300)]);
        assert_eq!(g.synsets_of("move"), &[a]);
        assert_eq!(g.synsets_of("march"), &[SynsetId::new(200)]);
        assert!(g.synsets_of("zzzz").is_empty());
        let opts = CandidateOptions::default();
        assert_eq!(g.candidate_lemmas("move", &opts), set(&["move", "march", "slide"]));
        assert_eq!(g.candidate_lemmas("march", &opts), set(&["march"]));
        assert_eq!(g.candidate_lemmas("zzzz", &opts), set(&["zzzz"]));
        assert_eq!(g.synset(a).unwrap().gloss, "change location");
    }

    #[test]
    fn empty_sources_give_empty_graph() {
        let g = WordNetGraph::parse("", "").unwrap();
        assert!(g.is_empty());
    }

    #[test]
    fn dangling_edge_is_reported() {
        let data = "00000100 38 v 01 move 0 001 ~ 00000999 v 0000 | x\n";
        let err = WordNetGraph::parse("", data).unwrap_err();
        assert_eq!(
            err,
            WordNetError::Dangling {
                from: "00000100-v".into(),
                missing: 999
            }
        );
    }

    #[test]
    fn dangling_index_offset_is_reported() {
        let err = WordNetGraph::parse("move v 1 0 1 0 00000100\n", "").unwrap_err();
        assert!(matches!(err, WordNetError::Dangling { missing: 100, .. }));
    }

    #[test]
    fn malformed_lines_carry_line_numbers() {
        let data = "  header\n00000100 38 v 01 move 0 00x | gloss\n";
        match WordNetGraph::parse("", data).unwrap_err() {
            WordNetError::Malformed { file, line, .. } => {
                assert_eq!(file, SourceFile::Data);
                assert_eq!(line, 2);
            }
            e => panic!("unexpected {e:?}"),
        }
        let index = "move v 2 0 2 0 00000100\n";
        assert!(matches!(
            WordNetGraph::parse(index, "").unwrap_err(),
            WordNetError::Malformed { line: 1, .. }
        ));
    }

    #[test]
    fn hex_word_count_and_frames() {
        // w_cnt is hexadecimal: 0a = 10 words
        let words: Vec<String> = (0..10).map(|i| alloc::format!("w{i} 0")).collect();
        let data = alloc::format!(
            "00000100 38 v 0a {} 000 02 + 02 00 + 08 01 | many words\n",
            words.join(" ")
        );
        let g = WordNetGraph::parse("", &data).unwrap();
        assert_eq!(g.synset(SynsetId::new(100)).unwrap().lemmas.len(), 10);
        assert_eq!(g.synsets_of("w9"), &[SynsetId::new(100)]);
    }

    #[test]
    fn other_pointer_symbols_are_ignored_and_duplicates_dropped() {
        let data = "\
00000100 38 v 01 move 0 004 ~ 00000200 v 0000 ~ 00000200 v 0101 $ 00000200 v 0000 + 01234567 n 0101 | x
00000200 38 v 01 march 0 000 | y
";
        let g = WordNetGraph::parse("", data).unwrap();
        assert_eq!(g.synset(SynsetId::new(100)).unwrap().troponyms, vec![SynsetId::new(200)]);
    }

    #[test]
    fn cyclic_graph_terminates() {
        let data = "\
00000100 38 v 01 a 0 001 ~ 00000200 v 0000 | a
00000200 38 v 01 b 0 001 ~ 00000300 v 0000 | b
00000300 38 v 01 c 0 001 ~ 00000100 v 0000 | c
";
        let g = WordNetGraph::parse("", data).unwrap();
        let all = g.candidate_lemmas("a", &CandidateOptions::with_depth(50));
        assert_eq!(all, set(&["a", "b", "c"]));
    }

    #[test]
    fn depth_and_multiword_options() {
        let data = "\
00000100 38 v 01 go 0 001 ~ 00000200 v 0000 | a
00000200 38 v 02 walk 0 walk_on 0 002 @ 00000100 v 0000 ~ 00000300 v 0000 | b
00000300 38 v 01 stroll 0 001 @ 00000200 v 0000 | c
";
        let g = WordNetGraph::parse("", data).unwrap();
        assert_eq!(g.candidate_lemmas("go", &CandidateOptions::with_depth(1)), set(&["go", "walk"]));
        assert_eq!(
            g.candidate_lemmas("go", &CandidateOptions::with_depth(2)),
            set(&["go", "walk", "stroll"])
        );
        let opts = CandidateOptions {
            include_multiword: true,
            ..CandidateOptions::default()
        };
        assert_eq!(g.candidate_lemmas("go", &opts), set(&["go", "walk", "walk_on"]));
        let sisters = CandidateOptions {
            include_sisters: true,
            ..CandidateOptions::default()
        };
        assert_eq!(g.candidate_lemmas("walk", &sisters), set(&["walk", "stroll"]));
    }
}

//! A toy corpus for checking that the masked model learns to fill `<met>`.
//!
//! Metaphoric sentences have the shape `SUBJ VERB the OBJ with CUE`, where
//! the verb is a fixed function of the cue. Masking the verb therefore
//! leaves exactly one correct filler, recoverable from the cue alone.
//! Literal sentences `SUBJ VERB the OBJ` use other verbs and train the
//! model to copy its input.

use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use crate::masking::{LabeledVerbInstance, VerbLabel};

pub const SUBJECTS: [&str; 4] = ["alice", "bob", "carol", "dave"];
pub const OBJECTS: [&str; 4] = ["wall", "door", "road", "river"];
/// `(cue, filler)`
pub const CUES: [(&str, &str); 4] = [
    ("fire", "burns"),
    ("ice", "freezes"),
    ("wind", "sweeps"),
    ("stone", "crushes"),
];
pub const LITERAL_VERBS: [&str; 2] = ["sees", "passes"];

pub const SOURCE_NAME: &str = "synthetic-mask-task";

/// The filler the cue determines.
pub fn filler_for(cue: &str) -> Option<&'static str> {
    CUES.iter().find(|(c, _)| *c == cue).map(|(_, f)| *f)
}

/// 64 metaphoric instances followed by 32 literal ones.
pub fn cue_filler_task() -> Vec<LabeledVerbInstance> {
    let mut out = Vec::with_capacity(96);
    for s in SUBJECTS {
        for o in OBJECTS {
            for (cue, filler) in CUES {
                out.push(LabeledVerbInstance {
                    tokens: vec![
                        s.to_string(),
                        filler.to_string(),
                        "the".to_string(),
                        o.to_string(),
                        "with".to_string(),
                        cue.to_string(),
                    ],
                    verb_index: 1,
                    label: VerbLabel::Metaphoric,
                    source_corpus: SOURCE_NAME.to_string(),
                });
            }
        }
    }
    for s in SUBJECTS {
        for o in OBJECTS {
            for v in LITERAL_VERBS {
                out.push(LabeledVerbInstance {
                    tokens: vec![s.to_string(), v.to_string(), "the".to_string(), o.to_string()],
                    verb_index: 1,
                    label: VerbLabel::Literal,
                    source_corpus: SOURCE_NAME.to_string(),
                });
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizes_and_determination() {
        let task = cue_filler_task();
        let met: Vec<_> = task.iter().filter(|i| i.label == VerbLabel::Metaphoric).collect();
        assert_eq!(met.len(), 64);
        assert_eq!(task.len() - met.len(), 32);
        for inst in met {
            assert_eq!(filler_for(&inst.tokens[5]), Some(inst.tokens[1].as_str()));
        }
    }
}

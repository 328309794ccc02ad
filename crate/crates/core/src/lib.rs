//! Core algorithms for metaphoric paraphrase generation.
//!
//! Everything in this crate is pure computation over in-memory data and only
//! needs `alloc`. File formats that require streaming IO, the annotation
//! service and the command line live in the `metaphor-forge` crate.
//!
//! The two generation routes are:
//!
//! * [`lexrep`]: replace a marked verb with the WordNet troponym whose
//!   embedding best matches the mean embedding of the sentence context.
//! * [`nn`]: an encoder-decoder transformer trained on metaphor-masked
//!   parallel data built by [`masking`].
//!
//! [`eval`] aggregates Likert judgments and computes rank correlations and
//! overlap diagnostics.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod embedding;
pub mod eval;
pub mod lexrep;
pub mod masking;
pub mod nn;
pub mod synthetic;
pub mod text;
pub mod wordnet;

pub use embedding::EmbeddingTable;
pub use text::TokenSentence;
pub use wordnet::WordNetGraph;

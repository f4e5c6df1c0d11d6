//! Bilingual named-entity lexicons from small verse-aligned parallel
//! corpora: character-ngram bootstrapping, a character-level
//! transliteration model to rank candidates, and evaluation.

pub mod clcb;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod miner;
pub mod text;
pub mod translit;

pub use error::{Error, Result};

//! Pronunciation-aware unique character encoding (PUCE) for Mandarin.
//!
//! Every Chinese character is written as its tonal pinyin syllable plus a
//! character index (CI) that tells homophones apart: `马` and `码` both read
//! `ma3`, and become `ma3#1` and `ma3#2`. The crate covers the whole text side
//! of an ASR pipeline built on that encoding:
//!
//! - [`lexicon`]: lexicon parsing and the paired encode/decode dictionaries
//! - [`codec`]: text ↔ surface units, with meta-symbol or integer rendering
//! - [`tokenizer`]: pair-merge sub-character tokenization of the pronunciation part
//! - [`decoder`]: CI beam search over emission lattices and N-best LM rescoring
//! - [`lm`]: character n-gram LM with additive smoothing
//! - [`cer`]: character error rate
//!
//! ```
//! use puce_core::{build_dictionaries, decode_text, encode_text, parse_lexicon};
//! use puce_core::{OovPolicy, SymbolMode};
//!
//! let entries = parse_lexicon("马\tma3\n码\tma3\n").unwrap();
//! let dict = build_dictionaries(&entries).unwrap();
//! let encoded = encode_text("码马", &dict, SymbolMode::Int, OovPolicy::Fail, None).unwrap();
//! assert_eq!(encoded, "ma3#2 ma3#1");
//! assert_eq!(decode_text(&encoded, &dict, SymbolMode::Int).unwrap(), "码马");
//! ```

pub mod cer;
pub mod codec;
pub mod decoder;
mod error;
pub mod lexicon;
pub mod lm;
pub mod tokenizer;

pub use cer::{compute_cer, corpus_cer, CerReport};
pub use codec::{
    decode_text, encode_text, parse_unit, render_unit, Annotations, EncodedUnit, OovPolicy,
    SymbolMode,
};
pub use decoder::{
    ci_beam_search, fuse_and_rerank, parse_lattice, EmissionLattice, Hypothesis, RescoreConfig,
    Slot,
};
pub use error::{PuceError, Result};
pub use lexicon::{
    build_dictionaries, parse_lexicon, DictionaryPair, LexiconEntry, PuceCode, TonalSyllable,
};
pub use lm::{LmScorer, NGramModel};
pub use tokenizer::{train_tokenizer, vocab_report, Inventory, TokenizerModel};

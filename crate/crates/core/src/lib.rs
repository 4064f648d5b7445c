//! Language-universal end-to-end CTC speech recognition.
//!
//! A universal grapheme inventory ([`labelset`]) is shared by all languages;
//! per-language binary masks restrict the output layer, and a stacked BLSTM
//! encoder ([`model`]) can modulate its hidden activations with
//! language-specific sigmoid gates. [`ctc`] provides the training criterion
//! and greedy decoding, [`trainer`] the optimization recipe and [`eval`] error
//! rates and the experiment grid. [`synth`] stands in for real corpora with
//! feature-space synthetic speech.

pub mod ctc;
pub mod error;
pub mod eval;
pub mod features;
pub mod labelset;
pub mod matrix;
pub mod model;
pub mod synth;
pub mod system;
pub mod trainer;

pub use error::{Error, Result};

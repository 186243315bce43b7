//! Corpus utilities for pre-training: role annotation, corruption, loss.

mod corrupt;
mod loss;
mod ssa;

pub use corrupt::{
    corrupt, corrupt_with_rng, corruption_rng, file_seed, CorruptionOutcome, NoiseError, NoiseModes, NoiseSchedule,
};
pub use loss::{weighted_token_cross_entropy, LossError, LossInputs, DEFAULT_LAMBDA};
pub use ssa::{format_tags, ssa_annotate, TagVocabulary, TagVocabularyError};

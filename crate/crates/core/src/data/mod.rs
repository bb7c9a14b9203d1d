//! Corpus ingestion, vocabulary, label hierarchy, splits, weighted
//! resampling, and the synthetic corpus generator.

pub mod corpus;
pub mod hierarchy;
pub mod sampler;
pub mod split;
pub mod synth;
pub mod vocab;

pub use corpus::{load_corpus, save_corpus, Corpus, Example, TextCorpus, TextExample};
pub use hierarchy::LabelHierarchy;
pub use sampler::WeightedSampler;
pub use split::{split_indices, subset_indices};
pub use synth::{generate, SynthConfig, SynthInfo, SynthOutput};
pub use vocab::{tokenize, Vocab, PAD_ID, UNK_ID};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}:{line}: invalid JSON record: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("{path}:{line}: unknown category {name:?}")]
    UnknownCategory {
        path: String,
        line: usize,
        name: String,
    },

    #[error("{path}:{line}: unknown group {name:?}")]
    UnknownGroup {
        path: String,
        line: usize,
        name: String,
    },

    #[error("{path}:{line}: group {group:?} belongs to category {expected:?}, record says {found:?}")]
    InconsistentPair {
        path: String,
        line: usize,
        group: String,
        expected: String,
        found: String,
    },

    #[error("{path}:{line}: text has no tokens")]
    EmptyText { path: String, line: usize },

    #[error("hierarchy: {0}")]
    Hierarchy(String),

    #[error("group {name:?} has no training examples")]
    EmptyGroup { name: String },

    #[error("config: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

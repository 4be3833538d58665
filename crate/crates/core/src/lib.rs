//! Contextual acoustic word embeddings.
//!
//! Trains a small attention-based acoustic-to-word recogniser, reads word
//! embeddings out of its attention distribution, and evaluates them against
//! a CBOW text baseline.

pub mod a2w;
pub mod cawe;
pub mod cbow;
pub mod config;
pub mod corpus;
pub mod embeddings;
pub mod error;
pub mod eval;
pub mod numerics;
pub mod synth;
pub mod trainer;

pub use error::{Error, Result};

pub use a2w::{AcousticFeatureSequence, AttentionMatrix, ModelConfig, ModelParams, Transcript};
pub use corpus::{ClassificationTask, Corpus, SimilarityTask, Span, Utterance};
pub use embeddings::{EmbeddingTable, Method, Vocabulary};
pub use eval::{EvalReport, Metric};
pub use numerics::{Matrix, Rng};

/// Size the global worker pool used by the parallel stages. Only the first
/// call in a process has an effect.
pub fn init_threads(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidArgument("thread count must be at least 1".into()));
    }
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

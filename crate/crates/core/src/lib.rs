//! Retrieval-augmented line completion for local projects.
//!
//! The pipeline is: heal the input at the cursor, query a per-project chunk
//! database by Jaccard similarity of token sets (or exact embedding kNN),
//! prepend the best snippets to the context, decode greedily with the
//! healing constraint, and score completions against targets.

pub mod chunkstore;
pub mod cli;
pub mod context;
pub mod error;
pub mod eval;
pub mod lm;
pub mod metrics;
pub mod seed;
pub mod tokenizer;

pub use error::{Error, Result};
pub use tokenizer::{load_tokenizer, HealingPlan, TokenId, TokenSequence, TokenizerSpec};

//! Entity-representation evaluation toolkit.
//!
//! The crate covers the whole evaluation pipeline:
//!
//! * [`datagen`] builds the eight task datasets from their source corpora,
//! * [`wikient`] extracts hyperlink-anchored (context, description) pairs from
//!   MediaWiki dumps,
//! * [`embed_io`] holds the `EEV1` embedding container, word-vector tables and
//!   the word-averaging baseline encoder,
//! * [`probe`] trains linear classifiers over frozen representations,
//! * [`tasks`] binds datasets, embeddings and probes into task reports,
//! * [`toytrain`] is a small bidirectional LM trained with the hyperlink
//!   reconstruction objective, with exact gradients.

pub mod datagen;
pub mod embed_io;
pub mod error;
pub mod metrics;
pub mod probe;
pub mod tasks;
pub mod text;
pub mod toytrain;
pub mod types;
pub mod wikient;

pub use error::{Error, Result};
pub use types::{EntityDescription, MentionContext, PairInstance, SimilarityPair, TypedInstance};

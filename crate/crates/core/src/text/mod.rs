//! Linguistic branch: sentence splitting and pooling of externally computed
//! token embeddings into 1536-dim sentence features.

mod corpus;
mod embeddings;
mod pool;
mod split;

pub use corpus::{load_transcripts, Narrative};
pub use embeddings::{
    load_token_embeddings, parse_token_embeddings, TokenEmbeddingSequence, EMBED_DIM,
};
pub use pool::{pool_sentence, SentenceFeature};
pub use split::{split_sentences, ABBREVIATIONS};

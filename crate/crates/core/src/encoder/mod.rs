//! Toy masked-language-model encoder: word-level vocabulary, transformer
//! forward pass exposing embeddings and all attention maps, and masked-token
//! pretraining.

mod model;
mod pretrain;
mod vocab;

pub use model::{Encoder, EncoderConfig, EncoderOutput, EncoderVars, Mode, ENCODER_PREFIX};
pub use pretrain::{mlm_accuracy, pretrain_mlm, MlmConfig, MlmReport};
pub use vocab::{
    build_vocab, normalized_words, split_words, tokenize, Vocab, Word, BOS, BOS_ID, EOS, EOS_ID,
    MASK, MASK_ID, PAD, PAD_ID, RESERVED, UNK, UNK_ID,
};

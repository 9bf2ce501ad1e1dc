//! Named token counters.
//!
//! `whitespace` and `chars` are always available. With the `tiktoken` feature,
//! the BPE vocabularies `p50k_base` (Codex family) and `cl100k_base`
//! (ChatGPT family) are registered too.

use std::sync::Arc;

use super::{PromptError, Result};

pub trait TokenCounter: Send + Sync {
    fn name(&self) -> &str;
    fn count(&self, text: &str) -> usize;
}

/// Counts maximal runs of non-whitespace characters.
#[derive(Debug, Clone, Copy, Default)]
pub struct WhitespaceCounter;

impl TokenCounter for WhitespaceCounter {
    fn name(&self) -> &str {
        "whitespace"
    }
    fn count(&self, text: &str) -> usize {
        text.split_whitespace().count()
    }
}

/// Counts Unicode scalar values.
#[derive(Debug, Clone, Copy, Default)]
pub struct CharCounter;

impl TokenCounter for CharCounter {
    fn name(&self) -> &str {
        "chars"
    }
    fn count(&self, text: &str) -> usize {
        text.chars().count()
    }
}

#[cfg(feature = "tiktoken")]
struct BpeCounter {
    name: &'static str,
    bpe: &'static tiktoken_rs::CoreBPE,
}

#[cfg(feature = "tiktoken")]
impl TokenCounter for BpeCounter {
    fn name(&self) -> &str {
        self.name
    }
    fn count(&self, text: &str) -> usize {
        self.bpe.encode_ordinary(text).len()
    }
}

pub fn available_tokenizers() -> Vec<&'static str> {
    let mut names = vec!["whitespace", "chars"];
    if cfg!(feature = "tiktoken") {
        names.extend(["p50k_base", "cl100k_base"]);
    }
    names
}

/// Looks up a registered counter by name.
pub fn tokenizer(name: &str) -> Result<Arc<dyn TokenCounter>> {
    match name {
        "whitespace" => Ok(Arc::new(WhitespaceCounter)),
        "chars" => Ok(Arc::new(CharCounter)),
        #[cfg(feature = "tiktoken")]
        "p50k_base" => Ok(Arc::new(BpeCounter {
            name: "p50k_base",
            bpe: tiktoken_rs::p50k_base_singleton(),
        })),
        #[cfg(feature = "tiktoken")]
        "cl100k_base" => Ok(Arc::new(BpeCounter {
            name: "cl100k_base",
            bpe: tiktoken_rs::cl100k_base_singleton(),
        })),
        other => Err(PromptError::UnknownTokenizer(other.to_string())),
    }
}

pub fn count_tokens(text: &str, tokenizer_name: &str) -> Result<usize> {
    Ok(tokenizer(tokenizer_name)?.count(text))
}

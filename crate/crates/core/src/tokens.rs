//! Tokenization shared by the extractor, the adapters and the encoder.
//!
//! Text is split on whitespace and punctuation is peeled off into its own
//! tokens, so `"[MASK] [MASK]."` yields two mask tokens followed by `"."`.
//! The literal `[MASK]` is always kept whole.

use std::sync::OnceLock;

use regex::Regex;

pub const MASK_TOKEN: &str = "[MASK]";

fn token_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\[MASK\]|[\p{L}\p{N}_]+(?:['’][\p{L}\p{N}_]+)*|[^\s\p{L}\p{N}_]").unwrap())
}

/// Tokens with their byte ranges.
pub fn tokenize_spans(text: &str) -> Vec<(usize, usize)> {
    token_regex().find_iter(text).map(|m| (m.start(), m.end())).collect()
}

pub fn tokenize(text: &str) -> Vec<&str> {
    token_regex().find_iter(text).map(|m| m.as_str()).collect()
}

/// Indices of every `[MASK]` token.
pub fn mask_positions(tokens: &[&str]) -> Vec<usize> {
    tokens.iter().enumerate().filter(|(_, t)| **t == MASK_TOKEN).map(|(i, _)| i).collect()
}

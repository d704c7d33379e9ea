//! Tokenization shared by the indexer, embedder, classifier and extractor.

/// Lowercased alphanumeric tokens. Everything that is not alphanumeric is a
/// separator; no stemming.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Whitespace-delimited tokens, case preserved. This is the unit chunk
/// windows are measured in.
pub fn whitespace_tokens(text: &str) -> Vec<&str> {
    text.split_whitespace().collect()
}

/// Collapses every whitespace run to a single space and trims the ends.
pub fn collapse_whitespace(text: &str) -> String {
    whitespace_tokens(text).join(" ")
}

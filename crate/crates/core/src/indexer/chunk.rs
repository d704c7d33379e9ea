use serde::{Deserialize, Serialize};

use crate::domain::{Chunk, Document};
use crate::text::whitespace_tokens;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChunkingKind {
    Fixed,
    Sentence,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChunkingPolicy {
    pub kind: ChunkingKind,
    pub target_tokens: usize,
    pub overlap_tokens: usize,
}

impl Default for ChunkingPolicy {
    fn default() -> Self {
        Self {
            kind: ChunkingKind::Fixed,
            target_tokens: 200,
            overlap_tokens: 40,
        }
    }
}

impl ChunkingPolicy {
    pub fn fixed(target_tokens: usize, overlap_tokens: usize) -> Self {
        Self { kind: ChunkingKind::Fixed, target_tokens, overlap_tokens }
    }

    pub fn sentence(target_tokens: usize) -> Self {
        Self { kind: ChunkingKind::Sentence, target_tokens, overlap_tokens: 0 }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.target_tokens == 0 {
            return Err("target_tokens must be positive".into());
        }
        if self.overlap_tokens >= self.target_tokens {
            return Err("overlap_tokens must be smaller than target_tokens".into());
        }
        Ok(())
    }
}

/// Token spans `[start, end)` over the whitespace token stream.
pub fn chunk_spans(n_tokens: usize, sentence_ends: &[usize], policy: &ChunkingPolicy) -> Vec<(usize, usize)> {
    let target = policy.target_tokens.max(1);
    match policy.kind {
        ChunkingKind::Fixed => {
            let step = target.saturating_sub(policy.overlap_tokens).max(1);
            (0..n_tokens)
                .step_by(step)
                .map(|start| (start, (start + target).min(n_tokens)))
                .collect()
        }
        ChunkingKind::Sentence => {
            let mut spans = Vec::new();
            let mut start = 0;
            let mut cursor = 0;
            for &end in sentence_ends.iter().chain(std::iter::once(&n_tokens)) {
                if end <= cursor {
                    continue;
                }
                if end - start > target && cursor > start {
                    spans.push((start, cursor));
                    start = cursor;
                }
                // a single sentence longer than the target is cut into windows
                while end - start > target {
                    spans.push((start, start + target));
                    start += target;
                }
                cursor = end;
            }
            if cursor > start {
                spans.push((start, cursor));
            }
            spans
        }
    }
}

/// Token offsets just past each sentence terminator (". ", "! ", "? ").
fn sentence_ends(tokens: &[&str]) -> Vec<usize> {
    tokens
        .iter()
        .enumerate()
        .filter(|(_, t)| t.ends_with(['.', '!', '?']))
        .map(|(i, _)| i + 1)
        .collect()
}

/// Splits a document into chunks with empty embeddings.
pub fn chunk_document(doc: &Document, policy: &ChunkingPolicy) -> Vec<Chunk> {
    let tokens = whitespace_tokens(&doc.body);
    let ends = sentence_ends(&tokens);
    chunk_spans(tokens.len(), &ends, policy)
        .into_iter()
        .enumerate()
        .map(|(ordinal, (s, e))| Chunk {
            id: format!("{}#{}", doc.id, ordinal),
            doc_id: doc.id.clone(),
            ordinal: ordinal as u32,
            text: tokens[s..e].join(" "),
            embedding: Vec::new(),
        })
        .collect()
}

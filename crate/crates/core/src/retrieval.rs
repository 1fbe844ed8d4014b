//! Documentation retrieval: heading-aware chunking, hashed bag-of-words
//! embeddings and exact cosine top-k search.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::canonical::Fnv64;

pub const EMBEDDING_DIM: usize = 256;
pub const DEFAULT_CHUNK_TOKENS: usize = 512;
pub const DEFAULT_TOP_K: usize = 3;

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error("documentation corpus is empty")]
    EmptyCorpus,
    #[error("k must be at least 1")]
    ZeroK,
    #[error("chunk size must be at least 1")]
    ZeroChunkSize,
    #[error("reading corpus: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocChunk {
    pub id: String,
    pub heading_path: String,
    pub body: String,
    pub token_count: usize,
}

/// The manual shipped with the crate, as (file name, text) pairs.
pub fn builtin_corpus() -> Vec<(String, String)> {
    macro_rules! doc {
        ($name:literal) => {
            ($name.to_string(), include_str!(concat!("../assets/manual/", $name)).to_string())
        };
    }
    vec![
        doc!("editing.txt"),
        doc!("interface.txt"),
        doc!("layers.txt"),
        doc!("openings.txt"),
        doc!("roof.txt"),
        doc!("slabs.txt"),
        doc!("walls.txt"),
        doc!("workflow.txt"),
    ]
}

/// Read every `.txt` file of a directory, sorted by name.
pub fn load_corpus_dir(dir: &Path) -> Result<Vec<(String, String)>, RetrievalError> {
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        if path.extension().is_some_and(|e| e == "txt") {
            let name = path.file_name().unwrap_or_default().to_string_lossy().into_owned();
            files.push((name, std::fs::read_to_string(&path)?));
        }
    }
    files.sort();
    Ok(files)
}

/// Split files at `#` headings, then at `max_tokens` whitespace tokens.
/// Ids are `file:ordinal`, counted per file from 0.
pub fn chunk_docs(files: &[(String, String)], max_tokens: usize) -> Result<Vec<DocChunk>, RetrievalError> {
    if max_tokens == 0 {
        return Err(RetrievalError::ZeroChunkSize);
    }
    let mut chunks = Vec::new();
    for (name, text) in files {
        let mut path: Vec<(usize, String)> = Vec::new();
        let mut sections: Vec<(String, Vec<&str>)> = vec![(String::new(), Vec::new())];
        for line in text.lines() {
            let trimmed = line.trim_start();
            if trimmed.starts_with('#') {
                let level = trimmed.chars().take_while(|c| *c == '#').count();
                let title = trimmed[level..].trim().to_string();
                path.retain(|(l, _)| *l < level);
                path.push((level, title));
                let joined = path.iter().map(|(_, t)| t.as_str()).collect::<Vec<_>>().join(" > ");
                sections.push((joined, Vec::new()));
            } else {
                let cur = sections.last_mut().expect("at least one section");
                cur.1.extend(line.split_whitespace());
            }
        }
        let mut ordinal = 0;
        for (heading_path, tokens) in sections {
            for piece in tokens.chunks(max_tokens) {
                chunks.push(DocChunk {
                    id: format!("{name}:{ordinal}"),
                    heading_path: heading_path.clone(),
                    body: piece.join(" "),
                    token_count: piece.len(),
                });
                ordinal += 1;
            }
        }
    }
    if chunks.is_empty() {
        return Err(RetrievalError::EmptyCorpus);
    }
    Ok(chunks)
}

fn words(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric()).filter(|w| !w.is_empty()).map(str::to_lowercase).collect()
}

/// Feature-hashed unigram and bigram term frequencies, L2-normalized.
/// Empty text maps to the zero vector.
pub fn embed_text(text: &str) -> Vec<f64> {
    let w = words(text);
    let mut v = vec![0.0; EMBEDDING_DIM];
    let bin = |s: &str| (Fnv64::hash_bytes(s.as_bytes()) % EMBEDDING_DIM as u64) as usize;
    for t in &w {
        v[bin(t)] += 1.0;
    }
    for pair in w.windows(2) {
        v[bin(&format!("{} {}", pair[0], pair[1]))] += 1.0;
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    v
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone)]
pub struct DocIndex {
    chunks: Vec<DocChunk>,
    vectors: Vec<Vec<f64>>,
}

impl DocIndex {
    pub fn build(chunks: Vec<DocChunk>) -> Result<Self, RetrievalError> {
        if chunks.is_empty() {
            return Err(RetrievalError::EmptyCorpus);
        }
        let vectors = chunks.iter().map(|c| embed_text(&c.body)).collect();
        Ok(DocIndex { chunks, vectors })
    }

    /// Index over the shipped manual with default chunking.
    pub fn builtin() -> Self {
        let chunks = chunk_docs(&builtin_corpus(), DEFAULT_CHUNK_TOKENS).expect("shipped manual is non-empty");
        DocIndex::build(chunks).expect("shipped manual is non-empty")
    }

    pub fn chunks(&self) -> &[DocChunk] {
        &self.chunks
    }

    /// Top-`k` chunks by cosine score, descending; ties broken by id.
    pub fn retrieve(&self, query: &str, k: usize) -> Result<Vec<(&DocChunk, f64)>, RetrievalError> {
        if k == 0 {
            return Err(RetrievalError::ZeroK);
        }
        let q = embed_text(query);
        let mut scored: Vec<(&DocChunk, f64)> =
            self.chunks.iter().zip(&self.vectors).map(|(c, v)| (c, cosine(&q, v).clamp(0.0, 1.0))).collect();
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.id.cmp(&b.0.id)));
        scored.truncate(k);
        Ok(scored)
    }
}

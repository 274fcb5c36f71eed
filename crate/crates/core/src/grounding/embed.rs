use std::collections::BTreeMap;
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::GroundingError;
use crate::llm::{EmbeddingClient, LlmError};

/// A text embedding in the shared language-feature space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    pub vector: Vec<f64>,
    pub label: String,
}

impl Embedding {
    pub fn new(label: impl Into<String>, vector: Vec<f64>) -> Result<Self, GroundingError> {
        let label = label.into();
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(GroundingError::NonFinite(label));
        }
        Ok(Self { vector, label })
    }

    pub fn dim(&self) -> usize {
        self.vector.len()
    }

    pub fn dot(&self, other: &[f64]) -> f64 {
        self.vector.iter().zip(other).map(|(a, b)| a * b).sum()
    }
}

pub trait TextEmbedder {
    fn embed_text(&self, text: &str) -> Result<Embedding, GroundingError>;
    fn dim(&self) -> usize;
}

fn normalize_text(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

fn unit(mut v: Vec<f64>, label: &str) -> Result<Vec<f64>, GroundingError> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(n > 0.0 && n.is_finite()) {
        return Err(GroundingError::NonFinite(label.to_string()));
    }
    v.iter_mut().for_each(|x| *x /= n);
    Ok(v)
}

/// Fixed word-to-vector table. Vectors are normalised to unit length on
/// load; phrases missing from the table embed as the normalised mean of
/// their words.
#[derive(Debug, Clone, PartialEq)]
pub struct LexiconEmbedder {
    entries: BTreeMap<String, Vec<f64>>,
    dim: usize,
}

impl LexiconEmbedder {
    pub fn new(entries: BTreeMap<String, Vec<f64>>) -> Result<Self, GroundingError> {
        let dim = entries.values().next().map(Vec::len).ok_or(GroundingError::EmptyLexicon)?;
        if dim < 2 {
            return Err(GroundingError::DimensionMismatch { expected: 2, found: dim });
        }
        let mut normalized = BTreeMap::new();
        for (word, v) in entries {
            if v.len() != dim {
                return Err(GroundingError::DimensionMismatch { expected: dim, found: v.len() });
            }
            let key = normalize_text(&word);
            normalized.insert(key.clone(), unit(v, &key)?);
        }
        Ok(Self { entries: normalized, dim })
    }

    pub fn from_json(text: &str) -> Result<Self, GroundingError> {
        let entries: BTreeMap<String, Vec<f64>> =
            serde_json::from_str(text).map_err(|e| GroundingError::Lexicon(e.to_string()))?;
        Self::new(entries)
    }

    pub fn load(path: &Path) -> Result<Self, GroundingError> {
        let text = std::fs::read_to_string(path).map_err(|e| GroundingError::Lexicon(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// The lexicon shipped with the crate.
    pub fn bundled() -> Self {
        Self::from_json(include_str!("../../data/lexicon.json")).expect("bundled lexicon is valid")
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }
}

impl TextEmbedder for LexiconEmbedder {
    fn embed_text(&self, text: &str) -> Result<Embedding, GroundingError> {
        let key = normalize_text(text);
        if key.is_empty() {
            return Err(GroundingError::EmptyText);
        }
        if let Some(v) = self.entries.get(&key) {
            return Embedding::new(key, v.clone());
        }
        let mut sum = vec![0.0; self.dim];
        for word in key.split(' ') {
            let v = self.entries.get(word).ok_or_else(|| GroundingError::UnknownToken(word.to_string()))?;
            sum.iter_mut().zip(v).for_each(|(s, x)| *s += x);
        }
        let v = unit(sum, &key)?;
        Embedding::new(key, v)
    }

    fn dim(&self) -> usize {
        self.dim
    }
}

/// Embedder backed by a remote JSON endpoint.
#[derive(Debug, Clone)]
pub struct RemoteEmbedder {
    client: EmbeddingClient,
    dim: usize,
}

impl RemoteEmbedder {
    pub fn new(url: impl Into<String>, dim: usize, timeout: Duration) -> Self {
        Self { client: EmbeddingClient::new(url, timeout), dim }
    }
}

impl TextEmbedder for RemoteEmbedder {
    fn embed_text(&self, text: &str) -> Result<Embedding, GroundingError> {
        let key = normalize_text(text);
        if key.is_empty() {
            return Err(GroundingError::EmptyText);
        }
        let mut out = self.client.embed(&[key.as_str()]).map_err(|e| match e {
            LlmError::BadResponse(m) => GroundingError::BadResponse(m),
            other => GroundingError::BackendUnavailable(other.to_string()),
        })?;
        let v = out.pop().expect("length checked by the client");
        if v.len() != self.dim {
            return Err(GroundingError::DimensionMismatch { expected: self.dim, found: v.len() });
        }
        Embedding::new(key, v)
    }

    fn dim(&self) -> usize {
        self.dim
    }
}

//! Dense vectors, cosine similarity and a self-contained TF-IDF vectorizer.
//!
//! TF-IDF weighting is raw term count times smoothed inverse document
//! frequency, `ln((1 + N) / (1 + df)) + 1`, followed by L2 normalization.
//! Tokens are lowercased runs of alphanumeric characters.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TextVecError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("cannot fit TF-IDF: every document is empty after tokenization")]
    EmptyCorpus,
    #[error("invalid TF-IDF model: {0}")]
    InvalidModel(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}

/// A 64-bit float vector with its Euclidean norm cached at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Vector {
    components: Vec<f64>,
    norm: f64,
}

impl Vector {
    pub fn new(components: Vec<f64>) -> Self {
        let norm = l2_norm(&components);
        Self { components, norm }
    }

    pub fn from_f32(components: &[f32]) -> Self {
        Self::new(components.iter().map(|&x| f64::from(x)).collect())
    }

    pub fn zeros(dim: usize) -> Self {
        Self { components: vec![0.0; dim], norm: 0.0 }
    }

    pub fn components(&self) -> &[f64] {
        &self.components
    }

    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    /// Unit-length copy; the zero vector stays zero.
    pub fn normalized(&self) -> Vector {
        if self.norm == 0.0 {
            return self.clone();
        }
        let components: Vec<f64> = self.components.iter().map(|x| x / self.norm).collect();
        Vector::new(components)
    }

    pub fn into_components(self) -> Vec<f64> {
        self.components
    }
}

impl From<Vec<f64>> for Vector {
    fn from(v: Vec<f64>) -> Self {
        Vector::new(v)
    }
}

pub(crate) fn l2_norm(xs: &[f64]) -> f64 {
    xs.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Cosine similarity. Zero vectors have similarity 0 with everything.
pub fn cosine(a: &Vector, b: &Vector) -> Result<f64, TextVecError> {
    if a.dim() != b.dim() {
        return Err(TextVecError::DimensionMismatch { left: a.dim(), right: b.dim() });
    }
    if a.norm == 0.0 || b.norm == 0.0 {
        return Ok(0.0);
    }
    let c = dot(&a.components, &b.components) / (a.norm * b.norm);
    Ok(c.clamp(-1.0, 1.0))
}

/// Lowercase, split on anything that is not alphanumeric, drop empties.
pub fn tokenize(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()).map(str::to_lowercase)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfidfModel {
    vocabulary: BTreeMap<String, usize>,
    document_frequency: BTreeMap<String, usize>,
    corpus_size: usize,
}

impl TfidfModel {
    pub fn fit<S: AsRef<str>>(documents: &[S]) -> Result<Self, TextVecError> {
        let mut document_frequency: BTreeMap<String, usize> = BTreeMap::new();
        for doc in documents {
            let mut seen: Vec<String> = tokenize(doc.as_ref()).collect();
            seen.sort_unstable();
            seen.dedup();
            for token in seen {
                *document_frequency.entry(token).or_insert(0) += 1;
            }
        }
        if document_frequency.is_empty() {
            return Err(TextVecError::EmptyCorpus);
        }
        let vocabulary = document_frequency.keys().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Ok(Self { vocabulary, document_frequency, corpus_size: documents.len() })
    }

    pub fn vocabulary(&self) -> &BTreeMap<String, usize> {
        &self.vocabulary
    }

    pub fn document_frequency(&self) -> &BTreeMap<String, usize> {
        &self.document_frequency
    }

    pub fn corpus_size(&self) -> usize {
        self.corpus_size
    }

    pub fn dim(&self) -> usize {
        self.vocabulary.len()
    }

    pub fn idf(&self, token: &str) -> Option<f64> {
        let df = *self.document_frequency.get(token)? as f64;
        let n = self.corpus_size as f64;
        Some(((1.0 + n) / (1.0 + df)).ln() + 1.0)
    }

    /// L2-normalized TF-IDF vector; out-of-vocabulary tokens are ignored.
    pub fn transform(&self, document: &str) -> Vector {
        let mut weights = vec![0.0; self.dim()];
        for token in tokenize(document) {
            if let Some(&i) = self.vocabulary.get(&token) {
                weights[i] += 1.0;
            }
        }
        for (token, &i) in &self.vocabulary {
            if weights[i] != 0.0 {
                weights[i] *= self.idf(token).expect("vocabulary and df share keys");
            }
        }
        Vector::new(weights).normalized()
    }

    fn check(&self) -> Result<(), TextVecError> {
        let n = self.corpus_size;
        if self.vocabulary.len() != self.document_frequency.len() {
            return Err(TextVecError::InvalidModel("vocabulary and document_frequency differ".into()));
        }
        let mut indices: Vec<usize> = self.vocabulary.values().copied().collect();
        indices.sort_unstable();
        if indices.iter().enumerate().any(|(i, &j)| i != j) {
            return Err(TextVecError::InvalidModel("vocabulary indices are not 0..len".into()));
        }
        for (token, &df) in &self.document_frequency {
            if !self.vocabulary.contains_key(token) {
                return Err(TextVecError::InvalidModel(format!("token {token:?} missing from vocabulary")));
            }
            if df == 0 || df > n {
                return Err(TextVecError::InvalidModel(format!(
                    "document frequency of {token:?} is {df}, outside [1, {n}]"
                )));
            }
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<(), TextVecError> {
        let text = serde_json::to_string(self)
            .map_err(|source| TextVecError::Json { path: path.display().to_string(), source })?;
        fs::write(path, text + "\n").map_err(|source| TextVecError::Io { path: path.display().to_string(), source })
    }

    pub fn load(path: &Path) -> Result<Self, TextVecError> {
        let text =
            fs::read_to_string(path).map_err(|source| TextVecError::Io { path: path.display().to_string(), source })?;
        let model: TfidfModel = serde_json::from_str(&text)
            .map_err(|source| TextVecError::Json { path: path.display().to_string(), source })?;
        model.check()?;
        Ok(model)
    }
}

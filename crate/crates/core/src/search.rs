//! Catalog search: a pluggable relevance scorer over piece name and
//! description.

use std::collections::HashMap;
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{search_document, Catalog};

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("search query is empty")]
    EmptyQuery,
    #[error("result count must be at least 1")]
    ZeroLimit,
    #[error("embedding service failed: {0}")]
    Provider(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchHit {
    pub spec_id: String,
    /// Relevance in [0, 1].
    pub score: f64,
    /// 1-based position in the result list.
    pub rank: usize,
}

/// Scores how well each document matches a query.
pub trait RelevanceScorer: Send + Sync {
    fn scores(&self, query: &str, documents: &[String]) -> Result<Vec<f64>, SearchError>;
}

pub fn search(catalog: &Catalog, query: &str, k: usize) -> Result<Vec<SearchHit>, SearchError> {
    let query = query.trim();
    if query.is_empty() {
        return Err(SearchError::EmptyQuery);
    }
    if k == 0 {
        return Err(SearchError::ZeroLimit);
    }
    let documents: Vec<String> = catalog.specs().iter().map(search_document).collect();
    let scores = catalog.scorer().scores(query, &documents)?;
    let mut ranked: Vec<(usize, f64)> = scores
        .into_iter()
        .map(|s| if s.is_nan() { 0.0 } else { s.clamp(0.0, 1.0) })
        .enumerate()
        .collect();
    // Stable sort keeps catalog order among equal scores.
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1));
    Ok(ranked
        .into_iter()
        .take(k)
        .enumerate()
        .map(|(pos, (i, score))| SearchHit {
            spec_id: catalog.specs()[i].spec_id.clone(),
            score,
            rank: pos + 1,
        })
        .collect())
}

const STOPWORDS: &[&str] = &[
    "a", "an", "the", "of", "to", "in", "on", "and", "or", "for", "with", "from", "into", "by",
    "as", "is", "it", "its", "this", "that", "at", "be", "are",
];

/// Lowercased alphanumeric tokens with common English stopwords removed.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_ascii_alphanumeric())
        .filter(|t| !t.is_empty() && !STOPWORDS.contains(t))
        .map(str::to_string)
        .collect()
}

/// Bag-of-words cosine similarity with `1 + ln(tf)` term weights. Needs no
/// network or model weights.
#[derive(Debug, Clone, Copy, Default)]
pub struct LexicalScorer;

impl LexicalScorer {
    fn weights(text: &str) -> HashMap<String, f64> {
        let mut counts: HashMap<String, u32> = HashMap::new();
        for token in tokenize(text) {
            *counts.entry(token).or_default() += 1;
        }
        counts
            .into_iter()
            .map(|(t, c)| (t, 1.0 + f64::from(c).ln()))
            .collect()
    }

    pub fn similarity(query: &str, document: &str) -> f64 {
        let q = Self::weights(query);
        let d = Self::weights(document);
        // Sum in a fixed order so repeated calls are bit-identical.
        let mut shared: Vec<(&String, &f64)> = q.iter().collect();
        shared.sort_by(|a, b| a.0.cmp(b.0));
        let dot: f64 = shared.iter().map(|(t, w)| *w * d.get(*t).copied().unwrap_or(0.0)).sum();
        let norm = |m: &HashMap<String, f64>| {
            let mut v: Vec<(&String, &f64)> = m.iter().collect();
            v.sort_by(|a, b| a.0.cmp(b.0));
            v.iter().map(|(_, w)| *w * *w).sum::<f64>().sqrt()
        };
        let (nq, nd) = (norm(&q), norm(&d));
        if nq == 0.0 || nd == 0.0 {
            0.0
        } else {
            dot / (nq * nd)
        }
    }
}

impl RelevanceScorer for LexicalScorer {
    fn scores(&self, query: &str, documents: &[String]) -> Result<Vec<f64>, SearchError> {
        Ok(documents.iter().map(|d| Self::similarity(query, d)).collect())
    }
}

/// Client for an OpenAI-style `/embeddings` endpoint. Document embeddings are
/// cached for the life of the scorer.
pub struct RemoteEmbeddingScorer {
    endpoint: String,
    api_key: Option<String>,
    model: String,
    http: reqwest::blocking::Client,
    cache: Mutex<HashMap<String, Vec<f64>>>,
}

#[derive(Serialize)]
struct EmbeddingRequest<'a> {
    model: &'a str,
    input: &'a [String],
}

#[derive(Deserialize)]
struct EmbeddingResponse {
    data: Vec<EmbeddingDatum>,
}

#[derive(Deserialize)]
struct EmbeddingDatum {
    embedding: Vec<f64>,
}

impl RemoteEmbeddingScorer {
    pub fn new(endpoint: impl Into<String>, api_key: Option<String>, model: impl Into<String>) -> Self {
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(30))
            .build()
            .expect("http client");
        RemoteEmbeddingScorer {
            endpoint: endpoint.into(),
            api_key,
            model: model.into(),
            http,
            cache: Mutex::new(HashMap::new()),
        }
    }

    /// Reads `MOSAIC_EMBEDDING_ENDPOINT`, `MOSAIC_EMBEDDING_API_KEY` and
    /// `MOSAIC_EMBEDDING_MODEL`; `None` when no endpoint is configured.
    pub fn from_env() -> Option<Self> {
        let endpoint = std::env::var("MOSAIC_EMBEDDING_ENDPOINT").ok()?;
        let key = std::env::var("MOSAIC_EMBEDDING_API_KEY").ok();
        let model = std::env::var("MOSAIC_EMBEDDING_MODEL")
            .unwrap_or_else(|_| "text-embedding-3-small".to_string());
        Some(Self::new(endpoint, key, model))
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, SearchError> {
        let mut request = self.http.post(&self.endpoint).json(&EmbeddingRequest {
            model: &self.model,
            input: texts,
        });
        if let Some(key) = &self.api_key {
            request = request.bearer_auth(key);
        }
        let response = request
            .send()
            .and_then(|r| r.error_for_status())
            .map_err(|e| SearchError::Provider(e.to_string()))?;
        let body: EmbeddingResponse =
            response.json().map_err(|e| SearchError::Provider(e.to_string()))?;
        if body.data.len() != texts.len() {
            return Err(SearchError::Provider(format!(
                "expected {} embeddings, got {}",
                texts.len(),
                body.data.len()
            )));
        }
        Ok(body.data.into_iter().map(|d| d.embedding).collect())
    }
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

impl RelevanceScorer for RemoteEmbeddingScorer {
    fn scores(&self, query: &str, documents: &[String]) -> Result<Vec<f64>, SearchError> {
        let missing: Vec<String> = {
            let cache = self.cache.lock().expect("embedding cache poisoned");
            documents.iter().filter(|d| !cache.contains_key(*d)).cloned().collect()
        };
        if !missing.is_empty() {
            let vectors = self.embed(&missing)?;
            let mut cache = self.cache.lock().expect("embedding cache poisoned");
            cache.extend(missing.into_iter().zip(vectors));
        }
        let query_vec = self.embed(&[query.to_string()])?.remove(0);
        let cache = self.cache.lock().expect("embedding cache poisoned");
        Ok(documents.iter().map(|d| cosine(&query_vec, &cache[d]).max(0.0)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenize_drops_stopwords() {
        assert_eq!(tokenize("Identify the objects inside the image"), vec!["identify", "objects", "inside", "image"]);
        assert_eq!(tokenize("Grayscale → Color"), vec!["grayscale", "color"]);
    }

    #[test]
    fn empty_query_rejected() {
        let c = Catalog::load_builtin();
        assert!(matches!(c.search("   ", 3), Err(SearchError::EmptyQuery)));
        assert!(matches!(c.search("music", 0), Err(SearchError::ZeroLimit)));
    }

    #[test]
    fn ranks_are_consecutive_and_sorted() {
        let c = Catalog::load_builtin();
        let hits = c.search("generate an image", 10).unwrap();
        assert_eq!(hits.len(), 10);
        for (i, h) in hits.iter().enumerate() {
            assert_eq!(h.rank, i + 1);
            assert!((0.0..=1.0).contains(&h.score));
        }
        assert!(hits.windows(2).all(|w| w[0].score >= w[1].score));
    }

    #[test]
    fn k_larger_than_catalog() {
        let c = Catalog::load_builtin();
        assert_eq!(c.search("image", 1000).unwrap().len(), c.specs().len());
    }

    #[test]
    fn no_overlap_scores_zero() {
        assert_eq!(LexicalScorer::similarity("zebra", "generate music"), 0.0);
        assert_eq!(LexicalScorer::similarity("the", "generate music"), 0.0);
    }
}

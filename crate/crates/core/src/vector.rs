//! Embeddings, the item embedding store, and similarity ranking of
//! candidates against the graph-enriched query.

use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::Exec;
use crate::model::{ItemId, KnowledgeBase};
use crate::text::tokenize;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VectorError {
    #[error("EmptyText")]
    EmptyText,
    #[error("DimensionMismatch({0} vs {1})")]
    DimensionMismatch(usize, usize),
    #[error("ServiceUnavailable({0})")]
    ServiceUnavailable(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
}

/// Fixed-length vector with its cached L2 norm.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    values: Vec<f64>,
    norm: f64,
}

impl Embedding {
    pub fn new(values: Vec<f64>) -> Result<Self, VectorError> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(VectorError::InvalidConfig("non-finite embedding component".into()));
        }
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        Ok(Embedding { values, norm })
    }

    /// Scale to unit length; a zero vector is returned unchanged.
    pub fn normalized(self) -> Self {
        if self.norm == 0.0 {
            return self;
        }
        let values: Vec<f64> = self.values.iter().map(|v| v / self.norm).collect();
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        Embedding { values, norm }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn dimension(&self) -> usize {
        self.values.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbedderKind {
    #[default]
    DeterministicHash,
    ExternalService,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EmbedderSpec {
    pub kind: EmbedderKind,
    pub dimension: usize,
    pub endpoint: Option<String>,
    /// Fall back to hashing when the external service fails.
    pub fallback_to_hash: bool,
}

impl Default for EmbedderSpec {
    fn default() -> Self {
        EmbedderSpec { kind: EmbedderKind::DeterministicHash, dimension: 256, endpoint: None, fallback_to_hash: true }
    }
}

impl EmbedderSpec {
    pub fn validate(&self) -> Result<(), VectorError> {
        if self.dimension < 8 {
            return Err(VectorError::InvalidConfig(format!("dimension must be >= 8, got {}", self.dimension)));
        }
        if self.kind == EmbedderKind::ExternalService && self.endpoint.is_none() {
            return Err(VectorError::InvalidConfig("external embedder needs an endpoint".into()));
        }
        Ok(())
    }
}

/// Remote embedding backend. `{"texts": [..]}` in, `{"vectors": [[..]]}` out.
pub trait EmbeddingService: Send + Sync {
    fn embed_batch(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, VectorError>;
}

const BUCKET_SEED: u64 = 0xcbf2_9ce4_8422_2325;
const SIGN_SEED: u64 = 0x84_2223_25cb_f29c;

fn fnv1a(seed: u64, bytes: &[u8]) -> u64 {
    let mut h = seed;
    for b in bytes {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Signed feature hashing of tokens into `dimension` buckets, L2-normalized.
pub fn hash_embed(tokens: &[String], dimension: usize) -> Result<Embedding, VectorError> {
    if tokens.is_empty() {
        return Err(VectorError::EmptyText);
    }
    let mut values = vec![0.0; dimension];
    for t in tokens {
        let bucket = (fnv1a(BUCKET_SEED, t.as_bytes()) % dimension as u64) as usize;
        let sign = if fnv1a(SIGN_SEED, t.as_bytes()) & 1 == 0 { 1.0 } else { -1.0 };
        values[bucket] += sign;
    }
    let e = Embedding::new(values)?;
    if e.norm() == 0.0 {
        // Every contribution cancelled; fall back to the first token alone.
        return hash_embed(&tokens[..1], dimension);
    }
    Ok(e.normalized())
}

pub struct Embedder {
    spec: EmbedderSpec,
    service: Option<Arc<dyn EmbeddingService>>,
}

impl std::fmt::Debug for Embedder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Embedder").field("spec", &self.spec).field("service", &self.service.is_some()).finish()
    }
}

impl Embedder {
    pub fn deterministic(dimension: usize) -> Result<Self, VectorError> {
        Self::new(EmbedderSpec { dimension, ..Default::default() }, None)
    }

    pub fn new(spec: EmbedderSpec, service: Option<Arc<dyn EmbeddingService>>) -> Result<Self, VectorError> {
        spec.validate()?;
        if spec.kind == EmbedderKind::ExternalService && service.is_none() {
            return Err(VectorError::InvalidConfig("external embedder configured without a client".into()));
        }
        Ok(Embedder { spec, service })
    }

    pub fn spec(&self) -> &EmbedderSpec {
        &self.spec
    }

    pub fn embed(&self, text: &str) -> Result<Embedding, VectorError> {
        Ok(self.embed_batch(&[text.to_string()])?.remove(0))
    }

    pub fn embed_batch(&self, texts: &[String]) -> Result<Vec<Embedding>, VectorError> {
        let token_lists: Vec<Vec<String>> = texts.iter().map(|t| tokenize(t)).collect();
        if token_lists.iter().any(Vec::is_empty) {
            return Err(VectorError::EmptyText);
        }
        if let (EmbedderKind::ExternalService, Some(service)) = (self.spec.kind, &self.service) {
            match self.embed_remote(service.as_ref(), texts) {
                Ok(v) => return Ok(v),
                Err(e) if self.spec.fallback_to_hash => {
                    tracing::warn!(error = %e, "embedding service failed; using hash embedder");
                }
                Err(e) => return Err(e),
            }
        }
        token_lists.iter().map(|t| hash_embed(t, self.spec.dimension)).collect()
    }

    fn embed_remote(&self, service: &dyn EmbeddingService, texts: &[String]) -> Result<Vec<Embedding>, VectorError> {
        let vectors = service.embed_batch(texts)?;
        if vectors.len() != texts.len() {
            return Err(VectorError::ServiceUnavailable(format!("expected {} vectors, got {}", texts.len(), vectors.len())));
        }
        vectors
            .into_iter()
            .map(|v| {
                if v.len() != self.spec.dimension {
                    return Err(VectorError::DimensionMismatch(v.len(), self.spec.dimension));
                }
                let e = Embedding::new(v)?;
                if e.norm() == 0.0 {
                    return Err(VectorError::ServiceUnavailable("service returned a zero vector".into()));
                }
                Ok(e.normalized())
            })
            .collect()
    }
}

/// `1 / (1 + ||a - b||)`.
pub fn similarity(a: &Embedding, b: &Embedding) -> Result<f64, VectorError> {
    if a.dimension() != b.dimension() {
        return Err(VectorError::DimensionMismatch(a.dimension(), b.dimension()));
    }
    let d2: f64 = a.values.iter().zip(&b.values).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok(1.0 / (1.0 + d2.sqrt()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VectorFilterConfig {
    pub delta: f64,
    pub top_k: usize,
}

impl Default for VectorFilterConfig {
    fn default() -> Self {
        VectorFilterConfig { delta: 0.35, top_k: 20 }
    }
}

impl VectorFilterConfig {
    pub fn validate(&self) -> Result<(), VectorError> {
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return Err(VectorError::InvalidConfig(format!("delta must be in (0, 1], got {}", self.delta)));
        }
        if self.top_k < 1 {
            return Err(VectorError::InvalidConfig("top_k must be >= 1".into()));
        }
        Ok(())
    }
}

/// Per-version embeddings of every item's title and content.
#[derive(Debug, Clone, Default)]
pub struct VectorStore {
    embeddings: HashMap<ItemId, Embedding>,
}

impl VectorStore {
    pub fn build(kb: &KnowledgeBase, embedder: &Embedder, exec: Exec) -> Result<Self, VectorError> {
        let items: Vec<_> = kb.items().collect();
        let texts: Vec<String> = items.iter().map(|i| i.searchable_text()).collect();
        let embeddings = match embedder.spec().kind {
            EmbedderKind::DeterministicHash => {
                let dim = embedder.spec().dimension;
                exec.map(&texts, |t| {
                    let tokens = tokenize(t);
                    // Items with no usable text embed as a single placeholder token.
                    if tokens.is_empty() {
                        hash_embed(&["\u{2205}".to_string()], dim)
                    } else {
                        hash_embed(&tokens, dim)
                    }
                })
                .into_iter()
                .collect::<Result<Vec<_>, _>>()?
            }
            EmbedderKind::ExternalService => embedder.embed_batch(&texts)?,
        };
        Ok(VectorStore { embeddings: items.iter().map(|i| i.id.clone()).zip(embeddings).collect() })
    }

    pub fn get(&self, id: &ItemId) -> Option<&Embedding> {
        self.embeddings.get(id)
    }

    pub fn len(&self) -> usize {
        self.embeddings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.embeddings.is_empty()
    }
}

/// `Q ⊕ Sem_G`: the query, one separator, then graph tags in sorted order.
pub fn enriched_query(q: &str, sem_g: &BTreeSet<String>) -> String {
    if sem_g.is_empty() {
        return q.to_string();
    }
    let tags: Vec<&str> = sem_g.iter().map(String::as_str).collect();
    format!("{q} | {}", tags.join(" "))
}

/// Descending by score, then ascending by id.
pub fn rank_order(a: &(ItemId, f64), b: &(ItemId, f64)) -> std::cmp::Ordering {
    b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0))
}

/// Score candidates against the enriched query, keep `score > delta`, and
/// return the best `top_k` in rank order.
pub fn vector_filter(
    q: &str,
    sem_g: &BTreeSet<String>,
    v_prime: &BTreeSet<ItemId>,
    cfg: &VectorFilterConfig,
    store: &VectorStore,
    embedder: &Embedder,
    exec: Exec,
) -> Result<Vec<(ItemId, f64)>, VectorError> {
    cfg.validate()?;
    if v_prime.is_empty() {
        return Ok(Vec::new());
    }
    let query = embedder.embed(&enriched_query(q, sem_g))?;
    let pool: Vec<&ItemId> = v_prime.iter().collect();
    let scored = exec.filter_map(&pool, |id| {
        let e = store.get(id)?;
        let s = similarity(&query, e).ok()?;
        (s > cfg.delta).then(|| ((*id).clone(), s))
    });
    let mut scored = scored;
    exec.sort_by(&mut scored, rank_order);
    scored.truncate(cfg.top_k);
    Ok(scored)
}

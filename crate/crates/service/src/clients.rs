//! Blocking HTTP clients for the optional remote backends.
//!
//! Wire formats, all `POST` with JSON bodies:
//! - embedding: `{"texts": [...]}` -> `{"vectors": [[...], ...]}`
//! - geocoder: `{"name": ...}` -> gazetteer record, 404 when unknown
//! - llm: `{"prompt": ...}` -> `{"text": ...}`

use std::sync::Arc;
use std::time::Duration;

use asknearby_core::pipeline::{ClientError, GazetteerRecord, GeocodeError, Geocoder, LlmClient};
use asknearby_core::vector::{EmbedderKind, EmbeddingService, VectorError};
use asknearby_core::{Clients, GeoEntity};
use serde::{Deserialize, Serialize};
use ureq::Agent;

use crate::config::AppConfig;

fn agent(timeout: Duration) -> Agent {
    Agent::config_builder().timeout_global(Some(timeout)).build().into()
}

fn post<B: Serialize, R: for<'de> Deserialize<'de>>(agent: &Agent, url: &str, body: &B) -> Result<R, ureq::Error> {
    agent.post(url).send_json(body)?.body_mut().read_json()
}

pub struct HttpEmbedding {
    agent: Agent,
    url: String,
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    texts: &'a [String],
}

#[derive(Deserialize)]
struct EmbedResponse {
    vectors: Vec<Vec<f64>>,
}

impl HttpEmbedding {
    pub fn new(url: impl Into<String>, timeout: Duration) -> Self {
        HttpEmbedding { agent: agent(timeout), url: url.into() }
    }
}

impl EmbeddingService for HttpEmbedding {
    fn embed_batch(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, VectorError> {
        let resp: EmbedResponse =
            post(&self.agent, &self.url, &EmbedRequest { texts }).map_err(|e| VectorError::ServiceUnavailable(e.to_string()))?;
        if resp.vectors.len() != texts.len() {
            return Err(VectorError::ServiceUnavailable(format!("{} vectors for {} texts", resp.vectors.len(), texts.len())));
        }
        Ok(resp.vectors)
    }
}

pub struct HttpGeocoder {
    agent: Agent,
    url: String,
}

#[derive(Serialize)]
struct GeocodeRequest<'a> {
    name: &'a str,
}

impl HttpGeocoder {
    pub fn new(url: impl Into<String>, timeout: Duration) -> Self {
        HttpGeocoder { agent: agent(timeout), url: url.into() }
    }
}

impl Geocoder for HttpGeocoder {
    fn geocode(&self, name: &str) -> Result<GeoEntity, GeocodeError> {
        let record: GazetteerRecord = match post(&self.agent, &self.url, &GeocodeRequest { name }) {
            Ok(r) => r,
            Err(ureq::Error::StatusCode(404)) => return Err(GeocodeError::NotFound(name.to_string())),
            Err(e) => return Err(GeocodeError::ClientUnavailable(e.to_string())),
        };
        record.to_entity().map_err(|e| GeocodeError::ClientUnavailable(e.to_string()))
    }
}

pub struct HttpLlm {
    agent: Agent,
    url: String,
}

#[derive(Serialize)]
struct CompleteRequest<'a> {
    prompt: &'a str,
}

#[derive(Deserialize)]
struct CompleteResponse {
    text: String,
}

impl HttpLlm {
    pub fn new(url: impl Into<String>, timeout: Duration) -> Self {
        HttpLlm { agent: agent(timeout), url: url.into() }
    }
}

impl LlmClient for HttpLlm {
    fn complete(&self, prompt: &str) -> Result<String, ClientError> {
        post::<_, CompleteResponse>(&self.agent, &self.url, &CompleteRequest { prompt })
            .map(|r| r.text)
            .map_err(|e| ClientError(e.to_string()))
    }
}

/// Clients for every configured endpoint. The embedding service is used only
/// when the engine's embedder is `external_service`.
pub fn from_config(app: &AppConfig) -> Clients {
    let cfg = &app.clients;
    let t = cfg.timeout();
    let embed_url = match app.engine.embedder.kind {
        EmbedderKind::ExternalService => app.engine.embedder.endpoint.as_ref(),
        EmbedderKind::DeterministicHash => None,
    };
    Clients {
        embedding: embed_url.map(|u| Arc::new(HttpEmbedding::new(u, t)) as Arc<dyn EmbeddingService>),
        geocoder: cfg.geocoder_endpoint.as_ref().map(|u| Arc::new(HttpGeocoder::new(u, t)) as Arc<dyn Geocoder>),
        llm: cfg.llm_endpoint.as_ref().map(|u| Arc::new(HttpLlm::new(u, t)) as Arc<dyn LlmClient>),
    }
}

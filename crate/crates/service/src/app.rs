//! Loaded service state and the operations behind both the CLI and HTTP.
//!
//! The current engine sits behind an `RwLock<Option<Arc<_>>>`. Requests clone
//! the `Arc` once and work against that version to the end; ingest builds the
//! next engine off to the side and swaps the pointer.

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use asknearby_core::model::{AttributeLexicon, Visit};
use asknearby_core::pipeline::{GazetteerRecord, RetrievedItem};
use asknearby_core::{Clients, Engine, EngineError, GeoPoint, KnowledgeBase, Resources, RetrievalRequest, TimePoint, UserContext};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clients;
use crate::config::AppConfig;
use crate::ingest::{self, IngestError, IngestReport};
use crate::store::{self, StoreError};

#[derive(Debug, Error)]
pub enum AppError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("no knowledge base loaded")]
    NotLoaded,
    #[error("{0}")]
    BadInput(String),
}

pub struct App {
    config: AppConfig,
    resources: Resources,
    users: BTreeMap<String, Vec<Visit>>,
    clients: Clients,
    current: RwLock<Option<Arc<Engine>>>,
    writer: Mutex<()>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueryInput {
    pub q: String,
    pub lat: Option<f64>,
    pub lon: Option<f64>,
    /// Local time, `YYYY-MM-DD HH:MM:SS`.
    pub time: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecommendInput {
    pub lat: f64,
    pub lon: f64,
    pub time: Option<String>,
    pub user_id: Option<String>,
    pub k: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlanView {
    pub location_names: Vec<String>,
    pub intents: Vec<String>,
    pub temporal: Option<String>,
    pub resolved: Option<GazetteerRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QueryResponse {
    pub version: u64,
    pub query: String,
    pub plan: PlanView,
    pub items: Vec<RetrievedItem>,
    pub answer: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecommendedItem {
    pub id: String,
    pub title: String,
    pub psi: f64,
    pub f_sem: f64,
    pub f_dist: f64,
    pub f_pop: f64,
    pub distance_km: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecommendResponse {
    pub version: u64,
    pub user_id: Option<String>,
    pub items: Vec<RecommendedItem>,
}

pub const DEFAULT_K: usize = 10;
const MAX_K: usize = 1000;

fn now() -> TimePoint {
    let secs = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs() as i64).unwrap_or(0);
    TimePoint::new(secs).expect("clock after epoch")
}

impl App {
    /// Load resources, users and the latest snapshot from the data directory.
    pub fn open(config: AppConfig) -> Result<Self, AppError> {
        let clients = clients::from_config(&config);
        Self::open_with(config, clients)
    }

    pub fn open_with(config: AppConfig, clients: Clients) -> Result<Self, AppError> {
        let dir = config.data_dir.clone();
        let resources = store::load_resources(&dir, AttributeLexicon::default())?;
        let users = store::load_users(&dir, &config.engine.schedule)?;
        let app = App { config, resources, users, clients, current: RwLock::new(None), writer: Mutex::new(()) };
        if let Some(kb) = store::load_snapshot(&dir, &app.config.engine.schedule, &app.resources.attributes, &app.config.engine_hash())? {
            let engine = app.build(kb)?;
            tracing::info!(version = engine.version(), items = engine.kb().len(), "loaded snapshot");
            *app.current.write().expect("engine lock") = Some(Arc::new(engine));
        }
        Ok(app)
    }

    pub fn config(&self) -> &AppConfig {
        &self.config
    }

    fn build(&self, kb: KnowledgeBase) -> Result<Engine, AppError> {
        Ok(Engine::build(kb, self.config.engine.clone(), self.resources.clone(), self.clients.clone())?)
    }

    pub fn engine(&self) -> Option<Arc<Engine>> {
        self.current.read().expect("engine lock").clone()
    }

    fn loaded(&self) -> Result<Arc<Engine>, AppError> {
        self.engine().ok_or(AppError::NotLoaded)
    }

    /// Validate `text`, persist the next version and swap it in. One writer
    /// at a time; readers keep the previous version until the swap.
    pub fn ingest_text(&self, text: &str) -> Result<IngestReport, AppError> {
        let _guard = self.writer.lock().expect("writer lock");
        let base = self.engine();
        let (kb, report) =
            ingest::ingest_text(text, base.as_ref().map(|e| e.kb()), &self.config.engine.schedule, &self.resources.attributes)?;
        let engine = self.build(kb)?;
        store::save_snapshot(&self.config.data_dir, engine.kb(), &self.config.engine.schedule, &self.config.engine_hash())?;
        *self.current.write().expect("engine lock") = Some(Arc::new(engine));
        tracing::info!(accepted = report.accepted, rejected = report.rejected, version = report.version, "ingested");
        Ok(report)
    }

    pub fn ingest_path(&self, path: &std::path::Path) -> Result<IngestReport, AppError> {
        let text = ingest::read_source(path)?;
        self.ingest_text(&text)
    }

    fn parse_time(&self, time: Option<&str>) -> Result<TimePoint, AppError> {
        match time {
            None => Ok(now()),
            Some(s) => self
                .config
                .engine
                .schedule
                .parse_timestamp(s)
                .ok_or_else(|| AppError::BadInput(format!("time must be YYYY-MM-DD HH:MM:SS, got {s:?}"))),
        }
    }

    fn point(lat: f64, lon: f64) -> Result<GeoPoint, AppError> {
        GeoPoint::new(lat, lon).map_err(|e| AppError::BadInput(e.to_string()))
    }

    pub fn query(&self, input: &QueryInput) -> Result<QueryResponse, AppError> {
        if input.q.trim().is_empty() {
            return Err(AppError::BadInput("q must be non-empty".into()));
        }
        let position = match (input.lat, input.lon) {
            (Some(lat), Some(lon)) => Some(Self::point(lat, lon)?),
            (None, None) => None,
            _ => return Err(AppError::BadInput("lat and lon must be given together".into())),
        };
        let time = Some(self.parse_time(input.time.as_deref())?);
        let engine = self.loaded()?;
        let result = engine.answer(&RetrievalRequest { query: input.q.clone(), position, time })?;
        let plan = &result.plan;
        Ok(QueryResponse {
            version: engine.version(),
            query: input.q.clone(),
            plan: PlanView {
                location_names: plan.location_names.clone(),
                intents: plan.intents.iter().cloned().collect(),
                temporal: plan.temporal.map(String::from),
                resolved: plan.resolved.as_ref().map(GazetteerRecord::from_entity),
            },
            answer: result.answer.clone().unwrap_or_default(),
            items: result.items,
        })
    }

    pub fn recommend(&self, input: &RecommendInput) -> Result<RecommendResponse, AppError> {
        let k = input.k.unwrap_or(DEFAULT_K);
        if k == 0 || k > MAX_K {
            return Err(AppError::BadInput(format!("k must be in 1..={MAX_K}, got {k}")));
        }
        let position = Self::point(input.lat, input.lon)?;
        let time = self.parse_time(input.time.as_deref())?;
        let engine = self.loaded()?;
        let visited = match input.user_id.as_deref() {
            Some(id) => self.users.get(id).cloned().unwrap_or_else(|| {
                tracing::warn!(user_id = id, "unknown user; scoring without history");
                Vec::new()
            }),
            None => Vec::new(),
        };
        let user = UserContext { user_id: input.user_id.clone().unwrap_or_default(), position, time, visited };
        let recs = engine.recommend(&user, k)?;
        let items = recs
            .into_iter()
            .map(|r| RecommendedItem {
                title: engine.kb().get(&r.id).map(|i| i.title.clone()).unwrap_or_default(),
                id: r.id.0,
                psi: r.breakdown.psi,
                f_sem: r.breakdown.f_sem,
                f_dist: r.breakdown.f_dist,
                f_pop: r.breakdown.f_pop,
                distance_km: r.breakdown.distance_km,
            })
            .collect();
        Ok(RecommendResponse { version: engine.version(), user_id: input.user_id.clone(), items })
    }
}

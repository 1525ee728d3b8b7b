//! One immutable knowledge-base version with every derived index, and the
//! retrieval orchestration over it.

use std::collections::BTreeSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::Exec;
use crate::geo::{self, GeoError, GeoFilterConfig, SpatialIndex, DEFAULT_CELL_SIZE_DEG};
use crate::graph::{self, ExpansionConfig, GraphError, Relations, SemanticGraph};
use crate::model::{AttributeLexicon, DaySchedule, GeoEntity, GeoPoint, ItemId, KnowledgeBase, TimePoint, UserContext};
use crate::pipeline::{
    self, ExtractorKind, Extractor, GeneratorKind, GeocodeError, Geocoder, Gazetteer, IntentLexicon, LlmClient, PipelineError,
    Provenance, RetrievalResult, RetrievedItem, RulesExtractor, TemporalCue,
};
use crate::recommend::{self, IwfForm, PlaceCells, RecommendError, Recommendation, RecommenderConfig};
use crate::vector::{self, Embedder, EmbedderSpec, EmbeddingService, VectorError, VectorFilterConfig, VectorStore};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Geo(#[from] GeoError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Vector(#[from] VectorError),
    #[error(transparent)]
    Recommend(#[from] RecommendError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Geocode(#[from] GeocodeError),
}

/// Every numeric knob of the engine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EngineConfig {
    pub cell_size_deg: f64,
    pub schedule: DaySchedule,
    pub geo: GeoFilterConfig,
    pub expansion: ExpansionConfig,
    pub vector: VectorFilterConfig,
    pub embedder: EmbedderSpec,
    pub recommender: RecommenderConfig,
    pub iwf_form: IwfForm,
    pub extractor: ExtractorKind,
    pub extractor_fallback: bool,
    pub generator: GeneratorKind,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            cell_size_deg: DEFAULT_CELL_SIZE_DEG,
            schedule: DaySchedule::default(),
            geo: GeoFilterConfig::default(),
            expansion: ExpansionConfig::default(),
            vector: VectorFilterConfig::default(),
            embedder: EmbedderSpec::default(),
            recommender: RecommenderConfig::default(),
            iwf_form: IwfForm::Inverted,
            extractor: ExtractorKind::Rules,
            extractor_fallback: true,
            generator: GeneratorKind::Template,
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<(), EngineError> {
        if !(self.cell_size_deg.is_finite() && self.cell_size_deg > 0.0) {
            return Err(GeoError::InvalidConfig(format!("cell_size_deg must be > 0, got {}", self.cell_size_deg)).into());
        }
        self.geo.validate()?;
        self.expansion.validate()?;
        self.vector.validate()?;
        self.embedder.validate()?;
        self.recommender.validate()?;
        Ok(())
    }
}

/// Curated side inputs that accompany a knowledge base.
#[derive(Debug, Clone, Default)]
pub struct Resources {
    pub gazetteer: Gazetteer,
    pub lexicon: IntentLexicon,
    pub relations: Relations,
    pub attributes: AttributeLexicon,
    /// Logged public visits added to the place-cell totals.
    pub public_visits: Vec<(GeoPoint, u64)>,
}

/// Optional remote backends. Absent clients mean offline operation.
#[derive(Clone, Default)]
pub struct Clients {
    pub embedding: Option<Arc<dyn EmbeddingService>>,
    pub geocoder: Option<Arc<dyn Geocoder>>,
    pub llm: Option<Arc<dyn LlmClient>>,
}

/// Which retrieval layers participate. The vector layer always ranks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerToggles {
    pub geo: bool,
    pub graph: bool,
}

impl Default for LayerToggles {
    fn default() -> Self {
        LayerToggles { geo: true, graph: true }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalRequest {
    pub query: String,
    pub position: Option<GeoPoint>,
    pub time: Option<TimePoint>,
}

impl RetrievalRequest {
    pub fn for_user(query: impl Into<String>, user: &UserContext) -> Self {
        RetrievalRequest { query: query.into(), position: Some(user.position), time: Some(user.time) }
    }
}

pub struct Engine {
    config: EngineConfig,
    kb: KnowledgeBase,
    index: SpatialIndex,
    graph: SemanticGraph,
    vectors: VectorStore,
    cells: PlaceCells,
    embedder: Embedder,
    extractor: Extractor,
    gazetteer: Gazetteer,
    geocoder: Option<Arc<dyn Geocoder>>,
    llm: Option<Arc<dyn LlmClient>>,
    exec: Exec,
}

impl std::fmt::Debug for Engine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Engine").field("version", &self.kb.version()).field("items", &self.kb.len()).finish()
    }
}

impl Engine {
    pub fn build(kb: KnowledgeBase, config: EngineConfig, resources: Resources, clients: Clients) -> Result<Self, EngineError> {
        Self::build_with(kb, config, resources, clients, Exec::default())
    }

    pub fn build_with(
        kb: KnowledgeBase,
        config: EngineConfig,
        resources: Resources,
        clients: Clients,
        exec: Exec,
    ) -> Result<Self, EngineError> {
        config.validate()?;
        let index = SpatialIndex::build(&kb, config.cell_size_deg)?;
        let graph = SemanticGraph::build(&kb, &resources.relations)?;
        let embedder = Embedder::new(config.embedder.clone(), clients.embedding.clone())?;
        let vectors = VectorStore::build(&kb, &embedder, exec)?;
        let cells = PlaceCells::build(&kb, config.cell_size_deg, &config.schedule, config.iwf_form, resources.public_visits.iter().copied());
        let extra: Vec<&str> = graph.tags().chain(graph.aliases().keys().map(String::as_str)).collect();
        let rules = RulesExtractor::new(resources.gazetteer.names(), &resources.lexicon, extra);
        let extractor = Extractor { rules, kind: config.extractor, llm: clients.llm.clone(), fallback: config.extractor_fallback };
        Ok(Engine {
            config,
            kb,
            index,
            graph,
            vectors,
            cells,
            embedder,
            extractor,
            gazetteer: resources.gazetteer,
            geocoder: clients.geocoder,
            llm: clients.llm,
            exec,
        })
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn kb(&self) -> &KnowledgeBase {
        &self.kb
    }

    pub fn version(&self) -> u64 {
        self.kb.version()
    }

    pub fn index(&self) -> &SpatialIndex {
        &self.index
    }

    pub fn graph(&self) -> &SemanticGraph {
        &self.graph
    }

    pub fn vectors(&self) -> &VectorStore {
        &self.vectors
    }

    pub fn cells(&self) -> &PlaceCells {
        &self.cells
    }

    pub fn embedder(&self) -> &Embedder {
        &self.embedder
    }

    pub fn extractor(&self) -> &Extractor {
        &self.extractor
    }

    pub fn exec(&self) -> Exec {
        self.exec
    }

    /// First location name the geocoder resolves. An external client is
    /// tried before the offline gazetteer and wins when both answer.
    fn resolve_location(&self, names: &[String]) -> Result<Option<GeoEntity>, GeocodeError> {
        let mut last_unavailable = None;
        for name in names {
            if let Some(client) = &self.geocoder {
                match pipeline::geocode(name, client.as_ref()) {
                    Ok(e) => return Ok(Some(e)),
                    Err(GeocodeError::ClientUnavailable(m)) => last_unavailable = Some(GeocodeError::ClientUnavailable(m)),
                    Err(GeocodeError::NotFound(_)) => {}
                }
            }
            if let Ok(e) = pipeline::geocode(name, &self.gazetteer) {
                return Ok(Some(e));
            }
        }
        match last_unavailable {
            Some(e) => Err(e),
            None => Ok(None),
        }
    }

    pub fn retrieve(&self, req: &RetrievalRequest) -> Result<RetrievalResult, EngineError> {
        self.retrieve_with(req, LayerToggles::default())
    }

    /// Geo and graph layers run as independent set computations; the geo
    /// result is a hard constraint on the pool the vector layer ranks.
    pub fn retrieve_with(&self, req: &RetrievalRequest, layers: LayerToggles) -> Result<RetrievalResult, EngineError> {
        let mut plan = self.extractor.extract(&req.query)?;
        let loc = match self.resolve_location(&plan.location_names) {
            Ok(loc) => loc,
            Err(e) if req.position.is_none() => return Err(e.into()),
            Err(e) => {
                tracing::warn!(error = %e, "geocoder unavailable; anchoring on user position");
                None
            }
        };
        plan.resolved = loc.clone();
        let anchor: Option<GeoEntity> = loc.or_else(|| req.position.map(|p| GeoEntity::point("user", p)));

        if self.kb.is_empty() {
            return Ok(RetrievalResult { plan, items: Vec::new(), answer: None });
        }

        let all = self.kb.ids();
        let intents: Vec<&String> = plan.intents.iter().collect();
        let (geo_set, expansion) = self.exec.join(
            || -> Result<Option<BTreeSet<ItemId>>, GeoError> {
                match (&anchor, layers.geo) {
                    (Some(a), true) => geo::within(a, &all, &self.config.geo, &self.index, self.exec).map(Some),
                    _ => Ok(None),
                }
            },
            || -> Result<graph::Expansion, GraphError> {
                if layers.graph {
                    graph::expand(&intents, &self.graph, &self.config.expansion)
                } else {
                    Ok(graph::Expansion::default())
                }
            },
        );
        let geo_set = geo_set?;
        let expansion = expansion?;

        let mut pool: BTreeSet<ItemId> = match &geo_set {
            Some(g) => g.union(&expansion.items).filter(|id| g.contains(*id)).cloned().collect(),
            None => all.union(&expansion.items).cloned().collect(),
        };

        if layers.geo {
            if let Some(minute) = self.temporal_minute(plan.temporal, req.time) {
                pool.retain(|id| self.kb.get(id).is_some_and(|i| i.is_open_at(minute)));
            }
        }

        let ranked = vector::vector_filter(&req.query, &expansion.tags, &pool, &self.config.vector, &self.vectors, &self.embedder, self.exec)?;
        let items = ranked
            .into_iter()
            .filter_map(|(id, score)| {
                let item = self.kb.get(&id)?;
                let distance_km = anchor.as_ref().and_then(|a| geo::geometry_distance(a, item.position).ok());
                Some(RetrievedItem {
                    title: item.title.clone(),
                    score,
                    distance_km,
                    provenance: Provenance {
                        geo_pass: geo_set.as_ref().is_some_and(|g| g.contains(&id)),
                        graph_hit: expansion.items.contains(&id),
                        vector_score: score,
                    },
                    id,
                })
            })
            .collect();
        Ok(RetrievalResult { plan, items, answer: None })
    }

    /// Local minute of day a temporal cue refers to.
    pub fn temporal_minute(&self, cue: Option<TemporalCue>, time: Option<TimePoint>) -> Option<u16> {
        match cue? {
            TemporalCue::At(m) => Some(m),
            TemporalCue::Now => time.map(|t| self.config.schedule.local_minute(t)),
        }
    }

    /// Retrieve and attach a composed answer.
    pub fn answer(&self, req: &RetrievalRequest) -> Result<RetrievalResult, EngineError> {
        let mut result = self.retrieve(req)?;
        result.answer = Some(self.compose(&result, &req.query));
        Ok(result)
    }

    pub fn compose(&self, result: &RetrievalResult, q: &str) -> String {
        pipeline::compose_answer(result, q, self.config.generator, self.llm.as_deref(), &self.kb)
    }

    pub fn recommend(&self, user: &UserContext, k: usize) -> Result<Vec<Recommendation>, EngineError> {
        self.recommend_with(user, k, &self.config.recommender)
    }

    pub fn recommend_with(&self, user: &UserContext, k: usize, cfg: &RecommenderConfig) -> Result<Vec<Recommendation>, EngineError> {
        Ok(recommend::recommend(user, &self.kb, &self.cells, cfg, k, self.exec)?)
    }
}

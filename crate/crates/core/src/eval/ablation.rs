//! Ablation runners for the retrieval layers and the recommendation factors.

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{Clients, Engine, EngineConfig, EngineError, LayerToggles, Resources, RetrievalRequest};
use crate::exec::Exec;
use crate::geo::haversine;
use crate::model::{AttributeLexicon, GeoEntity, GeoPoint, ItemId, UserContext};
use crate::pipeline::{template_answer, UnparseableCitations};
use crate::recommend::{score, CognitiveProfile, FactorToggles, RecommenderConfig};

use super::metrics::{hallucination_proxy, hit_at_k, mrr, ndcg_at_k, ndcg_with_ideal, precision_at_k, str_mean, StrContext};
use super::synth::{Dataset, JudgedQuery, SynthError};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error("query {0}: {1}")]
    Grounding(String, UnparseableCitations),
}

/// Results are cut to this depth for precision, NDCG and STR.
pub const RETRIEVAL_K: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RetrievalVariant {
    All,
    GraphOff,
    GeoOff,
    VectorOnly,
}

impl RetrievalVariant {
    pub const ALL: [RetrievalVariant; 4] = [Self::All, Self::GraphOff, Self::GeoOff, Self::VectorOnly];

    pub fn layers(self) -> LayerToggles {
        match self {
            Self::All => LayerToggles { geo: true, graph: true },
            Self::GraphOff => LayerToggles { geo: true, graph: false },
            Self::GeoOff => LayerToggles { geo: false, graph: true },
            Self::VectorOnly => LayerToggles { geo: false, graph: false },
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::All => "all",
            Self::GraphOff => "graph_off",
            Self::GeoOff => "geo_off",
            Self::VectorOnly => "vector_only",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|v| v.name() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecommendVariant {
    Full,
    NoPopularity,
    NoSemantic,
    DistanceOnly,
}

impl RecommendVariant {
    pub const ALL: [RecommendVariant; 4] = [Self::Full, Self::NoPopularity, Self::NoSemantic, Self::DistanceOnly];

    pub fn factors(self) -> FactorToggles {
        match self {
            Self::Full => FactorToggles { semantic: true, popularity: true },
            Self::NoPopularity => FactorToggles { semantic: true, popularity: false },
            Self::NoSemantic => FactorToggles { semantic: false, popularity: true },
            Self::DistanceOnly => FactorToggles { semantic: false, popularity: false },
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Full => "s+p+sem",
            Self::NoPopularity => "s+sem",
            Self::NoSemantic => "s+p",
            Self::DistanceOnly => "s_only",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|v| v.name() == s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryBreakdown {
    pub id: String,
    pub metrics: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub variant: String,
    /// Means over the queries or users where a metric is defined. Metrics
    /// with no defined value are absent.
    pub metrics: BTreeMap<String, f64>,
    pub per_query: Vec<QueryBreakdown>,
    pub config: serde_json::Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub runtime_ms: Option<u64>,
}

impl EvalReport {
    pub fn metric(&self, name: &str) -> Option<f64> {
        self.metrics.get(name).copied()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationSuite {
    pub seed: u64,
    pub retrieval: Vec<EvalReport>,
    pub recommendation: Vec<EvalReport>,
}

impl AblationSuite {
    pub fn retrieval(&self, v: RetrievalVariant) -> Option<&EvalReport> {
        self.retrieval.iter().find(|r| r.variant == v.name())
    }

    pub fn recommendation(&self, v: RecommendVariant) -> Option<&EvalReport> {
        self.recommendation.iter().find(|r| r.variant == v.name())
    }
}

fn aggregate(per_query: &[QueryBreakdown]) -> BTreeMap<String, f64> {
    let mut sums: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for q in per_query {
        for (k, v) in &q.metrics {
            let e = sums.entry(k.clone()).or_insert((0.0, 0));
            e.0 += v;
            e.1 += 1;
        }
    }
    sums.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect()
}

pub fn engine_for(dataset: &Dataset, config: EngineConfig, exec: Exec) -> Result<Engine, EvalError> {
    let resources = Resources {
        gazetteer: dataset.gazetteer()?,
        lexicon: dataset.lexicon.clone(),
        relations: dataset.relations.clone(),
        attributes: AttributeLexicon::default(),
        public_visits: dataset.public_visit_points()?,
    };
    let mut config = config;
    config.schedule = dataset.manifest.schedule.clone();
    Ok(Engine::build_with(dataset.knowledge_base()?, config, resources, Clients::default(), exec)?)
}

fn snapshot(engine: &Engine, extra: serde_json::Value) -> serde_json::Value {
    serde_json::json!({ "engine": engine.config(), "variant": extra })
}

fn evaluate_query(engine: &Engine, dataset: &Dataset, q: &JudgedQuery, layers: LayerToggles) -> Result<QueryBreakdown, EvalError> {
    let position = GeoPoint::new(q.lat, q.lon).map_err(SynthError::from)?;
    let time = dataset.query_time(q)?;
    let req = RetrievalRequest { query: q.query.clone(), position: Some(position), time: Some(time) };
    let result = engine.retrieve_with(&req, layers)?;
    let grades: BTreeMap<&ItemId, u8> = q.judgments.iter().map(|j| (&j.item_id, j.grade)).collect();
    let relevant: BTreeSet<ItemId> = q.judgments.iter().filter(|j| j.grade >= 1).map(|j| j.item_id.clone()).collect();
    let ranked = result.ids();
    let ranked_grades: Vec<u8> = ranked.iter().map(|id| grades.get(id).copied().unwrap_or(0)).collect();

    let mut metrics = BTreeMap::new();
    metrics.insert(format!("precision@{RETRIEVAL_K}"), precision_at_k(&ranked, &relevant, RETRIEVAL_K));
    metrics.insert(format!("ndcg@{RETRIEVAL_K}"), ndcg_at_k(&ranked_grades, RETRIEVAL_K));

    let ctx = StrContext {
        location: result.plan.resolved.clone().unwrap_or_else(|| GeoEntity::point("user", position)),
        theta_km: engine.config().geo.theta_km,
        minute: engine.temporal_minute(result.plan.temporal, Some(time)),
    };
    let top = ranked.iter().take(RETRIEVAL_K).filter_map(|id| engine.kb().get(id));
    if let Some(s) = str_mean(top, &ctx).map_err(EngineError::from)? {
        metrics.insert("str".into(), s);
    }
    let answer = template_answer(&result, engine.kb());
    let h = hallucination_proxy(&answer, engine.kb()).map_err(|e| EvalError::Grounding(q.id.clone(), e))?;
    metrics.insert("hallucination_proxy".into(), h);
    Ok(QueryBreakdown { id: q.id.clone(), metrics })
}

pub fn run_retrieval_ablation(engine: &Engine, dataset: &Dataset, variant: RetrievalVariant, timing: bool) -> Result<EvalReport, EvalError> {
    let start = Instant::now();
    let layers = variant.layers();
    let per_query =
        engine.exec().map(&dataset.queries, |q| evaluate_query(engine, dataset, q, layers)).into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok(EvalReport {
        variant: variant.name().into(),
        metrics: aggregate(&per_query),
        per_query,
        config: snapshot(engine, serde_json::to_value(layers).expect("serializable")),
        runtime_ms: timing.then(|| start.elapsed().as_millis() as u64),
    })
}

/// Planted ground truth: the full score with the user's planted preference
/// standing in for the learned profile. Returns item ids in rank order.
pub fn planted_ranking(engine: &Engine, user: &UserContext, preference: &BTreeMap<String, f64>, cfg: &RecommenderConfig) -> Vec<ItemId> {
    let norm = preference.values().map(|x| x * x).sum::<f64>().sqrt();
    let vector = if norm > 0.0 { preference.iter().map(|(k, v)| (k.clone(), v / norm)).collect() } else { BTreeMap::new() };
    let profile = CognitiveProfile { owner: user.user_id.clone(), vector, built_at: user.time };
    let mut scored: Vec<(ItemId, f64)> = engine
        .kb()
        .items()
        .filter(|i| cfg.prune_radius_km.is_none_or(|r| haversine(user.position, i.position) <= r))
        .map(|i| (i.id.clone(), score(user, i, &profile, engine.cells(), &cfg.weights).psi))
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    scored.into_iter().map(|(id, _)| id).collect()
}

/// Grade 2 for the planted top five, grade 1 for the next ten.
pub fn planted_grades(truth: &[ItemId]) -> BTreeMap<ItemId, u8> {
    truth.iter().take(15).enumerate().map(|(i, id)| (id.clone(), if i < 5 { 2 } else { 1 })).collect()
}

pub fn run_recommend_ablation(engine: &Engine, dataset: &Dataset, variant: RecommendVariant, timing: bool) -> Result<EvalReport, EvalError> {
    let start = Instant::now();
    let base = engine.config().recommender.clone();
    let cfg = RecommenderConfig { factors: variant.factors(), ..base.clone() };
    let truth_cfg = RecommenderConfig { factors: FactorToggles::default(), ..base };
    let schedule = &dataset.manifest.schedule;
    let per_user = engine
        .exec()
        .map(&dataset.users, |u| -> Result<QueryBreakdown, EvalError> {
            let ctx = u.context(schedule)?;
            let truth = planted_ranking(engine, &ctx, &u.preference, &truth_cfg);
            let grades = planted_grades(&truth);
            let top: BTreeSet<ItemId> = grades.iter().filter(|(_, g)| **g == 2).map(|(id, _)| id.clone()).collect();
            let ideal: Vec<u8> = grades.values().copied().collect();
            let ranked: Vec<ItemId> = engine.recommend_with(&ctx, 10, &cfg)?.into_iter().map(|r| r.id).collect();
            let ranked_grades: Vec<u8> = ranked.iter().map(|id| grades.get(id).copied().unwrap_or(0)).collect();
            let mut metrics = BTreeMap::new();
            if !top.is_empty() {
                metrics.insert("hit@5".into(), hit_at_k(&ranked, &top, 5));
                metrics.insert("hit@10".into(), hit_at_k(&ranked, &top, 10));
                metrics.insert("ndcg@5".into(), ndcg_with_ideal(&ranked_grades, &ideal, 5));
                metrics.insert("ndcg@10".into(), ndcg_with_ideal(&ranked_grades, &ideal, 10));
                metrics.insert("mrr".into(), mrr(&ranked, &top));
            }
            Ok(QueryBreakdown { id: u.user_id.clone(), metrics })
        })
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
    Ok(EvalReport {
        variant: variant.name().into(),
        metrics: aggregate(&per_user),
        per_query: per_user,
        config: snapshot(engine, serde_json::to_value(variant.factors()).expect("serializable")),
        runtime_ms: timing.then(|| start.elapsed().as_millis() as u64),
    })
}

pub fn run_suite(engine: &Engine, dataset: &Dataset, timing: bool) -> Result<AblationSuite, EvalError> {
    let retrieval = RetrievalVariant::ALL.iter().map(|v| run_retrieval_ablation(engine, dataset, *v, timing)).collect::<Result<_, _>>()?;
    let recommendation =
        RecommendVariant::ALL.iter().map(|v| run_recommend_ablation(engine, dataset, *v, timing)).collect::<Result<_, _>>()?;
    Ok(AblationSuite { seed: dataset.manifest.seed, retrieval, recommendation })
}

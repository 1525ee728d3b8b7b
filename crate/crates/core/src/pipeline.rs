//! Query decomposition, geocoding, answer composition and grounding checks.
//!
//! Orchestration of the three retrieval layers lives in [`crate::engine`];
//! this module holds the pieces that turn raw text into a [`QueryPlan`] and
//! a ranked result back into cited text.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::model::{format_hhmm, parse_hhmm, GeoEntity, GeoPoint, Geometry, InfoItem, ItemId, KnowledgeBase, ModelError};
use crate::text::{normalize, tokenize};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PipelineError {
    #[error("EmptyQuery")]
    EmptyQuery,
    #[error("ExtractorUnavailable({0})")]
    ExtractorUnavailable(String),
    #[error("GenerationFailed({0})")]
    GenerationFailed(String),
    #[error("invalid gazetteer record: {0}")]
    BadRecord(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeocodeError {
    #[error("NotFound({0})")]
    NotFound(String),
    #[error("ClientUnavailable({0})")]
    ClientUnavailable(String),
}

/// Error surfaced by a remote text-completion backend.
#[derive(Debug, Error, Clone, PartialEq)]
#[error("{0}")]
pub struct ClientError(pub String);

/// Prompt in, completion text out.
pub trait LlmClient: Send + Sync {
    fn complete(&self, prompt: &str) -> Result<String, ClientError>;
}

pub trait Geocoder: Send + Sync {
    fn geocode(&self, name: &str) -> Result<GeoEntity, GeocodeError>;
}

/// Wire record shared by the geocoder protocol and the offline gazetteer.
/// Coordinates are `[lon, lat]` pairs, GeoJSON order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GazetteerRecord {
    pub name: String,
    pub geometry_type: String,
    pub coordinates: Value,
}

fn pair(v: &Value) -> Result<GeoPoint, PipelineError> {
    let a = v.as_array().filter(|a| a.len() == 2).ok_or_else(|| PipelineError::BadRecord(format!("expected [lon, lat], got {v}")))?;
    let (lon, lat) = match (a[0].as_f64(), a[1].as_f64()) {
        (Some(lon), Some(lat)) => (lon, lat),
        _ => return Err(PipelineError::BadRecord(format!("non-numeric coordinate {v}"))),
    };
    GeoPoint::new(lat, lon).map_err(|e: ModelError| PipelineError::BadRecord(e.to_string()))
}

impl GazetteerRecord {
    pub fn to_entity(&self) -> Result<GeoEntity, PipelineError> {
        let list = |v: &Value| -> Result<Vec<GeoPoint>, PipelineError> {
            v.as_array().ok_or_else(|| PipelineError::BadRecord("expected coordinate list".into()))?.iter().map(pair).collect()
        };
        let geometry = match self.geometry_type.to_ascii_lowercase().as_str() {
            "point" => Geometry::Point(pair(&self.coordinates)?),
            "polyline" | "linestring" => Geometry::Polyline(list(&self.coordinates)?),
            "polygon" => Geometry::Polygon(list(&self.coordinates)?),
            other => return Err(PipelineError::BadRecord(format!("unknown geometry_type {other:?}"))),
        };
        GeoEntity::from_geometry(self.name.clone(), geometry).map_err(|e| PipelineError::BadRecord(e.to_string()))
    }

    pub fn from_entity(e: &GeoEntity) -> Self {
        let c = |p: &GeoPoint| Value::from(vec![p.lon(), p.lat()]);
        let (kind, coordinates) = match e.geometry() {
            Geometry::Point(p) => ("point", c(p)),
            Geometry::Polyline(v) => ("polyline", Value::Array(v.iter().map(c).collect())),
            Geometry::Polygon(v) => ("polygon", Value::Array(v.iter().map(c).collect())),
        };
        GazetteerRecord { name: e.name.clone(), geometry_type: kind.into(), coordinates }
    }
}

/// Offline name -> geometry table, matched case-insensitively.
#[derive(Debug, Clone, Default)]
pub struct Gazetteer {
    entries: BTreeMap<String, GeoEntity>,
}

impl Gazetteer {
    pub fn from_records(records: &[GazetteerRecord]) -> Result<Self, PipelineError> {
        let mut entries = BTreeMap::new();
        for r in records {
            entries.insert(normalize(&r.name), r.to_entity()?);
        }
        Ok(Gazetteer { entries })
    }

    pub fn from_json(text: &str) -> Result<Self, PipelineError> {
        let records: Vec<GazetteerRecord> = serde_json::from_str(text).map_err(|e| PipelineError::BadRecord(e.to_string()))?;
        Self::from_records(&records)
    }

    pub fn records(&self) -> Vec<GazetteerRecord> {
        self.entries.values().map(GazetteerRecord::from_entity).collect()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.values().map(|e| e.name.as_str())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl Geocoder for Gazetteer {
    fn geocode(&self, name: &str) -> Result<GeoEntity, GeocodeError> {
        self.entries.get(&normalize(name)).cloned().ok_or_else(|| GeocodeError::NotFound(name.to_string()))
    }
}

pub fn geocode(name: &str, client: &dyn Geocoder) -> Result<GeoEntity, GeocodeError> {
    if name.trim().is_empty() {
        return Err(GeocodeError::NotFound(String::new()));
    }
    client.geocode(name)
}

/// Time cue carried by a query phrase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum TemporalCue {
    /// Open at the time the query is asked.
    Now,
    /// Open at this local minute of day.
    At(u16),
}

impl TryFrom<String> for TemporalCue {
    type Error = String;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        if s.eq_ignore_ascii_case("now") {
            return Ok(TemporalCue::Now);
        }
        parse_hhmm(&s).map(|m| TemporalCue::At(m % 1440)).ok_or_else(|| format!("expected \"now\" or HH:MM, got {s:?}"))
    }
}

impl From<TemporalCue> for String {
    fn from(c: TemporalCue) -> String {
        match c {
            TemporalCue::Now => "now".into(),
            TemporalCue::At(m) => format_hhmm(m),
        }
    }
}

/// Surface phrase tables for the rules extractor.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntentLexicon {
    /// surface phrase -> canonical intent token
    pub intents: BTreeMap<String, String>,
    pub temporal: BTreeMap<String, TemporalCue>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryPlan {
    pub raw: String,
    pub location_names: Vec<String>,
    pub intents: BTreeSet<String>,
    pub temporal: Option<TemporalCue>,
    pub resolved: Option<GeoEntity>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtractorKind {
    #[default]
    Rules,
    ExternalLlm,
}

#[derive(Debug, Clone)]
enum Phrase {
    Intent(String),
    Temporal(TemporalCue),
}

/// Longest-match phrase scanner over gazetteer names and intent phrases.
#[derive(Debug, Clone, Default)]
pub struct RulesExtractor {
    locations: BTreeMap<Vec<String>, String>,
    phrases: BTreeMap<Vec<String>, Phrase>,
    max_len: usize,
}

impl RulesExtractor {
    /// `extra_intents` are bare tokens (graph tags and alias surfaces) that
    /// map to themselves.
    pub fn new<'a>(
        gazetteer_names: impl IntoIterator<Item = &'a str>,
        lexicon: &IntentLexicon,
        extra_intents: impl IntoIterator<Item = &'a str>,
    ) -> Self {
        let mut ex = RulesExtractor::default();
        for name in gazetteer_names {
            let key = tokenize(name);
            if !key.is_empty() {
                ex.max_len = ex.max_len.max(key.len());
                ex.locations.insert(key, name.to_string());
            }
        }
        let add = |ex: &mut RulesExtractor, surface: &str, p: Phrase| {
            let key = tokenize(surface);
            if !key.is_empty() {
                ex.max_len = ex.max_len.max(key.len());
                ex.phrases.entry(key).or_insert(p);
            }
        };
        for (surface, cue) in &lexicon.temporal {
            add(&mut ex, surface, Phrase::Temporal(*cue));
        }
        for (surface, intent) in &lexicon.intents {
            add(&mut ex, surface, Phrase::Intent(normalize(intent)));
        }
        for t in extra_intents {
            add(&mut ex, t, Phrase::Intent(normalize(t)));
        }
        ex
    }

    pub fn extract(&self, q: &str) -> Result<QueryPlan, PipelineError> {
        if q.trim().is_empty() {
            return Err(PipelineError::EmptyQuery);
        }
        let tokens = tokenize(q);
        let mut plan = QueryPlan { raw: q.to_string(), location_names: Vec::new(), intents: BTreeSet::new(), temporal: None, resolved: None };
        let mut i = 0;
        while i < tokens.len() {
            let mut matched = 0;
            for len in (1..=self.max_len.min(tokens.len() - i)).rev() {
                let key = &tokens[i..i + len];
                if let Some(name) = self.locations.get(key) {
                    plan.location_names.push(name.clone());
                    matched = len;
                    break;
                }
                if let Some(p) = self.phrases.get(key) {
                    match p {
                        Phrase::Intent(t) => {
                            plan.intents.insert(t.clone());
                        }
                        Phrase::Temporal(c) => {
                            plan.temporal.get_or_insert(*c);
                        }
                    }
                    matched = len;
                    break;
                }
            }
            i += matched.max(1);
        }
        Ok(plan)
    }
}

const EXTRACTION_PROMPT: &str = "Extract the place names and the user's intents from the query below. \
Return only JSON of the form {\"locations\": [\"...\"], \"intents\": [\"...\"]}.\n\nQuery: ";

/// Query extraction with an optional LLM backend and rules fallback.
pub struct Extractor {
    pub rules: RulesExtractor,
    pub kind: ExtractorKind,
    pub llm: Option<std::sync::Arc<dyn LlmClient>>,
    /// Use the rules extractor when the LLM is unreachable.
    pub fallback: bool,
}

impl Extractor {
    pub fn rules(rules: RulesExtractor) -> Self {
        Extractor { rules, kind: ExtractorKind::Rules, llm: None, fallback: true }
    }

    pub fn extract(&self, q: &str) -> Result<QueryPlan, PipelineError> {
        let rules_plan = self.rules.extract(q)?;
        if self.kind == ExtractorKind::Rules {
            return Ok(rules_plan);
        }
        let Some(llm) = &self.llm else {
            return if self.fallback { Ok(rules_plan) } else { Err(PipelineError::ExtractorUnavailable("no LLM client".into())) };
        };
        match llm.complete(&format!("{EXTRACTION_PROMPT}{q}")) {
            Err(e) if self.fallback => {
                tracing::warn!(error = %e, "extractor unavailable; using rules");
                Ok(rules_plan)
            }
            Err(e) => Err(PipelineError::ExtractorUnavailable(e.0)),
            Ok(text) => match parse_llm_plan(&text) {
                Some((locations, intents)) => Ok(QueryPlan {
                    location_names: locations,
                    intents: intents.iter().map(|s| normalize(s)).filter(|s| !s.is_empty()).collect(),
                    ..rules_plan
                }),
                None => {
                    tracing::warn!("malformed extractor output; using rules");
                    Ok(rules_plan)
                }
            },
        }
    }
}

fn parse_llm_plan(text: &str) -> Option<(Vec<String>, Vec<String>)> {
    let start = text.find('{')?;
    let end = text.rfind('}')?;
    let v: Value = serde_json::from_str(text.get(start..=end)?).ok()?;
    let strings = |key: &str| -> Option<Vec<String>> {
        v.get(key)?.as_array()?.iter().map(|x| x.as_str().map(str::to_string)).collect()
    };
    Some((strings("locations")?, strings("intents")?))
}

/// Per-item record of which layers admitted it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub geo_pass: bool,
    pub graph_hit: bool,
    pub vector_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievedItem {
    pub id: ItemId,
    pub title: String,
    pub score: f64,
    /// Distance from the resolved location or user position.
    pub distance_km: Option<f64>,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalResult {
    pub plan: QueryPlan,
    pub items: Vec<RetrievedItem>,
    pub answer: Option<String>,
}

impl RetrievalResult {
    pub fn ids(&self) -> Vec<ItemId> {
        self.items.iter().map(|i| i.id.clone()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorKind {
    #[default]
    Template,
    ExternalLlm,
}

pub const NO_RESULTS_ANSWER: &str = "No local results found nearby.";

fn citation_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\[id:([^\[\]\s]+)\]").expect("valid regex"))
}

fn quote_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r#""([^"\n]+)""#).expect("valid regex"))
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("UnparseableCitations")]
pub struct UnparseableCitations;

/// Item ids cited as `[id:...]`, in order of appearance.
pub fn parse_citations(answer: &str) -> Result<Vec<ItemId>, UnparseableCitations> {
    let ids: Vec<ItemId> = citation_re().captures_iter(answer).map(|c| ItemId(c[1].to_string())).collect();
    if answer.matches("[id:").count() != ids.len() {
        return Err(UnparseableCitations);
    }
    Ok(ids)
}

/// Double-quoted place names mentioned in an answer.
pub fn quoted_names(answer: &str) -> Vec<String> {
    quote_re().captures_iter(answer).map(|c| c[1].to_string()).collect()
}

fn hours_text(item: &InfoItem) -> String {
    match &item.open_hours {
        None => "hours not listed".into(),
        Some(h) if h.0.is_empty() => "hours not listed".into(),
        Some(h) => {
            let spans: Vec<String> = h.0.iter().map(|&(s, e)| format!("{}-{}", format_hhmm(s), format_hhmm(e))).collect();
            format!("open {}", spans.join(", "))
        }
    }
}

/// Deterministic answer listing every retrieved item with its citation.
pub fn template_answer(result: &RetrievalResult, kb: &KnowledgeBase) -> String {
    if result.items.is_empty() {
        return NO_RESULTS_ANSWER.to_string();
    }
    let mut out = format!("Found {} local result{}:\n", result.items.len(), if result.items.len() == 1 { "" } else { "s" });
    for (rank, r) in result.items.iter().enumerate() {
        let Some(item) = kb.get(&r.id) else { continue };
        let title = if item.title.trim().is_empty() { item.id.as_str() } else { item.title.trim() };
        let mut line = format!("{}. {}", rank + 1, title.replace('"', "'"));
        let place = item.location_name.replace('"', "").trim().to_string();
        if !place.is_empty() {
            line.push_str(&format!(" at \"{place}\""));
        }
        if let Some(d) = r.distance_km {
            line.push_str(&format!(", {d:.2} km away"));
        }
        line.push_str(&format!(", {} [id:{}]\n", hours_text(item), item.id));
        out.push_str(&line);
    }
    out
}

/// Every citation names a retrieved item and every quoted name appears in
/// the retrieved items' text.
pub fn is_grounded(answer: &str, result: &RetrievalResult, kb: &KnowledgeBase) -> bool {
    let Ok(cited) = parse_citations(answer) else { return false };
    let allowed: BTreeSet<&ItemId> = result.items.iter().map(|i| &i.id).collect();
    if !cited.iter().all(|id| allowed.contains(id)) {
        return false;
    }
    let corpus: Vec<String> = result
        .items
        .iter()
        .filter_map(|r| kb.get(&r.id))
        .map(|i| format!("{} {} {}", i.title, i.content, i.location_name).to_lowercase())
        .collect();
    quoted_names(answer).iter().all(|n| {
        let n = n.to_lowercase();
        corpus.iter().any(|c| c.contains(&n))
    })
}

fn generation_prompt(result: &RetrievalResult, q: &str, kb: &KnowledgeBase) -> String {
    let mut p = String::from(
        "Answer the question using only the posts below. Cite every post you use as [id:ID]. \
Put place names in double quotes and mention only places that appear in the posts.\n\n",
    );
    p.push_str(&format!("Question: {q}\n\nPosts:\n"));
    for r in &result.items {
        if let Some(i) = kb.get(&r.id) {
            p.push_str(&format!("[id:{}] {} | {} | {}\n", i.id, i.title, i.content, i.location_name));
        }
    }
    p
}

/// Compose a cited answer. LLM output that fails the grounding check, or
/// any generation error, falls back to the template.
pub fn compose_answer(
    result: &RetrievalResult,
    q: &str,
    generator: GeneratorKind,
    llm: Option<&dyn LlmClient>,
    kb: &KnowledgeBase,
) -> String {
    if generator == GeneratorKind::ExternalLlm && !result.items.is_empty() {
        match llm.map(|c| c.complete(&generation_prompt(result, q, kb))) {
            Some(Ok(text)) if is_grounded(&text, result, kb) => return text,
            Some(Ok(_)) => tracing::warn!("generated answer failed grounding; using template"),
            Some(Err(e)) => tracing::warn!(error = %PipelineError::GenerationFailed(e.0), "using template"),
            None => tracing::warn!("no generator client configured; using template"),
        }
    }
    template_answer(result, kb)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_knowledge_base, TimePoint};

    fn extractor() -> RulesExtractor {
        let mut lex = IntentLexicon::default();
        lex.intents.insert("restaurants".into(), "restaurants".into());
        lex.intents.insert("entertainment".into(), "entertainment".into());
        lex.temporal.insert("open now".into(), TemporalCue::Now);
        RulesExtractor::new(["Futian Exhibition Center", "Futian"], &lex, ["toilets"])
    }

    #[test]
    fn extracts_location_and_intent() {
        let plan = extractor().extract("restaurants near Futian Exhibition Center").unwrap();
        assert_eq!(plan.location_names, vec!["Futian Exhibition Center"]);
        assert_eq!(plan.intents, ["restaurants".to_string()].into_iter().collect());
        let plan = extractor().extract("Where are the toilets nearby?").unwrap();
        assert!(plan.location_names.is_empty());
        assert_eq!(plan.intents, ["toilets".to_string()].into_iter().collect());
        let plan = extractor().extract("asdf qwerty").unwrap();
        assert!(plan.location_names.is_empty() && plan.intents.is_empty());
        assert_eq!(extractor().extract("  ").unwrap_err(), PipelineError::EmptyQuery);
        let plan = extractor().extract("restaurants open now").unwrap();
        assert_eq!(plan.temporal, Some(TemporalCue::Now));
    }

    struct Canned(Result<String, ClientError>);
    impl LlmClient for Canned {
        fn complete(&self, _: &str) -> Result<String, ClientError> {
            self.0.clone()
        }
    }

    #[test]
    fn llm_extractor_validates_and_falls_back() {
        let mk = |r: Result<String, ClientError>, fallback| Extractor {
            rules: extractor(),
            kind: ExtractorKind::ExternalLlm,
            llm: Some(std::sync::Arc::new(Canned(r))),
            fallback,
        };
        let ok = mk(Ok(r#"{"locations":["Nantou Ancient Town"],"intents":["Cafe"]}"#.into()), true);
        let plan = ok.extract("coffee in Nantou").unwrap();
        assert_eq!(plan.location_names, vec!["Nantou Ancient Town"]);
        assert!(plan.intents.contains("cafe"));
        let bad = mk(Ok(r#"{"locations":"x"}"#.into()), true);
        assert_eq!(bad.extract("restaurants").unwrap().intents.len(), 1);
        let down = mk(Err(ClientError("down".into())), false);
        assert!(matches!(down.extract("restaurants"), Err(PipelineError::ExtractorUnavailable(_))));
    }

    #[test]
    fn gazetteer_lookup() {
        let json = r#"[
            {"name":"Nantou Ancient Town","geometry_type":"point","coordinates":[113.921,22.545]},
            {"name":"Park","geometry_type":"polygon","coordinates":[[0,0],[0,1],[1,1],[0,0]]}
        ]"#;
        let g = Gazetteer::from_json(json).unwrap();
        let e = geocode("nantou ancient town", &g).unwrap();
        assert_eq!(e.geometry(), &Geometry::Point(GeoPoint::new(22.545, 113.921).unwrap()));
        assert!(matches!(geocode("Atlantis", &g), Err(GeocodeError::NotFound(_))));
        assert!(matches!(geocode("Park", &g).unwrap().geometry(), Geometry::Polygon(_)));
        assert_eq!(Gazetteer::from_records(&g.records()).unwrap().len(), 2);
    }

    fn result_with(kb: &KnowledgeBase, ids: &[&str]) -> RetrievalResult {
        RetrievalResult {
            plan: QueryPlan { raw: "q".into(), location_names: vec![], intents: BTreeSet::new(), temporal: None, resolved: None },
            items: ids
                .iter()
                .map(|id| RetrievedItem {
                    id: ItemId::from(*id),
                    title: kb.get(&ItemId::from(*id)).unwrap().title.clone(),
                    score: 0.5,
                    distance_km: Some(0.3),
                    provenance: Provenance { geo_pass: true, graph_hit: false, vector_score: 0.5 },
                })
                .collect(),
            answer: None,
        }
    }

    fn kb() -> KnowledgeBase {
        let mk = |id: &str, title: &str, place: &str| {
            let mut i = InfoItem::new(id, "content", TimePoint::new(0).unwrap(), GeoPoint::new(0.0, 0.0).unwrap());
            i.title = title.into();
            i.location_name = place.into();
            i
        };
        build_knowledge_base(vec![mk("a", "Public toilet", "Central Park"), mk("b", "Bakery", "Old Street"), mk("c", "Gym", "")]).unwrap()
    }

    #[test]
    fn template_cites_exactly_the_results() {
        let kb = kb();
        let r = result_with(&kb, &["a", "b"]);
        let ans = compose_answer(&r, "q", GeneratorKind::Template, None, &kb);
        assert_eq!(parse_citations(&ans).unwrap(), vec![ItemId::from("a"), ItemId::from("b")]);
        assert!(is_grounded(&ans, &r, &kb));
        assert_eq!(quoted_names(&ans), vec!["Central Park", "Old Street"]);
        let empty = result_with(&kb, &[]);
        let ans = compose_answer(&empty, "q", GeneratorKind::Template, None, &kb);
        assert_eq!(ans, NO_RESULTS_ANSWER);
        assert!(parse_citations(&ans).unwrap().is_empty());
    }

    #[test]
    fn ungrounded_generation_is_replaced() {
        let kb = kb();
        let r = result_with(&kb, &["a"]);
        let liar = Canned(Ok("Try the toilet [id:c]".into()));
        let ans = compose_answer(&r, "q", GeneratorKind::ExternalLlm, Some(&liar), &kb);
        assert_eq!(ans, template_answer(&r, &kb));
        let invented = Canned(Ok("Go to \"Atlantis\" [id:a]".into()));
        assert_eq!(compose_answer(&r, "q", GeneratorKind::ExternalLlm, Some(&invented), &kb), template_answer(&r, &kb));
        let honest = Canned(Ok("The toilet in \"Central Park\" [id:a]".into()));
        assert_eq!(compose_answer(&r, "q", GeneratorKind::ExternalLlm, Some(&honest), &kb), "The toilet in \"Central Park\" [id:a]");
    }

    #[test]
    fn citation_parsing() {
        assert_eq!(parse_citations("x [id:p1] y [id:p-2]").unwrap().len(), 2);
        assert_eq!(parse_citations("broken [id: p1]"), Err(UnparseableCitations));
        assert_eq!(parse_citations("").unwrap(), vec![]);
    }
}

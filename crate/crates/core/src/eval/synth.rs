//! Seeded synthetic neighborhoods with planted relevance and preferences.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::haversine;
use crate::graph::Relations;
use crate::model::{
    build_knowledge_base, item_to_json, validate_item, AttributeLexicon, DaySchedule, GeoEntity, GeoPoint, InfoItem, ItemId,
    KnowledgeBase, MediaType, ModelError, OpenHours, TimePoint, UserContext, ValidationError, Visit,
};
use crate::pipeline::{Gazetteer, GazetteerRecord, IntentLexicon, PipelineError, TemporalCue};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("InvalidParams: {0}")]
    InvalidParams(String),
    #[error("io error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("bad dataset file {path}: {reason}")]
    BadFile { path: String, reason: String },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthParams {
    pub n_items: usize,
    /// Number of named neighborhoods items cluster around.
    pub n_cells: usize,
    pub n_queries: usize,
    pub n_users: usize,
    pub theta_km: f64,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams { n_items: 2400, n_cells: 12, n_queries: 240, n_users: 120, theta_km: 1.0 }
    }
}

impl SynthParams {
    pub fn validate(&self) -> Result<(), SynthError> {
        if self.n_cells == 0 || self.n_cells > NEIGHBORHOODS.len() {
            return Err(SynthError::InvalidParams(format!("n_cells must be in 1..={}, got {}", NEIGHBORHOODS.len(), self.n_cells)));
        }
        if !(self.theta_km.is_finite() && self.theta_km > 0.0) {
            return Err(SynthError::InvalidParams(format!("theta_km must be > 0, got {}", self.theta_km)));
        }
        if self.n_items > 1_000_000 {
            return Err(SynthError::InvalidParams(format!("n_items too large: {}", self.n_items)));
        }
        Ok(())
    }
}

struct Category {
    tag: &'static str,
    plural: &'static str,
    extra_tag: &'static str,
    attrs: &'static [(&'static str, u64)],
    hours: &'static [(&'static str, &'static str)],
    nouns: &'static [&'static str],
    words: &'static [&'static str],
}

const CATEGORIES: &[Category] = &[
    Category {
        tag: "restaurant",
        plural: "restaurants",
        extra_tag: "food",
        attrs: &[("dining", 3), ("food", 2)],
        hours: &[("10:00", "22:00"), ("11:00", "23:30")],
        nouns: &["restaurant", "noodle house", "dim sum restaurant"],
        words: &["tasty", "dinner", "lunch", "menu", "portion", "spicy", "seafood"],
    },
    Category {
        tag: "cafe",
        plural: "cafes",
        extra_tag: "coffee",
        attrs: &[("coffee", 3), ("dining", 1)],
        hours: &[("08:00", "20:00"), ("07:30", "18:00")],
        nouns: &["cafe", "coffee shop", "espresso bar"],
        words: &["latte", "pastry", "quiet", "wifi", "beans", "brunch"],
    },
    Category {
        tag: "toilet",
        plural: "toilets",
        extra_tag: "restroom",
        attrs: &[("sanitation", 3)],
        hours: &[("00:00", "24:00"), ("06:00", "23:00")],
        nouns: &["public toilet", "restroom", "washroom"],
        words: &["clean", "accessible", "free", "baby changing", "tissue"],
    },
    Category {
        tag: "park",
        plural: "parks",
        extra_tag: "outdoor",
        attrs: &[("green", 3), ("leisure", 1)],
        hours: &[("06:00", "22:00"), ("05:30", "23:00")],
        nouns: &["park", "garden", "green square"],
        words: &["trees", "walk", "lawn", "pond", "shade", "benches"],
    },
    Category {
        tag: "gym",
        plural: "gyms",
        extra_tag: "fitness",
        attrs: &[("fitness", 3)],
        hours: &[("06:00", "23:00"), ("07:00", "22:00")],
        nouns: &["gym", "fitness studio", "training center"],
        words: &["weights", "treadmill", "classes", "trainer", "locker"],
    },
    Category {
        tag: "pharmacy",
        plural: "pharmacies",
        extra_tag: "health",
        attrs: &[("health", 3)],
        hours: &[("08:00", "22:00"), ("00:00", "24:00")],
        nouns: &["pharmacy", "drugstore", "chemist"],
        words: &["medicine", "prescription", "pharmacist", "masks", "vitamins"],
    },
    Category {
        tag: "bar",
        plural: "bars",
        extra_tag: "nightlife",
        attrs: &[("nightlife", 3), ("dining", 1)],
        hours: &[("18:00", "02:00"), ("19:00", "03:00")],
        nouns: &["bar", "pub", "cocktail lounge"],
        words: &["beer", "cocktails", "live music", "late", "happy hour"],
    },
    Category {
        tag: "market",
        plural: "markets",
        extra_tag: "grocery",
        attrs: &[("grocery", 3), ("food", 1)],
        hours: &[("07:00", "19:00"), ("06:30", "21:00")],
        nouns: &["market", "grocery store", "fresh market"],
        words: &["vegetables", "fruit", "fresh", "fish", "cheap", "stalls"],
    },
    Category {
        tag: "library",
        plural: "libraries",
        extra_tag: "study",
        attrs: &[("study", 3), ("quiet", 1)],
        hours: &[("09:00", "21:00"), ("10:00", "18:00")],
        nouns: &["library", "reading room", "book corner"],
        words: &["books", "desks", "silent", "reading", "study"],
    },
    Category {
        tag: "office",
        plural: "offices",
        extra_tag: "work",
        attrs: &[("work", 3)],
        hours: &[("09:00", "18:00"), ("08:30", "19:00")],
        nouns: &["coworking space", "office tower", "business center"],
        words: &["desk", "meeting", "printer", "coworking", "rent"],
    },
];

const RELATED: &[(&str, &str)] = &[
    ("restaurant", "cafe"),
    ("bar", "restaurant"),
    ("toilet", "park"),
    ("gym", "park"),
    ("market", "restaurant"),
    ("library", "cafe"),
    ("office", "cafe"),
    ("pharmacy", "toilet"),
];

const NEIGHBORHOODS: &[&str] = &[
    "Nantou Ancient Town",
    "Futian Exhibition Center",
    "Shekou Harbour",
    "Houhai Park",
    "Xili Lake",
    "Baishizhou Market",
    "Huaqiang North",
    "Lianhua Hill",
    "Science Park",
    "Window Plaza",
    "Chegongmiao",
    "Meilin Reservoir",
    "Bao'an Center",
    "Luohu Station",
    "Dongmen Street",
    "Shenzhen Bay",
];

const ORIGIN: (f64, f64) = (22.50, 113.88);
/// Neighborhood grid step (about 4 km north-south).
const SPACING_DEG: f64 = 0.036;
const SPREAD_KM: f64 = 0.45;
const KM_PER_DEG_LAT: f64 = 111.195;

fn neighborhood_center(i: usize) -> GeoPoint {
    let (row, col) = (i / 4, i % 4);
    GeoPoint::new(ORIGIN.0 + row as f64 * SPACING_DEG, ORIGIN.1 + col as f64 * SPACING_DEG).expect("in range")
}

fn offset(p: GeoPoint, north_km: f64, east_km: f64) -> GeoPoint {
    let lat = p.lat() + north_km / KM_PER_DEG_LAT;
    let lon = p.lon() + east_km / (KM_PER_DEG_LAT * p.lat().to_radians().cos());
    GeoPoint::new(lat.clamp(-90.0, 90.0), lon).expect("in range")
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.random_range(f64::EPSILON..1.0);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

fn jitter(rng: &mut ChaCha8Rng, p: GeoPoint, sd_km: f64) -> GeoPoint {
    offset(p, gaussian(rng) * sd_km, gaussian(rng) * sd_km)
}

fn hhmm(s: &str) -> u16 {
    crate::model::parse_hhmm(s).expect("valid literal")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Judgment {
    pub item_id: ItemId,
    pub grade: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JudgedQuery {
    pub id: String,
    pub query: String,
    pub lat: f64,
    pub lon: f64,
    /// Local timestamp, `YYYY-MM-DD HH:MM:SS`.
    pub time: String,
    pub judgments: Vec<Judgment>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VisitRecord {
    pub lat: f64,
    pub lon: f64,
    pub time: String,
    pub count: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthUser {
    pub user_id: String,
    pub lat: f64,
    pub lon: f64,
    pub time: String,
    pub visited: Vec<VisitRecord>,
    /// Planted attribute preference the visits were drawn from.
    pub preference: BTreeMap<String, f64>,
}

impl SynthUser {
    pub fn context(&self, schedule: &DaySchedule) -> Result<UserContext, SynthError> {
        let bad = |what: &str| SynthError::BadFile { path: "users.jsonl".into(), reason: format!("{}: bad {what}", self.user_id) };
        let visited = self
            .visited
            .iter()
            .map(|v| {
                let t = schedule.parse_timestamp(&v.time).ok_or_else(|| bad("visit time"))?;
                Ok(Visit::new(GeoPoint::new(v.lat, v.lon)?, t, v.count)?)
            })
            .collect::<Result<Vec<_>, SynthError>>()?;
        Ok(UserContext {
            user_id: self.user_id.clone(),
            position: GeoPoint::new(self.lat, self.lon)?,
            time: schedule.parse_timestamp(&self.time).ok_or_else(|| bad("time"))?,
            visited,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PublicVisit {
    pub lat: f64,
    pub lon: f64,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub seed: u64,
    pub params: SynthParams,
    pub schedule: DaySchedule,
    pub n_items: usize,
    pub n_queries: usize,
    pub n_users: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub manifest: Manifest,
    pub items: Vec<InfoItem>,
    pub queries: Vec<JudgedQuery>,
    pub users: Vec<SynthUser>,
    pub public_visits: Vec<PublicVisit>,
    pub gazetteer: Vec<GazetteerRecord>,
    pub relations: Relations,
    pub lexicon: IntentLexicon,
}

fn relations() -> Relations {
    let related = RELATED.iter().map(|(a, b)| [a.to_string(), b.to_string()]).collect();
    let aliases = CATEGORIES.iter().map(|c| (c.plural.to_string(), c.tag.to_string())).collect();
    Relations { related, aliases }
}

fn lexicon() -> IntentLexicon {
    let mut intents = BTreeMap::new();
    intents.insert("restrooms".into(), "toilet".into());
    intents.insert("bathroom".into(), "toilet".into());
    intents.insert("coffee".into(), "cafe".into());
    intents.insert("something to eat".into(), "restaurant".into());
    intents.insert("work out".into(), "gym".into());
    let mut temporal = BTreeMap::new();
    temporal.insert("open now".into(), TemporalCue::Now);
    temporal.insert("right now".into(), TemporalCue::Now);
    temporal.insert("open late".into(), TemporalCue::At(hhmm("22:30")));
    temporal.insert("for breakfast".into(), TemporalCue::At(hhmm("07:30")));
    IntentLexicon { intents, temporal }
}

fn local_time(rng: &mut ChaCha8Rng, minute: Option<u16>) -> String {
    let day = rng.random_range(1..=28u32);
    let m = minute.unwrap_or_else(|| rng.random_range(0..1440u16));
    format!("2024-03-{day:02} {:02}:{:02}:00", m / 60, m % 60)
}

/// Neighborhood category mix: two favored categories per neighborhood.
fn category_weights(n: usize) -> Vec<f64> {
    let k = CATEGORIES.len();
    (0..k).map(|c| if c == n % k || c == (n * 3 + 1) % k { 4.0 } else { 1.0 }).collect()
}

fn make_items(rng: &mut ChaCha8Rng, p: &SynthParams, schedule: &DaySchedule) -> Vec<(InfoItem, usize)> {
    let width = p.n_items.max(1).to_string().len();
    let mut out = Vec::with_capacity(p.n_items);
    for i in 0..p.n_items {
        let n = rng.random_range(0..p.n_cells);
        let weights = category_weights(n);
        let total: f64 = weights.iter().sum();
        let mut pick = rng.random_range(0.0..total);
        let mut c = 0;
        while pick >= weights[c] && c + 1 < weights.len() {
            pick -= weights[c];
            c += 1;
        }
        let cat = &CATEGORIES[c];
        let place = NEIGHBORHOODS[n];
        let pos = jitter(rng, neighborhood_center(n), SPREAD_KM);
        let ts = schedule.parse_timestamp(&local_time(rng, None)).expect("valid synthetic timestamp");
        let noun = cat.nouns.choose(rng).expect("non-empty");
        let mut words: Vec<&str> = cat.words.to_vec();
        words.shuffle(rng);
        words.truncate(3);
        let title = format!("{} #{}", capitalize(noun), i + 1);
        let mut content = format!("A {} {noun} with {} and {}.", words[0], words[1], words[2]);
        if rng.random_bool(0.25) {
            content.push_str(&format!(" Close to {place}."));
        }
        let mut item = InfoItem::new(format!("s{:0width$}", i + 1), content, ts, pos);
        item.title = title;
        item.author = format!("user{}", rng.random_range(1..=400u32));
        item.verified = rng.random_bool(0.2);
        item.likes = rng.random_range(0..500);
        item.comments = rng.random_range(0..80);
        item.tags = [cat.tag, cat.extra_tag].iter().map(|s| s.to_string()).collect();
        item.location_name = place.to_string();
        item.media_type = [MediaType::Text, MediaType::Image, MediaType::Video][rng.random_range(0..3)];
        item.original = rng.random_bool(0.8);
        let (s, e) = cat.hours.choose(rng).expect("non-empty");
        item.open_hours = Some(OpenHours(vec![(hhmm(s) % 1440, hhmm(e))]));
        item.attributes = cat.attrs.iter().map(|(k, v)| (k.to_string(), v + rng.random_range(0..3u64))).collect();
        out.push((item, c));
    }
    out
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().collect::<String>() + c.as_str(),
        None => String::new(),
    }
}

enum QueryForm {
    NearPlace,
    Nearby,
    OpenNow,
    OpenLate,
}

fn make_queries(
    rng: &mut ChaCha8Rng,
    p: &SynthParams,
    items: &[(InfoItem, usize)],
) -> Vec<JudgedQuery> {
    let mut out = Vec::new();
    if items.is_empty() {
        return out;
    }
    let related: BTreeSet<(usize, usize)> = RELATED
        .iter()
        .flat_map(|(a, b)| {
            let ia = CATEGORIES.iter().position(|c| c.tag == *a).expect("known tag");
            let ib = CATEGORIES.iter().position(|c| c.tag == *b).expect("known tag");
            [(ia, ib), (ib, ia)]
        })
        .collect();
    let mut attempts = 0;
    while out.len() < p.n_queries && attempts < p.n_queries * 50 {
        attempts += 1;
        let n = rng.random_range(0..p.n_cells);
        let form = match rng.random_range(0..20) {
            0..=9 => QueryForm::NearPlace,
            10..=13 => QueryForm::Nearby,
            14..=17 => QueryForm::OpenNow,
            _ => QueryForm::OpenLate,
        };
        let c = rng.random_range(0..CATEGORIES.len());
        let cat = &CATEGORIES[c];
        let place = NEIGHBORHOODS[n];
        let center = neighborhood_center(n);
        // Users asking about a named place stand somewhere else.
        let elsewhere = neighborhood_center(rng.random_range(0..p.n_cells));
        let (text, user_pos, anchor, minute, time) = match form {
            QueryForm::NearPlace => {
                let t = local_time(rng, None);
                (format!("{} near {place}", capitalize(cat.plural)), jitter(rng, elsewhere, 0.3), center, None, t)
            }
            QueryForm::Nearby => {
                let pos = jitter(rng, center, 0.3);
                let t = local_time(rng, None);
                (format!("Where are the {} nearby?", cat.plural), pos, pos, None, t)
            }
            QueryForm::OpenNow => {
                let m = rng.random_range(0..1440u16);
                let t = local_time(rng, Some(m));
                (format!("{} open now near {place}", capitalize(cat.plural)), jitter(rng, elsewhere, 0.3), center, Some(m), t)
            }
            QueryForm::OpenLate => {
                let t = local_time(rng, None);
                (format!("Any {} open late near {place}?", cat.plural), jitter(rng, elsewhere, 0.3), center, Some(hhmm("22:30")), t)
            }
        };
        let satisfies = |item: &InfoItem| haversine(anchor, item.position) < p.theta_km && minute.is_none_or(|m| item.is_open_at(m));
        let mut judgments: Vec<Judgment> = items
            .iter()
            .filter(|(item, ic)| (*ic == c || related.contains(&(c, *ic))) && satisfies(item))
            .map(|(item, ic)| Judgment { item_id: item.id.clone(), grade: if *ic == c { 2 } else { 1 } })
            .collect();
        if !judgments.iter().any(|j| j.grade == 2) {
            continue;
        }
        judgments.sort_by(|a, b| a.item_id.cmp(&b.item_id));
        out.push(JudgedQuery {
            id: format!("q{:04}", out.len() + 1),
            query: text,
            lat: user_pos.lat(),
            lon: user_pos.lon(),
            time,
            judgments,
        });
    }
    out
}

fn make_users(rng: &mut ChaCha8Rng, p: &SynthParams, items: &[(InfoItem, usize)]) -> Vec<SynthUser> {
    let mut out = Vec::new();
    if items.is_empty() {
        return out;
    }
    for u in 0..p.n_users {
        let liked: Vec<usize> = {
            let mut cats: Vec<usize> = (0..CATEGORIES.len()).collect();
            cats.shuffle(rng);
            cats.truncate(rng.random_range(1..=2));
            cats
        };
        let mut preference: BTreeMap<String, f64> = BTreeMap::new();
        for (rank, &c) in liked.iter().enumerate() {
            for (attr, w) in CATEGORIES[c].attrs {
                *preference.entry(attr.to_string()).or_insert(0.0) += *w as f64 / (rank + 1) as f64;
            }
        }
        let n = rng.random_range(0..p.n_cells);
        let pos = jitter(rng, neighborhood_center(n), 0.8);
        let now_minute = rng.random_range(0..1440u16);
        let time = local_time(rng, Some(now_minute));
        let pool: Vec<&InfoItem> = items.iter().filter(|(_, c)| liked.contains(c)).map(|(i, _)| i).collect();
        let visits = rng.random_range(4..=9);
        let mut visited = Vec::with_capacity(visits);
        for _ in 0..visits {
            let Some(item) = pool.choose(rng) else { break };
            let m = (i32::from(now_minute) + rng.random_range(-120..=120)).rem_euclid(1440) as u16;
            visited.push(VisitRecord {
                lat: item.position.lat(),
                lon: item.position.lon(),
                time: local_time(rng, Some(m)),
                count: rng.random_range(1..=3),
            });
        }
        out.push(SynthUser { user_id: format!("u{:03}", u + 1), lat: pos.lat(), lon: pos.lon(), time, visited, preference });
    }
    out
}

fn make_public_visits(rng: &mut ChaCha8Rng, p: &SynthParams) -> Vec<PublicVisit> {
    let mut out = Vec::new();
    for n in 0..p.n_cells {
        let popularity = rng.random_range(1..=6u64);
        for _ in 0..(popularity * 6) {
            let pt = jitter(rng, neighborhood_center(n), SPREAD_KM);
            out.push(PublicVisit { lat: pt.lat(), lon: pt.lon(), count: rng.random_range(1..=popularity * 4) });
        }
    }
    out
}

/// Deterministic dataset for `seed`.
pub fn synth_generate(seed: u64, params: SynthParams) -> Result<Dataset, SynthError> {
    params.validate()?;
    let schedule = DaySchedule::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let items = make_items(&mut rng, &params, &schedule);
    let queries = make_queries(&mut rng, &params, &items);
    let users = make_users(&mut rng, &params, &items);
    let public_visits = if items.is_empty() { Vec::new() } else { make_public_visits(&mut rng, &params) };
    let gazetteer = (0..params.n_cells)
        .map(|n| GazetteerRecord::from_entity(&GeoEntity::point(NEIGHBORHOODS[n], neighborhood_center(n))))
        .collect();
    let items: Vec<InfoItem> = items.into_iter().map(|(i, _)| i).collect();
    Ok(Dataset {
        manifest: Manifest { seed, params, schedule, n_items: items.len(), n_queries: queries.len(), n_users: users.len() },
        items,
        queries,
        users,
        public_visits,
        gazetteer,
        relations: relations(),
        lexicon: lexicon(),
    })
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> SynthError + '_ {
    move |source| SynthError::Io { path: path.display().to_string(), source }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), SynthError> {
    let text = serde_json::to_string_pretty(value).expect("serializable");
    fs::write(path, text + "\n").map_err(io_err(path))
}

fn write_lines<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<(), SynthError> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    for row in rows {
        let line = serde_json::to_string(&row).expect("serializable");
        writeln!(w, "{line}").map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, SynthError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| SynthError::BadFile { path: path.display().to_string(), reason: e.to_string() })
}

fn read_lines<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, SynthError> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (no, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let row = serde_json::from_str(&line)
            .map_err(|e| SynthError::BadFile { path: path.display().to_string(), reason: format!("line {}: {e}", no + 1) })?;
        out.push(row);
    }
    Ok(out)
}

impl Dataset {
    pub fn write_dir(&self, dir: &Path) -> Result<(), SynthError> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        write_json(&dir.join("dataset.json"), &self.manifest)?;
        write_lines(&dir.join("items.jsonl"), self.items.iter().map(|i| item_to_json(i, &self.manifest.schedule)))?;
        write_lines(&dir.join("queries.jsonl"), &self.queries)?;
        write_lines(&dir.join("users.jsonl"), &self.users)?;
        write_lines(&dir.join("visits.jsonl"), &self.public_visits)?;
        write_json(&dir.join("gazetteer.json"), &self.gazetteer)?;
        write_json(&dir.join("relations.json"), &self.relations)?;
        write_json(&dir.join("lexicon.json"), &self.lexicon)
    }

    pub fn read_dir(dir: &Path) -> Result<Self, SynthError> {
        let manifest: Manifest = read_json(&dir.join("dataset.json"))?;
        let raw_items: Vec<serde_json::Map<String, serde_json::Value>> = read_lines(&dir.join("items.jsonl"))?;
        let attrs = AttributeLexicon::default();
        let items = raw_items
            .iter()
            .enumerate()
            .map(|(no, raw)| {
                validate_item(raw, &manifest.schedule, &attrs).map_err(|e: ValidationError| SynthError::BadFile {
                    path: dir.join("items.jsonl").display().to_string(),
                    reason: format!("{e} line {}", no + 1),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Dataset {
            items,
            queries: read_lines(&dir.join("queries.jsonl"))?,
            users: read_lines(&dir.join("users.jsonl"))?,
            public_visits: read_lines(&dir.join("visits.jsonl"))?,
            gazetteer: read_json(&dir.join("gazetteer.json"))?,
            relations: read_json(&dir.join("relations.json"))?,
            lexicon: read_json(&dir.join("lexicon.json"))?,
            manifest,
        })
    }

    pub fn knowledge_base(&self) -> Result<KnowledgeBase, SynthError> {
        Ok(build_knowledge_base(self.items.clone())?)
    }

    pub fn gazetteer(&self) -> Result<Gazetteer, SynthError> {
        Ok(Gazetteer::from_records(&self.gazetteer)?)
    }

    pub fn public_visit_points(&self) -> Result<Vec<(GeoPoint, u64)>, SynthError> {
        self.public_visits.iter().map(|v| Ok((GeoPoint::new(v.lat, v.lon)?, v.count))).collect()
    }

    pub fn query_time(&self, q: &JudgedQuery) -> Result<TimePoint, SynthError> {
        self.manifest
            .schedule
            .parse_timestamp(&q.time)
            .ok_or_else(|| SynthError::BadFile { path: "queries.jsonl".into(), reason: format!("{}: bad time {:?}", q.id, q.time) })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SynthParams {
        SynthParams { n_items: 300, n_cells: 4, n_queries: 30, n_users: 10, theta_km: 1.0 }
    }

    #[test]
    fn same_seed_same_dataset() {
        assert_eq!(synth_generate(7, small()).unwrap(), synth_generate(7, small()).unwrap());
        assert_ne!(synth_generate(7, small()).unwrap().items, synth_generate(8, small()).unwrap().items);
    }

    #[test]
    fn empty_items_mean_no_queries() {
        let d = synth_generate(1, SynthParams { n_items: 0, ..small() }).unwrap();
        assert!(d.items.is_empty());
        assert!(d.queries.is_empty());
    }

    #[test]
    fn invalid_params() {
        assert!(matches!(synth_generate(1, SynthParams { n_cells: 0, ..small() }), Err(SynthError::InvalidParams(_))));
        assert!(matches!(synth_generate(1, SynthParams { theta_km: -1.0, ..small() }), Err(SynthError::InvalidParams(_))));
    }

    #[test]
    fn every_query_has_a_grade_two_target() {
        let d = synth_generate(3, small()).unwrap();
        assert!(!d.queries.is_empty());
        assert!(d.queries.iter().all(|q| q.judgments.iter().any(|j| j.grade == 2)));
    }
}

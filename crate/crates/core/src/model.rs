//! Domain types shared by every layer, plus item validation and
//! knowledge-base assembly.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use chrono::{DateTime, NaiveDateTime};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::text::normalize;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("OutOfRange({0})")]
    OutOfRange(&'static str),
    #[error("non-finite coordinate")]
    NonFinite,
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("negative timestamp")]
    NegativeTimestamp,
    #[error("invalid day schedule: {0}")]
    InvalidSchedule(String),
    #[error("DuplicateId({0})")]
    DuplicateId(String),
}

/// WGS84 coordinate in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPoint", into = "RawPoint")]
pub struct GeoPoint {
    lat: f64,
    lon: f64,
}

#[derive(Serialize, Deserialize)]
struct RawPoint {
    lat: f64,
    lon: f64,
}

impl TryFrom<RawPoint> for GeoPoint {
    type Error = ModelError;
    fn try_from(raw: RawPoint) -> Result<Self, Self::Error> {
        GeoPoint::new(raw.lat, raw.lon)
    }
}

impl From<GeoPoint> for RawPoint {
    fn from(p: GeoPoint) -> Self {
        RawPoint { lat: p.lat, lon: p.lon }
    }
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Result<Self, ModelError> {
        if !lat.is_finite() || !lon.is_finite() {
            return Err(ModelError::NonFinite);
        }
        if !(-90.0..=90.0).contains(&lat) {
            return Err(ModelError::OutOfRange("lat"));
        }
        if !(-180.0..=180.0).contains(&lon) {
            return Err(ModelError::OutOfRange("lon"));
        }
        Ok(GeoPoint { lat, lon })
    }

    pub fn lat(&self) -> f64 {
        self.lat
    }

    pub fn lon(&self) -> f64 {
        self.lon
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "points", rename_all = "lowercase")]
pub enum Geometry {
    Point(GeoPoint),
    Polyline(Vec<GeoPoint>),
    /// Closed ring: first vertex equals last.
    Polygon(Vec<GeoPoint>),
}

/// A named point, polyline or polygon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeoEntity {
    pub name: String,
    geometry: Geometry,
}

impl GeoEntity {
    pub fn point(name: impl Into<String>, p: GeoPoint) -> Self {
        GeoEntity { name: name.into(), geometry: Geometry::Point(p) }
    }

    pub fn polyline(name: impl Into<String>, vertices: Vec<GeoPoint>) -> Result<Self, ModelError> {
        if vertices.len() < 2 {
            return Err(ModelError::InvalidGeometry("polyline needs at least 2 vertices".into()));
        }
        Ok(GeoEntity { name: name.into(), geometry: Geometry::Polyline(vertices) })
    }

    pub fn polygon(name: impl Into<String>, ring: Vec<GeoPoint>) -> Result<Self, ModelError> {
        if ring.len() < 3 {
            return Err(ModelError::InvalidGeometry("polygon ring needs at least 3 vertices".into()));
        }
        if ring.first() != ring.last() {
            return Err(ModelError::InvalidGeometry("polygon ring is not closed".into()));
        }
        Ok(GeoEntity { name: name.into(), geometry: Geometry::Polygon(ring) })
    }

    pub fn from_geometry(name: impl Into<String>, geometry: Geometry) -> Result<Self, ModelError> {
        match geometry {
            Geometry::Point(p) => Ok(Self::point(name, p)),
            Geometry::Polyline(v) => Self::polyline(name, v),
            Geometry::Polygon(r) => Self::polygon(name, r),
        }
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn vertices(&self) -> &[GeoPoint] {
        match &self.geometry {
            Geometry::Point(p) => std::slice::from_ref(p),
            Geometry::Polyline(v) | Geometry::Polygon(v) => v,
        }
    }
}

/// UTC instant, whole seconds since the Unix epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "i64", into = "i64")]
pub struct TimePoint(i64);

impl TryFrom<i64> for TimePoint {
    type Error = ModelError;
    fn try_from(v: i64) -> Result<Self, Self::Error> {
        TimePoint::new(v)
    }
}

impl From<TimePoint> for i64 {
    fn from(t: TimePoint) -> i64 {
        t.0
    }
}

impl TimePoint {
    pub fn new(epoch_seconds: i64) -> Result<Self, ModelError> {
        if epoch_seconds < 0 {
            return Err(ModelError::NegativeTimestamp);
        }
        Ok(TimePoint(epoch_seconds))
    }

    pub fn epoch_seconds(&self) -> i64 {
        self.0
    }

    /// Circular distance in hours between the times of day of two instants.
    pub fn circular_hours(&self, other: &TimePoint) -> f64 {
        let a = self.0.rem_euclid(86_400);
        let b = other.0.rem_euclid(86_400);
        let d = (a - b).abs();
        d.min(86_400 - d) as f64 / 3600.0
    }
}

pub const MINUTES_PER_DAY: u16 = 1440;

/// Local day windows plus the fixed UTC offset used to derive them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSchedule", into = "RawSchedule")]
pub struct DaySchedule {
    starts: Vec<u16>,
    utc_offset_minutes: i32,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSchedule {
    window_starts: Vec<String>,
    utc_offset_hours: f64,
}

impl TryFrom<RawSchedule> for DaySchedule {
    type Error = ModelError;
    fn try_from(raw: RawSchedule) -> Result<Self, Self::Error> {
        let starts = raw
            .window_starts
            .iter()
            .map(|s| parse_hhmm(s).ok_or_else(|| ModelError::InvalidSchedule(format!("bad time {s:?}"))))
            .collect::<Result<Vec<_>, _>>()?;
        DaySchedule::new(starts, (raw.utc_offset_hours * 60.0).round() as i32)
    }
}

impl From<DaySchedule> for RawSchedule {
    fn from(s: DaySchedule) -> Self {
        RawSchedule {
            window_starts: s.starts.iter().map(|m| format_hhmm(*m)).collect(),
            utc_offset_hours: s.utc_offset_minutes as f64 / 60.0,
        }
    }
}

impl Default for DaySchedule {
    fn default() -> Self {
        DaySchedule { starts: vec![0, 240, 480, 720, 960, 1200], utc_offset_minutes: 8 * 60 }
    }
}

impl DaySchedule {
    pub fn new(starts: Vec<u16>, utc_offset_minutes: i32) -> Result<Self, ModelError> {
        if starts.is_empty() {
            return Err(ModelError::InvalidSchedule("no windows".into()));
        }
        if starts.windows(2).any(|w| w[0] >= w[1]) || starts.iter().any(|&s| s >= MINUTES_PER_DAY) {
            return Err(ModelError::InvalidSchedule("window starts must increase within one day".into()));
        }
        if utc_offset_minutes.abs() > 14 * 60 {
            return Err(ModelError::InvalidSchedule("utc offset beyond ±14h".into()));
        }
        Ok(DaySchedule { starts, utc_offset_minutes })
    }

    pub fn window_count(&self) -> usize {
        self.starts.len()
    }

    pub fn utc_offset_minutes(&self) -> i32 {
        self.utc_offset_minutes
    }

    /// Local minute of day for an instant.
    pub fn local_minute(&self, t: TimePoint) -> u16 {
        let local = t.0 + self.utc_offset_minutes as i64 * 60;
        (local.rem_euclid(86_400) / 60) as u16
    }

    /// Window containing a local minute of day. Minutes before the first
    /// start wrap into the last window.
    pub fn window_of_minute(&self, minute: u16) -> usize {
        match self.starts.iter().rposition(|&s| s <= minute) {
            Some(i) => i,
            None => self.starts.len() - 1,
        }
    }

    pub fn window_of(&self, t: TimePoint) -> usize {
        self.window_of_minute(self.local_minute(t))
    }

    /// Local `[start, end)` minute bounds of window `h` (end may exceed a day
    /// for the wrapping window).
    pub fn window_bounds(&self, h: usize) -> (u16, u16) {
        let start = self.starts[h];
        let end = match self.starts.get(h + 1) {
            Some(&e) => e,
            None => self.starts[0] + MINUTES_PER_DAY,
        };
        (start, end)
    }

    /// Parse `YYYY-MM-DD HH:MM:SS` as local time.
    pub fn parse_timestamp(&self, s: &str) -> Option<TimePoint> {
        let naive = NaiveDateTime::parse_from_str(s.trim(), "%Y-%m-%d %H:%M:%S").ok()?;
        let utc = naive.and_utc().timestamp() - self.utc_offset_minutes as i64 * 60;
        TimePoint::new(utc).ok()
    }

    pub fn format_timestamp(&self, t: TimePoint) -> String {
        let local = t.0 + self.utc_offset_minutes as i64 * 60;
        DateTime::from_timestamp(local, 0)
            .map(|d| d.naive_utc().format("%Y-%m-%d %H:%M:%S").to_string())
            .unwrap_or_default()
    }
}

/// `HH:MM` to minutes. Accepts `24:00` as end of day.
pub fn parse_hhmm(s: &str) -> Option<u16> {
    let (h, m) = s.trim().split_once(':')?;
    if h.len() != 2 || m.len() != 2 {
        return None;
    }
    let h: u16 = h.parse().ok()?;
    let m: u16 = m.parse().ok()?;
    if m >= 60 || h > 24 || (h == 24 && m != 0) {
        return None;
    }
    Some(h * 60 + m)
}

pub fn format_hhmm(minutes: u16) -> String {
    format!("{:02}:{:02}", minutes / 60, minutes % 60)
}

/// Local opening intervals. `start > end` wraps past midnight and
/// `start == end` means open all day.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct OpenHours(pub Vec<(u16, u16)>);

impl OpenHours {
    /// Interval list split into non-wrapping `[a, b)` segments within one day.
    fn segments(&self) -> Vec<(u16, u16)> {
        let mut out = Vec::new();
        for &(s, e) in &self.0 {
            if s == e {
                out.push((0, MINUTES_PER_DAY));
            } else if s < e {
                out.push((s, e));
            } else {
                out.push((s, MINUTES_PER_DAY));
                out.push((0, e));
            }
        }
        out
    }

    pub fn covers(&self, minute: u16) -> bool {
        let minute = minute % MINUTES_PER_DAY;
        self.segments().iter().any(|&(a, b)| a <= minute && minute < b)
    }

    /// Whether any opening interval intersects `[start, end)`; `end` may run
    /// past midnight.
    pub fn overlaps(&self, start: u16, end: u16) -> bool {
        let mut probe = vec![(start, end.min(MINUTES_PER_DAY))];
        if end > MINUTES_PER_DAY {
            probe.push((0, end - MINUTES_PER_DAY));
        }
        self.segments()
            .iter()
            .any(|&(a, b)| probe.iter().any(|&(c, d)| a < d && c < b))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MediaType {
    #[default]
    Text,
    Image,
    Video,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ItemId(pub String);

impl ItemId {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ItemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ItemId {
    fn from(s: &str) -> Self {
        ItemId(s.to_string())
    }
}

/// One geotagged post, place or event.
#[derive(Debug, Clone, PartialEq)]
pub struct InfoItem {
    pub id: ItemId,
    pub title: String,
    pub content: String,
    pub timestamp: TimePoint,
    pub author: String,
    pub verified: bool,
    pub likes: u64,
    pub comments: u64,
    pub tags: BTreeSet<String>,
    pub location_name: String,
    pub position: GeoPoint,
    pub media_type: MediaType,
    pub original: bool,
    pub open_hours: Option<OpenHours>,
    pub attributes: BTreeMap<String, u64>,
}

impl InfoItem {
    /// Minimal item with defaults for every optional field.
    pub fn new(id: impl Into<String>, content: impl Into<String>, timestamp: TimePoint, position: GeoPoint) -> Self {
        InfoItem {
            id: ItemId(id.into()),
            title: String::new(),
            content: content.into(),
            timestamp,
            author: String::new(),
            verified: false,
            likes: 0,
            comments: 0,
            tags: BTreeSet::new(),
            location_name: String::new(),
            position,
            media_type: MediaType::Text,
            original: true,
            open_hours: None,
            attributes: BTreeMap::new(),
        }
    }

    /// Open-hours check. Items without hours are treated as always open.
    pub fn is_open_at(&self, local_minute: u16) -> bool {
        self.open_hours.as_ref().is_none_or(|h| h.covers(local_minute))
    }

    pub fn searchable_text(&self) -> String {
        format!("{} {}", self.title, self.content)
    }
}

/// User state: position, current time, and visit history.
#[derive(Debug, Clone, PartialEq)]
pub struct UserContext {
    pub user_id: String,
    pub position: GeoPoint,
    pub time: TimePoint,
    pub visited: Vec<Visit>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Visit {
    pub position: GeoPoint,
    pub time: TimePoint,
    count: u32,
}

impl Visit {
    pub fn new(position: GeoPoint, time: TimePoint, count: u32) -> Result<Self, ModelError> {
        if count == 0 {
            return Err(ModelError::OutOfRange("visit_count"));
        }
        Ok(Visit { position, time, count })
    }

    pub fn count(&self) -> u32 {
        self.count
    }
}

/// Tag to functional-attribute mapping applied when an item carries no
/// explicit attribute counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AttributeLexicon {
    pub map: BTreeMap<String, String>,
    /// Tags missing from `map` count as their own attribute.
    pub passthrough: bool,
}

impl Default for AttributeLexicon {
    fn default() -> Self {
        AttributeLexicon { map: BTreeMap::new(), passthrough: true }
    }
}

impl AttributeLexicon {
    pub fn derive(&self, tags: &BTreeSet<String>) -> BTreeMap<String, u64> {
        let mut out = BTreeMap::new();
        for tag in tags {
            let attr = match self.map.get(tag) {
                Some(a) => a.clone(),
                None if self.passthrough => tag.clone(),
                None => continue,
            };
            *out.entry(attr).or_insert(0) += 1;
        }
        out
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ValidationError {
    #[error("MissingField({0})")]
    MissingField(&'static str),
    #[error("OutOfRange({0})")]
    OutOfRange(&'static str),
    #[error("BadTimestamp({0})")]
    BadTimestamp(String),
    #[error("BadField({field}): {reason}")]
    BadField { field: &'static str, reason: String },
}

pub const ITEM_KEYS: [&str; 16] = [
    "id",
    "title",
    "content",
    "timestamp",
    "author",
    "verified",
    "likes",
    "comments",
    "tags",
    "location_name",
    "latitude",
    "longitude",
    "media_type",
    "original",
    "open_hours",
    "attributes",
];

fn string_field(raw: &Map<String, Value>, field: &'static str) -> Result<Option<String>, ValidationError> {
    match raw.get(field) {
        None | Some(Value::Null) => Ok(None),
        Some(Value::String(s)) => Ok(Some(s.clone())),
        Some(other) => Err(ValidationError::BadField { field, reason: format!("expected string, got {other}") }),
    }
}

fn number_field(raw: &Map<String, Value>, names: &[&'static str]) -> Result<Option<f64>, ValidationError> {
    for &name in names {
        match raw.get(name) {
            None | Some(Value::Null) => continue,
            Some(v) => {
                return v
                    .as_f64()
                    .map(Some)
                    .ok_or_else(|| ValidationError::BadField { field: names[0], reason: format!("expected number, got {v}") })
            }
        }
    }
    Ok(None)
}

fn count_field(raw: &Map<String, Value>, field: &'static str) -> Result<u64, ValidationError> {
    match raw.get(field) {
        None | Some(Value::Null) => Ok(0),
        Some(v) => match v.as_u64() {
            Some(n) => Ok(n),
            None if v.as_i64().is_some() || v.as_f64().is_some() => Err(ValidationError::OutOfRange(field)),
            None => Err(ValidationError::BadField { field, reason: format!("expected count, got {v}") }),
        },
    }
}

fn bool_field(raw: &Map<String, Value>, field: &'static str, default: bool) -> Result<bool, ValidationError> {
    match raw.get(field) {
        None | Some(Value::Null) => Ok(default),
        Some(Value::Bool(b)) => Ok(*b),
        Some(other) => Err(ValidationError::BadField { field, reason: format!("expected boolean, got {other}") }),
    }
}

/// Validate one JSON object against the item schema.
///
/// Unknown keys are logged and ignored. `lat`/`lon` are accepted as aliases
/// for `latitude`/`longitude`; tags are normalized to lowercase token form.
pub fn validate_item(
    raw: &Map<String, Value>,
    schedule: &DaySchedule,
    lexicon: &AttributeLexicon,
) -> Result<InfoItem, ValidationError> {
    for key in raw.keys() {
        if !ITEM_KEYS.contains(&key.as_str()) && key != "lat" && key != "lon" {
            tracing::warn!(key = key.as_str(), "ignoring unknown item key");
        }
    }

    let id = string_field(raw, "id")?.filter(|s| !s.trim().is_empty()).ok_or(ValidationError::MissingField("id"))?;
    let content = string_field(raw, "content")?.ok_or(ValidationError::MissingField("content"))?;
    let ts_raw = match raw.get("timestamp") {
        None | Some(Value::Null) => return Err(ValidationError::MissingField("timestamp")),
        Some(Value::String(s)) => s.clone(),
        Some(other) => return Err(ValidationError::BadTimestamp(other.to_string())),
    };
    let timestamp = schedule.parse_timestamp(&ts_raw).ok_or(ValidationError::BadTimestamp(ts_raw))?;
    let lat = number_field(raw, &["latitude", "lat"])?.ok_or(ValidationError::MissingField("latitude"))?;
    let lon = number_field(raw, &["longitude", "lon"])?.ok_or(ValidationError::MissingField("longitude"))?;
    let position = GeoPoint::new(lat, lon).map_err(|e| match e {
        ModelError::OutOfRange(f) => ValidationError::OutOfRange(f),
        _ => ValidationError::OutOfRange(if lat.is_finite() { "lon" } else { "lat" }),
    })?;

    let tags = match raw.get("tags") {
        None | Some(Value::Null) => BTreeSet::new(),
        Some(Value::Array(xs)) => xs
            .iter()
            .map(|t| {
                t.as_str()
                    .map(normalize)
                    .ok_or_else(|| ValidationError::BadField { field: "tags", reason: format!("non-string tag {t}") })
            })
            .filter(|t| !matches!(t, Ok(s) if s.is_empty()))
            .collect::<Result<_, _>>()?,
        Some(other) => return Err(ValidationError::BadField { field: "tags", reason: format!("expected array, got {other}") }),
    };

    let media_type = match string_field(raw, "media_type")?.as_deref() {
        None | Some("text") => MediaType::Text,
        Some("image") => MediaType::Image,
        Some("video") => MediaType::Video,
        Some(other) => return Err(ValidationError::BadField { field: "media_type", reason: format!("unknown media type {other:?}") }),
    };

    let open_hours = match raw.get("open_hours") {
        None | Some(Value::Null) => None,
        Some(Value::Array(pairs)) => {
            let bad = |p: &Value| ValidationError::BadField { field: "open_hours", reason: format!("expected [\"HH:MM\",\"HH:MM\"], got {p}") };
            let mut out = Vec::with_capacity(pairs.len());
            for p in pairs {
                let pair = p.as_array().filter(|a| a.len() == 2).ok_or_else(|| bad(p))?;
                let s = pair[0].as_str().and_then(parse_hhmm).ok_or_else(|| bad(p))?;
                let e = pair[1].as_str().and_then(parse_hhmm).ok_or_else(|| bad(p))?;
                out.push((s % MINUTES_PER_DAY, e));
            }
            Some(OpenHours(out))
        }
        Some(other) => return Err(ValidationError::BadField { field: "open_hours", reason: format!("expected array, got {other}") }),
    };

    let attributes = match raw.get("attributes") {
        None | Some(Value::Null) => lexicon.derive(&tags),
        Some(Value::Object(m)) => {
            let mut out = BTreeMap::new();
            for (k, v) in m {
                let n = v.as_u64().ok_or(ValidationError::OutOfRange("attributes"))?;
                out.insert(normalize(k), n);
            }
            out
        }
        Some(other) => return Err(ValidationError::BadField { field: "attributes", reason: format!("expected object, got {other}") }),
    };

    Ok(InfoItem {
        id: ItemId(id),
        title: string_field(raw, "title")?.unwrap_or_default(),
        content,
        timestamp,
        author: string_field(raw, "author")?.unwrap_or_default(),
        verified: bool_field(raw, "verified", false)?,
        likes: count_field(raw, "likes")?,
        comments: count_field(raw, "comments")?,
        tags,
        location_name: string_field(raw, "location_name")?.unwrap_or_default(),
        position,
        media_type,
        original: bool_field(raw, "original", true)?,
        open_hours,
        attributes,
    })
}

/// Serialize an item to the JSON Lines object format.
pub fn item_to_json(item: &InfoItem, schedule: &DaySchedule) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("id".into(), Value::from(item.id.0.clone()));
    m.insert("title".into(), Value::from(item.title.clone()));
    m.insert("content".into(), Value::from(item.content.clone()));
    m.insert("timestamp".into(), Value::from(schedule.format_timestamp(item.timestamp)));
    m.insert("author".into(), Value::from(item.author.clone()));
    m.insert("verified".into(), Value::from(item.verified));
    m.insert("likes".into(), Value::from(item.likes));
    m.insert("comments".into(), Value::from(item.comments));
    m.insert("tags".into(), Value::from(item.tags.iter().cloned().collect::<Vec<_>>()));
    m.insert("location_name".into(), Value::from(item.location_name.clone()));
    m.insert("latitude".into(), Value::from(item.position.lat()));
    m.insert("longitude".into(), Value::from(item.position.lon()));
    let media = match item.media_type {
        MediaType::Text => "text",
        MediaType::Image => "image",
        MediaType::Video => "video",
    };
    m.insert("media_type".into(), Value::from(media));
    m.insert("original".into(), Value::from(item.original));
    let hours = match &item.open_hours {
        None => Value::Null,
        Some(h) => Value::Array(
            h.0.iter()
                .map(|&(s, e)| Value::Array(vec![Value::from(format_hhmm(s)), Value::from(format_hhmm(e))]))
                .collect(),
        ),
    };
    m.insert("open_hours".into(), hours);
    m.insert(
        "attributes".into(),
        Value::Object(item.attributes.iter().map(|(k, v)| (k.clone(), Value::from(*v))).collect()),
    );
    m
}

/// Immutable, versioned item collection. Every mutation yields a new value
/// with a strictly larger version.
#[derive(Debug, Clone, PartialEq)]
pub struct KnowledgeBase {
    items: BTreeMap<ItemId, InfoItem>,
    version: u64,
}

pub fn build_knowledge_base(items: Vec<InfoItem>) -> Result<KnowledgeBase, ModelError> {
    KnowledgeBase::empty().extended(items).map(|mut kb| {
        kb.version = 1;
        kb
    })
}

impl KnowledgeBase {
    fn empty() -> Self {
        KnowledgeBase { items: BTreeMap::new(), version: 0 }
    }

    /// Reload a persisted snapshot under its recorded version.
    pub fn restore(items: Vec<InfoItem>, version: u64) -> Result<KnowledgeBase, ModelError> {
        if version == 0 {
            return Err(ModelError::OutOfRange("version"));
        }
        let mut kb = KnowledgeBase::empty().extended(items)?;
        kb.version = version;
        Ok(kb)
    }

    /// New version containing this version's items plus `items`.
    pub fn extended(&self, items: Vec<InfoItem>) -> Result<KnowledgeBase, ModelError> {
        let mut next = self.items.clone();
        for item in items {
            if next.contains_key(&item.id) {
                return Err(ModelError::DuplicateId(item.id.0));
            }
            next.insert(item.id.clone(), item);
        }
        Ok(KnowledgeBase { items: next, version: self.version + 1 })
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn get(&self, id: &ItemId) -> Option<&InfoItem> {
        self.items.get(id)
    }

    pub fn contains(&self, id: &ItemId) -> bool {
        self.items.contains_key(id)
    }

    /// Items in ascending id order.
    pub fn items(&self) -> impl Iterator<Item = &InfoItem> {
        self.items.values()
    }

    pub fn ids(&self) -> BTreeSet<ItemId> {
        self.items.keys().cloned().collect()
    }
}

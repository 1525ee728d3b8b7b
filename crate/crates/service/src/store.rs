//! On-disk snapshots: the validated item file plus a manifest, and the
//! optional resource files that sit next to them.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use asknearby_core::graph::Relations;
use asknearby_core::model::{item_to_json, validate_item, AttributeLexicon, DaySchedule, Visit};
use asknearby_core::pipeline::{Gazetteer, IntentLexicon};
use asknearby_core::{GeoPoint, KnowledgeBase, Resources};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const ITEMS_FILE: &str = "items.jsonl";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {reason}")]
    Corrupt { path: PathBuf, reason: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io { path: path.to_path_buf(), source }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub version: u64,
    pub config_hash: String,
    pub items: usize,
}

/// Write to a sibling temp file, then rename over the target.
fn write_atomic(path: &Path, fill: impl FnOnce(&mut BufWriter<fs::File>) -> std::io::Result<()>) -> Result<(), StoreError> {
    let tmp = path.with_extension("tmp");
    let file = fs::File::create(&tmp).map_err(io_err(&tmp))?;
    let mut w = BufWriter::new(file);
    fill(&mut w).and_then(|_| w.flush()).map_err(io_err(&tmp))?;
    drop(w);
    fs::rename(&tmp, path).map_err(io_err(path))
}

pub fn save_snapshot(dir: &Path, kb: &KnowledgeBase, schedule: &DaySchedule, config_hash: &str) -> Result<(), StoreError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    write_atomic(&dir.join(ITEMS_FILE), |w| {
        for item in kb.items() {
            serde_json::to_writer(&mut *w, &item_to_json(item, schedule))?;
            w.write_all(b"\n")?;
        }
        Ok(())
    })?;
    // The manifest goes last: a reader that sees it sees the matching items.
    let manifest = Manifest { version: kb.version(), config_hash: config_hash.to_string(), items: kb.len() };
    write_atomic(&dir.join(MANIFEST_FILE), |w| {
        serde_json::to_writer_pretty(&mut *w, &manifest)?;
        w.write_all(b"\n")
    })
}

/// The persisted kb, or `None` when the directory holds no snapshot yet.
pub fn load_snapshot(
    dir: &Path,
    schedule: &DaySchedule,
    attributes: &AttributeLexicon,
    config_hash: &str,
) -> Result<Option<KnowledgeBase>, StoreError> {
    let mpath = dir.join(MANIFEST_FILE);
    if !mpath.exists() {
        return Ok(None);
    }
    let manifest: Manifest = read_json(&mpath)?;
    if manifest.config_hash != config_hash {
        tracing::warn!(stored = manifest.config_hash.as_str(), current = config_hash, "snapshot written under different engine settings; rebuilding indexes");
    }
    let ipath = dir.join(ITEMS_FILE);
    let text = fs::read_to_string(&ipath).map_err(io_err(&ipath))?;
    let corrupt = |reason: String| StoreError::Corrupt { path: ipath.clone(), reason };
    let mut items = Vec::with_capacity(manifest.items);
    for (no, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let raw: serde_json::Map<String, serde_json::Value> =
            serde_json::from_str(line).map_err(|e| corrupt(format!("line {}: {e}", no + 1)))?;
        items.push(validate_item(&raw, schedule, attributes).map_err(|e| corrupt(format!("line {}: {e}", no + 1)))?);
    }
    if items.len() != manifest.items {
        return Err(corrupt(format!("manifest lists {} items, file has {}", manifest.items, items.len())));
    }
    KnowledgeBase::restore(items, manifest.version).map(Some).map_err(|e| corrupt(e.to_string()))
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, StoreError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| StoreError::Corrupt { path: path.into(), reason: e.to_string() })
}

fn read_optional_json<T: DeserializeOwned + Default>(path: &Path) -> Result<T, StoreError> {
    if path.exists() {
        read_json(path)
    } else {
        Ok(T::default())
    }
}

fn read_optional_lines<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, StoreError> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(no, l)| {
            serde_json::from_str(l).map_err(|e| StoreError::Corrupt { path: path.into(), reason: format!("line {}: {e}", no + 1) })
        })
        .collect()
}

#[derive(Deserialize)]
struct VisitCount {
    lat: f64,
    lon: f64,
    count: u64,
}

/// Gazetteer, lexicons, relations and public visits. Missing files fall back
/// to empty tables.
pub fn load_resources(dir: &Path, attributes: AttributeLexicon) -> Result<Resources, StoreError> {
    let gpath = dir.join("gazetteer.json");
    let gazetteer = if gpath.exists() {
        let text = fs::read_to_string(&gpath).map_err(io_err(&gpath))?;
        Gazetteer::from_json(&text).map_err(|e| StoreError::Corrupt { path: gpath.clone(), reason: e.to_string() })?
    } else {
        Gazetteer::default()
    };
    let lexicon: IntentLexicon = read_optional_json(&dir.join("lexicon.json"))?;
    let relations: Relations = read_optional_json(&dir.join("relations.json"))?;
    let vpath = dir.join("visits.jsonl");
    let public_visits = read_optional_lines::<VisitCount>(&vpath)?
        .into_iter()
        .map(|v| {
            GeoPoint::new(v.lat, v.lon)
                .map(|p| (p, v.count))
                .map_err(|e| StoreError::Corrupt { path: vpath.clone(), reason: e.to_string() })
        })
        .collect::<Result<_, _>>()?;
    Ok(Resources { gazetteer, lexicon, relations, attributes, public_visits })
}

#[derive(Debug, Clone, Deserialize)]
struct VisitLine {
    lat: f64,
    lon: f64,
    time: String,
    count: u32,
}

#[derive(Debug, Clone, Deserialize)]
struct UserLine {
    user_id: String,
    #[serde(default)]
    visited: Vec<VisitLine>,
}

/// Visit histories keyed by user id, from `users.jsonl`.
pub fn load_users(dir: &Path, schedule: &DaySchedule) -> Result<BTreeMap<String, Vec<Visit>>, StoreError> {
    let path = dir.join("users.jsonl");
    let corrupt = |reason: String| StoreError::Corrupt { path: path.clone(), reason };
    let mut out = BTreeMap::new();
    for u in read_optional_lines::<UserLine>(&path)? {
        let visits = u
            .visited
            .iter()
            .map(|v| {
                let t = schedule.parse_timestamp(&v.time).ok_or_else(|| corrupt(format!("{}: bad time {:?}", u.user_id, v.time)))?;
                let p = GeoPoint::new(v.lat, v.lon).map_err(|e| corrupt(format!("{}: {e}", u.user_id)))?;
                Visit::new(p, t, v.count).map_err(|e| corrupt(format!("{}: {e}", u.user_id)))
            })
            .collect::<Result<Vec<_>, _>>()?;
        out.insert(u.user_id, visits);
    }
    Ok(out)
}

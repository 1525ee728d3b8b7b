//! Great-circle distances, a uniform grid index, and the radius filter used
//! by the geographic retrieval layer.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::Exec;
use crate::model::{GeoEntity, GeoPoint, Geometry, ItemId, KnowledgeBase};

/// Mean Earth radius in kilometers.
pub const EARTH_RADIUS_KM: f64 = 6371.0088;

/// Maximum arc length between samples along polyline and polygon edges.
pub const EDGE_SAMPLE_STEP_KM: f64 = 0.010;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeoError {
    #[error("DegenerateGeometry({0})")]
    DegenerateGeometry(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
}

pub fn haversine(a: GeoPoint, b: GeoPoint) -> f64 {
    let (phi1, phi2) = (a.lat().to_radians(), b.lat().to_radians());
    let dphi = phi2 - phi1;
    let dlambda = (b.lon() - a.lon()).to_radians();
    let h = (dphi / 2.0).sin().powi(2) + phi1.cos() * phi2.cos() * (dlambda / 2.0).sin().powi(2);
    let h = h.clamp(0.0, 1.0);
    2.0 * EARTH_RADIUS_KM * h.sqrt().atan2((1.0 - h).sqrt())
}

fn wrap_lon_delta(d: f64) -> f64 {
    if d > 180.0 {
        d - 360.0
    } else if d < -180.0 {
        d + 360.0
    } else {
        d
    }
}

fn lerp(a: GeoPoint, b: GeoPoint, t: f64) -> GeoPoint {
    let lat = a.lat() + (b.lat() - a.lat()) * t;
    let mut lon = a.lon() + wrap_lon_delta(b.lon() - a.lon()) * t;
    if lon > 180.0 {
        lon -= 360.0;
    } else if lon < -180.0 {
        lon += 360.0;
    }
    // Interpolating between valid points stays in range.
    GeoPoint::new(lat, lon).expect("interpolated point in range")
}

/// Minimum distance from `p` to samples along segment `a`-`b`, spaced at
/// most [`EDGE_SAMPLE_STEP_KM`] apart and always including both endpoints.
///
/// Equal to scanning every sample, but intervals whose Lipschitz lower bound
/// cannot beat the best sample so far are skipped.
fn segment_distance(a: GeoPoint, b: GeoPoint, p: GeoPoint) -> f64 {
    let len = haversine(a, b);
    let steps = (len / EDGE_SAMPLE_STEP_KM).ceil().max(1.0) as usize;
    let at = |i: usize| haversine(lerp(a, b, i as f64 / steps as f64), p);
    if steps <= 16 {
        return (0..=steps).map(at).fold(f64::INFINITY, f64::min);
    }
    // Adjacent samples are no further apart than the lon/lat path length per step.
    let dphi = (b.lat() - a.lat()).to_radians();
    let dlambda = wrap_lon_delta(b.lon() - a.lon()).to_radians();
    let lip = EARTH_RADIUS_KM * dphi.hypot(dlambda) / steps as f64 * (1.0 + 1e-9) + 1e-12;

    let (d0, dn) = (at(0), at(steps));
    let mut best = d0.min(dn);
    let mut stack = vec![(0usize, steps, d0, dn)];
    while let Some((i, j, di, dj)) = stack.pop() {
        if j - i < 2 {
            continue;
        }
        let bound = (di + dj - (j - i) as f64 * lip) / 2.0;
        if bound > best {
            continue;
        }
        let m = (i + j) / 2;
        let dm = at(m);
        best = best.min(dm);
        stack.push((i, m, di, dm));
        stack.push((m, j, dm, dj));
    }
    best
}

fn path_distance(vertices: &[GeoPoint], p: GeoPoint) -> f64 {
    vertices
        .windows(2)
        .filter(|w| w[0] != w[1])
        .map(|w| segment_distance(w[0], w[1], p))
        .fold(f64::INFINITY, f64::min)
}

/// Even-odd containment test on raw lon/lat.
fn ring_contains(ring: &[GeoPoint], p: GeoPoint) -> bool {
    let (x, y) = (p.lon(), p.lat());
    let mut inside = false;
    for w in ring.windows(2) {
        let (xi, yi) = (w[0].lon(), w[0].lat());
        let (xj, yj) = (w[1].lon(), w[1].lat());
        if (yi > y) != (yj > y) {
            let x_cross = xi + (y - yi) / (yj - yi) * (xj - xi);
            if x < x_cross {
                inside = !inside;
            }
        }
    }
    inside
}

fn distinct_vertices(vs: &[GeoPoint]) -> usize {
    let mut seen: Vec<GeoPoint> = Vec::new();
    for v in vs {
        if !seen.contains(v) {
            seen.push(*v);
        }
    }
    seen.len()
}

/// Reject geometries whose distance is undefined.
pub fn check_geometry(g: &GeoEntity) -> Result<(), GeoError> {
    match g.geometry() {
        Geometry::Point(_) => Ok(()),
        Geometry::Polyline(vs) if distinct_vertices(vs) < 2 => {
            Err(GeoError::DegenerateGeometry(format!("zero-length polyline {:?}", g.name)))
        }
        Geometry::Polygon(ring) if distinct_vertices(ring) < 3 => {
            Err(GeoError::DegenerateGeometry(format!("polygon {:?} has fewer than 3 distinct vertices", g.name)))
        }
        _ => Ok(()),
    }
}

/// Distance in km from a geometry to a point. Polygon interiors are at
/// distance zero.
pub fn geometry_distance(g: &GeoEntity, p: GeoPoint) -> Result<f64, GeoError> {
    check_geometry(g)?;
    Ok(match g.geometry() {
        Geometry::Point(q) => {
            if *q == p {
                0.0
            } else {
                haversine(*q, p)
            }
        }
        Geometry::Polyline(vs) => path_distance(vs, p),
        Geometry::Polygon(ring) => {
            if ring_contains(ring, p) {
                0.0
            } else {
                path_distance(ring, p)
            }
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeoFilterConfig {
    pub theta_km: f64,
}

impl Default for GeoFilterConfig {
    fn default() -> Self {
        GeoFilterConfig { theta_km: 1.0 }
    }
}

impl GeoFilterConfig {
    pub fn new(theta_km: f64) -> Result<Self, GeoError> {
        let cfg = GeoFilterConfig { theta_km };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), GeoError> {
        if self.theta_km.is_finite() && self.theta_km > 0.0 {
            Ok(())
        } else {
            Err(GeoError::InvalidConfig(format!("theta_km must be > 0, got {}", self.theta_km)))
        }
    }
}

pub type CellId = (i64, i64);

/// Grid cell of a point: `(floor(lon / size), floor(lat / size))`.
pub fn cell_of(p: GeoPoint, cell_size_deg: f64) -> CellId {
    ((p.lon() / cell_size_deg).floor() as i64, (p.lat() / cell_size_deg).floor() as i64)
}

/// Uniform lon/lat grid over item positions.
#[derive(Debug, Clone)]
pub struct SpatialIndex {
    cell_size_deg: f64,
    cells: HashMap<CellId, Vec<ItemId>>,
    positions: HashMap<ItemId, GeoPoint>,
}

pub const DEFAULT_CELL_SIZE_DEG: f64 = 0.01;

impl SpatialIndex {
    pub fn build(kb: &KnowledgeBase, cell_size_deg: f64) -> Result<Self, GeoError> {
        if !(cell_size_deg.is_finite() && cell_size_deg > 0.0) {
            return Err(GeoError::InvalidConfig(format!("cell_size_deg must be > 0, got {cell_size_deg}")));
        }
        let mut cells: HashMap<CellId, Vec<ItemId>> = HashMap::new();
        let mut positions = HashMap::with_capacity(kb.len());
        for item in kb.items() {
            cells.entry(cell_of(item.position, cell_size_deg)).or_default().push(item.id.clone());
            positions.insert(item.id.clone(), item.position);
        }
        Ok(SpatialIndex { cell_size_deg, cells, positions })
    }

    pub fn cell_size_deg(&self) -> f64 {
        self.cell_size_deg
    }

    pub fn position(&self, id: &ItemId) -> Option<GeoPoint> {
        self.positions.get(id).copied()
    }

    pub fn cell_items(&self, cell: CellId) -> &[ItemId] {
        self.cells.get(&cell).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn occupied_cells(&self) -> impl Iterator<Item = &CellId> {
        self.cells.keys()
    }

    /// Ids in every cell that can hold a point within `radius_km` of `g`:
    /// the geometry's bounding box grown by the radius, plus one cell.
    pub fn candidates_near(&self, g: &GeoEntity, radius_km: f64) -> Vec<ItemId> {
        let vs = g.vertices();
        let (mut lat_lo, mut lat_hi) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut lon_lo, mut lon_hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in vs {
            lat_lo = lat_lo.min(v.lat());
            lat_hi = lat_hi.max(v.lat());
            lon_lo = lon_lo.min(v.lon());
            lon_hi = lon_hi.max(v.lon());
        }
        let r = radius_km / EARTH_RADIUS_KM;
        let dlat = r.to_degrees();
        let (lat_lo, lat_hi) = (lat_lo - dlat, lat_hi + dlat);
        let mut all_lon = lat_lo <= -90.0 || lat_hi >= 90.0 || r >= std::f64::consts::FRAC_PI_2;
        let mut dlon = 0.0;
        if !all_lon {
            let cos_ext = lat_lo.abs().max(lat_hi.abs()).to_radians().cos();
            if r.sin() >= cos_ext {
                all_lon = true;
            } else {
                dlon = (r.sin() / cos_ext).asin().to_degrees();
            }
        }
        let (lon_lo, lon_hi) = (lon_lo - dlon, lon_hi + dlon);
        // Edges that wrap the antimeridian leave the raw vertex box.
        let wraps = vs.windows(2).any(|w| (w[1].lon() - w[0].lon()).abs() > 180.0);
        if lon_lo < -180.0 || lon_hi > 180.0 || wraps {
            all_lon = true;
        }

        let s = self.cell_size_deg;
        let y_lo = (lat_lo.max(-90.0) / s).floor() as i64 - 1;
        let y_hi = (lat_hi.min(90.0) / s).floor() as i64 + 1;
        let (x_lo, x_hi) = if all_lon {
            (i64::MIN, i64::MAX)
        } else {
            ((lon_lo / s).floor() as i64 - 1, (lon_hi / s).floor() as i64 + 1)
        };
        let in_range = |c: &CellId| c.0 >= x_lo && c.0 <= x_hi && c.1 >= y_lo && c.1 <= y_hi;

        let span = if all_lon {
            u128::MAX
        } else {
            (x_hi - x_lo + 1) as u128 * (y_hi - y_lo + 1) as u128
        };
        let mut out = Vec::new();
        if span > self.cells.len() as u128 {
            for (cell, ids) in &self.cells {
                if in_range(cell) {
                    out.extend(ids.iter().cloned());
                }
            }
        } else {
            for x in x_lo..=x_hi {
                for y in y_lo..=y_hi {
                    if let Some(ids) = self.cells.get(&(x, y)) {
                        out.extend(ids.iter().cloned());
                    }
                }
            }
        }
        out
    }
}

/// Resolve the filter anchor: the query location if present, else the user.
pub fn anchor(loc: Option<&GeoEntity>, s_u: GeoPoint) -> GeoEntity {
    match loc {
        Some(g) => g.clone(),
        None => GeoEntity::point("user", s_u),
    }
}

/// `{ s in candidates : dist(Loc, s) < theta }` with `Loc = loc` when given,
/// otherwise the user position.
pub fn geo_filter(
    loc: Option<&GeoEntity>,
    s_u: GeoPoint,
    candidates: &BTreeSet<ItemId>,
    cfg: &GeoFilterConfig,
    index: &SpatialIndex,
    exec: Exec,
) -> Result<BTreeSet<ItemId>, GeoError> {
    within(&anchor(loc, s_u), candidates, cfg, index, exec)
}

/// Candidates strictly closer than `theta` to `target`. Grid pruning first,
/// exact distances second.
pub fn within(
    target: &GeoEntity,
    candidates: &BTreeSet<ItemId>,
    cfg: &GeoFilterConfig,
    index: &SpatialIndex,
    exec: Exec,
) -> Result<BTreeSet<ItemId>, GeoError> {
    cfg.validate()?;
    check_geometry(target)?;
    if candidates.is_empty() {
        return Ok(BTreeSet::new());
    }
    let near = index.candidates_near(target, cfg.theta_km);
    let pool: Vec<ItemId> = if candidates.len() < near.len() {
        candidates.iter().cloned().collect()
    } else {
        near.into_iter().filter(|id| candidates.contains(id)).collect()
    };
    let kept = exec.filter_map(&pool, |id| {
        let p = index.position(id)?;
        // check_geometry passed above, so distance is total here.
        let d = geometry_distance(target, p).ok()?;
        (d < cfg.theta_km).then(|| id.clone())
    });
    Ok(kept.into_iter().collect())
}

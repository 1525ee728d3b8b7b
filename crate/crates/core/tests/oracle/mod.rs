//! Brute-force reference implementations, written without reusing engine
//! internals.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use asknearby_core::model::{InfoItem, UserContext};

pub const R_KM: f64 = 6371.0088;

/// Great-circle distance from the chord between unit vectors.
pub fn chord_distance(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> f64 {
    let v = |lat: f64, lon: f64| {
        let (p, l) = (lat.to_radians(), lon.to_radians());
        [p.cos() * l.cos(), p.cos() * l.sin(), p.sin()]
    };
    let (a, b) = (v(lat1, lon1), v(lat2, lon2));
    let c = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt();
    2.0 * R_KM * (c / 2.0).min(1.0).asin()
}

pub fn item_distance(a: &InfoItem, lat: f64, lon: f64) -> f64 {
    chord_distance(a.position.lat(), a.position.lon(), lat, lon)
}

/// Distance to a vertex path by visiting every sample at <= 10 m spacing
/// along each lon/lat-linear edge (shorter way around in longitude).
pub fn path_distance(vertices: &[(f64, f64)], lat: f64, lon: f64) -> f64 {
    let mut best = f64::INFINITY;
    for w in vertices.windows(2) {
        let ((la0, lo0), (la1, lo1)) = (w[0], w[1]);
        if (la0, lo0) == (la1, lo1) {
            continue;
        }
        let mut dlo = lo1 - lo0;
        if dlo > 180.0 {
            dlo -= 360.0;
        } else if dlo < -180.0 {
            dlo += 360.0;
        }
        let steps = (chord_distance(la0, lo0, la1, lo1) / 0.010).ceil().max(1.0) as usize;
        for i in 0..=steps {
            let t = i as f64 / steps as f64;
            best = best.min(chord_distance(la0 + (la1 - la0) * t, lo0 + dlo * t, lat, lon));
        }
    }
    best
}

/// Even-odd ray cast on raw lon/lat.
pub fn inside_ring(ring: &[(f64, f64)], lat: f64, lon: f64) -> bool {
    let mut inside = false;
    for w in ring.windows(2) {
        let ((yi, xi), (yj, xj)) = (w[0], w[1]);
        if (yi > lat) != (yj > lat) && lon < xi + (lat - yi) / (yj - yi) * (xj - xi) {
            inside = !inside;
        }
    }
    inside
}

// ---- ranking metrics ----

pub fn precision(ranked: &[u32], relevant: &BTreeSet<u32>, k: usize) -> f64 {
    let mut hits = 0.0;
    for i in 0..k {
        if let Some(r) = ranked.get(i) {
            if relevant.iter().any(|x| x == r) {
                hits += 1.0;
            }
        }
    }
    hits / k as f64
}

fn dcg(grades: &[u8], k: usize) -> f64 {
    let mut s = 0.0;
    for (i, g) in grades.iter().enumerate() {
        if i >= k {
            break;
        }
        let rank = (i + 1) as f64;
        s += ((1u32 << *g) as f64 - 1.0) / (rank + 1.0).log2();
    }
    s
}

/// IDCG built by placing grade counts in bucket order.
pub fn ndcg(grades: &[u8], k: usize) -> f64 {
    let mut ideal = Vec::new();
    for g in [2u8, 1, 0] {
        ideal.extend(grades.iter().filter(|x| **x == g));
    }
    let idcg = dcg(&ideal, k);
    if idcg == 0.0 {
        0.0
    } else {
        dcg(grades, k) / idcg
    }
}

pub fn hit(ranked: &[u32], truth: &BTreeSet<u32>, k: usize) -> f64 {
    for r in ranked.iter().take(k) {
        if truth.contains(r) {
            return 1.0;
        }
    }
    0.0
}

pub fn reciprocal_rank(ranked: &[u32], truth: &BTreeSet<u32>) -> f64 {
    for (i, r) in ranked.iter().enumerate() {
        if truth.contains(r) {
            return 1.0 / (i as f64 + 1.0);
        }
    }
    0.0
}

/// Minute-by-minute open check.
pub fn open_at(item: &InfoItem, minute: u16) -> bool {
    let Some(h) = &item.open_hours else { return true };
    h.0.iter().any(|&(s, e)| {
        let s = u32::from(s) % 1440;
        let e = u32::from(e);
        let m = u32::from(minute);
        if s == e % 1440 {
            true
        } else if s < e && e <= 1440 {
            s <= m && m < e
        } else {
            m >= s || m < e % 1440
        }
    })
}

pub fn str_point(item: &InfoItem, lat: f64, lon: f64, theta: f64, minute: Option<u16>) -> f64 {
    let near = item_distance(item, lat, lon) < theta;
    let open = match minute {
        None => true,
        Some(m) => open_at(item, m),
    };
    if near && open {
        1.0
    } else {
        0.0
    }
}

// ---- graph ----

/// Node labels are `item:`, `place:` and `tag:` prefixed strings.
pub struct OracleGraph {
    pub edges: Vec<(String, String, &'static str)>,
    pub aliases: BTreeMap<String, String>,
    pub tags: BTreeSet<String>,
}

impl OracleGraph {
    pub fn new(items: &[InfoItem], related: &[(String, String)], aliases: &BTreeMap<String, String>) -> Self {
        let mut edges = Vec::new();
        let mut tags: BTreeSet<String> = aliases.values().cloned().collect();
        for it in items {
            for t in &it.tags {
                tags.insert(t.clone());
                edges.push((format!("item:{}", it.id), format!("tag:{t}"), "TAGGED"));
            }
            if !it.location_name.trim().is_empty() {
                edges.push((format!("item:{}", it.id), format!("place:{}", it.location_name.trim()), "LOCATED_AT"));
            }
        }
        for (a, b) in related {
            if a != b {
                edges.push((format!("tag:{a}"), format!("tag:{b}"), "RELATED"));
            }
        }
        OracleGraph { edges, aliases: aliases.clone(), tags }
    }

    fn seed(&self, intent: &str) -> Option<String> {
        if self.tags.contains(intent) {
            Some(format!("tag:{intent}"))
        } else {
            self.aliases.get(intent).map(|t| format!("tag:{t}"))
        }
    }

    /// Every node at the end of some walk of length <= depth from a seed,
    /// found by exhaustive path enumeration.
    pub fn reachable(&self, intents: &[String], allowed: &BTreeSet<&str>, depth: usize) -> BTreeSet<String> {
        let seeds: BTreeSet<String> = intents.iter().filter_map(|i| self.seed(i)).collect();
        let mut out = BTreeSet::new();
        for s in &seeds {
            let mut path = vec![s.clone()];
            self.walk(&mut path, allowed, depth, &mut out);
        }
        out
    }

    fn walk(&self, path: &mut Vec<String>, allowed: &BTreeSet<&str>, depth: usize, out: &mut BTreeSet<String>) {
        let here = path.last().expect("non-empty").clone();
        out.insert(here.clone());
        if path.len() > depth {
            return;
        }
        for (a, b, kind) in &self.edges {
            if !allowed.contains(kind) {
                continue;
            }
            let next = if *a == here {
                b
            } else if *b == here {
                a
            } else {
                continue;
            };
            if path.contains(next) {
                continue;
            }
            path.push(next.clone());
            self.walk(path, allowed, depth, out);
            path.pop();
        }
    }
}

// ---- vectors ----

pub fn euclid_similarity(a: &[f64], b: &[f64]) -> f64 {
    let mut d = 0.0;
    for i in 0..a.len() {
        d += (a[i] - b[i]) * (a[i] - b[i]);
    }
    1.0 / (1.0 + d.sqrt())
}

/// Independent FNV-1a reimplementation for the hash embedder.
pub fn fnv(seed: u64, s: &str) -> u64 {
    s.bytes().fold(seed, |h, b| (h ^ u64::from(b)).wrapping_mul(1_099_511_628_211))
}

// ---- recommender ----

pub struct OracleWeights {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub lambda_d: f64,
    pub epsilon: f64,
    pub lambda_t: f64,
}

pub struct OracleSchedule {
    pub starts: Vec<u16>,
    pub offset_min: i64,
}

impl OracleSchedule {
    pub fn local_minute(&self, epoch: i64) -> u16 {
        ((epoch + self.offset_min * 60).rem_euclid(86_400) / 60) as u16
    }

    pub fn window(&self, minute: u16) -> usize {
        let mut w = self.starts.len() - 1;
        for (i, s) in self.starts.iter().enumerate() {
            if *s <= minute {
                w = i;
            }
        }
        w
    }

    /// Windows containing at least one minute the item is open.
    pub fn item_windows(&self, item: &InfoItem) -> Vec<usize> {
        let mut hit = BTreeSet::new();
        if item.open_hours.is_some() {
            for m in 0..1440u16 {
                if open_at(item, m) {
                    hit.insert(self.window(m));
                }
            }
        }
        if hit.is_empty() {
            hit.insert(self.window(self.local_minute(item.timestamp.epoch_seconds())));
        }
        hit.into_iter().collect()
    }
}

pub type Cell = (i64, i64);

pub struct OracleCells {
    pub size: f64,
    pub counts: BTreeMap<Cell, BTreeMap<String, BTreeMap<usize, f64>>>,
    pub totals: BTreeMap<String, f64>,
    pub grand: f64,
    pub visits: BTreeMap<Cell, f64>,
}

pub fn cell(lat: f64, lon: f64, size: f64) -> Cell {
    ((lon / size).floor() as i64, (lat / size).floor() as i64)
}

impl OracleCells {
    pub fn new(items: &[InfoItem], size: f64, sched: &OracleSchedule, public: &[(f64, f64, u64)]) -> Self {
        let mut c = OracleCells { size, counts: BTreeMap::new(), totals: BTreeMap::new(), grand: 0.0, visits: BTreeMap::new() };
        // The minute scan depends only on the hours and the posting window.
        let mut memo: BTreeMap<(Option<Vec<(u16, u16)>>, usize), Vec<usize>> = BTreeMap::new();
        for it in items {
            let g = cell(it.position.lat(), it.position.lon(), size);
            *c.visits.entry(g).or_insert(0.0) += 1.0;
            let key = (it.open_hours.as_ref().map(|h| h.0.clone()), sched.window(sched.local_minute(it.timestamp.epoch_seconds())));
            let windows = memo.entry(key).or_insert_with(|| sched.item_windows(it)).clone();
            for h in windows {
                for (k, n) in &it.attributes {
                    let n = *n as f64;
                    *c.counts.entry(g).or_default().entry(k.clone()).or_default().entry(h).or_insert(0.0) += n;
                    *c.totals.entry(k.clone()).or_insert(0.0) += n;
                    c.grand += n;
                }
            }
        }
        for &(lat, lon, n) in public {
            *c.visits.entry(cell(lat, lon, size)).or_insert(0.0) += n as f64;
        }
        c
    }

    pub fn tf_iwf(&self, g: Cell, h: usize) -> BTreeMap<String, f64> {
        let mut out = BTreeMap::new();
        let Some(attrs) = self.counts.get(&g) else { return out };
        let denom: f64 = attrs.values().map(|w| w.get(&h).copied().unwrap_or(0.0)).sum();
        if denom == 0.0 {
            return out;
        }
        for (k, w) in attrs {
            let a = w.get(&h).copied().unwrap_or(0.0);
            if a > 0.0 {
                out.insert(k.clone(), a / denom * (self.grand / self.totals[k]).ln());
            }
        }
        out
    }
}

fn cos(a: &BTreeMap<String, f64>, b: &BTreeMap<String, f64>) -> f64 {
    let na: f64 = a.values().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.values().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    let mut dot = 0.0;
    for (k, x) in a {
        if let Some(y) = b.get(k) {
            dot += x * y;
        }
    }
    dot / (na * nb)
}

fn circ_hours(a: i64, b: i64) -> f64 {
    let d = (a.rem_euclid(86_400) - b.rem_euclid(86_400)).abs();
    d.min(86_400 - d) as f64 / 3600.0
}

/// Exhaustive Ψ for every item within `radius`, best first, ties by id.
pub fn recommend(
    user: &UserContext,
    items: &[InfoItem],
    cells: &OracleCells,
    sched: &OracleSchedule,
    w: &OracleWeights,
    radius: Option<f64>,
    semantic: bool,
    popularity: bool,
) -> Vec<(String, f64)> {
    let now = user.time.epoch_seconds();
    let h = sched.window(sched.local_minute(now));
    let mut profile: BTreeMap<String, f64> = BTreeMap::new();
    let mut add = |v: BTreeMap<String, f64>, weight: f64| {
        for (k, x) in v {
            *profile.entry(k).or_insert(0.0) += weight * x;
        }
    };
    for v in &user.visited {
        let weight = v.count() as f64 * (-w.lambda_t * circ_hours(v.time.epoch_seconds(), now)).exp();
        add(cells.tf_iwf(cell(v.position.lat(), v.position.lon(), cells.size), h), weight);
    }
    add(cells.tf_iwf(cell(user.position.lat(), user.position.lon(), cells.size), h), 1.0);

    let max_v = cells.visits.values().copied().fold(0.0, f64::max);
    let mut out = Vec::new();
    for it in items {
        let d = chord_distance(user.position.lat(), user.position.lon(), it.position.lat(), it.position.lon());
        if radius.is_some_and(|r| d > r) {
            continue;
        }
        let g = cell(it.position.lat(), it.position.lon(), cells.size);
        let fs = if semantic { cos(&profile, &cells.tf_iwf(g, h)).clamp(w.epsilon, 1.0) } else { 1.0 };
        let fp = if !popularity {
            1.0
        } else if max_v == 0.0 {
            w.epsilon
        } else {
            ((1.0 + cells.visits.get(&g).copied().unwrap_or(0.0)).ln() / (1.0 + max_v).ln()).clamp(w.epsilon, 1.0)
        };
        let fd = (-w.lambda_d * d).exp();
        out.push((it.id.to_string(), fs.powf(w.alpha) * fd.powf(w.beta) * fp.powf(w.gamma)));
    }
    out.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    out
}

//! Passive recommendation: time-windowed TF-IWF place semantics, the
//! user's cognitive profile, and the multiplicative score
//! `Ψ = f_sem^α · f_dist^β · f_pop^γ`.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::Exec;
use crate::geo::{cell_of, haversine, CellId};
use crate::model::{DaySchedule, GeoPoint, InfoItem, ItemId, KnowledgeBase, TimePoint, UserContext};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RecommendError {
    #[error("UnknownCell({0:?})")]
    UnknownCell(CellId),
    #[error("UnknownWindow({0})")]
    UnknownWindow(usize),
    #[error("NegativeDistance({0})")]
    NegativeDistance(f64),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
}

/// Sign convention of the inverse-frequency factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IwfForm {
    /// `ln(total / total_k)`, non-negative.
    #[default]
    Inverted,
    /// `ln(total_k / total)`, non-positive.
    Literal,
}

/// Attribute counts per day window plus aggregate visits for one grid cell.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PlaceCell {
    /// attribute -> count per window
    pub counts: BTreeMap<String, Vec<u64>>,
    pub visit_total: u64,
}

#[derive(Debug, Clone)]
pub struct PlaceCells {
    cell_size_deg: f64,
    schedule: DaySchedule,
    form: IwfForm,
    cells: BTreeMap<CellId, PlaceCell>,
    attr_totals: BTreeMap<String, u64>,
    grand_total: u64,
    max_visits: u64,
}

/// Windows an item's attributes count toward: every window its opening
/// hours touch, otherwise the window it was posted in.
pub fn item_windows(item: &InfoItem, schedule: &DaySchedule) -> Vec<usize> {
    if let Some(hours) = &item.open_hours {
        let hit: Vec<usize> = (0..schedule.window_count())
            .filter(|&h| {
                let (s, e) = schedule.window_bounds(h);
                hours.overlaps(s, e)
            })
            .collect();
        if !hit.is_empty() {
            return hit;
        }
    }
    vec![schedule.window_of(item.timestamp)]
}

impl PlaceCells {
    /// Aggregate items into grid cells. Each item counts as one public
    /// visit to its cell; `public_visits` adds logged visits on top.
    pub fn build(
        kb: &KnowledgeBase,
        cell_size_deg: f64,
        schedule: &DaySchedule,
        form: IwfForm,
        public_visits: impl IntoIterator<Item = (GeoPoint, u64)>,
    ) -> Self {
        let windows = schedule.window_count();
        let mut cells: BTreeMap<CellId, PlaceCell> = BTreeMap::new();
        let mut attr_totals: BTreeMap<String, u64> = BTreeMap::new();
        for item in kb.items() {
            let cell = cells.entry(cell_of(item.position, cell_size_deg)).or_default();
            cell.visit_total += 1;
            for h in item_windows(item, schedule) {
                for (attr, &n) in &item.attributes {
                    if n == 0 {
                        continue;
                    }
                    cell.counts.entry(attr.clone()).or_insert_with(|| vec![0; windows])[h] += n;
                    *attr_totals.entry(attr.clone()).or_insert(0) += n;
                }
            }
        }
        for (p, n) in public_visits {
            cells.entry(cell_of(p, cell_size_deg)).or_default().visit_total += n;
        }
        let grand_total = attr_totals.values().sum();
        let max_visits = cells.values().map(|c| c.visit_total).max().unwrap_or(0);
        PlaceCells { cell_size_deg, schedule: schedule.clone(), form, cells, attr_totals, grand_total, max_visits }
    }

    pub fn cell_size_deg(&self) -> f64 {
        self.cell_size_deg
    }

    pub fn schedule(&self) -> &DaySchedule {
        &self.schedule
    }

    pub fn form(&self) -> IwfForm {
        self.form
    }

    pub fn get(&self, g: CellId) -> Option<&PlaceCell> {
        self.cells.get(&g)
    }

    pub fn cell_ids(&self) -> impl Iterator<Item = &CellId> {
        self.cells.keys()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn cell_of(&self, p: GeoPoint) -> CellId {
        cell_of(p, self.cell_size_deg)
    }

    pub fn max_visits(&self) -> u64 {
        self.max_visits
    }

    fn iwf(&self, attr: &str) -> f64 {
        let total_k = self.attr_totals.get(attr).copied().unwrap_or(0);
        if total_k == 0 {
            return 0.0;
        }
        let ratio = self.grand_total as f64 / total_k as f64;
        match self.form {
            IwfForm::Inverted => ratio.ln(),
            IwfForm::Literal => -ratio.ln(),
        }
    }
}

/// Sparse attribute weights for one cell and window.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SemanticVector {
    pub window: usize,
    pub weights: BTreeMap<String, f64>,
}

pub fn tf_iwf(cells: &PlaceCells, g: CellId, h: usize) -> Result<SemanticVector, RecommendError> {
    if h >= cells.schedule.window_count() {
        return Err(RecommendError::UnknownWindow(h));
    }
    let cell = cells.get(g).ok_or(RecommendError::UnknownCell(g))?;
    let denom: u64 = cell.counts.values().map(|c| c[h]).sum();
    let mut weights = BTreeMap::new();
    if denom > 0 {
        for (attr, c) in &cell.counts {
            if c[h] == 0 {
                continue;
            }
            weights.insert(attr.clone(), c[h] as f64 / denom as f64 * cells.iwf(attr));
        }
    }
    Ok(SemanticVector { window: h, weights })
}

/// Like [`tf_iwf`] but cells without data yield an empty vector.
fn tf_iwf_or_zero(cells: &PlaceCells, g: CellId, h: usize) -> BTreeMap<String, f64> {
    tf_iwf(cells, g, h).map(|v| v.weights).unwrap_or_default()
}

fn l2(v: &BTreeMap<String, f64>) -> f64 {
    v.values().map(|x| x * x).sum::<f64>().sqrt()
}

fn cosine(a: &BTreeMap<String, f64>, b: &BTreeMap<String, f64>) -> Option<f64> {
    let (na, nb) = (l2(a), l2(b));
    if na == 0.0 || nb == 0.0 {
        return None;
    }
    let dot: f64 = a.iter().filter_map(|(k, x)| b.get(k).map(|y| x * y)).sum();
    Some(dot / (na * nb))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScoreWeights {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    /// Distance decay per km.
    pub lambda_d: f64,
    /// Floor for the semantic and popularity factors.
    pub epsilon: f64,
    /// Temporal-proximity decay per hour.
    pub lambda_t: f64,
}

impl Default for ScoreWeights {
    fn default() -> Self {
        ScoreWeights { alpha: 1.0, beta: 1.0, gamma: 1.0, lambda_d: 1.0, epsilon: 0.01, lambda_t: 0.2 }
    }
}

impl ScoreWeights {
    pub fn validate(&self) -> Result<(), RecommendError> {
        let all = [self.alpha, self.beta, self.gamma, self.lambda_d, self.epsilon, self.lambda_t];
        if all.iter().all(|w| w.is_finite() && *w > 0.0) && self.epsilon <= 1.0 {
            Ok(())
        } else {
            Err(RecommendError::InvalidConfig(format!("score weights must be positive (epsilon <= 1): {self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CognitiveProfile {
    pub owner: String,
    /// Unit length, or empty for a cold start.
    pub vector: BTreeMap<String, f64>,
    pub built_at: TimePoint,
}

impl CognitiveProfile {
    pub fn is_zero(&self) -> bool {
        l2(&self.vector) == 0.0
    }
}

/// Weight of one visit: `count · exp(-lambda_t · Δh)` on the 24-hour clock.
pub fn visit_weight(count: u32, visit_time: TimePoint, now: TimePoint, weights: &ScoreWeights) -> f64 {
    count as f64 * (-weights.lambda_t * visit_time.circular_hours(&now)).exp()
}

pub fn build_profile(user: &UserContext, cells: &PlaceCells, weights: &ScoreWeights) -> CognitiveProfile {
    let h = cells.schedule.window_of(user.time);
    let mut acc: BTreeMap<String, f64> = BTreeMap::new();
    let mut add = |v: BTreeMap<String, f64>, w: f64| {
        for (k, x) in v {
            *acc.entry(k).or_insert(0.0) += w * x;
        }
    };
    for visit in &user.visited {
        let w = visit_weight(visit.count(), visit.time, user.time, weights);
        add(tf_iwf_or_zero(cells, cells.cell_of(visit.position), h), w);
    }
    add(tf_iwf_or_zero(cells, cells.cell_of(user.position), h), 1.0);
    let norm = l2(&acc);
    if norm > 0.0 {
        for x in acc.values_mut() {
            *x /= norm;
        }
    } else {
        acc.clear();
    }
    CognitiveProfile { owner: user.user_id.clone(), vector: acc, built_at: user.time }
}

fn clamp_floor(x: f64, eps: f64) -> f64 {
    if x.is_nan() {
        eps
    } else {
        x.clamp(eps, 1.0)
    }
}

/// Cosine between the profile and the item cell's vector at `t_u`, floored.
pub fn f_sem(profile: &CognitiveProfile, item: &InfoItem, cells: &PlaceCells, t_u: TimePoint, weights: &ScoreWeights) -> f64 {
    let h = cells.schedule.window_of(t_u);
    let cell = tf_iwf_or_zero(cells, cells.cell_of(item.position), h);
    clamp_floor(cosine(&profile.vector, &cell).unwrap_or(0.0), weights.epsilon)
}

pub fn f_dist(d_km: f64, weights: &ScoreWeights) -> Result<f64, RecommendError> {
    if d_km < 0.0 || d_km.is_nan() {
        return Err(RecommendError::NegativeDistance(d_km));
    }
    Ok((-weights.lambda_d * d_km).exp())
}

/// Log-scaled visit total of the item's cell relative to the busiest cell.
pub fn f_pop(item: &InfoItem, cells: &PlaceCells, weights: &ScoreWeights) -> f64 {
    pop_of_cell(cells, cells.cell_of(item.position), weights)
}

fn pop_of_cell(cells: &PlaceCells, g: CellId, weights: &ScoreWeights) -> f64 {
    if cells.max_visits == 0 {
        return weights.epsilon;
    }
    let v = cells.get(g).map(|c| c.visit_total).unwrap_or(0);
    clamp_floor((v as f64).ln_1p() / (cells.max_visits as f64).ln_1p(), weights.epsilon)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreBreakdown {
    pub psi: f64,
    pub f_sem: f64,
    pub f_dist: f64,
    pub f_pop: f64,
    pub distance_km: f64,
}

/// Which optional factors take part in Ψ. Disabled factors are held at 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FactorToggles {
    pub semantic: bool,
    pub popularity: bool,
}

impl Default for FactorToggles {
    fn default() -> Self {
        FactorToggles { semantic: true, popularity: true }
    }
}

pub fn combine(f_sem: f64, f_dist: f64, f_pop: f64, weights: &ScoreWeights) -> f64 {
    f_sem.powf(weights.alpha) * f_dist.powf(weights.beta) * f_pop.powf(weights.gamma)
}

pub fn score(user: &UserContext, item: &InfoItem, profile: &CognitiveProfile, cells: &PlaceCells, weights: &ScoreWeights) -> ScoreBreakdown {
    score_with(user, item, profile, cells, weights, FactorToggles::default())
}

fn score_with(
    user: &UserContext,
    item: &InfoItem,
    profile: &CognitiveProfile,
    cells: &PlaceCells,
    weights: &ScoreWeights,
    toggles: FactorToggles,
) -> ScoreBreakdown {
    let distance_km = haversine(user.position, item.position);
    let fd = (-weights.lambda_d * distance_km).exp();
    let fs = if toggles.semantic { f_sem(profile, item, cells, user.time, weights) } else { 1.0 };
    let fp = if toggles.popularity { f_pop(item, cells, weights) } else { 1.0 };
    ScoreBreakdown { psi: combine(fs, fd, fp, weights), f_sem: fs, f_dist: fd, f_pop: fp, distance_km }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RecommenderConfig {
    pub weights: ScoreWeights,
    /// Only items within this radius of the user are scored.
    pub prune_radius_km: Option<f64>,
    pub factors: FactorToggles,
}

impl Default for RecommenderConfig {
    fn default() -> Self {
        RecommenderConfig { weights: ScoreWeights::default(), prune_radius_km: Some(5.0), factors: FactorToggles::default() }
    }
}

impl RecommenderConfig {
    pub fn validate(&self) -> Result<(), RecommendError> {
        self.weights.validate()?;
        match self.prune_radius_km {
            Some(r) if !(r.is_finite() && r > 0.0) => Err(RecommendError::InvalidConfig(format!("prune_radius_km must be > 0, got {r}"))),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub id: ItemId,
    #[serde(flatten)]
    pub breakdown: ScoreBreakdown,
}

/// Score every item near the user and return the best `k` by Ψ, ties by id.
pub fn recommend(
    user: &UserContext,
    kb: &KnowledgeBase,
    cells: &PlaceCells,
    cfg: &RecommenderConfig,
    k: usize,
    exec: Exec,
) -> Result<Vec<Recommendation>, RecommendError> {
    cfg.validate()?;
    if k == 0 {
        return Err(RecommendError::InvalidConfig("k must be >= 1".into()));
    }
    let profile = build_profile(user, cells, &cfg.weights);
    let h = cells.schedule.window_of(user.time);

    // f_sem and f_pop depend only on the item's cell.
    let mut per_cell: HashMap<CellId, (f64, f64)> = HashMap::new();
    for item in kb.items() {
        let g = cells.cell_of(item.position);
        per_cell.entry(g).or_insert_with(|| {
            let fs = if cfg.factors.semantic {
                clamp_floor(cosine(&profile.vector, &tf_iwf_or_zero(cells, g, h)).unwrap_or(0.0), cfg.weights.epsilon)
            } else {
                1.0
            };
            let fp = if cfg.factors.popularity { pop_of_cell(cells, g, &cfg.weights) } else { 1.0 };
            (fs, fp)
        });
    }

    let items: Vec<&InfoItem> = kb.items().collect();
    let mut scored = exec.filter_map(&items, |item| {
        let distance_km = haversine(user.position, item.position);
        if cfg.prune_radius_km.is_some_and(|r| distance_km > r) {
            return None;
        }
        let (fs, fp) = per_cell[&cells.cell_of(item.position)];
        let fd = (-cfg.weights.lambda_d * distance_km).exp();
        Some(Recommendation {
            id: item.id.clone(),
            breakdown: ScoreBreakdown { psi: combine(fs, fd, fp, &cfg.weights), f_sem: fs, f_dist: fd, f_pop: fp, distance_km },
        })
    });
    exec.sort_by(&mut scored, |a, b| b.breakdown.psi.total_cmp(&a.breakdown.psi).then_with(|| a.id.cmp(&b.id)));
    scored.truncate(k);
    Ok(scored)
}

/// Ψ for one item under explicit factor toggles, for reporting.
pub fn score_item(
    user: &UserContext,
    item: &InfoItem,
    profile: &CognitiveProfile,
    cells: &PlaceCells,
    cfg: &RecommenderConfig,
) -> ScoreBreakdown {
    score_with(user, item, profile, cells, &cfg.weights, cfg.factors)
}

//! Ranking and grounding metrics.

use std::collections::BTreeSet;
use std::hash::Hash;

use crate::geo::{geometry_distance, GeoError};
use crate::model::{GeoEntity, InfoItem, KnowledgeBase};
use crate::pipeline::{parse_citations, quoted_names, UnparseableCitations};

/// `|top-k ∩ relevant| / k`. Short lists still divide by `k`.
pub fn precision_at_k<T: Eq + Hash + Ord>(ranked: &[T], relevant: &BTreeSet<T>, k: usize) -> f64 {
    if k == 0 {
        return 0.0;
    }
    let hits = ranked.iter().take(k).filter(|r| relevant.contains(r)).count();
    hits as f64 / k as f64
}

fn gain(grade: u8) -> f64 {
    2f64.powi(i32::from(grade)) - 1.0
}

/// `Σ (2^rel − 1) / log2(i + 1)` over the first `k` positions.
pub fn dcg_at_k(grades: &[u8], k: usize) -> f64 {
    grades.iter().take(k).enumerate().map(|(i, &g)| gain(g) / ((i + 2) as f64).log2()).sum()
}

/// NDCG with the ideal built from the list's own grades. Zero ideal gives 0.
pub fn ndcg_at_k(grades: &[u8], k: usize) -> f64 {
    let mut ideal = grades.to_vec();
    ideal.sort_unstable_by(|a, b| b.cmp(a));
    ndcg_with_ideal(grades, &ideal, k)
}

/// NDCG against an external ideal, e.g. every judged grade for the query.
pub fn ndcg_with_ideal(grades: &[u8], ideal_grades: &[u8], k: usize) -> f64 {
    let mut ideal = ideal_grades.to_vec();
    ideal.sort_unstable_by(|a, b| b.cmp(a));
    let idcg = dcg_at_k(&ideal, k);
    if idcg <= 0.0 {
        return 0.0;
    }
    dcg_at_k(grades, k) / idcg
}

pub fn hit_at_k<T: Eq + Hash + Ord>(ranked: &[T], truth: &BTreeSet<T>, k: usize) -> f64 {
    if ranked.iter().take(k).any(|r| truth.contains(r)) {
        1.0
    } else {
        0.0
    }
}

pub fn mrr<T: Eq + Hash + Ord>(ranked: &[T], truth: &BTreeSet<T>) -> f64 {
    ranked.iter().position(|r| truth.contains(r)).map_or(0.0, |i| 1.0 / (i + 1) as f64)
}

/// Spatial and temporal context a result is checked against.
#[derive(Debug, Clone)]
pub struct StrContext {
    pub location: GeoEntity,
    pub theta_km: f64,
    /// Local minute of day, when the query carries a temporal constraint.
    pub minute: Option<u16>,
}

/// 1 when the item lies strictly inside the radius and satisfies the
/// temporal constraint, else 0.
pub fn str_score(item: &InfoItem, ctx: &StrContext) -> Result<f64, GeoError> {
    let d = geometry_distance(&ctx.location, item.position)?;
    let open = ctx.minute.is_none_or(|m| item.is_open_at(m));
    Ok(if d < ctx.theta_km && open { 1.0 } else { 0.0 })
}

/// Mean STR over a result set; `None` for an empty set.
pub fn str_mean<'a>(items: impl IntoIterator<Item = &'a InfoItem>, ctx: &StrContext) -> Result<Option<f64>, GeoError> {
    let mut n = 0usize;
    let mut sum = 0.0;
    for item in items {
        sum += str_score(item, ctx)?;
        n += 1;
    }
    Ok((n > 0).then(|| sum / n as f64))
}

/// Share of cited ids and quoted names that the knowledge base does not
/// contain. Names are matched case-insensitively against item titles,
/// contents and location names.
pub fn hallucination_proxy(answer: &str, kb: &KnowledgeBase) -> Result<f64, UnparseableCitations> {
    let cited = parse_citations(answer)?;
    let names = quoted_names(answer);
    let total = cited.len() + names.len();
    if total == 0 {
        return Ok(0.0);
    }
    let fake_ids = cited.iter().filter(|id| !kb.contains(id)).count();
    let fake_names = names
        .iter()
        .filter(|n| {
            let n = n.to_lowercase();
            !kb.items().any(|i| {
                i.location_name.to_lowercase().contains(&n) || i.title.to_lowercase().contains(&n) || i.content.to_lowercase().contains(&n)
            })
        })
        .count();
    Ok((fake_ids + fake_names) as f64 / total as f64)
}

use std::collections::BTreeSet;
use std::sync::OnceLock;

use asknearby_core::eval::ablation::engine_for;
use asknearby_core::eval::metrics::{hit_at_k, mrr, ndcg_at_k, precision_at_k};
use asknearby_core::eval::synth::{synth_generate, Dataset, SynthParams};
use asknearby_core::exec::Exec;
use asknearby_core::geo::{geo_filter, haversine, GeoFilterConfig, SpatialIndex, EARTH_RADIUS_KM};
use asknearby_core::graph::{expand, ExpansionConfig, Relations, SemanticGraph};
use asknearby_core::model::{
    build_knowledge_base, item_to_json, validate_item, AttributeLexicon, DaySchedule, GeoPoint, InfoItem, ItemId, OpenHours,
    TimePoint, UserContext, Visit,
};
use asknearby_core::recommend::{
    build_profile, combine, f_dist, f_sem, score, tf_iwf, visit_weight, IwfForm, PlaceCells, ScoreWeights,
};
use asknearby_core::vector::{similarity, vector_filter, Embedder, Embedding, VectorFilterConfig, VectorStore};
use asknearby_core::{Engine, EngineConfig, RetrievalRequest};
use proptest::prelude::*;

const WORDS: &[&str] = &["coffee", "quiet", "park", "noodle", "late", "toilet", "gym", "cheap", "book", "bar", "river", "market"];
const TAGS: &[&str] = &["cafe", "food", "park", "gym", "bar", "toilet"];

fn point() -> impl Strategy<Value = GeoPoint> {
    (-90.0f64..=90.0, -180.0f64..=180.0).prop_map(|(lat, lon)| GeoPoint::new(lat, lon).unwrap())
}

fn local_point() -> impl Strategy<Value = GeoPoint> {
    (22.50f64..22.56, 113.90f64..113.96).prop_map(|(lat, lon)| GeoPoint::new(lat, lon).unwrap())
}

fn time() -> impl Strategy<Value = TimePoint> {
    (1_700_000_000i64..1_700_864_000).prop_map(|s| TimePoint::new(s).unwrap())
}

fn text() -> impl Strategy<Value = String> {
    prop::collection::vec(prop::sample::select(WORDS), 1..6).prop_map(|w| w.join(" "))
}

fn hours() -> impl Strategy<Value = Option<OpenHours>> {
    prop::option::of(prop::collection::vec((0u16..1440, 0u16..=1440), 1..3).prop_map(OpenHours))
}

fn item(id: usize) -> impl Strategy<Value = InfoItem> {
    (
        text(),
        text(),
        time(),
        local_point(),
        prop::collection::btree_set(prop::sample::select(TAGS), 0..3),
        hours(),
        prop::collection::btree_map(prop::sample::select(WORDS), 1u64..5, 0..4),
        0u64..500,
    )
        .prop_map(move |(title, content, ts, pos, tags, open_hours, attrs, likes)| {
            let mut it = InfoItem::new(format!("i{id:03}"), content, ts, pos);
            it.title = title;
            it.tags = tags.into_iter().map(String::from).collect();
            it.open_hours = open_hours;
            it.attributes = attrs.into_iter().map(|(k, v)| (k.to_string(), v)).collect();
            it.likes = likes;
            it.location_name = "Harbor".into();
            it
        })
}

fn items(max: usize) -> impl Strategy<Value = Vec<InfoItem>> {
    (1..max).prop_flat_map(|n| (0..n).map(item).collect::<Vec<_>>())
}

fn user(visits: usize) -> impl Strategy<Value = UserContext> {
    (local_point(), time(), prop::collection::vec((local_point(), time(), 1u32..4), 0..visits)).prop_map(|(p, t, vs)| {
        UserContext {
            user_id: "u".into(),
            position: p,
            time: t,
            visited: vs.into_iter().map(|(vp, vt, c)| Visit::new(vp, vt, c).unwrap()).collect(),
        }
    })
}

fn weights() -> impl Strategy<Value = ScoreWeights> {
    (0.1f64..3.0, 0.1f64..3.0, 0.1f64..3.0, 0.1f64..3.0, 0.001f64..0.5, 0.01f64..1.0).prop_map(
        |(alpha, beta, gamma, lambda_d, epsilon, lambda_t)| ScoreWeights { alpha, beta, gamma, lambda_d, epsilon, lambda_t },
    )
}

fn cells(items: &[InfoItem]) -> PlaceCells {
    let kb = build_knowledge_base(items.to_vec()).unwrap();
    PlaceCells::build(&kb, 0.01, &DaySchedule::default(), IwfForm::Inverted, std::iter::empty())
}

fn engines() -> &'static (Dataset, Engine, Engine) {
    static ENGINES: OnceLock<(Dataset, Engine, Engine)> = OnceLock::new();
    ENGINES.get_or_init(|| {
        let data = synth_generate(7, SynthParams { n_items: 300, n_cells: 4, n_queries: 30, n_users: 10, theta_km: 1.0 }).unwrap();
        let seq = engine_for(&data, EngineConfig::default(), Exec::Sequential).unwrap();
        let par = engine_for(&data, EngineConfig::default(), Exec::default()).unwrap();
        (data, seq, par)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn item_json_round_trip(it in item(0)) {
        let sched = DaySchedule::default();
        let raw = item_to_json(&it, &sched);
        let back = validate_item(&raw, &sched, &AttributeLexicon::default()).unwrap();
        prop_assert_eq!(back, it);
    }

    #[test]
    fn kb_ignores_insertion_order(its in items(20), seed in any::<u64>()) {
        let mut shuffled = its.clone();
        let n = shuffled.len();
        shuffled.rotate_left((seed as usize) % n);
        shuffled.reverse();
        prop_assert_eq!(build_knowledge_base(its).unwrap(), build_knowledge_base(shuffled).unwrap());
    }

    #[test]
    fn haversine_is_a_bounded_symmetric_distance(a in point(), b in point()) {
        let d = haversine(a, b);
        prop_assert_eq!(haversine(a, a), 0.0);
        prop_assert!((d - haversine(b, a)).abs() < 1e-9);
        prop_assert!(d >= 0.0);
        prop_assert!(d <= std::f64::consts::PI * EARTH_RADIUS_KM + 1e-9);
    }

    #[test]
    fn geo_filter_shrinks_with_theta(its in items(40), anchor in local_point(), t1 in 0.01f64..5.0, t2 in 0.01f64..5.0) {
        let kb = build_knowledge_base(its).unwrap();
        let index = SpatialIndex::build(&kb, 0.01).unwrap();
        let all = kb.ids();
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        let small = geo_filter(None, anchor, &all, &GeoFilterConfig::new(lo).unwrap(), &index, Exec::default()).unwrap();
        let big = geo_filter(None, anchor, &all, &GeoFilterConfig::new(hi).unwrap(), &index, Exec::default()).unwrap();
        prop_assert!(small.is_subset(&big));
        prop_assert!(big.is_subset(&all));
    }

    #[test]
    fn expansion_is_deterministic_and_grows_with_depth(its in items(20), intent in prop::sample::select(TAGS), d in 1usize..4) {
        let kb = build_knowledge_base(its).unwrap();
        let g = SemanticGraph::build(&kb, &Relations::default()).unwrap();
        let cfg = ExpansionConfig { max_depth: d, max_nodes: 10_000, ..ExpansionConfig::default() };
        let a = expand(&[intent], &g, &cfg).unwrap();
        prop_assert_eq!(&a, &expand(&[intent], &g, &cfg).unwrap());
        let deeper = expand(&[intent], &g, &ExpansionConfig { max_depth: d + 1, ..cfg }).unwrap();
        prop_assert!(a.items.is_subset(&deeper.items));
        prop_assert!(a.tags.is_subset(&deeper.tags));
    }

    #[test]
    fn similarity_is_symmetric_and_peaks_at_identity(
        a in prop::collection::vec(-1.0f64..1.0, 8),
        b in prop::collection::vec(-1.0f64..1.0, 8),
        t in 0.0f64..1.0,
    ) {
        let (ea, eb) = (Embedding::new(a.clone()).unwrap(), Embedding::new(b.clone()).unwrap());
        prop_assert_eq!(similarity(&ea, &ea).unwrap(), 1.0);
        prop_assert!((similarity(&ea, &eb).unwrap() - similarity(&eb, &ea).unwrap()).abs() < 1e-15);
        // Moving further along the same line can only lower similarity.
        let mid: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + t * (y - x)).collect();
        let em = Embedding::new(mid).unwrap();
        prop_assert!(similarity(&ea, &em).unwrap() >= similarity(&ea, &eb).unwrap() - 1e-12);
    }

    #[test]
    fn vector_filter_output_is_ranked_subset(its in items(40), q in text(), keep in prop::collection::vec(any::<bool>(), 40)) {
        let kb = build_knowledge_base(its).unwrap();
        let embedder = Embedder::deterministic(256).unwrap();
        let store = VectorStore::build(&kb, &embedder, Exec::default()).unwrap();
        let v_prime: BTreeSet<ItemId> = kb.ids().into_iter().zip(keep).filter(|(_, k)| *k).map(|(id, _)| id).collect();
        let cfg = VectorFilterConfig::default();
        let out = vector_filter(&q, &BTreeSet::new(), &v_prime, &cfg, &store, &embedder, Exec::default()).unwrap();
        prop_assert!(out.len() <= cfg.top_k);
        for (id, s) in &out {
            prop_assert!(v_prime.contains(id));
            prop_assert!(*s > cfg.delta);
        }
        for w in out.windows(2) {
            prop_assert!(w[0].1 > w[1].1 || (w[0].1 == w[1].1 && w[0].0 < w[1].0));
        }
    }

    #[test]
    fn psi_is_positive_under_floors(its in items(30), u in user(6), w in weights()) {
        let pc = cells(&its);
        let profile = build_profile(&u, &pc, &w);
        for it in &its {
            let s = score(&u, it, &profile, &pc, &w);
            prop_assert!(s.psi > 0.0 || s.f_dist == 0.0);
            prop_assert!(s.psi >= 0.0);
            prop_assert!(s.f_sem >= w.epsilon && s.f_sem <= 1.0);
            prop_assert!(s.f_pop >= w.epsilon && s.f_pop <= 1.0);
            prop_assert!((s.psi - combine(s.f_sem, s.f_dist, s.f_pop, &w)).abs() < 1e-12);
        }
    }

    #[test]
    fn distance_factor_decreases(a in 0.0f64..50.0, b in 0.0f64..50.0, w in weights()) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(f_dist(lo, &w).unwrap() >= f_dist(hi, &w).unwrap());
        prop_assert_eq!(f_dist(0.0, &w).unwrap(), 1.0);
        prop_assert!(f_dist(-1e-9, &w).is_err());
    }

    #[test]
    fn visit_weight_decays_to_twelve_hours(now in time(), m1 in 0i64..720, m2 in 0i64..720, w in weights()) {
        prop_assert_eq!(visit_weight(1, now, now, &w), 1.0);
        let (lo, hi) = if m1 <= m2 { (m1, m2) } else { (m2, m1) };
        let at = |m: i64| TimePoint::new(now.epoch_seconds() - m * 60).unwrap();
        prop_assert!(visit_weight(1, at(lo), now, &w) >= visit_weight(1, at(hi), now, &w));
    }

    #[test]
    fn inverted_weights_are_non_negative(its in items(30), u in user(4), w in weights()) {
        let pc = cells(&its);
        let sched = DaySchedule::default();
        for g in pc.cell_ids().copied().collect::<Vec<_>>() {
            for h in 0..sched.window_count() {
                let v = tf_iwf(&pc, g, h).unwrap();
                prop_assert!(v.weights.values().all(|x| *x >= 0.0));
            }
        }
        let profile = build_profile(&u, &pc, &w);
        for it in &its {
            let s = f_sem(&profile, it, &pc, u.time, &w);
            prop_assert!(s >= w.epsilon && s <= 1.0);
        }
    }

    #[test]
    fn ndcg_is_one_exactly_for_sorted_grades(grades in prop::collection::vec(0u8..3, 1..10), k in 1usize..12) {
        let mut sorted = grades.clone();
        sorted.sort_unstable_by(|a, b| b.cmp(a));
        let n = ndcg_at_k(&grades, k);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&n));
        if sorted.iter().take(k).any(|g| *g > 0) {
            prop_assert!((ndcg_at_k(&sorted, k) - 1.0).abs() < 1e-12);
            let head = &grades[..k.min(grades.len())];
            let sorted_head = head.windows(2).all(|w| w[0] >= w[1]);
            let ideal_head = head.iter().copied().eq(sorted.iter().take(head.len()).copied());
            prop_assert_eq!((n - 1.0).abs() < 1e-12, sorted_head && ideal_head);
        }
    }

    #[test]
    fn ranking_metrics_stay_in_unit_interval(
        ranked in prop::collection::vec(0u32..30, 0..15),
        relevant in prop::collection::btree_set(0u32..30, 0..10),
        k in 1usize..12,
    ) {
        let mut seen = BTreeSet::new();
        let ranked: Vec<u32> = ranked.into_iter().filter(|x| seen.insert(*x)).collect();
        for v in [precision_at_k(&ranked, &relevant, k), hit_at_k(&ranked, &relevant, k), mrr(&ranked, &relevant)] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn retrieval_matches_across_execution_modes(qi in 0usize..30) {
        let (data, seq, par) = engines();
        let q = &data.queries[qi % data.queries.len()];
        let req = RetrievalRequest {
            query: q.query.clone(),
            position: Some(GeoPoint::new(q.lat, q.lon).unwrap()),
            time: Some(data.query_time(q).unwrap()),
        };
        prop_assert_eq!(seq.answer(&req).unwrap(), par.answer(&req).unwrap());
    }
}

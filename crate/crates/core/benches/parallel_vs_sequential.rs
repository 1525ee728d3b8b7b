use std::collections::BTreeSet;

use asknearby_core::eval::synth::{synth_generate, SynthParams};
use asknearby_core::exec::Exec;
use asknearby_core::geo::{geo_filter, GeoFilterConfig, SpatialIndex};
use asknearby_core::model::{DaySchedule, GeoPoint};
use asknearby_core::recommend::{recommend, IwfForm, PlaceCells, RecommenderConfig};
use asknearby_core::vector::{vector_filter, Embedder, VectorFilterConfig, VectorStore};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn modes() -> Vec<(&'static str, Exec)> {
    vec![
        ("sequential", Exec::Sequential),
        #[cfg(feature = "parallel")]
        ("parallel", Exec::Parallel),
    ]
}

fn bench(c: &mut Criterion) {
    let data = synth_generate(42, SynthParams { n_items: 20_000, ..SynthParams::default() }).expect("synthetic data");
    let kb = data.knowledge_base().expect("kb");
    let embedder = Embedder::deterministic(256).expect("embedder");
    let index = SpatialIndex::build(&kb, 0.01).expect("index");
    let schedule = DaySchedule::default();
    let cells = PlaceCells::build(&kb, 0.01, &schedule, IwfForm::Inverted, data.public_visit_points().expect("visits"));
    let all = kb.ids();
    let store = VectorStore::build(&kb, &embedder, Exec::default()).expect("store");
    let user = data.users[0].context(&schedule).expect("user");
    let anchor = GeoPoint::new(22.54, 113.95).expect("point");

    let mut g = c.benchmark_group("vector_index_build");
    g.sample_size(10);
    for (name, exec) in modes() {
        g.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| VectorStore::build(&kb, &embedder, exec).unwrap()));
    }
    g.finish();

    let mut g = c.benchmark_group("vector_filter");
    let cfg = VectorFilterConfig::default();
    let tags: BTreeSet<String> = ["cafe".to_string(), "coffee".to_string()].into();
    for (name, exec) in modes() {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| vector_filter("quiet coffee with wifi", &tags, &all, &cfg, &store, &embedder, exec).unwrap())
        });
    }
    g.finish();

    let mut g = c.benchmark_group("geo_filter");
    let cfg = GeoFilterConfig::new(25.0).expect("theta");
    for (name, exec) in modes() {
        g.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| geo_filter(None, anchor, &all, &cfg, &index, exec).unwrap()));
    }
    g.finish();

    let mut g = c.benchmark_group("recommend");
    let cfg = RecommenderConfig { prune_radius_km: None, ..RecommenderConfig::default() };
    for (name, exec) in modes() {
        g.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| recommend(&user, &kb, &cells, &cfg, 10, exec).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);

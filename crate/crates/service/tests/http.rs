use std::sync::Arc;

use asknearby::app::App;
use asknearby::config::AppConfig;
use asknearby::http;
use serde_json::{json, Value};

fn item(id: &str, title: &str, tag: &str, lat: f64, lon: f64) -> String {
    json!({
        "id": id,
        "title": title,
        "content": format!("{title}, open to everyone"),
        "timestamp": "2024-03-01 09:00:00",
        "latitude": lat,
        "longitude": lon,
        "tags": [tag],
        "location_name": "Nanshan Plaza",
    })
    .to_string()
}

fn first_batch() -> String {
    [
        item("t1", "Plaza public toilet", "toilet", 22.5900, 113.9430),
        item("t2", "Metro exit toilet", "toilet", 22.5930, 113.9450),
        item("t3", "Far away toilet", "toilet", 22.7000, 114.1000),
        item("c1", "Corner cafe", "cafe", 22.5905, 113.9435),
        item("c2", "Harbor coffee", "cafe", 22.5890, 113.9420),
        item("p1", "Pocket park", "park", 22.5910, 113.9440),
    ]
    .join("\n")
}

struct Server {
    base: String,
    agent: ureq::Agent,
    app: Arc<App>,
    _dir: tempfile::TempDir,
    _rt: tokio::runtime::Runtime,
}

impl Server {
    fn start() -> Server {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("relations.json"), r#"{"related": [["toilet", "park"]], "aliases": {"toilets": "toilet"}}"#)
            .unwrap();
        let app = Arc::new(App::open(AppConfig { data_dir: dir.path().to_path_buf(), ..AppConfig::default() }).unwrap());
        let rt = tokio::runtime::Runtime::new().unwrap();
        let listener = rt.block_on(tokio::net::TcpListener::bind("127.0.0.1:0")).unwrap();
        let base = format!("http://{}", listener.local_addr().unwrap());
        let served = app.clone();
        rt.spawn(async move { http::serve(served, listener).await });
        let agent: ureq::Agent = ureq::Agent::config_builder().http_status_as_error(false).build().into();
        Server { base, agent, app, _dir: dir, _rt: rt }
    }

    fn get(&self, path: &str) -> (u16, String) {
        let mut r = self.agent.get(&format!("{}{path}", self.base)).call().unwrap();
        (r.status().as_u16(), r.body_mut().read_to_string().unwrap())
    }

    fn post(&self, path: &str, content_type: &str, body: &str) -> (u16, String) {
        let mut r = self.agent.post(&format!("{}{path}", self.base)).header("content-type", content_type).send(body).unwrap();
        (r.status().as_u16(), r.body_mut().read_to_string().unwrap())
    }

    fn post_json(&self, path: &str, body: Value) -> (u16, Value) {
        let (s, text) = self.post(path, "application/json", &body.to_string());
        (s, serde_json::from_str(&text).unwrap())
    }

    fn loaded() -> Server {
        let s = Server::start();
        let (status, _) = s.post("/ingest", "application/x-ndjson", &first_batch());
        assert_eq!(status, 200);
        s
    }
}

fn parse(text: &str) -> Value {
    serde_json::from_str(text).unwrap()
}

#[test]
fn unloaded_service_answers_503() {
    let s = Server::start();
    let (status, body) = s.get("/healthz");
    assert_eq!(status, 503);
    assert_eq!(parse(&body)["version"], Value::Null);
    assert_eq!(s.post_json("/query", json!({"q": "toilets", "lat": 22.59, "lon": 113.943})).0, 503);
    assert_eq!(s.get("/recommend?lat=22.59&lon=113.943").0, 503);
}

#[test]
fn healthz_tracks_ingest_versions() {
    let s = Server::start();
    let (status, body) = s.post("/ingest", "application/x-ndjson", &first_batch());
    assert_eq!(status, 200);
    let report = parse(&body);
    assert_eq!((report["accepted"].as_u64(), report["rejected"].as_u64(), report["version"].as_u64()), (Some(6), Some(0), Some(1)));

    let path = s._dir.path().join("more.jsonl");
    std::fs::write(&path, item("t4", "Library toilet", "toilet", 22.5920, 113.9440) + "\n{\"id\": \"bad\"}\n").unwrap();
    let (status, report) = s.post_json("/ingest", json!({"path": path}));
    assert_eq!(status, 200);
    assert_eq!(report["version"], 2);
    assert_eq!(report["reasons"], json!(["MissingField(content) line 2"]));

    let (status, body) = s.get("/healthz");
    assert_eq!(status, 200);
    assert_eq!(parse(&body)["version"], 2);
}

#[test]
fn ingest_errors_are_400() {
    let s = Server::start();
    assert_eq!(s.post("/ingest", "application/x-ndjson", "").0, 400);
    assert_eq!(s.post_json("/ingest", json!({"path": "/definitely/not/here.jsonl"})).0, 400);
    assert_eq!(s.post_json("/ingest", json!({"file": "x"})).0, 400);
    assert_eq!(s.get("/healthz").0, 503);
}

#[test]
fn query_returns_grounded_local_results() {
    let s = Server::loaded();
    let (status, body) =
        s.post_json("/query", json!({"q": "Where are the toilets nearby?", "lat": 22.59, "lon": 113.943, "time": "2024-03-01 12:00:00"}));
    assert_eq!(status, 200);
    assert_eq!(body["version"], 1);
    let items = body["items"].as_array().unwrap();
    let ids: Vec<&str> = items.iter().map(|i| i["id"].as_str().unwrap()).collect();
    assert!(ids.contains(&"t1") && ids.contains(&"t2"), "{ids:?}");
    assert!(!ids.contains(&"t3"), "t3 is ~19 km away: {ids:?}");
    for it in items {
        assert!(it["distance_km"].as_f64().unwrap() < 1.0);
        for key in ["id", "title", "score", "distance_km", "provenance"] {
            assert!(it.get(key).is_some(), "missing {key}");
        }
        assert!(it["provenance"]["geo_pass"].as_bool().unwrap());
    }
    let answer = body["answer"].as_str().unwrap();
    assert!(answer.contains("[id:t1]"), "{answer}");
    assert!(body["plan"]["intents"].as_array().unwrap().contains(&json!("toilets")));
}

#[test]
fn query_input_errors_are_400() {
    let s = Server::loaded();
    assert_eq!(s.post_json("/query", json!({"q": ""})).0, 400);
    assert_eq!(s.post_json("/query", json!({"q": "   ", "lat": 22.59, "lon": 113.943})).0, 400);
    assert_eq!(s.post("/query", "application/json", "{not json").0, 400);
    assert_eq!(s.post_json("/query", json!({"q": "toilets", "lat": 95.0, "lon": 113.943})).0, 400);
    assert_eq!(s.post_json("/query", json!({"q": "toilets", "lat": 22.59})).0, 400);
    assert_eq!(s.post_json("/query", json!({"q": "toilets", "when": "now"})).0, 400);
    assert_eq!(s.post_json("/query", json!({"q": "toilets", "time": "tomorrow"})).0, 400);
}

#[test]
fn recommend_returns_k_items_by_psi_with_breakdown() {
    let s = Server::loaded();
    let (status, body) = s.get("/recommend?lat=22.5901&lon=113.9431&time=2024-03-01%2012:00:00&user_id=nobody&k=5");
    assert_eq!(status, 200);
    let body = parse(&body);
    let items = body["items"].as_array().unwrap();
    assert_eq!(items.len(), 5);
    let psi: Vec<f64> = items.iter().map(|i| i["psi"].as_f64().unwrap()).collect();
    assert!(psi.windows(2).all(|w| w[0] >= w[1]), "{psi:?}");
    for it in items {
        let (fs, fd, fp) = (it["f_sem"].as_f64().unwrap(), it["f_dist"].as_f64().unwrap(), it["f_pop"].as_f64().unwrap());
        assert!((it["psi"].as_f64().unwrap() - fs * fd * fp).abs() < 1e-12);
    }
}

#[test]
fn recommend_input_errors_are_400() {
    let s = Server::loaded();
    assert_eq!(s.get("/recommend?lon=113.9").0, 400);
    assert_eq!(s.get("/recommend?lat=abc&lon=113.9").0, 400);
    assert_eq!(s.get("/recommend?lat=22.5&lon=200").0, 400);
    assert_eq!(s.get("/recommend?lat=22.5&lon=113.9&k=0").0, 400);
    assert_eq!(s.get("/recommend?lat=22.5&lon=113.9&colour=red").0, 400);
}

#[test]
fn responses_are_byte_stable() {
    let s = Server::loaded();
    let q = json!({"q": "coffee near the plaza", "lat": 22.59, "lon": 113.943, "time": "2024-03-01 08:30:00"}).to_string();
    let a = s.post("/query", "application/json", &q);
    let b = s.post("/query", "application/json", &q);
    assert_eq!(a, b);
    let path = "/recommend?lat=22.59&lon=113.943&time=2024-03-01%2008:30:00&k=3";
    assert_eq!(s.get(path), s.get(path));
}

#[test]
fn readers_see_one_version_across_a_swap() {
    let s = Server::loaded();
    let second: Vec<String> = (0..40).map(|i| item(&format!("n{i:02}"), "New toilet", "toilet", 22.5901, 113.9431)).collect();
    std::thread::scope(|scope| {
        let readers: Vec<_> = (0..4)
            .map(|_| {
                scope.spawn(|| {
                    let mut seen = Vec::new();
                    for _ in 0..15 {
                        let (status, body) = s.post_json("/query", json!({"q": "toilets", "lat": 22.59, "lon": 113.943, "time": "2024-03-01 12:00:00"}));
                        assert_eq!(status, 200);
                        let v = body["version"].as_u64().unwrap();
                        let new_ids = body["items"].as_array().unwrap().iter().filter(|i| i["id"].as_str().unwrap().starts_with('n')).count();
                        // Items from the second batch appear only under version 2.
                        assert!(v == 2 || new_ids == 0, "version {v} returned {new_ids} new items");
                        seen.push(v);
                    }
                    seen
                })
            })
            .collect();
        assert_eq!(s.post("/ingest", "application/x-ndjson", &second.join("\n")).0, 200);
        for r in readers {
            let seen = r.join().unwrap();
            assert!(seen.windows(2).all(|w| w[0] <= w[1]), "version went backwards: {seen:?}");
        }
    });
    assert_eq!(s.app.engine().unwrap().version(), 2);
}

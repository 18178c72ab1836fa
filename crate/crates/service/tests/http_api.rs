mod common;

use std::sync::Arc;
use std::time::Duration;

use common::{doc, spike_stream, NEGATIVE, POSITIVE};
use reqwest::StatusCode;
use sentiflow_service::{http, Models, Pipeline, PipelineOptions, PipelineStats};
use serde_json::{json, Value};
use tokio::sync::oneshot;
use tokio::task::JoinHandle;

struct Server {
    base: String,
    pipeline: Arc<Pipeline>,
    stop: Option<oneshot::Sender<()>>,
    handle: JoinHandle<sentiflow_service::ServiceResult<PipelineStats>>,
    client: reqwest::Client,
}

impl Server {
    async fn start() -> Server {
        let options = PipelineOptions {
            workers: 2,
            ..PipelineOptions::default()
        };
        let pipeline = Arc::new(Pipeline::start(Arc::new(Models::lexicon_only()), options).unwrap());
        let listener = http::bind("127.0.0.1:0").await.unwrap();
        let base = format!("http://{}", listener.local_addr().unwrap());
        let (stop, stopped) = oneshot::channel::<()>();
        let handle = tokio::spawn(http::serve_with_shutdown(Arc::clone(&pipeline), listener, async {
            let _ = stopped.await;
        }));
        Server {
            base,
            pipeline,
            stop: Some(stop),
            handle,
            client: reqwest::Client::new(),
        }
    }

    fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base)
    }

    async fn get(&self, path: &str) -> (StatusCode, Value) {
        let r = self.client.get(self.url(path)).send().await.unwrap();
        (r.status(), r.json().await.unwrap())
    }

    async fn post(&self, path: &str, body: String) -> (StatusCode, Value) {
        let r = self
            .client
            .post(self.url(path))
            .header("content-type", "application/json")
            .body(body)
            .send()
            .await
            .unwrap();
        (r.status(), r.json().await.unwrap())
    }

    async fn settle(&self) {
        let p = Arc::clone(&self.pipeline);
        assert!(
            tokio::task::spawn_blocking(move || p.wait_idle(Duration::from_secs(30)))
                .await
                .unwrap()
        );
    }

    async fn stop(mut self) -> PipelineStats {
        self.stop.take().unwrap().send(()).unwrap();
        self.handle.await.unwrap().unwrap()
    }
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn posted_document_shows_up_in_the_summary() {
    let server = Server::start().await;
    let body = doc("one", 0, NEGATIVE).to_json_line();
    let (status, admission) = server.post("/v1/documents", body).await;
    assert_eq!(status, StatusCode::ACCEPTED);
    assert_eq!(admission, json!({ "accepted": 1, "rejected": 0 }));
    server.settle().await;

    let (status, summary) = server.get("/v1/summary").await;
    assert_eq!(status, StatusCode::OK);
    let windows = summary["windows"].as_array().unwrap();
    assert_eq!(windows.len(), 1);
    assert_eq!(windows[0]["volume"], 1);
    assert_eq!(windows[0]["negative"], 1);
    assert_eq!(summary["open_windows"], 1);

    let stats = server.stop().await;
    assert_eq!((stats.ingested, stats.classified), (1, 1));
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn summary_without_data_is_zeroed() {
    let server = Server::start().await;
    let (status, summary) = server.get("/v1/summary?windows=5").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(summary["windows"], json!([]));
    assert_eq!(summary["open_windows"], 0);
    assert!(summary["trend"].is_null());
    for a in summary["aspects"].as_array().unwrap() {
        assert_eq!(a["counts"]["negative"], 0);
        assert_eq!(a["counts"]["positive"], 0);
    }
    let (_, stats) = server.get("/v1/stats").await;
    assert_eq!(stats["ingested"], 0);
    assert_eq!(stats["classified"], 0);
    server.stop().await;
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn spike_in_five_hundred_documents_raises_one_alert() {
    let server = Server::start().await;
    let docs: Vec<Value> = spike_stream()
        .iter()
        .map(|d| serde_json::to_value(d).unwrap())
        .collect();
    let (status, admission) = server.post("/v1/documents", Value::Array(docs).to_string()).await;
    assert_eq!(status, StatusCode::ACCEPTED);
    assert_eq!(admission["accepted"], 500);
    server.settle().await;

    let (status, alerts) = server.get("/v1/alerts").await;
    assert_eq!(status, StatusCode::OK);
    let alerts = alerts.as_array().unwrap();
    assert_eq!(alerts.len(), 1);
    assert_eq!(alerts[0]["volume"], 60);

    let spike_start = alerts[0]["window_start"].as_str().unwrap().to_string();
    let (_, later) = server.get(&format!("/v1/alerts?since={spike_start}")).await;
    assert_eq!(later.as_array().unwrap().len(), 1);
    let ms = common::at(11 * common::MINUTE).timestamp_millis();
    let (_, none) = server.get(&format!("/v1/alerts?since={ms}")).await;
    assert_eq!(none, json!([]));

    let (_, stats) = server.get("/v1/stats").await;
    assert_eq!(stats["ingested"], 500);
    assert_eq!(stats["alerts"], 1);
    let stats = server.stop().await;
    assert!(stats.conserved());
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn classify_answers_synchronously() {
    let server = Server::start().await;
    let (status, out) = server.post("/v1/classify", doc("c", 0, POSITIVE).to_json_line()).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(out["status"], "classified");
    let p: Vec<f64> = serde_json::from_value(out["sentiment"].clone()).unwrap();
    assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    assert!(p[2] > p[0]);

    let (status, _) = server.post("/v1/classify", doc("e", 0, "").to_json_line()).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    let stats = server.stop().await;
    assert_eq!(stats.ingested, 0);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn bad_payloads_are_rejected_and_counted() {
    let server = Server::start().await;
    let (status, body) = server.post("/v1/documents", "{not json".into()).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert!(body["error"].is_string());
    let (status, _) = server.post("/v1/documents", "42".into()).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    let mixed = json!([
        serde_json::to_value(doc("ok", 0, POSITIVE)).unwrap(),
        { "id": "missing-fields" },
        serde_json::to_value(doc("empty", 10, "")).unwrap(),
    ]);
    let (status, admission) = server.post("/v1/documents", mixed.to_string()).await;
    assert_eq!(status, StatusCode::ACCEPTED);
    assert_eq!(admission, json!({ "accepted": 2, "rejected": 1 }));
    server.settle().await;

    let (_, stats) = server.get("/v1/stats").await;
    assert_eq!(stats["ingested"], 3);
    assert_eq!(stats["classified"], 1);
    assert_eq!(stats["rejected"], 2);
    let (status, _) = server.get("/v1/alerts?since=yesterday").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    server.stop().await;
}

#![allow(dead_code)]

use std::io::{BufRead, BufReader};
use std::path::Path;
use std::process::{Child, Command, Stdio};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use conceptlens::api::{self, AppState};
use conceptlens::fixture::Fixture;
use conceptlens::queue::Queue;
use conceptlens::Store;
use reqwest::blocking::Client;
use serde_json::{json, Value};

pub struct Server {
    pub base: String,
    child: Option<Child>,
    stop: Option<tokio::sync::oneshot::Sender<()>>,
    thread: Option<thread::JoinHandle<()>>,
}

impl Server {
    /// API served from a background thread of this process.
    pub fn in_process(data_dir: &Path) -> Server {
        let store = Arc::new(Store::open(data_dir).unwrap());
        let queue = Arc::new(Queue::start(store.clone(), 1));
        queue.recover(&store).unwrap();
        let (addr_tx, addr_rx) = std::sync::mpsc::channel();
        let (stop_tx, stop_rx) = tokio::sync::oneshot::channel::<()>();
        let handle = thread::spawn(move || {
            let rt = tokio::runtime::Builder::new_multi_thread()
                .worker_threads(2)
                .enable_all()
                .build()
                .unwrap();
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
                addr_tx.send(listener.local_addr().unwrap()).unwrap();
                api::serve(listener, AppState { store, queue }, async {
                    let _ = stop_rx.await;
                })
                .await
                .unwrap();
            });
        });
        let addr = addr_rx.recv().unwrap();
        Server {
            base: format!("http://{addr}"),
            child: None,
            stop: Some(stop_tx),
            thread: Some(handle),
        }
    }

    /// The `serve` binary as a child process.
    pub fn process(data_dir: &Path) -> Server {
        let mut child = Command::new(env!("CARGO_BIN_EXE_conceptlens"))
            .args(["serve", "--port", "0", "--workers", "1", "--data-dir"])
            .arg(data_dir)
            .env("RUST_LOG", "warn")
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .expect("spawn server");
        let mut line = String::new();
        BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
        let base = line
            .trim()
            .strip_prefix("listening on ")
            .unwrap_or_else(|| panic!("unexpected banner {line:?}"))
            .to_string();
        Server {
            base,
            child: Some(child),
            stop: None,
            thread: None,
        }
    }

    /// SIGKILL, no chance to clean up.
    pub fn kill(mut self) {
        if let Some(mut c) = self.child.take() {
            c.kill().unwrap();
            c.wait().unwrap();
        }
    }

    pub fn client(&self) -> Api {
        Api {
            http: Client::builder().timeout(Duration::from_secs(600)).build().unwrap(),
            base: self.base.clone(),
        }
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        if let Some(mut c) = self.child.take() {
            let _ = c.kill();
            let _ = c.wait();
        }
        if let Some(stop) = self.stop.take() {
            let _ = stop.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

pub struct Api {
    http: Client,
    pub base: String,
}

fn reply(r: reqwest::blocking::Response) -> (u16, Value) {
    let status = r.status().as_u16();
    let body = r.json().unwrap_or(Value::Null);
    (status, body)
}

impl Api {
    fn url(&self, path: &str) -> String {
        format!("{}/api/v1{path}", self.base)
    }

    pub fn get(&self, path: &str) -> (u16, Value) {
        reply(self.http.get(self.url(path)).send().unwrap())
    }

    pub fn post_json(&self, path: &str, body: &Value) -> (u16, Value) {
        reply(self.http.post(self.url(path)).json(body).send().unwrap())
    }

    pub fn post_bytes(&self, path: &str, body: Vec<u8>) -> (u16, Value) {
        reply(self.http.post(self.url(path)).body(body).send().unwrap())
    }

    pub fn patch_json(&self, path: &str, body: &Value) -> (u16, Value) {
        reply(self.http.patch(self.url(path)).json(body).send().unwrap())
    }

    pub fn create(&self, name: &str, config: Value) -> String {
        let (code, body) = self.post_json("/projects", &json!({ "name": name, "config": config }));
        assert_eq!(code, 201, "{body}");
        body["project_id"].as_str().unwrap().to_string()
    }

    pub fn upload_fixture(&self, id: &str, f: &Fixture) {
        let p = |a: &str| format!("/projects/{id}/artifacts/{a}");
        let ok = |(code, body): (u16, Value)| assert_eq!(code, 200, "{body}");
        ok(self.post_bytes(&p("corpus"), f.corpus_text().into_bytes()));
        ok(self.post_bytes(&p("tokens"), f.tokens_ndjson()));
        let meta = f.meta();
        ok(self.post_bytes(
            &format!(
                "{}?n={}&d={}&layer={}&checksum={}",
                p("embeddings"),
                meta.n,
                meta.d,
                meta.layer,
                meta.checksum.unwrap()
            ),
            f.embeddings_bytes(),
        ));
        for (name, text) in &f.tags {
            ok(self.post_bytes(&p(&format!("tags/{name}")), text.clone().into_bytes()));
        }
        ok(self.post_bytes(&p("attributions"), f.attributions_ndjson()));
    }

    pub fn state(&self, id: &str) -> String {
        let (code, body) = self.get(&format!("/projects/{id}/status"));
        assert_eq!(code, 200, "{body}");
        body["state"].as_str().unwrap().to_string()
    }

    /// Polls until READY or FAILED; returns the final status body and every
    /// distinct state seen on the way.
    pub fn wait_terminal(&self, id: &str, timeout: Duration) -> (Value, Vec<String>) {
        let start = Instant::now();
        let mut seen: Vec<String> = Vec::new();
        loop {
            let (code, body) = self.get(&format!("/projects/{id}/status"));
            assert_eq!(code, 200, "{body}");
            let state = body["state"].as_str().unwrap().to_string();
            if seen.last() != Some(&state) {
                seen.push(state.clone());
            }
            if state == "READY" || state == "FAILED" {
                return (body, seen);
            }
            assert!(start.elapsed() < timeout, "still {state} after {timeout:?}");
            thread::sleep(Duration::from_millis(5));
        }
    }

    /// Every item of a paged concept listing.
    pub fn all_concepts(&self, id: &str, sort: &str, order: &str, per_page: usize) -> Vec<Value> {
        let mut out = Vec::new();
        let mut total = None;
        for page in 1.. {
            let (code, body) = self.get(&format!(
                "/projects/{id}/concepts?sort={sort}&order={order}&page={page}&per_page={per_page}"
            ));
            assert_eq!(code, 200, "{body}");
            let t = body["total"].as_u64().unwrap();
            assert_eq!(*total.get_or_insert(t), t, "total changed between pages");
            let items = body["items"].as_array().unwrap();
            assert!(items.len() <= per_page);
            if items.is_empty() {
                break;
            }
            out.extend(items.iter().cloned());
        }
        out
    }
}

/// Position of a job state along the forward path; FAILED is off-path.
pub fn rank(state: &str) -> Option<usize> {
    ["CREATED", "ACCEPTING_ARTIFACTS", "QUEUED", "CLUSTERING", "ALIGNING", "SCORING", "READY"]
        .iter()
        .position(|s| *s == state)
}

/// Whether a polled sequence of states is consistent with the state
/// machine: forward along the path (polling may skip states), possibly
/// ending in FAILED.
pub fn legal_sequence(seen: &[String]) -> bool {
    let mut last = 0;
    for (i, s) in seen.iter().enumerate() {
        if s == "FAILED" {
            return i == seen.len() - 1;
        }
        match rank(s) {
            Some(r) if r >= last => last = r,
            _ => return false,
        }
    }
    true
}

/// Independent reference ordering for a concept listing.
pub fn reference_order(items: &[Value], sort: &str, order: &str) -> Vec<u64> {
    let key = |v: &Value| -> Option<f64> {
        match sort {
            "size" => v["size"].as_f64(),
            "alignment" => v["best_alignment"]["score"].as_f64(),
            "class" => v["purity"].as_f64(),
            "relevance" => v["relevance"].as_f64(),
            _ => unreachable!(),
        }
    };
    let mut rows: Vec<(Option<f64>, u64)> = items.iter().map(|v| (key(v), v["concept_id"].as_u64().unwrap())).collect();
    rows.sort_by(|a, b| {
        use std::cmp::Ordering::*;
        let primary = match (a.0, b.0) {
            (Some(x), Some(y)) => {
                let o = x.partial_cmp(&y).unwrap();
                if order == "desc" {
                    o.reverse()
                } else {
                    o
                }
            }
            (Some(_), None) => Less,
            (None, Some(_)) => Greater,
            (None, None) => Equal,
        };
        primary.then(a.1.cmp(&b.1))
    });
    rows.into_iter().map(|r| r.1).collect()
}

pub fn ids(items: &[Value]) -> Vec<u64> {
    items.iter().map(|v| v["concept_id"].as_u64().unwrap()).collect()
}

/// Fixture large enough that clustering runs for a few seconds, leaving
/// room to kill the server mid-stage.
pub fn slow_fixture_spec() -> conceptlens::fixture::FixtureSpec {
    conceptlens::fixture::FixtureSpec {
        sentences: 1500,
        dim: 256,
        ..Default::default()
    }
}

mod common;

use std::time::Duration;

use common::{ids, legal_sequence, reference_order, Api, Server};
use conceptlens::fixture::{Fixture, FixtureSpec};
use serde_json::{json, Value};

fn fixture() -> Fixture {
    Fixture::generate(FixtureSpec::default())
}

fn config(f: &Fixture) -> Value {
    serde_json::to_value(f.config()).unwrap()
}

fn assert_error(body: &Value, code: &str) {
    let obj = body.as_object().unwrap_or_else(|| panic!("not an object: {body}"));
    let mut keys: Vec<&str> = obj.keys().map(String::as_str).collect();
    keys.sort();
    assert_eq!(keys, ["code", "details", "message"], "{body}");
    assert_eq!(body["code"], code, "{body}");
    assert!(!body["message"].as_str().unwrap().is_empty());
}

/// A project taken to READY on the fixture.
fn ready(api: &Api, f: &Fixture) -> String {
    let id = api.create("ready", config(f));
    api.upload_fixture(&id, f);
    let (code, body) = api.post_json(&format!("/projects/{id}/run"), &json!({}));
    assert_eq!(code, 202, "{body}");
    let (status, seen) = api.wait_terminal(&id, Duration::from_secs(120));
    assert_eq!(status["state"], "READY", "{status}");
    assert!(legal_sequence(&seen), "{seen:?}");
    id
}

#[test]
fn project_creation_validates_config() {
    let dir = tempfile::tempdir().unwrap();
    let server = Server::in_process(dir.path());
    let api = server.client();

    let (code, body) = api.post_json("/projects", &json!({ "name": "x", "config": { "alignment_threshold": 1.5 } }));
    assert_eq!(code, 422);
    assert_error(&body, "VALIDATION_ERROR");

    let (code, body) = api.post_json("/projects", &json!({ "name": "x", "colour": "red" }));
    assert_eq!(code, 422);
    assert_error(&body, "VALIDATION_ERROR");

    let a = api.create("same", json!({}));
    let b = api.create("same", json!({}));
    assert_ne!(a, b);
    assert_eq!(api.state(&a), "ACCEPTING_ARTIFACTS");

    let (code, body) = api.get("/projects");
    assert_eq!(code, 200);
    assert_eq!(body.as_array().unwrap().len(), 2);
}

#[test]
fn unknown_routes_and_projects() {
    let dir = tempfile::tempdir().unwrap();
    let server = Server::in_process(dir.path());
    let api = server.client();
    let (code, body) = api.get("/projects/not-a-uuid/status");
    assert_eq!(code, 404);
    assert_error(&body, "NOT_FOUND");
    let (code, body) = api.get("/projects/6f1c3b52-5d0e-4a8e-9f55-0d8f2b7f6e11/status");
    assert_eq!(code, 404);
    assert_error(&body, "NOT_FOUND");
    let (code, body) = api.get("/nothing/here");
    assert_eq!(code, 404);
    assert_error(&body, "NOT_FOUND");
}

#[test]
fn run_requires_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let server = Server::in_process(dir.path());
    let api = server.client();
    let f = fixture();
    let id = api.create("partial", config(&f));
    api.post_bytes(&format!("/projects/{id}/artifacts/corpus"), f.corpus_text().into_bytes());
    api.post_bytes(&format!("/projects/{id}/artifacts/tokens"), f.tokens_ndjson());
    let (code, body) = api.post_json(&format!("/projects/{id}/run"), &json!({}));
    assert_eq!(code, 412);
    assert_error(&body, "PRECONDITION_FAILED");
    assert_eq!(body["details"]["missing"], json!(["embeddings"]));
    assert_eq!(api.state(&id), "ACCEPTING_ARTIFACTS");
}

#[test]
fn reads_wait_for_ready() {
    let dir = tempfile::tempdir().unwrap();
    let server = Server::in_process(dir.path());
    let api = server.client();
    let f = fixture();
    let id = api.create("early", config(&f));
    for path in ["overview", "concepts", "concepts/0", "sentences", "sentences/0/explanation"] {
        let (code, body) = api.get(&format!("/projects/{id}/{path}"));
        assert_eq!(code, 409, "{path}: {body}");
        assert_error(&body, "CONFLICT");
    }
}

#[test]
fn lifecycle_and_browsing() {
    let dir = tempfile::tempdir().unwrap();
    let server = Server::in_process(dir.path());
    let api = server.client();
    let f = fixture();
    let id = ready(&api, &f);

    let (code, status) = api.get(&format!("/projects/{id}/status"));
    assert_eq!(code, 200);
    assert_eq!(status["progress"], 1.0);
    assert!(status["failure_reason"].is_null());

    // Uploads and reruns are refused once the project has run.
    let (code, body) = api.post_bytes(&format!("/projects/{id}/artifacts/corpus"), f.corpus_text().into_bytes());
    assert_eq!(code, 409);
    assert_error(&body, "CONFLICT");
    let (code, body) = api.post_json(&format!("/projects/{id}/run"), &json!({}));
    assert_eq!(code, 409);
    assert_error(&body, "INVALID_TRANSITION");

    let (_, overview) = api.get(&format!("/projects/{id}/overview"));
    let k = overview["concept_count"].as_u64().unwrap();
    assert_eq!(k, f.config().cluster_count as u64);

    for sort in ["size", "alignment", "class", "relevance"] {
        for order in ["asc", "desc"] {
            let all = api.all_concepts(&id, sort, order, 500);
            assert_eq!(all.len() as u64, k);
            assert_eq!(ids(&all), reference_order(&all, sort, order), "{sort} {order}");
            // Small pages concatenate to the same listing.
            let paged = api.all_concepts(&id, sort, order, 3);
            assert_eq!(ids(&paged), ids(&all), "{sort} {order}");
        }
    }

    let (code, page) = api.get(&format!("/projects/{id}/concepts"));
    assert_eq!(code, 200);
    assert_eq!(page["per_page"], 20);
    assert_eq!(page["sort_key"], "size");
    assert_eq!(page["sort_order"], "desc");

    for bad in ["sort=colour", "order=up", "page=0", "per_page=0", "per_page=501", "page=x", "tagset=nope"] {
        let (code, body) = api.get(&format!("/projects/{id}/concepts?{bad}"));
        assert_eq!(code, 422, "{bad}");
        assert_error(&body, "VALIDATION_ERROR");
    }

    // Tagset filter keeps only concepts aligned under it.
    let (_, filtered) = api.get(&format!("/projects/{id}/concepts?tagset=pos&per_page=500"));
    for item in filtered["items"].as_array().unwrap() {
        assert_eq!(item["best_alignment"]["tagset"], "pos");
    }

    let (code, sentences) = api.get(&format!("/projects/{id}/sentences?per_page=500"));
    assert_eq!(code, 200);
    assert_eq!(sentences["total"], f.sentences.len());
    assert_eq!(sentences["items"].as_array().unwrap().len(), f.sentences.len());
}

#[test]
fn concept_detail_shows_corpus_context() {
    let dir = tempfile::tempdir().unwrap();
    let server = Server::in_process(dir.path());
    let api = server.client();
    let f = fixture();
    let id = ready(&api, &f);
    let corpus: Vec<Vec<String>> = f
        .corpus_text()
        .lines()
        .map(|l| l.split('\t').next().unwrap().split(' ').map(str::to_string).collect())
        .collect();

    let k = f.config().cluster_count;
    let mut members = 0;
    for cid in 0..k {
        let (code, detail) = api.get(&format!("/projects/{id}/concepts/{cid}"));
        assert_eq!(code, 200, "{detail}");
        assert_eq!(detail["concept_id"], cid);
        let list = detail["members"].as_array().unwrap();
        assert_eq!(list.len() as u64, detail["size"].as_u64().unwrap());
        for m in list {
            let words = &corpus[m["sentence_id"].as_u64().unwrap() as usize];
            let pos = m["position"].as_u64().unwrap() as usize;
            assert_eq!(m["surface"], words[pos].as_str());
            assert_eq!(m["left"], words[pos.saturating_sub(5)..pos].join(" "));
            assert_eq!(m["right"], words[pos + 1..(pos + 6).min(words.len())].join(" "));
            members += 1;
        }
        let counted: u64 = detail["word_types"].as_array().unwrap().iter().map(|t| t["count"].as_u64().unwrap()).sum();
        assert_eq!(counted, list.len() as u64);
    }
    assert!(members > 0);

    for bad in [k.to_string(), "abc".to_string()] {
        let (code, body) = api.get(&format!("/projects/{id}/concepts/{bad}"));
        assert_eq!(code, 404);
        assert_error(&body, "NOT_FOUND");
    }
}

#[test]
fn label_edits() {
    let dir = tempfile::tempdir().unwrap();
    let server = Server::in_process(dir.path());
    let api = server.client();
    let f = fixture();
    let id = ready(&api, &f);
    let path = format!("/projects/{id}/concepts/0/label");

    let (code, label) = api.patch_json(&path, &json!({ "label": " success verbs " }));
    assert_eq!(code, 200, "{label}");
    assert_eq!(label["user_label"], "success verbs");
    let (_, detail) = api.get(&format!("/projects/{id}/concepts/0"));
    assert_eq!(detail["label"]["user_label"], "success verbs");
    assert!(!detail["label"]["auto_label"].as_str().unwrap().is_empty());
    let listed = api.all_concepts(&id, "size", "desc", 500);
    let row = listed.iter().find(|c| c["concept_id"] == 0).unwrap();
    assert_eq!(row["label"], "success verbs");

    for body in [json!({ "label": "   " }), json!({ "label": "x".repeat(201) }), json!({ "name": "x" })] {
        let (code, err) = api.patch_json(&path, &body);
        assert_eq!(code, 422, "{body}");
        assert_error(&err, "VALIDATION_ERROR");
    }
    let (code, err) = api.patch_json(&format!("/projects/{id}/concepts/9999/label"), &json!({ "label": "x" }));
    assert_eq!(code, 404);
    assert_error(&err, "NOT_FOUND");
}

#[test]
fn explanations() {
    let dir = tempfile::tempdir().unwrap();
    let server = Server::in_process(dir.path());
    let api = server.client();
    let f = fixture();
    let id = ready(&api, &f);
    let sid = f.attributions[0].sentence_id;
    let (code, first) = api.get(&format!("/projects/{id}/sentences/{sid}/explanation"));
    assert_eq!(code, 200, "{first}");
    let (_, second) = api.get(&format!("/projects/{id}/sentences/{sid}/explanation"));
    assert_eq!(first, second);
    assert_eq!(first["sentence_id"], sid);
    let n = first["word_saliencies"].as_array().unwrap().len();
    assert_eq!(n, f.sentences[sid].words.len());
    assert!((first["top_word"].as_u64().unwrap() as usize) < n);

    let (code, body) = api.get(&format!("/projects/{id}/sentences/{}/explanation", f.sentences.len()));
    assert_eq!(code, 404);
    assert_error(&body, "NOT_FOUND");
}

#[test]
fn explanation_without_attributions() {
    let dir = tempfile::tempdir().unwrap();
    let server = Server::in_process(dir.path());
    let api = server.client();
    let f = fixture();
    let id = api.create("plain", config(&f));
    let p = |a: &str| format!("/projects/{id}/artifacts/{a}");
    api.post_bytes(&p("corpus"), f.corpus_text().into_bytes());
    api.post_bytes(&p("tokens"), f.tokens_ndjson());
    let m = f.meta();
    api.post_bytes(&format!("{}?n={}&d={}&layer={}", p("embeddings"), m.n, m.d, m.layer), f.embeddings_bytes());
    api.post_json(&format!("/projects/{id}/run"), &json!({}));
    let (status, _) = api.wait_terminal(&id, Duration::from_secs(120));
    assert_eq!(status["state"], "READY", "{status}");
    let (code, body) = api.get(&format!("/projects/{id}/sentences/0/explanation"));
    assert_eq!(code, 404);
    assert_error(&body, "MISSING_ARTIFACT");
    let (_, overview) = api.get(&format!("/projects/{id}/overview"));
    assert_eq!(overview["top_salient_concepts"], json!([]));
}

#[test]
fn artifact_errors_carry_details() {
    let dir = tempfile::tempdir().unwrap();
    let server = Server::in_process(dir.path());
    let api = server.client();
    let f = fixture();
    let id = api.create("errors", config(&f));
    let p = |a: &str| format!("/projects/{id}/artifacts/{a}");

    let mut corpus = f.corpus_text().into_bytes();
    let second_line = corpus.iter().position(|&b| b == b'\n').unwrap() + 1;
    corpus.insert(second_line, 0xff);
    let (code, body) = api.post_bytes(&p("corpus"), corpus);
    assert_eq!(code, 422);
    assert_error(&body, "ENCODING_ERROR");
    assert_eq!(body["details"]["line"], 2);

    let (code, body) = api.post_bytes(&p("corpus"), b"a b\n\nc\n".to_vec());
    assert_eq!(code, 422);
    assert_error(&body, "INVALID_ARTIFACT");

    api.post_bytes(&p("corpus"), f.corpus_text().into_bytes());
    api.post_bytes(&p("tokens"), f.tokens_ndjson());
    let m = f.meta();
    let url = |n: usize, checksum: Option<&str>| {
        let mut u = format!("{}?n={n}&d={}&layer={}", p("embeddings"), m.d, m.layer);
        if let Some(c) = checksum {
            u.push_str(&format!("&checksum={c}"));
        }
        u
    };

    let mut short = f.embeddings_bytes();
    short.truncate(short.len() - 4);
    let (code, body) = api.post_bytes(&url(m.n, None), short);
    assert_eq!(code, 422);
    assert_error(&body, "SHAPE_ERROR");
    assert_eq!(body["details"]["expected"], m.n * m.d * 4);
    assert_eq!(body["details"]["actual"], m.n * m.d * 4 - 4);

    let (code, body) = api.post_bytes(&url(m.n - 1, None), f.embeddings_bytes()[..(m.n - 1) * m.d * 4].to_vec());
    assert_eq!(code, 422);
    assert_error(&body, "SHAPE_ERROR");

    let mut nan = f.embeddings_bytes();
    let at = (3 * m.d + 5) * 4;
    nan[at..at + 4].copy_from_slice(&f32::NAN.to_le_bytes());
    let (code, body) = api.post_bytes(&url(m.n, None), nan);
    assert_eq!(code, 422);
    assert_error(&body, "NUMERIC_ERROR");
    assert_eq!(body["details"], json!({ "row": 3, "col": 5 }));

    let (code, body) = api.post_bytes(&url(m.n, Some(&"0".repeat(64))), f.embeddings_bytes());
    assert_eq!(code, 422);
    assert_error(&body, "INVALID_ARTIFACT");

    let (code, body) = api.post_bytes(&format!("{}?d=3", p("embeddings")), vec![0; 12]);
    assert_eq!(code, 422);
    assert_error(&body, "VALIDATION_ERROR");

    let tags = f.tags["pos"].clone();
    let first_word = tags.split('\t').next().unwrap().to_string();
    let broken = tags.replacen(&first_word, "zzz", 1);
    let (code, body) = api.post_bytes(&p("tags/pos"), broken.into_bytes());
    assert_eq!(code, 422);
    assert_error(&body, "ALIGNMENT_MISMATCH");
    assert_eq!(
        body["details"],
        json!({ "sentence": 0, "position": 0, "expected": first_word, "found": "zzz" })
    );

    let truncated: String = tags.lines().take(3).map(|l| format!("{l}\n")).collect();
    let (code, body) = api.post_bytes(&p("tags/pos"), truncated.into_bytes());
    assert_eq!(code, 422);
    assert_error(&body, "ALIGNMENT_MISMATCH");
    assert_eq!(body["details"]["sentence"], 0);
    assert_eq!(body["details"]["position"], 3);
    assert!(body["details"]["found"].is_null());

    let (code, body) = api.post_bytes(&p("tags/bad.name"), tags.into_bytes());
    assert_eq!(code, 422);
    assert_error(&body, "VALIDATION_ERROR");

    let bad_ref = "{\"sentence_id\":99999,\"predicted_class\":\"positive\",\"class_probabilities\":{\"positive\":1.0},\"token_scores\":[0.1],\"convergence_delta\":0.0}\n";
    let (code, body) = api.post_bytes(&p("attributions"), bad_ref.as_bytes().to_vec());
    assert_eq!(code, 422);
    assert_error(&body, "UNKNOWN_REFERENCE");
}

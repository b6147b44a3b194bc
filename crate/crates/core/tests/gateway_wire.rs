//! Wire-level tests of the HTTP clients against a local server.

mod common;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use base64::Engine;
use common::serve;
use inkeval::gateway::{
    content_ref, Aspect, CachedChatClient, ChatClient, ChatMessage, ChatRequest, ContentStore, EndpointConfig,
    GatewayError, GenerationRequest, HttpChatClient, HttpImageClient, ImageClient, ResponseCache, RetryPolicy,
    Retrying,
};
use inkeval::similarity::{Backend, Similarity, SimilarityScorer, BUILTIN_STAMP};
use serde_json::{json, Value};

fn chat_reply(text: &str) -> String {
    json!({"choices": [{"message": {"role": "assistant", "content": text}}]}).to_string()
}

fn endpoint(base: &str) -> EndpointConfig {
    let mut cfg = EndpointConfig::new(base, "vlm-test");
    cfg.api_key = Some("sk-test".into());
    cfg.timeout = Duration::from_secs(5);
    cfg
}

fn request() -> ChatRequest {
    ChatRequest::new("vlm-test", vec![ChatMessage::system("你是专家"), ChatMessage::user("评价这幅画")])
}

#[test]
fn similarity_wire_protocol() {
    let (base, seen) = serve(|req| {
        let body: Value = serde_json::from_str(&req.body).unwrap();
        let scores: Vec<f64> = body["pairs"]
            .as_array()
            .unwrap()
            .iter()
            .map(|p| if p["candidate"] == p["reference"] { 0.99 } else { 0.25 })
            .collect();
        (200, json!({ "scores": scores }).to_string())
    });
    let scorer = SimilarityScorer::remote(&base, Duration::from_secs(5), 4);
    assert_eq!(*scorer.backend(), Backend::RemoteService);
    let pairs = vec![
        ("题材评价:  构图\n完整".to_string(), "构图 完整".to_string()),
        ("山水".to_string(), "花鸟".to_string()),
        ("".to_string(), "花鸟".to_string()),
    ];
    assert_eq!(scorer.batch_similarity(&pairs), [0.99, 0.25, 0.0]);

    let req = seen.recv_timeout(Duration::from_secs(5)).unwrap();
    assert_eq!((req.method.as_str(), req.path.as_str()), ("POST", "/similarity"));
    let body: Value = serde_json::from_str(&req.body).unwrap();
    // Markers stripped, whitespace collapsed, empty pairs never sent.
    assert_eq!(
        body,
        json!({"pairs": [
            {"candidate": "构图 完整", "reference": "构图 完整"},
            {"candidate": "山水", "reference": "花鸟"},
        ]})
    );
    assert_eq!(scorer.stamp(), format!("remote:{base}"));
    assert_eq!(scorer.fallback_count(), 0);
}

#[test]
fn similarity_falls_back_on_errors_and_bad_payloads() {
    let calls = Arc::new(AtomicUsize::new(0));
    let counter = Arc::clone(&calls);
    let (base, _seen) = serve(move |_| match counter.fetch_add(1, Ordering::SeqCst) {
        0 => (503, "{\"detail\": \"warming up\"}".into()),
        1 => (200, "{\"scores\": [0.5, 0.5, 0.5]}".into()),
        _ => (200, "{\"scores\": [2.0]}".into()),
    });
    let scorer = SimilarityScorer::remote(&base, Duration::from_secs(5), 1);
    assert_eq!(scorer.similarity("青绿山水", "青绿山水"), 1.0);
    assert_eq!(scorer.similarity("青绿山水", "青绿山水"), 1.0);
    assert_eq!(scorer.fallback_count(), 2);
    assert!(scorer.stamp().starts_with(BUILTIN_STAMP));
    // Out-of-range scores from the service are clamped.
    assert_eq!(scorer.similarity("a", "b"), 1.0);
    assert!(scorer.stamp().contains("2 batches fell back"));
}

#[test]
fn chat_request_shape_and_auth_header() {
    let (base, seen) = serve(|_| (200, chat_reply("最终分数: 4")));
    let client = HttpChatClient::new(endpoint(&format!("{base}/v1/")));
    let mut req = request();
    req.seed = Some(42);
    assert_eq!(client.chat(&req).unwrap(), "最终分数: 4");
    let got = seen.recv_timeout(Duration::from_secs(5)).unwrap();
    assert_eq!(got.path, "/v1/chat/completions");
    assert_eq!(got.header("authorization"), Some("Bearer sk-test"));
    let body: Value = serde_json::from_str(&got.body).unwrap();
    assert_eq!(body["model"], "vlm-test");
    assert_eq!(body["temperature"], 0.0);
    assert_eq!(body["seed"], 42);
    assert_eq!(body["messages"][0], json!({"role": "system", "content": "你是专家"}));
    assert_eq!(body["messages"][1]["role"], "user");
}

#[test]
fn chat_status_mapping() {
    let cases: [(u16, &str); 6] = [
        (401, "{}"),
        (403, "{}"),
        (429, "{}"),
        (502, "{}"),
        (400, "{\"error\": \"bad model\"}"),
        (200, "{\"choices\": [{\"message\": {\"content\": \"  \"}}]}"),
    ];
    for (status, body) in cases {
        let body = body.to_string();
        let (base, _seen) = serve(move |_| (status, body.clone()));
        let err = HttpChatClient::new(endpoint(&base)).chat(&request()).unwrap_err();
        let ok = match status {
            401 | 403 => matches!(err, GatewayError::AuthError(_)),
            429 | 502 => err.is_transient(),
            400 => matches!(&err, GatewayError::Rejected { status: 400, body } if body.contains("bad model")),
            _ => err == GatewayError::ResponseEmpty,
        };
        assert!(ok, "HTTP {status} mapped to {err:?}");
    }
    let refused = HttpChatClient::new(endpoint("http://127.0.0.1:9")).chat(&request()).unwrap_err();
    assert!(refused.is_transient(), "{refused:?}");
}

#[test]
fn retry_then_cache_over_the_wire() {
    let calls = Arc::new(AtomicUsize::new(0));
    let counter = Arc::clone(&calls);
    let (base, _seen) = serve(move |_| match counter.fetch_add(1, Ordering::SeqCst) {
        0 => (503, "{}".into()),
        1 => (429, "{}".into()),
        _ => (200, chat_reply("画面描述: 远山")),
    });
    let delays = Arc::new(Mutex::new(Vec::new()));
    let log = Arc::clone(&delays);
    let retrying = Retrying::new(HttpChatClient::new(endpoint(&base)), RetryPolicy::default())
        .with_sleeper(move |d| log.lock().unwrap().push(d));
    let dir = tempfile::tempdir().unwrap();
    let cached = CachedChatClient::new(retrying, ResponseCache::at(dir.path()));
    assert_eq!(cached.chat(&request()).unwrap(), "画面描述: 远山");
    assert_eq!(cached.chat(&request()).unwrap(), "画面描述: 远山");
    assert_eq!(calls.load(Ordering::SeqCst), 3);
    assert_eq!(cached.hits(), 1);
    assert_eq!(*delays.lock().unwrap(), [Duration::from_secs(1), Duration::from_secs(2)]);

    // A fresh client over the same directory answers from disk.
    let offline =
        CachedChatClient::new(HttpChatClient::new(endpoint("http://127.0.0.1:9")), ResponseCache::at(dir.path()));
    assert_eq!(offline.chat(&request()).unwrap(), "画面描述: 远山");
}

#[test]
fn stored_images_are_inlined_in_chat_requests() {
    let (base, seen) = serve(|_| (200, chat_reply("ok")));
    let store = Arc::new(ContentStore::in_memory());
    let image = store.put(&[0xFF, 0xD8, 0xFF, 0xE0, 1, 2, 3]).unwrap();
    let client = HttpChatClient::new(endpoint(&base)).with_store(Arc::clone(&store));
    let req = ChatRequest::new("vlm-test", vec![ChatMessage::user_with_image("评价", image)]);
    client.chat(&req).unwrap();
    let body: Value = serde_json::from_str(&seen.recv_timeout(Duration::from_secs(5)).unwrap().body).unwrap();
    let url = body["messages"][0]["content"][0]["image_url"]["url"].as_str().unwrap();
    assert!(url.starts_with("data:image/jpeg;base64,"), "{url}");
    assert_eq!(body["messages"][0]["content"][1], json!({"type": "text", "text": "评价"}));
}

#[test]
fn image_generation_b64_and_url() {
    let png = b"\x89PNG\r\n\x1a\nfake-image".to_vec();
    let encoded = base64::engine::general_purpose::STANDARD.encode(&png);
    let (base, seen) = serve(move |req| {
        if req.path.ends_with("/file.png") {
            (200, "downloaded-bytes".into())
        } else {
            (200, json!({"data": [{"b64_json": encoded}]}).to_string())
        }
    });
    let store = Arc::new(ContentStore::in_memory());
    let client = HttpImageClient::new(endpoint(&base), Arc::clone(&store));
    let gen = GenerationRequest {
        prompt: "寒江独钓".into(),
        aspect: Aspect::Hanging,
        model_id: "t2i-x".into(),
        seed: Some(7),
    };
    let r = client.generate_image(&gen).unwrap();
    assert_eq!(r, content_ref(&png));
    assert_eq!(store.get(&r).unwrap(), png);
    let got = seen.recv_timeout(Duration::from_secs(5)).unwrap();
    assert_eq!(got.path, "/images/generations");
    let body: Value = serde_json::from_str(&got.body).unwrap();
    assert_eq!(body["model"], "t2i-x");
    assert_eq!(body["size"], "1024x1536");
    assert_eq!(body["seed"], 7);
    assert_eq!(body["prompt"], "寒江独钓");

    let link = format!("{base}/file.png");
    let (base2, _seen2) = serve(move |_| (200, json!({"data": [{"url": link}]}).to_string()));
    let client = HttpImageClient::new(endpoint(&base2), Arc::clone(&store));
    let r = client.generate_image(&gen).unwrap();
    assert_eq!(store.get(&r).unwrap(), b"downloaded-bytes");

    let (base3, _seen3) = serve(|_| (200, "{\"data\": []}".into()));
    let err = HttpImageClient::new(endpoint(&base3), store).generate_image(&gen).unwrap_err();
    assert_eq!(err, GatewayError::ResponseEmpty);
}

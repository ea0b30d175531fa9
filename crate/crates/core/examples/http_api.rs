//! The `/v1/` HTTP API exercised in-process: create a session, answer until
//! it finishes, read the result.
//!
//! `kgfraud serve --checkpoint run/best.ckpt` serves the same router on a socket.

use std::sync::Arc;

use axum::body::Body;
use axum::http::Request;
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use kgfraud::kg::{generate_world, sample_profiles, ProfilesFile, Split, WorldGenConfig, PROFILES_FORMAT_VERSION};
use kgfraud::policy::{Policy, PolicyConfig, Variant};
use kgfraud::service::{router, AppState, ServiceConfig};
use kgfraud::training::Dataset;

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> anyhow::Result<Value> {
    let req = Request::builder().method(method).uri(uri).header("content-type", "application/json");
    let req = req.body(body.map_or_else(Body::empty, |b| Body::from(b.to_string())))?;
    let resp = app.clone().oneshot(req).await?;
    let status = resp.status();
    let bytes = resp.into_body().collect().await?.to_bytes();
    let v: Value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes)? };
    println!("{method} {uri} -> {status}");
    Ok(v)
}

#[tokio::main(flavor = "current_thread")]
async fn main() -> anyhow::Result<()> {
    let wcfg = WorldGenConfig { entities_per_item: [12; 4], extent_m: 15_000.0, ..WorldGenConfig::default() };
    let world = generate_world(&wcfg, 2)?;
    let profiles = sample_profiles(&world, 8, 2)?;
    let split = Split::random(8, (4, 2, 2), 2)?;
    let data = Arc::new(Dataset::new(world, ProfilesFile { format_version: PROFILES_FORMAT_VERSION, seed: 2, profiles, split })?);
    let policy = Arc::new(Policy::new(Variant::FullS, PolicyConfig::default(), 4));
    let app = router(AppState::new(data, policy, ServiceConfig::default()));

    println!("{}", call(&app, "GET", "/v1/health", None).await?);
    let v = call(&app, "POST", "/v1/sessions", Some(json!({ "profile": 3, "fake_items": ["School"] }))).await?;
    let id = v["session_id"].as_str().unwrap_or_default().to_string();
    let mut k = 0;
    loop {
        let q = call(&app, "GET", &format!("/v1/sessions/{id}/question"), None).await?;
        if q["text"].is_null() {
            break;
        }
        println!("  {}  {}", q["text"], q["options"]);
        let label = ["A", "B", "D"][k % 3];
        call(&app, "POST", &format!("/v1/sessions/{id}/answer"), Some(json!({ "label": label }))).await?;
        k += 1;
    }
    let r = call(&app, "GET", &format!("/v1/sessions/{id}/result"), None).await?;
    println!("{}", serde_json::to_string_pretty(&json!({ "decision": r["decision"], "item_decisions": r["item_decisions"], "questions_asked": r["questions_asked"] }))?);
    call(&app, "DELETE", &format!("/v1/sessions/{id}"), None).await?;
    Ok(())
}

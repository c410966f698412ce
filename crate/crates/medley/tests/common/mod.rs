#![allow(dead_code)]

use std::sync::Arc;

use axum::Router;
use medley_core::mediator::Mediator;

/// Serves `router` on an ephemeral port from a background runtime.
pub fn spawn(router: Router) -> String {
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    serve_on(listener, router);
    format!("http://{addr}")
}

pub fn spawn_api(m: Mediator) -> String {
    spawn(medley_server::api_router(Arc::new(m)))
}

pub fn agent() -> ureq::Agent {
    ureq::Agent::config_builder()
        .http_status_as_error(false)
        .timeout_global(Some(std::time::Duration::from_secs(30)))
        .build()
        .into()
}

/// Status, content type and body.
pub fn get(url: &str) -> (u16, String, String) {
    finish(agent().get(url).call().unwrap())
}

pub fn post_json(url: &str, body: &serde_json::Value) -> (u16, String, String) {
    finish(
        agent()
            .post(url)
            .header("Content-Type", "application/json")
            .send(body.to_string())
            .unwrap(),
    )
}

pub fn post_raw(url: &str, content_type: &str, body: &str) -> (u16, String, String) {
    finish(agent().post(url).header("Content-Type", content_type).send(body).unwrap())
}

fn finish(mut r: ureq::http::Response<ureq::Body>) -> (u16, String, String) {
    let status = r.status().as_u16();
    let ct = r
        .headers()
        .get("content-type")
        .and_then(|v| v.to_str().ok())
        .unwrap_or("")
        .to_string();
    (status, ct, r.body_mut().read_to_string().unwrap())
}

/// Runs the daemon for a shipped source; its provenance names the real URL.
pub fn spawn_source(name: &str) -> String {
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}", listener.local_addr().unwrap());
    let svc = medley_core::fixtures::service(name).with_endpoint(url.clone());
    serve_on(listener, medley_server::source_router(Arc::new(svc)));
    url
}

fn serve_on(listener: std::net::TcpListener, router: Router) {
    listener.set_nonblocking(true).unwrap();
    std::thread::spawn(move || {
        let rt = tokio::runtime::Runtime::new().unwrap();
        rt.block_on(async move {
            let l = tokio::net::TcpListener::from_std(listener).unwrap();
            axum::serve(l, router).await.unwrap();
        });
    });
}

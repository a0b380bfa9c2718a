#![allow(dead_code)]

use std::collections::BTreeMap;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use hidss_core::feedback::CriteriaCatalog;
use hidss_core::ontology::{BusinessModel, ModelDocument, PatternCatalog, RawMetadata};
use hidss_core::repository::Repository;
use hidss_core::simkit::{generate_world, World, WorldParams};
use hidss_core::Dimension;
use hidss_service::{Hidss, ServiceConfig};
use http_body_util::BodyExt;
use serde_json::Value;
use tower::ServiceExt;

/// Synthetic world whose first `labeled` ventures carry outcomes.
pub fn world(n_ventures: usize) -> World {
    let params = WorldParams { n_ventures, ..WorldParams::default() };
    generate_world(&params, &PatternCatalog::default_catalog(), &CriteriaCatalog::default_catalog()).unwrap()
}

/// Service seeded with a synthetic world (mentors, ventures, judgments and
/// outcomes for the first `labeled` ventures) and trained on it.
pub fn seeded_app(world: &World, labeled: usize, config: ServiceConfig) -> Hidss {
    let repo = Repository::in_memory(config.catalogs().unwrap());
    repo.import(&world.to_events(0..labeled)).unwrap();
    let app = Hidss::with_repository(config, repo);
    app.retrain().unwrap();
    app
}

pub fn document(model: &BusinessModel) -> ModelDocument {
    let mut doc = model.to_document();
    doc.catalog_version = None;
    doc
}

pub fn first_choice_document() -> ModelDocument {
    let cat = PatternCatalog::default_catalog();
    ModelDocument {
        catalog_version: None,
        choices: cat.elements.iter().map(|e| (e.element_id.clone(), e.choices[0].clone())).collect(),
        metadata: RawMetadata { team_size: 3, venture_age_months: 8, industry: "software".into() },
        profile: BTreeMap::new(),
    }
}

pub fn ratings(value: i32) -> BTreeMap<String, i32> {
    CriteriaCatalog::default_catalog().criteria.iter().map(|c| (c.criterion_id.clone(), value)).collect()
}

pub fn comments(text: &str) -> BTreeMap<Dimension, String> {
    Dimension::ALL.iter().map(|&d| (d, format!("{text} ({d})"))).collect()
}

pub fn router(app: Hidss) -> Router {
    hidss_service::http::router(Arc::new(app))
}

/// Sends one request and returns the status and parsed body.
pub async fn call(router: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let mut req = Request::builder().method(method).uri(uri).header("x-hidss-actor", "tester");
    let body = match body {
        Some(v) => {
            req = req.header("content-type", "application/json");
            Body::from(v.to_string())
        }
        None => Body::empty(),
    };
    let resp = router.clone().oneshot(req.body(body).unwrap()).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
    (status, value)
}

// Copyright 2026 The defectchain Authors
// SPDX-License-Identifier: Apache-2.0

//! HTTP routes. Every body is canonical JSON.

use std::collections::HashMap;
use std::convert::Infallible;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use defectchain_core::access::{bearer, parse_defect, ApiError, ErrorCode, RegisterRequest};
use defectchain_core::canonical_bytes;
use futures::stream::{self, Stream, StreamExt};
use serde::Serialize;
use tower_http::cors::CorsLayer;

use crate::app::AppState;
use crate::events::{live_events, StreamEvent};
use crate::simctl::InjectRequest;

type Shared = Arc<AppState>;

pub struct Failure(pub ApiError);

impl From<ApiError> for Failure {
    fn from(e: ApiError) -> Self {
        Failure(e)
    }
}

impl IntoResponse for Failure {
    fn into_response(self) -> Response {
        json_bytes(self.0.http_status, canonical_bytes(&self.0))
    }
}

fn json_bytes(status: u16, body: Vec<u8>) -> Response {
    let status = StatusCode::from_u16(status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
    (status, [(header::CONTENT_TYPE, "application/json")], body).into_response()
}

fn json<T: Serialize>(status: u16, value: &T) -> Response {
    json_bytes(status, canonical_bytes(value))
}

fn auth_header(headers: &HeaderMap) -> Option<&str> {
    bearer(headers.get(header::AUTHORIZATION).and_then(|v| v.to_str().ok()))
}

fn authorize(state: &AppState, headers: &HeaderMap) -> Result<String, Failure> {
    Ok(state.authorize(auth_header(headers))?)
}

pub fn router(state: Shared) -> Router {
    Router::new()
        .route("/api/auth/register", post(register))
        .route("/api/defects", post(post_defect))
        .route("/api/defects/shipment/{id}", get(by_shipment))
        .route("/api/defects/sensor/{id}", get(by_sensor))
        .route("/api/blocks/{n}", get(block))
        .route("/api/chain/verify", get(verify))
        .route("/api/stream", get(stream_events))
        .route("/api/sim/status", get(sim_status))
        .route("/api/sim/start", post(sim_start))
        .route("/api/sim/stop", post(sim_stop))
        .route("/api/sim/inject", post(sim_inject))
        .fallback(|| async { Failure(ApiError::not_found("route")) })
        .layer(CorsLayer::permissive())
        .with_state(state)
}

async fn register(State(state): State<Shared>, body: Bytes) -> Result<Response, Failure> {
    let req: RegisterRequest = serde_json::from_slice(&body)
        .map_err(|_| ApiError::new(ErrorCode::ValidationFailed, "body must be {\"org_id\", \"secret\"}"))?;
    let token = state.register(&req.org_id, &req.secret)?;
    Ok(json(200, &token))
}

async fn post_defect(State(state): State<Shared>, headers: HeaderMap, body: Bytes) -> Result<Response, Failure> {
    let org = authorize(&state, &headers)?;
    let record = parse_defect(&body)?;
    let resp = state.submit_record(&org, record).await?;
    Ok(json(resp.status.http_status(), &resp))
}

async fn by_shipment(
    State(state): State<Shared>,
    headers: HeaderMap,
    Path(id): Path<String>,
) -> Result<Response, Failure> {
    let org = authorize(&state, &headers)?;
    Ok(json_bytes(200, state.query_shipment(&org, &id)?))
}

async fn by_sensor(
    State(state): State<Shared>,
    headers: HeaderMap,
    Path(id): Path<String>,
) -> Result<Response, Failure> {
    let org = authorize(&state, &headers)?;
    Ok(json_bytes(200, state.query_sensor(&org, &id)?))
}

async fn block(State(state): State<Shared>, headers: HeaderMap, Path(n): Path<String>) -> Result<Response, Failure> {
    authorize(&state, &headers)?;
    let n: u64 = n.parse().map_err(|_| ApiError::not_found("block"))?;
    Ok(json_bytes(200, state.block_json(n)?))
}

async fn verify(State(state): State<Shared>, headers: HeaderMap) -> Result<Response, Failure> {
    authorize(&state, &headers)?;
    Ok(json(200, &state.verify()))
}

fn to_sse(ev: &StreamEvent) -> Event {
    let data = String::from_utf8(canonical_bytes(&ev.data)).expect("json is utf-8");
    Event::default().id(ev.seq.to_string()).event(ev.kind.as_str()).data(data)
}

/// Server-push events. Browsers cannot set headers on an EventSource, so
/// the token may also come as `?token=`. Resume point is `Last-Event-ID`
/// or `?last_seq=`.
async fn stream_events(
    State(state): State<Shared>,
    headers: HeaderMap,
    Query(q): Query<HashMap<String, String>>,
) -> Result<Sse<impl Stream<Item = Result<Event, Infallible>>>, Failure> {
    let token = auth_header(&headers).or(q.get("token").map(String::as_str));
    state.authorize(token)?;
    let last_seq = headers
        .get("last-event-id")
        .and_then(|v| v.to_str().ok())
        .or(q.get("last_seq").map(String::as_str))
        .and_then(|s| s.trim().parse::<u64>().ok())
        .unwrap_or(0);
    let (backlog, rx) = state.events.subscribe(last_seq);
    let high = backlog.last().map_or(last_seq, |e| e.seq);
    let backlog = stream::iter(backlog.into_iter().map(|e| Ok(to_sse(&e))));
    let live = live_events(rx, high).map(|e| Ok(to_sse(&e)));
    Ok(Sse::new(backlog.chain(live)).keep_alive(KeepAlive::default()))
}

fn sim_of(state: &AppState, headers: &HeaderMap) -> Result<crate::simctl::SimHandle, Failure> {
    authorize(state, headers)?;
    state.sim().cloned().ok_or_else(|| Failure(ApiError::not_found("simulator")))
}

async fn sim_status(State(state): State<Shared>, headers: HeaderMap) -> Result<Response, Failure> {
    Ok(json(200, &sim_of(&state, &headers)?.status()))
}

async fn sim_start(State(state): State<Shared>, headers: HeaderMap) -> Result<Response, Failure> {
    Ok(json(200, &sim_of(&state, &headers)?.start()))
}

async fn sim_stop(State(state): State<Shared>, headers: HeaderMap) -> Result<Response, Failure> {
    Ok(json(200, &sim_of(&state, &headers)?.stop()))
}

async fn sim_inject(State(state): State<Shared>, headers: HeaderMap, body: Bytes) -> Result<Response, Failure> {
    let sim = sim_of(&state, &headers)?;
    let req: InjectRequest = serde_json::from_slice(&body)
        .map_err(|e| ApiError::new(ErrorCode::ValidationFailed, format!("invalid injection: {e}")))?;
    Ok(json(200, &sim.inject(req)?))
}

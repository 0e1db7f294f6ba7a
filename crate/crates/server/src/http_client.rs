// Copyright 2026 The defectchain Authors
// SPDX-License-Identifier: Apache-2.0

//! Blocking HTTP client for the ledger API, used by the edge gateway
//! process and the multi-process harness.

use std::time::Duration;

use defectchain_core::access::{PostResponse, PostStatus, RegistrationToken};
use defectchain_core::gateway::{ClientError, LedgerClient, PostOutcome};
use defectchain_core::ledger::VerifyReport;
use defectchain_core::{canonical_bytes, DefectRecord};
use serde::de::DeserializeOwned;
use serde::Serialize;
use ureq::Agent;

#[derive(Clone)]
pub struct HttpLedger {
    agent: Agent,
    base: String,
}

impl HttpLedger {
    /// `base` is the server root, e.g. `http://127.0.0.1:8080`.
    pub fn new(base: &str, timeout: Duration) -> Self {
        let agent =
            Agent::config_builder().http_status_as_error(false).timeout_global(Some(timeout)).build().new_agent();
        HttpLedger { agent, base: base.trim_end_matches('/').to_string() }
    }

    pub fn base(&self) -> &str {
        &self.base
    }

    fn url(&self, path: &str) -> String {
        format!("{}{}", self.base, path)
    }

    /// Raw GET: status and body bytes.
    pub fn get(&self, path: &str, token: Option<&str>) -> Result<(u16, Vec<u8>), ClientError> {
        let mut req = self.agent.get(self.url(path));
        if let Some(t) = token {
            req = req.header("Authorization", format!("Bearer {t}"));
        }
        let mut resp = req.call().map_err(|e| ClientError::Unreachable(e.to_string()))?;
        let status = resp.status().as_u16();
        let body = resp.body_mut().read_to_vec().map_err(|e| ClientError::Unreachable(e.to_string()))?;
        Ok((status, body))
    }

    /// Raw POST of a JSON value.
    pub fn post<T: Serialize>(&self, path: &str, token: Option<&str>, body: &T) -> Result<(u16, Vec<u8>), ClientError> {
        self.post_bytes(path, token, &canonical_bytes(body))
    }

    pub fn post_bytes(&self, path: &str, token: Option<&str>, body: &[u8]) -> Result<(u16, Vec<u8>), ClientError> {
        let mut req = self.agent.post(self.url(path)).content_type("application/json");
        if let Some(t) = token {
            req = req.header("Authorization", format!("Bearer {t}"));
        }
        let mut resp = req.send(body).map_err(|e| ClientError::Unreachable(e.to_string()))?;
        let status = resp.status().as_u16();
        let body = resp.body_mut().read_to_vec().map_err(|e| ClientError::Unreachable(e.to_string()))?;
        Ok((status, body))
    }

    fn get_json<T: DeserializeOwned>(&self, path: &str, token: &str) -> Result<T, ClientError> {
        let (status, body) = self.get(path, Some(token))?;
        match status {
            200 => serde_json::from_slice(&body).map_err(|e| ClientError::Rejected(format!("bad response body: {e}"))),
            401 => Err(ClientError::Unauthorized),
            503 => Err(ClientError::Unreachable(error_text(&body))),
            _ => Err(ClientError::Rejected(error_text(&body))),
        }
    }

    pub fn query_shipment(&self, token: &str, shipment_id: &str) -> Result<Vec<DefectRecord>, ClientError> {
        self.get_json(&format!("/api/defects/shipment/{shipment_id}"), token)
    }

    pub fn query_sensor(&self, token: &str, sensor_id: &str) -> Result<Vec<DefectRecord>, ClientError> {
        self.get_json(&format!("/api/defects/sensor/{sensor_id}"), token)
    }

    pub fn verify(&self, token: &str) -> Result<VerifyReport, ClientError> {
        self.get_json("/api/chain/verify", token)
    }
}

fn error_text(body: &[u8]) -> String {
    serde_json::from_slice::<serde_json::Value>(body)
        .ok()
        .and_then(|v| {
            let code = v.get("code")?.as_str()?.to_string();
            let msg = v.get("message").and_then(|m| m.as_str()).unwrap_or("");
            Some(format!("{code}: {msg}"))
        })
        .unwrap_or_else(|| String::from_utf8_lossy(body).into_owned())
}

impl LedgerClient for HttpLedger {
    fn register(&mut self, org_id: &str, secret: &str) -> Result<String, ClientError> {
        let body = serde_json::json!({ "org_id": org_id, "secret": secret });
        let (status, resp) = self.post("/api/auth/register", None, &body)?;
        match status {
            200 => serde_json::from_slice::<RegistrationToken>(&resp)
                .map(|t| t.token)
                .map_err(|e| ClientError::Rejected(format!("bad token response: {e}"))),
            401 => Err(ClientError::Unauthorized),
            s if s >= 500 => Err(ClientError::Unreachable(error_text(&resp))),
            _ => Err(ClientError::Rejected(error_text(&resp))),
        }
    }

    fn post_defect(&mut self, token: &str, record: &DefectRecord) -> Result<PostOutcome, ClientError> {
        let (status, resp) = self.post("/api/defects", Some(token), record)?;
        match status {
            200..=202 => {
                let r: PostResponse = serde_json::from_slice(&resp)
                    .map_err(|e| ClientError::Rejected(format!("bad response body: {e}")))?;
                Ok(match r.status {
                    PostStatus::Committed => PostOutcome::Committed { tx_id: r.tx_id, block_number: r.block_number },
                    PostStatus::Pending => PostOutcome::Pending { tx_id: r.tx_id },
                    PostStatus::Duplicate => PostOutcome::Duplicate { tx_id: r.tx_id },
                })
            }
            401 => Err(ClientError::Unauthorized),
            s if s >= 500 => Err(ClientError::Unreachable(error_text(&resp))),
            _ => Err(ClientError::Rejected(error_text(&resp))),
        }
    }
}

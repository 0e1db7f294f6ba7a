// Copyright 2026 The defectchain Authors
// SPDX-License-Identifier: Apache-2.0

//! Transport-independent pieces of the client API: registration tokens,
//! error bodies, and request admission. The HTTP server and the in-process
//! harness client both sit on top of this module.

use std::collections::HashMap;

use rand::RngCore;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::gateway::record::FieldIssue;
use crate::ledger::{Channel, OrgRegistry, Secret};
use crate::DefectRecord;

pub const DEFAULT_TOKEN_TTL_MS: u64 = 60 * 60 * 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ErrorCode {
    Unauthorized,
    Forbidden,
    NotFound,
    ValidationFailed,
    NotLeaderRetry,
    Internal,
}

impl ErrorCode {
    pub fn http_status(self) -> u16 {
        match self {
            ErrorCode::Unauthorized => 401,
            ErrorCode::Forbidden => 403,
            ErrorCode::NotFound => 404,
            ErrorCode::ValidationFailed => 422,
            ErrorCode::NotLeaderRetry => 503,
            ErrorCode::Internal => 500,
        }
    }
}

/// Error body. Never carries tokens or secrets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiError {
    pub http_status: u16,
    pub code: ErrorCode,
    pub message: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub issues: Vec<FieldIssue>,
}

impl ApiError {
    pub fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        ApiError { http_status: code.http_status(), code, message: message.into(), issues: Vec::new() }
    }

    pub fn unauthorized() -> Self {
        Self::new(ErrorCode::Unauthorized, "missing, unknown or expired credentials")
    }

    pub fn forbidden() -> Self {
        Self::new(ErrorCode::Forbidden, "organization is not a member of this channel")
    }

    pub fn not_found(what: &str) -> Self {
        Self::new(ErrorCode::NotFound, format!("{what} not found"))
    }

    pub fn validation(issues: Vec<FieldIssue>) -> Self {
        let fields: Vec<&str> = issues.iter().map(|i| i.field.as_str()).collect();
        ApiError {
            message: format!("invalid field(s): {}", fields.join(", ")),
            issues,
            ..Self::new(ErrorCode::ValidationFailed, "")
        }
    }
}

impl std::fmt::Display for ApiError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} {:?}: {}", self.http_status, self.code, self.message)
    }
}

impl std::error::Error for ApiError {}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegistrationToken {
    pub token: String,
    pub org_id: String,
    pub issued_at: u64,
    pub expires_at: u64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegisterRequest {
    pub org_id: String,
    pub secret: String,
}

/// Server-side token table. Restarting the server revokes every token.
#[derive(Debug, Clone)]
pub struct TokenTable {
    ttl_ms: u64,
    tokens: HashMap<String, RegistrationToken>,
}

impl TokenTable {
    pub fn new(ttl_ms: u64) -> Self {
        TokenTable { ttl_ms: ttl_ms.max(1), tokens: HashMap::new() }
    }

    pub fn ttl_ms(&self) -> u64 {
        self.ttl_ms
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Issues a fresh token if the secret matches. Unknown orgs and wrong
    /// secrets fail identically, and both paths do the same comparison work.
    pub fn register(
        &mut self,
        registry: &OrgRegistry,
        org_id: &str,
        secret: &str,
        now_ms: u64,
        rng: &mut impl RngCore,
    ) -> Result<RegistrationToken, ApiError> {
        let decoy = Secret::new("\u{0}unregistered");
        let ok = match registry.secret(org_id) {
            Some(s) => s.matches(secret),
            None => {
                let _ = decoy.matches(secret);
                false
            }
        };
        if !ok {
            return Err(ApiError::unauthorized());
        }
        let mut bytes = [0u8; 32];
        rng.fill_bytes(&mut bytes);
        let token = RegistrationToken {
            token: hex::encode(bytes),
            org_id: org_id.to_string(),
            issued_at: now_ms,
            expires_at: now_ms + self.ttl_ms,
        };
        self.tokens.insert(token.token.clone(), token.clone());
        Ok(token)
    }

    /// Resolves a bearer token to its org.
    pub fn authorize(&self, token: Option<&str>, now_ms: u64) -> Result<&str, ApiError> {
        let t = token.ok_or_else(ApiError::unauthorized)?;
        match self.tokens.get(t) {
            Some(rt) if now_ms < rt.expires_at => Ok(&rt.org_id),
            _ => Err(ApiError::unauthorized()),
        }
    }

    pub fn purge_expired(&mut self, now_ms: u64) {
        self.tokens.retain(|_, t| now_ms < t.expires_at);
    }
}

/// Extracts the token from an `Authorization: Bearer <token>` header value.
pub fn bearer(header: Option<&str>) -> Option<&str> {
    let h = header?.trim();
    let (scheme, rest) = h.split_once(' ')?;
    if !scheme.eq_ignore_ascii_case("bearer") {
        return None;
    }
    let t = rest.trim();
    (!t.is_empty()).then_some(t)
}

/// Parses and validates a submitted record body.
pub fn parse_defect(body: &[u8]) -> Result<DefectRecord, ApiError> {
    let value: Value = serde_json::from_slice(body).map_err(|e| {
        ApiError::validation(vec![FieldIssue { field: "body".into(), message: format!("not valid JSON: {e}") }])
    })?;
    DefectRecord::from_json(&value).map_err(ApiError::validation)
}

/// Channel membership gate for authenticated requests.
pub fn require_member(channel: &Channel, org: &str) -> Result<(), ApiError> {
    if channel.is_member(org) {
        Ok(())
    } else {
        Err(ApiError::forbidden())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PostStatus {
    Committed,
    Pending,
    Duplicate,
}

impl PostStatus {
    pub fn http_status(self) -> u16 {
        match self {
            PostStatus::Committed => 201,
            PostStatus::Pending => 202,
            PostStatus::Duplicate => 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PostResponse {
    pub tx_id: String,
    pub status: PostStatus,
    pub block_number: Option<u64>,
}

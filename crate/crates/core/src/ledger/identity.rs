// Copyright 2026 The defectchain Authors
// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;
use std::fmt;

use hmac::{Hmac, KeyInit, Mac};
use serde::{Deserialize, Serialize};
use sha2::Sha256;
use subtle::ConstantTimeEq;

use crate::canonical::Hash32;

type HmacSha256 = Hmac<Sha256>;

/// A shared org secret. Never printed.
#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Secret(String);

impl Secret {
    pub fn new(s: impl Into<String>) -> Self {
        Secret(s.into())
    }

    pub fn expose(&self) -> &str {
        &self.0
    }

    /// Constant-time comparison against a presented secret.
    pub fn matches(&self, presented: &str) -> bool {
        let a = crate::canonical::sha256(self.0.as_bytes());
        let b = crate::canonical::sha256(presented.as_bytes());
        a.0.ct_eq(&b.0).into()
    }
}

impl fmt::Debug for Secret {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Secret(***)")
    }
}

/// org id → shared secret. Stands in for certificate-based identities.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct OrgRegistry {
    orgs: BTreeMap<String, Secret>,
}

impl OrgRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_org(mut self, org: impl Into<String>, secret: impl Into<String>) -> Self {
        self.orgs.insert(org.into(), Secret::new(secret));
        self
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn contains(&self, org: &str) -> bool {
        self.orgs.contains_key(org)
    }

    pub fn orgs(&self) -> impl Iterator<Item = &str> {
        self.orgs.keys().map(String::as_str)
    }

    pub fn secret(&self, org: &str) -> Option<&Secret> {
        self.orgs.get(org)
    }

    /// HMAC-SHA256 of `bytes` under the org's secret.
    pub fn sign(&self, org: &str, bytes: &[u8]) -> Option<Hash32> {
        let secret = self.orgs.get(org)?;
        Some(mac(secret.expose().as_bytes(), bytes))
    }

    pub fn verify(&self, org: &str, bytes: &[u8], signature: &Hash32) -> bool {
        let Some(secret) = self.orgs.get(org) else {
            return false;
        };
        let mut m = HmacSha256::new_from_slice(secret.expose().as_bytes()).expect("hmac accepts any key length");
        m.update(bytes);
        m.verify_slice(&signature.0).is_ok()
    }
}

pub(crate) fn mac(key: &[u8], bytes: &[u8]) -> Hash32 {
    let mut m = HmacSha256::new_from_slice(key).expect("hmac accepts any key length");
    m.update(bytes);
    Hash32(m.finalize().into_bytes().into())
}

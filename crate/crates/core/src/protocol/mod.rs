//! Client side of the deposition protocol and backend capability profiles.

mod client;
pub mod wire;

pub use client::{DepositionMeta, RepoClient, RetryPolicy};
pub use wire::{Deposition, DepositionState, DepositionSummary, RemoteFile};

use serde::Serialize;

pub const FIGSHARE_LIKE: &str = "figshare-like";
pub const ZENODO_LIKE: &str = "zenodo-like";

/// One configured deposition service.
#[derive(Clone, PartialEq, Eq)]
pub struct BackendProfile {
    pub name: String,
    pub base_url: String,
    pub can_search: bool,
    pub auth_token: String,
}

impl std::fmt::Debug for BackendProfile {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BackendProfile")
            .field("name", &self.name)
            .field("base_url", &self.base_url)
            .field("can_search", &self.can_search)
            .field("auth_token", &if self.auth_token.is_empty() { "" } else { "***" })
            .finish()
    }
}

impl BackendProfile {
    pub fn figshare_like(base_url: impl Into<String>, token: impl Into<String>) -> Self {
        BackendProfile {
            name: FIGSHARE_LIKE.to_string(),
            base_url: base_url.into(),
            can_search: true,
            auth_token: token.into(),
        }
    }

    pub fn zenodo_like(base_url: impl Into<String>, token: impl Into<String>) -> Self {
        BackendProfile {
            name: ZENODO_LIKE.to_string(),
            base_url: base_url.into(),
            can_search: false,
            auth_token: token.into(),
        }
    }

    /// Key used to pick an author's id out of `AUTHORS`: the profile name
    /// without its `-like` suffix.
    pub fn service_key(&self) -> &str {
        self.name.strip_suffix("-like").unwrap_or(&self.name)
    }

    /// Environment variable holding this profile's token.
    pub fn token_env_var(name: &str) -> String {
        format!("GEOPUB_TOKEN_{}", name.to_uppercase())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PublicationResult {
    pub publication_id: u64,
    pub doi: String,
    pub doi_active: bool,
}

impl From<&wire::DepositionStatus> for PublicationResult {
    fn from(s: &wire::DepositionStatus) -> Self {
        PublicationResult {
            publication_id: s.id,
            doi: s.doi.clone(),
            doi_active: s.doi_active,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ProtocolError {
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("request rejected: {0}")]
    Validation(String),
    #[error("not found: {0}")]
    NotFound(String),
    #[error("quota exceeded: {0}")]
    Quota(String),
    #[error("checksum mismatch: {0}")]
    ChecksumMismatch(String),
    #[error("{0} is not supported by this service")]
    CapabilityNotSupported(String),
    #[error("network error: {0}")]
    Network(String),
    #[error("unexpected response {status}: {body}")]
    Unexpected { status: u16, body: String },
}

impl ProtocolError {
    /// Maps an error status and body to the client error it denotes.
    pub fn from_status(status: u16, body: &str, context: &str) -> Self {
        let detail = serde_json::from_str::<wire::ErrorBody>(body)
            .ok()
            .map(|b| b.message.unwrap_or(b.error))
            .unwrap_or_else(|| body.to_string());
        let msg = if detail.is_empty() {
            context.to_string()
        } else {
            format!("{context}: {detail}")
        };
        match status {
            400 => ProtocolError::Validation(msg),
            401 | 403 => ProtocolError::Auth(msg),
            404 => ProtocolError::NotFound(msg),
            413 => ProtocolError::Quota(msg),
            422 => ProtocolError::ChecksumMismatch(msg),
            501 => ProtocolError::CapabilityNotSupported(context.to_string()),
            500 | 502..=504 => ProtocolError::Network(format!("server error {status}: {msg}")),
            _ => ProtocolError::Unexpected {
                status,
                body: body.to_string(),
            },
        }
    }
}

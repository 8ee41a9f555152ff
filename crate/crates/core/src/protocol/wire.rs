//! JSON bodies exchanged with a deposition service.
//!
//! Routes, all relative to the profile's base URL:
//!
//! | method | path | body | success |
//! |---|---|---|---|
//! | POST | `/api/v1/depositions` | [`CreateRequest`] | 201 [`DepositionStatus`] |
//! | POST | `/api/v1/depositions/{id}/files` | raw bytes | 201 [`RemoteFile`] |
//! | POST | `/api/v1/depositions/{id}/actions/publish` | [`PublishRequest`] | 200 [`DepositionStatus`] |
//! | POST | `/api/v1/depositions/{id}/actions/make_public` | none | 200 [`DepositionStatus`] |
//! | GET | `/api/v1/depositions?tag=...` | none | 200 [`SearchResponse`] |
//! | GET | `/api/v1/depositions/{id}` | none | 200 [`Deposition`] |
//! | POST | `/api/v1/depositions/{id}/collaborators` | [`CollaboratorRequest`] | 200 [`CollaboratorResponse`] |
//! | POST | `/api/v1/depositions/{id}/tags` | [`TagRequest`] | 200 [`TagResponse`] |
//!
//! Uploads carry `X-File-Name` and `X-File-SHA256` headers. Errors are
//! [`ErrorBody`] with a short machine-readable `error` code.

use serde::{Deserialize, Serialize};

pub const API_PREFIX: &str = "/api/v1/depositions";
pub const HEADER_FILE_NAME: &str = "X-File-Name";
pub const HEADER_FILE_SHA256: &str = "X-File-SHA256";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DepositionState {
    Draft,
    Private,
    Public,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireAuthor {
    pub name: String,
    pub id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CreateRequest {
    pub title: String,
    pub description: String,
    pub tags: Vec<String>,
    pub authors: Vec<WireAuthor>,
    pub private: bool,
}

/// Response to create, publish and make_public.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DepositionStatus {
    pub id: u64,
    pub doi: String,
    pub doi_active: bool,
    pub state: DepositionState,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RemoteFile {
    pub file_id: u64,
    pub name: String,
    pub size: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PublishRequest {
    pub private: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DepositionSummary {
    pub id: u64,
    pub doi: String,
    pub title: String,
    pub tags: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchResponse {
    pub results: Vec<DepositionSummary>,
}

/// Full server-side record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Deposition {
    pub id: u64,
    pub state: DepositionState,
    pub doi: String,
    pub doi_active: bool,
    pub title: String,
    pub description: String,
    pub tags: Vec<String>,
    pub authors: Vec<WireAuthor>,
    pub files: Vec<RemoteFile>,
    pub collaborators: Vec<String>,
    /// Visibility requested at creation; private drafts count against quota.
    pub private: bool,
}

impl Deposition {
    pub fn status(&self) -> DepositionStatus {
        DepositionStatus {
            id: self.id,
            doi: self.doi.clone(),
            doi_active: self.doi_active,
            state: self.state,
        }
    }

    pub fn summary(&self) -> DepositionSummary {
        DepositionSummary {
            id: self.id,
            doi: self.doi.clone(),
            title: self.title.clone(),
            tags: self.tags.clone(),
        }
    }

    pub fn stored_bytes(&self) -> u64 {
        self.files.iter().map(|f| f.size).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CollaboratorRequest {
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CollaboratorResponse {
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TagRequest {
    pub tag: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TagResponse {
    pub tags: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

/// `error` codes carried in [`ErrorBody`].
pub mod codes {
    pub const AUTH: &str = "auth";
    pub const VALIDATION: &str = "validation";
    pub const NOT_FOUND: &str = "not_found";
    pub const QUOTA: &str = "quota";
    pub const CHECKSUM: &str = "checksum";
    pub const SEARCH_NOT_SUPPORTED: &str = "search_not_supported";
    pub const INTERNAL: &str = "internal";
}

/// Characters escaped in the `X-File-Name` header; plain ASCII names pass
/// through untouched.
pub const FILE_NAME_ESCAPES: &percent_encoding::AsciiSet =
    &percent_encoding::CONTROLS.add(b'%');

pub fn encode_file_name(name: &str) -> String {
    percent_encoding::utf8_percent_encode(name, FILE_NAME_ESCAPES).to_string()
}

pub fn decode_file_name(header: &str) -> Option<String> {
    percent_encoding::percent_decode_str(header)
        .decode_utf8()
        .ok()
        .map(|s| s.into_owned())
}

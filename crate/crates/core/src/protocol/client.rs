use std::io::Read;
use std::time::Duration;

use serde::de::DeserializeOwned;

use super::wire::{self, API_PREFIX};
use super::{BackendProfile, ProtocolError, PublicationResult};
use crate::manifest::ManifestEntry;
use crate::vcs_info::AuthorRef;

/// Retry schedule for idempotent reads. Writes are never retried.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub initial_backoff: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_retries: 3,
            initial_backoff: Duration::from_millis(250),
        }
    }
}

impl RetryPolicy {
    pub fn backoff(&self, attempt: u32) -> Duration {
        self.initial_backoff * 2u32.saturating_pow(attempt)
    }
}

/// Metadata sent when creating a deposition.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DepositionMeta {
    pub title: String,
    pub description: String,
    pub tags: Vec<String>,
    pub authors: Vec<AuthorRef>,
}

/// Handle for one backend. Cloning is cheap and clones share connections.
#[derive(Debug, Clone)]
pub struct RepoClient {
    profile: BackendProfile,
    agent: ureq::Agent,
    retry: RetryPolicy,
}

impl RepoClient {
    pub fn new(profile: BackendProfile) -> Self {
        let agent = ureq::AgentBuilder::new()
            .timeout_connect(Duration::from_secs(10))
            .timeout_read(Duration::from_secs(120))
            .build();
        RepoClient {
            profile,
            agent,
            retry: RetryPolicy::default(),
        }
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn profile(&self) -> &BackendProfile {
        &self.profile
    }

    fn url(&self, path: &str) -> String {
        format!("{}{}", self.profile.base_url.trim_end_matches('/'), path)
    }

    fn token(&self) -> Result<String, ProtocolError> {
        if self.profile.auth_token.is_empty() {
            return Err(ProtocolError::Auth(format!(
                "no token configured for {} (set {})",
                self.profile.name,
                BackendProfile::token_env_var(&self.profile.name)
            )));
        }
        Ok(format!("token {}", self.profile.auth_token))
    }

    fn post(&self, path: &str) -> Result<ureq::Request, ProtocolError> {
        Ok(self
            .agent
            .post(&self.url(path))
            .set("Authorization", &self.token()?))
    }

    pub fn create_deposition(
        &self,
        meta: &DepositionMeta,
        private: bool,
    ) -> Result<wire::DepositionStatus, ProtocolError> {
        let service = self.profile.service_key();
        let body = wire::CreateRequest {
            title: meta.title.clone(),
            description: meta.description.clone(),
            tags: meta.tags.clone(),
            authors: meta
                .authors
                .iter()
                .map(|a| wire::WireAuthor {
                    name: a.name.clone(),
                    id: a
                        .service_id(service)
                        .or_else(|| a.service_id(&self.profile.name))
                        .map(str::to_string),
                })
                .collect(),
            private,
        };
        let resp = self.post(API_PREFIX)?.send_json(&body);
        decode(resp, "create deposition")
    }

    pub fn upload_file(
        &self,
        deposition_id: u64,
        entry: &ManifestEntry,
        content: impl Read,
    ) -> Result<wire::RemoteFile, ProtocolError> {
        let resp = self
            .post(&format!("{API_PREFIX}/{deposition_id}/files"))?
            .set(wire::HEADER_FILE_NAME, &wire::encode_file_name(&entry.name))
            .set(wire::HEADER_FILE_SHA256, &entry.sha256)
            .set("Content-Type", "application/octet-stream")
            .set("Content-Length", &entry.size.to_string())
            .send(content);
        decode(resp, &format!("upload {}", entry.name))
    }

    pub fn publish_deposition(
        &self,
        deposition_id: u64,
        private: bool,
    ) -> Result<PublicationResult, ProtocolError> {
        let resp = self
            .post(&format!("{API_PREFIX}/{deposition_id}/actions/publish"))?
            .send_json(wire::PublishRequest { private });
        let status: wire::DepositionStatus = decode(resp, "publish")?;
        Ok((&status).into())
    }

    pub fn make_public(&self, deposition_id: u64) -> Result<PublicationResult, ProtocolError> {
        let resp = self
            .post(&format!("{API_PREFIX}/{deposition_id}/actions/make_public"))?
            .call();
        let status: wire::DepositionStatus = decode(resp, "make public")?;
        Ok((&status).into())
    }

    pub fn search_by_tag(&self, tag: &str) -> Result<Vec<wire::DepositionSummary>, ProtocolError> {
        let resp: wire::SearchResponse = self.get_with_retry(API_PREFIX, &[("tag", tag)], "search")?;
        Ok(resp.results)
    }

    pub fn get_deposition(&self, deposition_id: u64) -> Result<wire::Deposition, ProtocolError> {
        self.get_with_retry(
            &format!("{API_PREFIX}/{deposition_id}"),
            &[],
            &format!("deposition {deposition_id}"),
        )
    }

    pub fn add_collaborator(&self, deposition_id: u64, name: &str) -> Result<usize, ProtocolError> {
        let resp = self
            .post(&format!("{API_PREFIX}/{deposition_id}/collaborators"))?
            .send_json(wire::CollaboratorRequest {
                name: name.to_string(),
            });
        let r: wire::CollaboratorResponse = decode(resp, "add collaborator")?;
        Ok(r.count)
    }

    pub fn add_tag(&self, deposition_id: u64, tag: &str) -> Result<Vec<String>, ProtocolError> {
        let resp = self
            .post(&format!("{API_PREFIX}/{deposition_id}/tags"))?
            .send_json(wire::TagRequest {
                tag: tag.to_string(),
            });
        let r: wire::TagResponse = decode(resp, "add tag")?;
        Ok(r.tags)
    }

    fn get_with_retry<T: DeserializeOwned>(
        &self,
        path: &str,
        query: &[(&str, &str)],
        context: &str,
    ) -> Result<T, ProtocolError> {
        let token = self.token()?;
        let mut attempt = 0;
        loop {
            let mut req = self.agent.get(&self.url(path)).set("Authorization", &token);
            for (k, v) in query {
                req = req.query(k, v);
            }
            match decode(req.call(), context) {
                Err(ProtocolError::Network(msg)) if attempt < self.retry.max_retries => {
                    let wait = self.retry.backoff(attempt);
                    log::debug!("{context}: {msg}; retrying in {wait:?}");
                    std::thread::sleep(wait);
                    attempt += 1;
                }
                other => return other,
            }
        }
    }
}

fn decode<T: DeserializeOwned>(
    resp: Result<ureq::Response, ureq::Error>,
    context: &str,
) -> Result<T, ProtocolError> {
    match resp {
        Ok(r) => {
            let status = r.status();
            let body = r
                .into_string()
                .map_err(|e| ProtocolError::Network(format!("{context}: {e}")))?;
            serde_json::from_str(&body).map_err(|e| {
                log::debug!("{context}: cannot decode {body:?}: {e}");
                ProtocolError::Unexpected { status, body }
            })
        }
        Err(ureq::Error::Status(code, r)) => {
            let body = r.into_string().unwrap_or_default();
            Err(ProtocolError::from_status(code, &body, context))
        }
        Err(ureq::Error::Transport(t)) => Err(ProtocolError::Network(format!("{context}: {t}"))),
    }
}

//! Protocol state machine, independent of the HTTP transport.

use std::collections::BTreeMap;
use std::io::Read;
use std::sync::Mutex;

use geopub_core::protocol::wire::{
    self, codes, CollaboratorRequest, CollaboratorResponse, CreateRequest, Deposition,
    DepositionState, ErrorBody, PublishRequest, RemoteFile, SearchResponse, TagRequest,
    TagResponse, API_PREFIX,
};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MB: u64 = 1024 * 1024;
pub const GB: u64 = 1024 * MB;

/// Largest JSON request body accepted.
const MAX_JSON_BODY: u64 = 1024 * 1024;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServiceConfig {
    pub per_file_limit: u64,
    /// Total bytes a private deposition may hold.
    pub private_quota: u64,
    pub collaborator_limit: usize,
    pub can_search: bool,
    pub doi_prefix: String,
    /// When set, only this token is accepted; otherwise any non-empty one.
    pub required_token: Option<String>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            per_file_limit: 250 * MB,
            private_quota: GB,
            collaborator_limit: 5,
            can_search: true,
            doi_prefix: "10.5072/geopub".to_string(),
            required_token: None,
        }
    }
}

impl ServiceConfig {
    pub fn figshare_like() -> Self {
        ServiceConfig::default()
    }

    pub fn zenodo_like() -> Self {
        ServiceConfig {
            can_search: false,
            ..ServiceConfig::default()
        }
    }

    pub fn for_profile(name: &str) -> Option<Self> {
        match name {
            geopub_core::protocol::FIGSHARE_LIKE => Some(Self::figshare_like()),
            geopub_core::protocol::ZENODO_LIKE => Some(Self::zenodo_like()),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.per_file_limit == 0 || self.private_quota == 0 || self.collaborator_limit == 0 {
            return Err("all service limits must be positive".into());
        }
        Ok(())
    }
}

/// Which protocol operation a request addresses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Endpoint {
    Create,
    Upload,
    Publish,
    MakePublic,
    Search,
    Get,
    Collaborators,
    Tags,
}

enum Route {
    Create,
    Search,
    Get(u64),
    Upload(u64),
    Publish(u64),
    MakePublic(u64),
    Collaborators(u64),
    Tags(u64),
}

impl Route {
    fn endpoint(&self) -> Endpoint {
        match self {
            Route::Create => Endpoint::Create,
            Route::Search => Endpoint::Search,
            Route::Get(_) => Endpoint::Get,
            Route::Upload(_) => Endpoint::Upload,
            Route::Publish(_) => Endpoint::Publish,
            Route::MakePublic(_) => Endpoint::MakePublic,
            Route::Collaborators(_) => Endpoint::Collaborators,
            Route::Tags(_) => Endpoint::Tags,
        }
    }
}

fn route(method: &str, path: &str) -> Option<Route> {
    let rest = path.strip_prefix(API_PREFIX)?;
    let segs: Vec<&str> = rest.split('/').filter(|s| !s.is_empty()).collect();
    if !rest.is_empty() && !rest.starts_with('/') {
        return None;
    }
    let id = |s: &str| s.parse::<u64>().ok();
    Some(match (method, segs.as_slice()) {
        ("POST", []) => Route::Create,
        ("GET", []) => Route::Search,
        ("GET", [i]) => Route::Get(id(i)?),
        ("POST", [i, "files"]) => Route::Upload(id(i)?),
        ("POST", [i, "actions", "publish"]) => Route::Publish(id(i)?),
        ("POST", [i, "actions", "make_public"]) => Route::MakePublic(id(i)?),
        ("POST", [i, "collaborators"]) => Route::Collaborators(id(i)?),
        ("POST", [i, "tags"]) => Route::Tags(id(i)?),
        _ => return None,
    })
}

/// Endpoint addressed by a request line, if it is part of the protocol.
pub fn classify(method: &str, path: &str) -> Option<Endpoint> {
    route(method, path).map(|r| r.endpoint())
}

/// A request as seen by the state machine.
pub struct Request<'a> {
    pub method: &'a str,
    pub path: &'a str,
    pub query: &'a str,
    pub headers: &'a [(String, String)],
    pub body: &'a mut dyn Read,
}

impl Request<'_> {
    fn header(&self, name: &str) -> Option<&str> {
        self.headers
            .iter()
            .find(|(k, _)| k.eq_ignore_ascii_case(name))
            .map(|(_, v)| v.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reply {
    pub status: u16,
    pub body: String,
}

impl Reply {
    fn json<T: Serialize>(status: u16, value: &T) -> Self {
        Reply {
            status,
            body: serde_json::to_string(value).expect("wire types serialize"),
        }
    }

    fn error(status: u16, code: &str, message: impl Into<String>) -> Self {
        Reply::json(
            status,
            &ErrorBody {
                error: code.to_string(),
                message: Some(message.into()),
            },
        )
    }

    fn not_found(id: u64) -> Self {
        Reply::error(404, codes::NOT_FOUND, format!("no deposition {id}"))
    }

    fn invalid(message: impl Into<String>) -> Self {
        Reply::error(400, codes::VALIDATION, message)
    }
}

/// Everything the service remembers; also the snapshot file format.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct State {
    pub next_id: u64,
    pub next_file_id: u64,
    pub depositions: BTreeMap<u64, Deposition>,
}

pub struct MockService {
    config: ServiceConfig,
    state: Mutex<State>,
}

impl MockService {
    pub fn new(config: ServiceConfig) -> Self {
        Self::with_state(config, State::default())
    }

    pub fn with_state(config: ServiceConfig, state: State) -> Self {
        MockService {
            config,
            state: Mutex::new(state),
        }
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }

    pub fn state(&self) -> State {
        self.lock().clone()
    }

    pub fn deposition_count(&self) -> usize {
        self.lock().depositions.len()
    }

    pub fn deposition(&self, id: u64) -> Option<Deposition> {
        self.lock().depositions.get(&id).cloned()
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, State> {
        self.state.lock().unwrap_or_else(|p| p.into_inner())
    }

    fn authorized(&self, req: &Request<'_>) -> bool {
        let Some(token) = req
            .header("Authorization")
            .and_then(|h| h.strip_prefix("token "))
            .map(str::trim)
        else {
            return false;
        };
        match &self.config.required_token {
            Some(required) => token == required,
            None => !token.is_empty(),
        }
    }

    pub fn handle(&self, req: Request<'_>) -> Reply {
        let Some(route) = route(req.method, req.path) else {
            return Reply::error(404, codes::NOT_FOUND, format!("no route {} {}", req.method, req.path));
        };
        if !self.authorized(&req) {
            return Reply::error(401, codes::AUTH, "missing or invalid token");
        }
        match route {
            Route::Create => self.create(req),
            Route::Search => self.search(req.query),
            Route::Get(id) => match self.lock().depositions.get(&id) {
                Some(d) => Reply::json(200, d),
                None => Reply::not_found(id),
            },
            Route::Upload(id) => self.upload(id, req),
            Route::Publish(id) => self.publish(id, req),
            Route::MakePublic(id) => self.make_public(id),
            Route::Collaborators(id) => self.add_collaborator(id, req),
            Route::Tags(id) => self.add_tag(id, req),
        }
    }

    fn create(&self, req: Request<'_>) -> Reply {
        let body: CreateRequest = match read_json(req.body) {
            Ok(b) => b,
            Err(r) => return r,
        };
        if body.title.trim().is_empty() {
            return Reply::invalid("title must not be empty");
        }
        let mut state = self.lock();
        state.next_id += 1;
        let id = state.next_id;
        let dep = Deposition {
            id,
            state: DepositionState::Draft,
            doi: format!("{}.{id}", self.config.doi_prefix),
            doi_active: false,
            title: body.title,
            description: body.description,
            tags: body.tags,
            authors: body.authors,
            files: Vec::new(),
            collaborators: Vec::new(),
            private: body.private,
        };
        let reply = Reply::json(201, &dep.status());
        state.depositions.insert(id, dep);
        reply
    }

    fn search(&self, query: &str) -> Reply {
        if !self.config.can_search {
            return Reply::error(501, codes::SEARCH_NOT_SUPPORTED, "search is not available");
        }
        let Some(tag) = form_urlencoded::parse(query.as_bytes())
            .find(|(k, _)| k == "tag")
            .map(|(_, v)| v.into_owned())
        else {
            return Reply::invalid("missing tag parameter");
        };
        let state = self.lock();
        let results = state
            .depositions
            .values()
            .filter(|d| d.state != DepositionState::Draft)
            .filter(|d| d.tags.contains(&tag))
            .map(Deposition::summary)
            .collect();
        Reply::json(200, &SearchResponse { results })
    }

    fn upload(&self, id: u64, req: Request<'_>) -> Reply {
        let check_draft = |state: &State| -> Result<(), Reply> {
            match state.depositions.get(&id) {
                None => Err(Reply::not_found(id)),
                Some(d) if d.state != DepositionState::Draft => {
                    Err(Reply::invalid("files can only be added to a draft"))
                }
                Some(_) => Ok(()),
            }
        };
        if let Err(r) = check_draft(&self.lock()) {
            drain(req.body);
            return r;
        }

        let name = req
            .header(wire::HEADER_FILE_NAME)
            .and_then(wire::decode_file_name)
            .filter(|n| !n.is_empty() && !n.contains('/'));
        let declared = req
            .header(wire::HEADER_FILE_SHA256)
            .map(|s| s.trim().to_string());
        let (Some(name), Some(declared)) = (name, declared) else {
            drain(req.body);
            return Reply::invalid("X-File-Name and X-File-SHA256 headers are required");
        };

        let (size, digest) = match hash_stream(req.body) {
            Ok(v) => v,
            Err(e) => return Reply::invalid(format!("cannot read upload: {e}")),
        };

        let mut state = self.lock();
        if let Err(r) = check_draft(&state) {
            return r;
        }
        let limit = self.config.per_file_limit;
        if size > limit {
            return Reply::error(
                413,
                codes::QUOTA,
                format!("{name} is {size} bytes; the per-file limit is {limit}"),
            );
        }
        let dep = state.depositions.get(&id).expect("checked above");
        if dep.private && dep.stored_bytes() + size > self.config.private_quota {
            return Reply::error(
                413,
                codes::QUOTA,
                format!("private storage quota of {} bytes exceeded", self.config.private_quota),
            );
        }
        if dep.files.iter().any(|f| f.name == name) {
            return Reply::invalid(format!("a file named {name} already exists"));
        }
        if !declared.eq_ignore_ascii_case(&digest) {
            return Reply::error(
                422,
                codes::CHECKSUM,
                format!("declared {declared}, received {digest}"),
            );
        }
        state.next_file_id += 1;
        let file = RemoteFile {
            file_id: state.next_file_id,
            name,
            size,
            sha256: digest,
        };
        let reply = Reply::json(201, &file);
        state
            .depositions
            .get_mut(&id)
            .expect("checked above")
            .files
            .push(file);
        reply
    }

    fn publish(&self, id: u64, req: Request<'_>) -> Reply {
        let body: PublishRequest = match read_json(req.body) {
            Ok(b) => b,
            Err(r) => return r,
        };
        let mut state = self.lock();
        let Some(dep) = state.depositions.get_mut(&id) else {
            return Reply::not_found(id);
        };
        if dep.state != DepositionState::Draft {
            return Reply::invalid("only drafts can be published");
        }
        if dep.files.is_empty() {
            return Reply::invalid("a deposition needs at least one file");
        }
        if body.private && dep.stored_bytes() > self.config.private_quota {
            return Reply::error(413, codes::QUOTA, "private storage quota exceeded");
        }
        dep.private = body.private;
        if body.private {
            dep.state = DepositionState::Private;
            dep.doi_active = false;
        } else {
            dep.state = DepositionState::Public;
            dep.doi_active = true;
        }
        Reply::json(200, &dep.status())
    }

    fn make_public(&self, id: u64) -> Reply {
        let mut state = self.lock();
        let Some(dep) = state.depositions.get_mut(&id) else {
            return Reply::not_found(id);
        };
        if dep.state != DepositionState::Private {
            return Reply::invalid("only private depositions can be made public");
        }
        dep.state = DepositionState::Public;
        dep.doi_active = true;
        dep.private = false;
        Reply::json(200, &dep.status())
    }

    fn add_collaborator(&self, id: u64, req: Request<'_>) -> Reply {
        let body: CollaboratorRequest = match read_json(req.body) {
            Ok(b) => b,
            Err(r) => return r,
        };
        let mut state = self.lock();
        let Some(dep) = state.depositions.get_mut(&id) else {
            return Reply::not_found(id);
        };
        if dep.state != DepositionState::Private {
            return Reply::invalid("collaborators can only be added to private depositions");
        }
        let name = body.name.trim();
        if name.is_empty() {
            return Reply::invalid("collaborator name must not be empty");
        }
        if !dep.collaborators.iter().any(|c| c == name) {
            if dep.collaborators.len() >= self.config.collaborator_limit {
                return Reply::error(
                    413,
                    codes::QUOTA,
                    format!("at most {} collaborators", self.config.collaborator_limit),
                );
            }
            dep.collaborators.push(name.to_string());
        }
        Reply::json(
            200,
            &CollaboratorResponse {
                count: dep.collaborators.len(),
            },
        )
    }

    fn add_tag(&self, id: u64, req: Request<'_>) -> Reply {
        let body: TagRequest = match read_json(req.body) {
            Ok(b) => b,
            Err(r) => return r,
        };
        let mut state = self.lock();
        let Some(dep) = state.depositions.get_mut(&id) else {
            return Reply::not_found(id);
        };
        if dep.state != DepositionState::Draft {
            return Reply::invalid("tags can only be changed on a draft");
        }
        if body.tag.trim().is_empty() {
            return Reply::invalid("tag must not be empty");
        }
        if !dep.tags.contains(&body.tag) {
            dep.tags.push(body.tag);
        }
        Reply::json(
            200,
            &TagResponse {
                tags: dep.tags.clone(),
            },
        )
    }
}

fn read_json<T: serde::de::DeserializeOwned>(body: &mut dyn Read) -> Result<T, Reply> {
    let mut buf = Vec::new();
    body.take(MAX_JSON_BODY + 1)
        .read_to_end(&mut buf)
        .map_err(|e| Reply::invalid(format!("cannot read body: {e}")))?;
    if buf.len() as u64 > MAX_JSON_BODY {
        drain(body);
        return Err(Reply::invalid("request body too large"));
    }
    if buf.iter().all(u8::is_ascii_whitespace) {
        buf = b"{}".to_vec();
    }
    serde_json::from_slice(&buf).map_err(|e| Reply::invalid(format!("invalid JSON body: {e}")))
}

fn hash_stream(body: &mut dyn Read) -> std::io::Result<(u64, String)> {
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 64 * 1024];
    let mut size = 0u64;
    loop {
        let n = body.read(&mut buf)?;
        if n == 0 {
            break;
        }
        size += n as u64;
        hasher.update(&buf[..n]);
    }
    Ok((size, hex::encode(hasher.finalize())))
}

pub(crate) fn drain(body: &mut dyn Read) {
    let _ = std::io::copy(body, &mut std::io::sink());
}

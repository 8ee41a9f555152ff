//! Version identity of a software tree and its `AUTHORS` list.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::Command;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, thiserror::Error)]
pub enum VcsError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("AUTHORS line {line}: expected `Full Name <email> [service:id ...]`, found `{text}`")]
    AuthorsFormat { line: usize, text: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> VcsError + '_ {
    move |source| VcsError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VersionKind {
    Commit,
    TreeHash,
}

impl fmt::Display for VersionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VersionKind::Commit => "commit",
            VersionKind::TreeHash => "treehash",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceVersion {
    pub kind: VersionKind,
    pub id: String,
    pub dirty: bool,
    pub source_dir: PathBuf,
}

impl SourceVersion {
    /// Search key attached to software depositions:
    /// `version:{kind}:{id}` with `-dirty` appended for modified trees.
    pub fn tag(&self) -> String {
        let suffix = if self.dirty { "-dirty" } else { "" };
        format!("version:{}:{}{}", self.kind, self.id, suffix)
    }

    /// Identity used for caching, including the dirty marker.
    pub fn version_id(&self) -> String {
        if self.dirty {
            format!("{}-dirty", self.id)
        } else {
            self.id.clone()
        }
    }
}

/// Directory names holding version-control metadata; skipped by tree walks.
pub const VCS_METADATA_DIRS: [&str; 4] = [".git", ".hg", ".svn", ".bzr"];

pub fn detect_version(source_dir: &Path) -> Result<SourceVersion, VcsError> {
    let dir = source_dir.canonicalize().map_err(io_err(source_dir))?;
    if !dir.is_dir() {
        return Err(io_err(source_dir)(std::io::Error::other("not a directory")));
    }
    if let Some((id, dirty)) = git_head(&dir) {
        return Ok(SourceVersion {
            kind: VersionKind::Commit,
            id,
            dirty,
            source_dir: dir,
        });
    }
    Ok(SourceVersion {
        kind: VersionKind::TreeHash,
        id: tree_hash(&dir)?,
        dirty: false,
        source_dir: dir,
    })
}

fn git(dir: &Path, args: &[&str]) -> Option<String> {
    let out = Command::new("git")
        .arg("-C")
        .arg(dir)
        .args(args)
        .output()
        .ok()?;
    if !out.status.success() {
        return None;
    }
    Some(String::from_utf8_lossy(&out.stdout).into_owned())
}

/// Head commit and dirty flag, or `None` outside a working tree with history.
fn git_head(dir: &Path) -> Option<(String, bool)> {
    if git(dir, &["rev-parse", "--is-inside-work-tree"])?.trim() != "true" {
        return None;
    }
    let head = git(dir, &["rev-parse", "--verify", "HEAD"])?.trim().to_string();
    if head.is_empty() {
        return None;
    }
    let status = git(dir, &["status", "--porcelain", "--untracked-files=no"])?;
    Some((head, !status.trim().is_empty()))
}

/// Files tracked by git under `dir`, as sorted relative paths. `None` when
/// `dir` is not inside a git working tree.
pub fn tracked_files(dir: &Path) -> Option<Vec<String>> {
    let out = git(dir, &["ls-files", "-z", "--cached"])?;
    let mut files: Vec<String> = out
        .split('\0')
        .filter(|s| !s.is_empty())
        .filter(|s| dir.join(s).is_file())
        .map(str::to_string)
        .collect();
    files.sort_unstable_by(|a, b| a.as_bytes().cmp(b.as_bytes()));
    files.dedup();
    Some(files)
}

/// Every regular file below `dir` outside version-control metadata, as
/// `/`-separated relative paths in byte order.
pub fn list_tree_files(dir: &Path) -> Result<Vec<String>, VcsError> {
    let mut files = Vec::new();
    let walker = walkdir::WalkDir::new(dir)
        .follow_links(false)
        .into_iter()
        .filter_entry(|e| {
            e.depth() == 0
                || !VCS_METADATA_DIRS
                    .iter()
                    .any(|m| e.file_name() == std::ffi::OsStr::new(m))
        });
    for entry in walker {
        let entry = entry.map_err(|e| {
            let path = e.path().unwrap_or(dir).to_path_buf();
            VcsError::Io {
                path,
                source: e.into(),
            }
        })?;
        if !entry.file_type().is_file() {
            continue;
        }
        let rel = entry
            .path()
            .strip_prefix(dir)
            .expect("walkdir yields paths under its root");
        let rel: Vec<String> = rel
            .components()
            .map(|c| c.as_os_str().to_string_lossy().into_owned())
            .collect();
        files.push(rel.join("/"));
    }
    files.sort_unstable_by(|a, b| a.as_bytes().cmp(b.as_bytes()));
    Ok(files)
}

/// SHA-256 over `path NUL content NUL` for every file from
/// [`list_tree_files`], in that order.
pub fn tree_hash(dir: &Path) -> Result<String, VcsError> {
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 64 * 1024];
    for rel in list_tree_files(dir)? {
        let path = dir.join(&rel);
        hasher.update(rel.as_bytes());
        hasher.update([0u8]);
        let mut f = std::fs::File::open(&path).map_err(io_err(&path))?;
        loop {
            let n = f.read(&mut buf).map_err(io_err(&path))?;
            if n == 0 {
                break;
            }
            hasher.update(&buf[..n]);
        }
        hasher.update([0u8]);
    }
    Ok(hex::encode(hasher.finalize()))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuthorRef {
    pub name: String,
    pub email: String,
    /// Per-service account ids, e.g. `figshare` → `554577`.
    pub service_ids: BTreeMap<String, String>,
}

impl AuthorRef {
    pub fn service_id(&self, service: &str) -> Option<&str> {
        self.service_ids.get(service).map(String::as_str)
    }
}

impl fmt::Display for AuthorRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} <{}>", self.name, self.email)?;
        for (service, id) in &self.service_ids {
            write!(f, " {service}:{id}")?;
        }
        Ok(())
    }
}

pub fn parse_authors(source_dir: &Path) -> Result<Vec<AuthorRef>, VcsError> {
    let path = source_dir.join("AUTHORS");
    match std::fs::read_to_string(&path) {
        Ok(text) => parse_authors_str(&text),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Vec::new()),
        Err(e) => Err(io_err(&path)(e)),
    }
}

pub fn parse_authors_str(text: &str) -> Result<Vec<AuthorRef>, VcsError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = || VcsError::AuthorsFormat {
            line: i + 1,
            text: raw.to_string(),
        };
        out.push(parse_author_line(line).ok_or_else(bad)?);
    }
    Ok(out)
}

fn parse_author_line(line: &str) -> Option<AuthorRef> {
    let open = line.find('<')?;
    let close = open + line[open..].find('>')?;
    let name = line[..open].trim();
    let email = &line[open + 1..close];
    if name.is_empty() || name.contains('>') || email.contains('<') || email.contains(char::is_whitespace)
    {
        return None;
    }
    let mut service_ids = BTreeMap::new();
    for token in line[close + 1..].split_whitespace() {
        let (service, id) = token.split_once(':')?;
        let service_ok = !service.is_empty()
            && service
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'));
        if !service_ok || id.is_empty() || id.contains(['<', '>']) {
            return None;
        }
        service_ids.insert(service.to_string(), id.to_string());
    }
    Some(AuthorRef {
        name: name.to_string(),
        email: email.to_string(),
        service_ids,
    })
}

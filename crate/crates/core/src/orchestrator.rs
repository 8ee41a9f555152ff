//! The two publication flows: project data, and software source with DOI
//! reuse.

use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::archive;
use crate::cache::{ArtifactKind, CacheError, CacheKey, DoiCache, DoiCacheRecord};
use crate::manifest::{self, ManifestEntry, ManifestError, ManifestOptions, PublicationManifest};
use crate::protocol::DepositionMeta;
use crate::protocol::{ProtocolError, PublicationResult, RepoClient};
use crate::qgis_project::{self, CollectedSources, ProjectError, ProjectFile};
use crate::vcs_info::{self, SourceVersion, VcsError, VersionKind};

#[derive(Debug, thiserror::Error)]
pub enum PublishError {
    #[error(transparent)]
    Project(#[from] ProjectError),
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error(transparent)]
    Vcs(#[from] VcsError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Cache(#[from] CacheError),
    /// A draft was created but could not be completed. It is left on the
    /// server for manual cleanup.
    #[error("draft deposition {deposition_id} abandoned: {source}")]
    Abandoned {
        deposition_id: u64,
        #[source]
        source: ProtocolError,
    },
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

/// Tag linking a data deposition to the software it was produced with.
pub fn software_link_tag(software_doi: &str) -> String {
    format!("uses-software-doi:{software_doi}")
}

#[derive(Debug, Clone, Default)]
pub struct DataRequest {
    pub project_path: PathBuf,
    pub mesh_path: Option<PathBuf>,
    pub private: bool,
    pub title: Option<String>,
    pub description: Option<String>,
    pub related_software_doi: Option<String>,
    /// Hashing threads; `None` means one per processor.
    pub workers: Option<usize>,
}

/// Everything known about a data publication before any network traffic.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub project: ProjectFile,
    pub sources: CollectedSources,
    pub manifest: PublicationManifest,
}

#[derive(Debug, Clone)]
pub struct DataOutcome {
    pub result: PublicationResult,
    pub prepared: PreparedData,
}

/// Parses the project and builds its manifest. Offline.
pub fn prepare_data(req: &DataRequest) -> Result<PreparedData, PublishError> {
    let project = qgis_project::parse_project(&req.project_path)?;
    let sources = qgis_project::collect_datasources(&project);
    let opts = ManifestOptions {
        workers: req.workers,
        description: req.description.clone(),
        title: req.title.clone(),
    };
    let mut manifest =
        manifest::build_manifest_with(&project, &sources.sources, req.mesh_path.as_deref(), &opts)?;
    manifest.authors = vcs_info::parse_authors(project.project_dir())?;
    Ok(PreparedData {
        project,
        sources,
        manifest,
    })
}

/// Key under which a data publication is recorded: a digest of the
/// manifest's names and content digests.
pub fn manifest_version_id(manifest: &PublicationManifest) -> String {
    let mut h = Sha256::new();
    for e in &manifest.entries {
        h.update(e.name.as_bytes());
        h.update([0]);
        h.update(e.sha256.as_bytes());
        h.update([0]);
    }
    hex::encode(h.finalize())
}

pub fn publish_data(
    client: &RepoClient,
    req: &DataRequest,
    cache: Option<&mut DoiCache>,
) -> Result<DataOutcome, PublishError> {
    let prepared = prepare_data(req)?;
    let m = &prepared.manifest;
    let meta = DepositionMeta {
        title: m.title.clone(),
        description: m.description.clone(),
        tags: m.tags.clone(),
        authors: m.authors.clone(),
    };
    let result = create_and_publish(client, &meta, &m.entries, req.private, |id| {
        match &req.related_software_doi {
            Some(doi) => link_depositions(client, id, doi),
            None => Ok(()),
        }
    })?;
    if let Some(cache) = cache {
        remember(cache, record(client, ArtifactKind::Data, manifest_version_id(m), &result));
    }
    Ok(DataOutcome { result, prepared })
}

/// Draft → (hook) → upload all → publish. Any failure after creation leaves
/// the draft in place and is reported as [`PublishError::Abandoned`].
fn create_and_publish(
    client: &RepoClient,
    meta: &DepositionMeta,
    entries: &[ManifestEntry],
    private: bool,
    before_upload: impl FnOnce(u64) -> Result<(), ProtocolError>,
) -> Result<PublicationResult, PublishError> {
    let draft = client.create_deposition(meta, private)?;
    let id = draft.id;
    let abandon = |source| {
        log::error!("leaving draft deposition {id} for manual cleanup: {source}");
        PublishError::Abandoned {
            deposition_id: id,
            source,
        }
    };
    before_upload(id).map_err(abandon)?;
    for entry in entries {
        let file = std::fs::File::open(&entry.path).map_err(|e| {
            abandon(ProtocolError::Validation(format!(
                "cannot open {}: {e}",
                entry.path.display()
            )))
        })?;
        let remote = client
            .upload_file(id, entry, std::io::BufReader::new(file))
            .map_err(abandon)?;
        log::info!("uploaded {} ({} bytes)", remote.name, remote.size);
    }
    client.publish_deposition(id, private).map_err(abandon)
}

/// Tags a draft data deposition with the DOI of the software used to make it.
pub fn link_depositions(
    client: &RepoClient,
    data_id: u64,
    software_doi: &str,
) -> Result<(), ProtocolError> {
    if software_doi.trim().is_empty() {
        return Err(ProtocolError::Validation("software DOI is empty".into()));
    }
    client.add_tag(data_id, &software_link_tag(software_doi.trim()))?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct SoftwareRequest {
    pub source_dir: PathBuf,
    pub private: bool,
    pub use_cache: bool,
}

#[derive(Debug, Clone)]
pub struct SoftwareOutcome {
    pub result: PublicationResult,
    pub version: SourceVersion,
    /// True when an existing publication was found instead of creating one.
    pub reused: bool,
}

/// Files that make up a software publication: tracked files for git
/// working copies, every non-metadata file otherwise.
pub fn source_files(version: &SourceVersion) -> Result<Vec<String>, PublishError> {
    match version.kind {
        VersionKind::Commit => vcs_info::tracked_files(&version.source_dir).ok_or_else(|| {
            PublishError::Io {
                context: format!("listing tracked files in {}", version.source_dir.display()),
                source: std::io::Error::other("git ls-files failed"),
            }
        }),
        VersionKind::TreeHash => Ok(vcs_info::list_tree_files(&version.source_dir)?),
    }
}

fn dir_name(dir: &Path) -> String {
    dir.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "source".to_string())
}

/// Writes the deterministic source archive for `version` into `out_dir`.
pub fn build_source_archive(
    version: &SourceVersion,
    out_dir: &Path,
) -> Result<ManifestEntry, PublishError> {
    let name = dir_name(&version.source_dir);
    let files = source_files(version)?;
    let archive_name = archive::archive_name(&name, &version.id);
    let path = out_dir.join(&archive_name);
    let io = |source| PublishError::Io {
        context: format!("writing {}", path.display()),
        source,
    };
    let file = std::fs::File::create(&path).map_err(io)?;
    let mut out = archive::write_archive(&version.source_dir, &name, &files, std::io::BufWriter::new(file))
        .map_err(io)?;
    std::io::Write::flush(&mut out).map_err(io)?;
    drop(out);
    let size = std::fs::metadata(&path).map_err(io)?.len();
    let sha256 = manifest::checksum_file(&path).map_err(io)?;
    Ok(ManifestEntry {
        path,
        name: archive_name,
        size,
        sha256,
    })
}

pub fn publish_software(
    client: &RepoClient,
    req: &SoftwareRequest,
    cache: Option<&mut DoiCache>,
) -> Result<SoftwareOutcome, PublishError> {
    let version = vcs_info::detect_version(&req.source_dir)?;
    if version.dirty {
        log::info!(
            "{} has uncommitted changes; publishing as {}",
            version.source_dir.display(),
            version.tag()
        );
    }
    let profile = client.profile();
    let tag = version.tag();
    let cache = if req.use_cache { cache } else { None };
    let key = CacheKey {
        backend_name: profile.name.clone(),
        artifact_kind: ArtifactKind::Software,
        version_id: version.version_id(),
    };

    let existing = if profile.can_search {
        let mut hits = client.search_by_tag(&tag)?;
        hits.sort_by_key(|h| h.id);
        match hits.first() {
            Some(hit) => Some(client.get_deposition(hit.id)?),
            None => None,
        }
    } else if let Some(record) = cache.as_deref().and_then(|c| c.get(&key)) {
        match client.get_deposition(record.publication_id) {
            Ok(d) if d.doi == record.doi => Some(d),
            Ok(_) | Err(ProtocolError::NotFound(_)) => {
                log::warn!("cached publication {} no longer matches the service", record.publication_id);
                None
            }
            Err(e) => return Err(e.into()),
        }
    } else {
        None
    };
    if let Some(dep) = existing {
        return Ok(SoftwareOutcome {
            result: (&dep.status()).into(),
            version,
            reused: true,
        });
    }

    let name = dir_name(&version.source_dir);
    let workdir = tempfile::tempdir().map_err(|source| PublishError::Io {
        context: "creating temporary directory".into(),
        source,
    })?;
    let entry = build_source_archive(&version, workdir.path())?;
    let short: String = version.id.chars().take(12).collect();
    let dirty = if version.dirty { " (modified)" } else { "" };
    let meta = DepositionMeta {
        title: format!("{name} {} {short}{dirty}", version.kind),
        description: format!(
            "Source code of {name} at {} {}{dirty}.",
            version.kind, version.id
        ),
        tags: manifest::normalize_tags([tag.as_str(), "software", name.as_str()]),
        authors: vcs_info::parse_authors(&version.source_dir)?,
    };
    let result = create_and_publish(client, &meta, std::slice::from_ref(&entry), req.private, |_| Ok(()))?;
    if let Some(cache) = cache {
        remember(cache, record(client, ArtifactKind::Software, key.version_id, &result));
    }
    Ok(SoftwareOutcome {
        result,
        version,
        reused: false,
    })
}

/// The publication already exists at this point, so a failed cache write
/// must not hide its DOI.
fn remember(cache: &mut DoiCache, rec: DoiCacheRecord) {
    if let Err(e) = cache.put(rec) {
        log::warn!("could not record DOI in {}: {e}", cache.path().display());
    }
}

fn record(
    client: &RepoClient,
    kind: ArtifactKind,
    version_id: String,
    result: &PublicationResult,
) -> DoiCacheRecord {
    DoiCacheRecord {
        backend_name: client.profile().name.clone(),
        artifact_kind: kind,
        version_id,
        publication_id: result.publication_id,
        doi: result.doi.clone(),
        created_at: chrono::Utc::now(),
    }
}

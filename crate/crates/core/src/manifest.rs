//! The checksummed set of files uploaded for one data publication.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::qgis_project::{DataSourceRef, ProjectFile};
use crate::vcs_info::AuthorRef;

#[derive(Debug, thiserror::Error)]
pub enum ManifestError {
    #[error("referenced files are missing: {}", display_paths(.paths))]
    Missing { paths: Vec<PathBuf> },
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn display_paths(paths: &[PathBuf]) -> String {
    paths
        .iter()
        .map(|p| p.display().to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub path: PathBuf,
    /// Flat upload name, unique within the manifest.
    pub name: String,
    pub size: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PublicationManifest {
    pub entries: Vec<ManifestEntry>,
    pub title: String,
    pub description: String,
    pub tags: Vec<String>,
    pub authors: Vec<AuthorRef>,
    pub total_size: u64,
    pub warnings: Vec<String>,
}

#[derive(Serialize)]
struct DumpEntry<'a> {
    name: &'a str,
    size: u64,
    sha256: &'a str,
}

#[derive(Serialize)]
struct Dump<'a> {
    title: &'a str,
    tags: &'a [String],
    entries: Vec<DumpEntry<'a>>,
    total_size: u64,
}

impl PublicationManifest {
    /// JSON preview printed by `--dry-run`.
    pub fn to_json(&self) -> String {
        let dump = Dump {
            title: &self.title,
            tags: &self.tags,
            entries: self
                .entries
                .iter()
                .map(|e| DumpEntry {
                    name: &e.name,
                    size: e.size,
                    sha256: &e.sha256,
                })
                .collect(),
            total_size: self.total_size,
        };
        serde_json::to_string_pretty(&dump).expect("manifest dump is always serializable")
    }
}

const BUF_SIZE: usize = 64 * 1024;

/// SHA-256 of a file's bytes as lowercase hex.
pub fn checksum_file(path: &Path) -> std::io::Result<String> {
    let mut f = File::open(path)?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; BUF_SIZE];
    loop {
        let n = f.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

pub fn derive_metadata(project: &ProjectFile) -> (String, Vec<String>) {
    let stem = project.file_stem();
    let title = if project.title.trim().is_empty() {
        stem.clone()
    } else {
        project.title.clone()
    };
    let tags = normalize_tags(
        std::iter::once(stem.as_str())
            .chain(project.layers.iter().map(|l| l.layer_name.as_str()))
            .chain(std::iter::once("qgis")),
    );
    (title, tags)
}

/// Lowercases, trims, drops empties and removes repeats keeping first order.
pub fn normalize_tags<'a>(tags: impl IntoIterator<Item = &'a str>) -> Vec<String> {
    let mut seen = HashSet::new();
    tags.into_iter()
        .map(|t| t.trim().to_lowercase())
        .filter(|t| !t.is_empty())
        .filter(|t| seen.insert(t.clone()))
        .collect()
}

/// Options for [`build_manifest_with`].
#[derive(Debug, Clone, Default)]
pub struct ManifestOptions {
    /// Hashing threads; `None` means one per processor.
    pub workers: Option<usize>,
    pub description: Option<String>,
    pub title: Option<String>,
}

pub fn build_manifest(
    project: &ProjectFile,
    sources: &[DataSourceRef],
    mesh_path: Option<&Path>,
) -> Result<PublicationManifest, ManifestError> {
    build_manifest_with(project, sources, mesh_path, &ManifestOptions::default())
}

pub fn build_manifest_with(
    project: &ProjectFile,
    sources: &[DataSourceRef],
    mesh_path: Option<&Path>,
    opts: &ManifestOptions,
) -> Result<PublicationManifest, ManifestError> {
    let mut paths: Vec<PathBuf> = vec![project.path.clone()];
    for src in sources {
        paths.push(src.resolved_path.clone());
        paths.extend(src.sidecars.iter().cloned());
    }
    let mesh = mesh_path.map(|m| std::path::absolute(m).unwrap_or_else(|_| m.to_path_buf()));
    paths.extend(mesh.iter().cloned());

    let mut seen = HashSet::new();
    paths.retain(|p| seen.insert(p.clone()));

    let missing: Vec<PathBuf> = paths.iter().filter(|p| !p.is_file()).cloned().collect();
    if !missing.is_empty() {
        return Err(ManifestError::Missing { paths: missing });
    }

    let mut warnings = Vec::new();
    if let Some(mesh) = &mesh {
        if !looks_like_gmsh(mesh)? {
            let w = format!(
                "{} does not start with $MeshFormat; including it anyway",
                mesh.display()
            );
            log::warn!("{w}");
            warnings.push(w);
        }
    }

    let names = assign_names(&paths);
    let hashed = hash_all(&paths, opts.workers)?;
    let entries: Vec<ManifestEntry> = paths
        .into_iter()
        .zip(names)
        .zip(hashed)
        .map(|((path, name), (size, sha256))| ManifestEntry {
            path,
            name,
            size,
            sha256,
        })
        .collect();

    let (derived_title, tags) = derive_metadata(project);
    let file_name = project
        .path
        .file_name()
        .map(|f| f.to_string_lossy().into_owned())
        .unwrap_or_default();
    let description = opts.description.clone().unwrap_or_else(|| {
        format!(
            "Input data for the QGIS project {file_name}: {} files including the project file itself.",
            entries.len()
        )
    });
    let total_size = entries.iter().map(|e| e.size).sum();

    Ok(PublicationManifest {
        entries,
        title: opts.title.clone().unwrap_or(derived_title),
        description,
        tags,
        authors: Vec::new(),
        total_size,
        warnings,
    })
}

fn hash_all(paths: &[PathBuf], workers: Option<usize>) -> Result<Vec<(u64, String)>, ManifestError> {
    use rayon::prelude::*;

    let one = |p: &PathBuf| -> Result<(u64, String), ManifestError> {
        let io = |source| ManifestError::Io {
            path: p.clone(),
            source,
        };
        let size = std::fs::metadata(p).map_err(io)?.len();
        let digest = checksum_file(p).map_err(io)?;
        Ok((size, digest))
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
        .map_err(|e| ManifestError::Io {
            path: PathBuf::new(),
            source: std::io::Error::other(e),
        })?;
    pool.install(|| paths.par_iter().map(one).collect())
}

fn looks_like_gmsh(path: &Path) -> Result<bool, ManifestError> {
    let io = |source| ManifestError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut reader = BufReader::new(File::open(path).map_err(io)?);
    let mut line = Vec::new();
    // A mesh with megabytes of leading blank lines is not worth scanning.
    for _ in 0..64 {
        line.clear();
        let n = reader
            .by_ref()
            .take(4096)
            .read_until(b'\n', &mut line)
            .map_err(io)?;
        if n == 0 {
            return Ok(false);
        }
        let text = String::from_utf8_lossy(&line);
        let trimmed = text.trim();
        if !trimmed.is_empty() {
            return Ok(trimmed == "$MeshFormat");
        }
    }
    Ok(false)
}

/// Flat upload names. A basename already taken is prefixed with its parent
/// directory names joined by `__` until it is unique.
pub fn assign_names(paths: &[PathBuf]) -> Vec<String> {
    let mut taken: HashSet<String> = HashSet::new();
    let mut out = Vec::with_capacity(paths.len());
    for path in paths {
        let base = path
            .file_name()
            .map(|f| f.to_string_lossy().into_owned())
            .unwrap_or_else(|| "file".to_string());
        let mut name = base.clone();
        let mut ancestors = path
            .parent()
            .into_iter()
            .flat_map(|p| p.iter().rev())
            .map(|c| c.to_string_lossy().into_owned())
            .filter(|c| c != "/");
        let mut counter = 1;
        while taken.contains(&name) {
            name = match ancestors.next() {
                Some(dir) => format!("{dir}__{name}"),
                None => {
                    counter += 1;
                    format!("{counter}__{base}")
                }
            };
        }
        taken.insert(name.clone());
        out.push(name);
    }
    out
}

//! Reading QGIS project files and locating the data files their layers use.
//!
//! Only the subset of the project document needed to find datasources is
//! understood: the `qgis` root, its `title` child, and every `maplayer`
//! directly under a `projectlayers` element. Everything else is ignored.

use std::fmt;
use std::path::{Component, Path, PathBuf};
use std::sync::OnceLock;

use regex::Regex;
use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum ProjectError {
    #[error("cannot read project file {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse project file {path}: {message}")]
    Parse { path: PathBuf, message: String },
}

/// A parsed project document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProjectFile {
    pub path: PathBuf,
    pub title: String,
    pub layers: Vec<LayerEntry>,
}

impl ProjectFile {
    /// Directory that relative datasources are resolved against.
    pub fn project_dir(&self) -> &Path {
        self.path.parent().unwrap_or_else(|| Path::new("/"))
    }

    /// File name without its extension, e.g. `orkney` for `orkney.qgs`.
    pub fn file_stem(&self) -> String {
        self.path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerEntry {
    pub layer_name: String,
    /// Element text exactly as it appears in the document (entities decoded).
    pub raw_datasource: String,
    pub provider: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum SourceKind {
    Shapefile,
    NetCDF,
    Raster,
    Other,
}

impl SourceKind {
    pub fn from_path(path: &Path) -> Self {
        let ext = path
            .extension()
            .map(|e| e.to_string_lossy().to_ascii_lowercase())
            .unwrap_or_default();
        match ext.as_str() {
            "shp" => SourceKind::Shapefile,
            "nc" => SourceKind::NetCDF,
            "tif" | "tiff" | "asc" => SourceKind::Raster,
            _ => SourceKind::Other,
        }
    }
}

/// Companion files looked up next to a `.shp`, in this order.
pub const SHAPEFILE_SIDECARS: [&str; 5] = ["shx", "dbf", "prj", "cpg", "qpj"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataSourceRef {
    pub resolved_path: PathBuf,
    pub kind: SourceKind,
    pub sidecars: Vec<PathBuf>,
    pub origin_layer: String,
}

/// Outcome of resolving a single layer's datasource string.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Resolved {
    File(DataSourceRef),
    /// Database connection or remote service; nothing to upload.
    NonFileSource { raw: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkippedSource {
    pub layer_name: String,
    pub raw_datasource: String,
}

impl fmt::Display for SkippedSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "layer '{}' does not reference a local file ({}); skipped",
            self.layer_name, self.raw_datasource
        )
    }
}

/// File-based datasources of a project plus the layers that were skipped.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CollectedSources {
    pub sources: Vec<DataSourceRef>,
    pub skipped: Vec<SkippedSource>,
}

pub fn parse_project(path: &Path) -> Result<ProjectFile, ProjectError> {
    let io_err = |source| ProjectError::Io {
        path: path.to_path_buf(),
        source,
    };
    let abs = path.canonicalize().map_err(io_err)?;
    if !abs.is_file() {
        return Err(io_err(std::io::Error::other("not a regular file")));
    }
    let bytes = std::fs::read(&abs).map_err(io_err)?;
    let text = String::from_utf8(bytes).map_err(|e| ProjectError::Parse {
        path: abs.clone(),
        message: format!("not valid UTF-8: {e}"),
    })?;
    parse_project_str(&text, &abs)
}

/// Parses project XML held in memory. `path` is recorded as the project's
/// location and is not touched.
pub fn parse_project_str(text: &str, path: &Path) -> Result<ProjectFile, ProjectError> {
    let parse_err = |message: String| ProjectError::Parse {
        path: path.to_path_buf(),
        message,
    };
    let doc = roxmltree::Document::parse(text).map_err(|e| parse_err(e.to_string()))?;
    let root = doc.root_element();
    if root.tag_name().name() != "qgis" {
        return Err(parse_err(format!(
            "unrecognized root element <{}>, expected <qgis>",
            root.tag_name().name()
        )));
    }

    let title = child(root, "title").map(text_of).unwrap_or_default();

    let mut layers = Vec::new();
    for group in root
        .descendants()
        .filter(|n| n.is_element() && n.tag_name().name() == "projectlayers")
    {
        for layer in group
            .children()
            .filter(|n| n.is_element() && n.tag_name().name() == "maplayer")
        {
            let Some(raw) = child(layer, "datasource").map(text_of) else {
                continue;
            };
            if raw.trim().is_empty() {
                continue;
            }
            layers.push(LayerEntry {
                layer_name: child(layer, "layername").map(text_of).unwrap_or_default(),
                raw_datasource: raw,
                provider: child(layer, "provider").map(text_of).unwrap_or_default(),
            });
        }
    }

    Ok(ProjectFile {
        path: path.to_path_buf(),
        title,
        layers,
    })
}

fn child<'a, 'i>(node: roxmltree::Node<'a, 'i>, name: &str) -> Option<roxmltree::Node<'a, 'i>> {
    node.children()
        .find(|n| n.is_element() && n.tag_name().name() == name)
}

fn text_of(node: roxmltree::Node<'_, '_>) -> String {
    node.children()
        .filter(|n| n.is_text())
        .filter_map(|n| n.text())
        .collect()
}

fn url_scheme() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"[A-Za-z][A-Za-z0-9+.\-]*://").unwrap())
}

fn driver_prefix() -> &'static Regex {
    // Two or more characters so that `C:\...` drive letters are left alone.
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^([A-Za-z0-9_]{2,}):(.*)$").unwrap())
}

/// Whether a datasource string names a database or remote service.
pub fn is_non_file(raw: &str) -> bool {
    raw.contains("dbname=") || raw.contains("url=") || url_scheme().is_match(raw)
}

/// Reduces a file-based datasource string to the path it names, still
/// unresolved. Returns `None` for database and service sources.
pub fn candidate_path(raw: &str) -> Option<String> {
    if is_non_file(raw) {
        return None;
    }
    let mut s = raw.trim();
    if let Some(i) = s.find('|') {
        s = &s[..i];
    }
    if let Some(caps) = driver_prefix().captures(s) {
        let rest = caps.get(2).map_or("", |m| m.as_str());
        s = match rest.strip_prefix('"') {
            Some(quoted) => quoted.split('"').next().unwrap_or(""),
            None => rest.split(':').next().unwrap_or(""),
        };
    }
    Some(s.trim().to_string())
}

/// Joins `candidate` onto `base` when relative, then removes `.` and `..`
/// components lexically. The file system is not consulted.
pub fn resolve_against(candidate: &str, base: &Path) -> PathBuf {
    let joined = base.join(candidate);
    let mut out = PathBuf::new();
    for comp in joined.components() {
        match comp {
            Component::CurDir => {}
            Component::ParentDir => {
                if !out.pop() {
                    out.push(comp);
                }
            }
            other => out.push(other),
        }
    }
    out
}

pub fn resolve_datasource(entry: &LayerEntry, project_dir: &Path) -> Resolved {
    let Some(candidate) = candidate_path(&entry.raw_datasource).filter(|c| !c.is_empty()) else {
        return Resolved::NonFileSource {
            raw: entry.raw_datasource.clone(),
        };
    };
    let resolved_path = resolve_against(&candidate, project_dir);
    let kind = SourceKind::from_path(&resolved_path);
    let sidecars = if kind == SourceKind::Shapefile {
        find_sidecars(&resolved_path)
    } else {
        Vec::new()
    };
    Resolved::File(DataSourceRef {
        resolved_path,
        kind,
        sidecars,
        origin_layer: entry.layer_name.clone(),
    })
}

fn find_sidecars(shp: &Path) -> Vec<PathBuf> {
    SHAPEFILE_SIDECARS
        .iter()
        .filter_map(|ext| {
            [ext.to_string(), ext.to_ascii_uppercase()]
                .into_iter()
                .map(|e| shp.with_extension(e))
                .find(|p| p.is_file())
        })
        .collect()
}

pub fn collect_datasources(project: &ProjectFile) -> CollectedSources {
    let dir = project.project_dir();
    let mut out = CollectedSources::default();
    for layer in &project.layers {
        match resolve_datasource(layer, dir) {
            Resolved::File(r) => {
                if !out.sources.iter().any(|s| s.resolved_path == r.resolved_path) {
                    out.sources.push(r);
                }
            }
            Resolved::NonFileSource { raw } => {
                let skipped = SkippedSource {
                    layer_name: layer.layer_name.clone(),
                    raw_datasource: raw,
                };
                log::warn!("{skipped}");
                out.skipped.push(skipped);
            }
        }
    }
    out
}

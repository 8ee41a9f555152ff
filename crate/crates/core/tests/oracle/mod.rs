//! A deliberately naive second reading of fixture projects: regex scanning
//! instead of an XML parser, string surgery instead of the resolver, and
//! directory listings for sidecars.

#![allow(dead_code)]

use std::path::{Path, PathBuf};

use geopub_core::qgis_project::{self, CollectedSources, SourceKind};
use regex::Regex;

/// The fixture tree lives in the core crate; other crates reach it as a
/// sibling.
pub fn fixtures_dir() -> PathBuf {
    let here = Path::new(env!("CARGO_MANIFEST_DIR"));
    let own = here.join("tests/fixtures/projects");
    if own.is_dir() {
        own
    } else {
        here.join("../core/tests/fixtures/projects")
    }
}

/// Every `*.qgs` one level below the fixture root.
pub fn fixture_projects() -> Vec<PathBuf> {
    let mut out: Vec<PathBuf> = std::fs::read_dir(fixtures_dir())
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.path().is_dir())
        .flat_map(|d| std::fs::read_dir(d.path()).unwrap().filter_map(|e| e.ok()))
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|e| e == "qgs"))
        .collect();
    out.sort();
    out
}

fn unescape(s: &str) -> String {
    let num = Regex::new(r"&#(x[0-9A-Fa-f]+|[0-9]+);").unwrap();
    let s = num.replace_all(s, |c: &regex::Captures| {
        let v = &c[1];
        let n = match v.strip_prefix('x') {
            Some(h) => u32::from_str_radix(h, 16).unwrap(),
            None => v.parse().unwrap(),
        };
        char::from_u32(n).unwrap().to_string()
    });
    s.replace("&lt;", "<")
        .replace("&gt;", ">")
        .replace("&quot;", "\"")
        .replace("&apos;", "'")
        .replace("&amp;", "&")
}

fn child_text(body: &str, tag: &str) -> Option<String> {
    let re = Regex::new(&format!(r"(?s)<{tag}\b[^>]*>(.*?)</{tag}>")).unwrap();
    re.captures(body).map(|c| unescape(c[1].trim()))
}

/// (layer name, raw datasource) for each layer with a datasource.
fn oracle_layers(xml: &str) -> Vec<(String, String)> {
    let block = Regex::new(r"(?s)<projectlayers\b[^>]*>(.*?)</projectlayers>").unwrap();
    let layer = Regex::new(r"(?s)<maplayer\b[^>]*>(.*?)</maplayer>").unwrap();
    let mut out = Vec::new();
    for b in block.captures_iter(xml) {
        for l in layer.captures_iter(&b[1]) {
            let body = &l[1];
            let Some(ds) = child_text(body, "datasource").filter(|d| !d.is_empty()) else {
                continue;
            };
            out.push((child_text(body, "layername").unwrap_or_default(), ds));
        }
    }
    out
}

fn scheme_like(raw: &str) -> bool {
    // Some run of [A-Za-z0-9+.-] that starts with a letter, right before "://".
    let bytes = raw.as_bytes();
    let mut from = 0;
    while let Some(off) = raw[from..].find("://") {
        let end = from + off;
        let mut i = end;
        let mut letter = false;
        while i > 0 {
            let c = bytes[i - 1];
            if c.is_ascii_alphanumeric() || b"+.-".contains(&c) {
                letter |= c.is_ascii_alphabetic();
                i -= 1;
            } else {
                break;
            }
        }
        if letter {
            return true;
        }
        from = end + 3;
    }
    false
}

fn oracle_candidate(raw: &str) -> Option<String> {
    if raw.contains("dbname=") || raw.contains("url=") || scheme_like(raw) {
        return None;
    }
    let s = raw.trim().split('|').next().unwrap();
    let s = match s.find(':') {
        Some(i)
            if i >= 2
                && s[..i].chars().all(|c| c.is_ascii_alphanumeric() || c == '_') =>
        {
            let rest = &s[i + 1..];
            if let Some(q) = rest.strip_prefix('"') {
                q.split('"').next().unwrap()
            } else {
                rest.split(':').next().unwrap()
            }
        }
        _ => s,
    };
    let s = s.trim();
    (!s.is_empty()).then(|| s.to_string())
}

fn oracle_normalize(base: &Path, candidate: &str) -> PathBuf {
    let full = if candidate.starts_with('/') {
        candidate.to_string()
    } else {
        format!("{}/{}", base.display(), candidate)
    };
    let mut parts: Vec<&str> = Vec::new();
    for p in full.split('/') {
        match p {
            "" | "." => {}
            ".." => {
                parts.pop();
            }
            other => parts.push(other),
        }
    }
    PathBuf::from(format!("/{}", parts.join("/")))
}

fn oracle_kind(p: &Path) -> SourceKind {
    let name = p.file_name().unwrap().to_string_lossy().to_lowercase();
    if name.ends_with(".shp") {
        SourceKind::Shapefile
    } else if name.ends_with(".nc") {
        SourceKind::NetCDF
    } else if [".tif", ".tiff", ".asc"].iter().any(|e| name.ends_with(e)) {
        SourceKind::Raster
    } else {
        SourceKind::Other
    }
}

fn oracle_sidecars(shp: &Path) -> Vec<PathBuf> {
    let Ok(listing) = std::fs::read_dir(shp.parent().unwrap()) else {
        return Vec::new();
    };
    let names: Vec<String> = listing
        .filter_map(|e| e.ok())
        .filter(|e| e.path().is_file())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .collect();
    let file = shp.file_name().unwrap().to_string_lossy();
    let stem = &file[..file.rfind('.').unwrap()];
    let mut out = Vec::new();
    for ext in ["shx", "dbf", "prj", "cpg", "qpj"] {
        let lower = format!("{stem}.{ext}");
        let upper = format!("{stem}.{}", ext.to_uppercase());
        if let Some(n) = [lower, upper].into_iter().find(|n| names.contains(n)) {
            out.push(shp.with_file_name(n));
        }
    }
    out
}

pub type Expected = (Vec<(PathBuf, SourceKind, Vec<PathBuf>, String)>, Vec<(String, String)>);

pub fn oracle(project: &Path) -> Expected {
    let project = project.canonicalize().unwrap();
    let dir = project.parent().unwrap();
    let xml = std::fs::read_to_string(&project).unwrap();
    let mut files: Vec<(PathBuf, SourceKind, Vec<PathBuf>, String)> = Vec::new();
    let mut skipped = Vec::new();
    for (layer, raw) in oracle_layers(&xml) {
        match oracle_candidate(&raw) {
            None => skipped.push((layer, raw)),
            Some(c) => {
                let p = oracle_normalize(dir, &c);
                if files.iter().any(|f| f.0 == p) {
                    continue;
                }
                let kind = oracle_kind(&p);
                let sidecars = if kind == SourceKind::Shapefile { oracle_sidecars(&p) } else { vec![] };
                files.push((p, kind, sidecars, layer));
            }
        }
    }
    (files, skipped)
}

pub fn actual(project: &Path) -> (Expected, CollectedSources) {
    let parsed = qgis_project::parse_project(project).unwrap();
    let got = qgis_project::collect_datasources(&parsed);
    let files = got
        .sources
        .iter()
        .map(|s| (s.resolved_path.clone(), s.kind, s.sidecars.clone(), s.origin_layer.clone()))
        .collect();
    let skipped = got
        .skipped
        .iter()
        .map(|s| (s.layer_name.clone(), s.raw_datasource.clone()))
        .collect();
    ((files, skipped), got)
}


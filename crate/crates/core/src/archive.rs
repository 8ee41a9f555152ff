//! Byte-reproducible tar archives of a source tree.

use std::io::{self, Write};
use std::path::Path;

#[cfg(unix)]
fn is_executable(meta: &std::fs::Metadata) -> bool {
    use std::os::unix::fs::PermissionsExt;
    meta.permissions().mode() & 0o111 != 0
}

#[cfg(not(unix))]
fn is_executable(_meta: &std::fs::Metadata) -> bool {
    false
}

/// `{dirname}-{first 12 chars of id}.tar`
pub fn archive_name(dir_name: &str, version_id: &str) -> String {
    let prefix: String = version_id.chars().take(12).collect();
    format!("{dir_name}-{prefix}.tar")
}

/// Writes `files` (relative to `dir`, `/`-separated) as an uncompressed tar
/// with members under `{root}/`. Members are sorted; owner, group and mtime
/// are zeroed and modes collapse to 0644 or 0755.
pub fn write_archive<W: Write>(dir: &Path, root: &str, files: &[String], out: W) -> io::Result<W> {
    let mut sorted: Vec<&String> = files.iter().collect();
    sorted.sort_unstable_by(|a, b| a.as_bytes().cmp(b.as_bytes()));
    sorted.dedup();

    let mut builder = tar::Builder::new(out);
    builder.mode(tar::HeaderMode::Deterministic);
    for rel in sorted {
        let path = dir.join(rel);
        let meta = std::fs::metadata(&path)?;
        let mut header = tar::Header::new_gnu();
        header.set_entry_type(tar::EntryType::Regular);
        header.set_size(meta.len());
        header.set_mode(if is_executable(&meta) { 0o755 } else { 0o644 });
        header.set_mtime(0);
        header.set_uid(0);
        header.set_gid(0);
        let file = std::fs::File::open(&path)?;
        builder.append_data(&mut header, format!("{root}/{rel}"), file)?;
    }
    builder.into_inner()
}

#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Duration;

use geopub_core::protocol::{BackendProfile, RepoClient, RetryPolicy};
use geopub_mock::{start, Listen, RunningService, ServiceConfig};

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/projects")
}

pub fn serve(config: ServiceConfig) -> RunningService {
    start(config, Listen::InProcess).unwrap()
}

pub fn client_for(server: &RunningService) -> RepoClient {
    let profile = if server.config().can_search {
        BackendProfile::figshare_like(server.base_url(), "tok")
    } else {
        BackendProfile::zenodo_like(server.base_url(), "tok")
    };
    RepoClient::new(profile).with_retry(RetryPolicy {
        max_retries: 3,
        initial_backoff: Duration::from_millis(5),
    })
}

pub fn git(dir: &Path, args: &[&str]) -> String {
    let out = Command::new("git")
        .arg("-C")
        .arg(dir)
        .args(["-c", "user.name=Test", "-c", "user.email=test@example.org", "-c", "commit.gpgsign=false"])
        .args(args)
        .output()
        .unwrap();
    assert!(out.status.success(), "git {args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

pub fn write(dir: &Path, rel: &str, text: &str) {
    let p = dir.join(rel);
    std::fs::create_dir_all(p.parent().unwrap()).unwrap();
    std::fs::write(p, text).unwrap();
}

/// A small committed git repository named `qmesh` inside a tempdir.
pub fn git_repo() -> (tempfile::TempDir, PathBuf) {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("qmesh");
    std::fs::create_dir(&dir).unwrap();
    write(&dir, "README", "qmesh\n");
    write(&dir, "src/mesh.py", "print('mesh')\n");
    write(&dir, "AUTHORS", "Ada Lovelace <ada@example.org> figshare:1234 zenodo:0000-0001\n");
    git(&dir, &["init", "-q"]);
    git(&dir, &["add", "."]);
    git(&dir, &["commit", "-q", "-m", "initial"]);
    (tmp, dir)
}

/// A plain directory with no version control.
pub fn plain_tree() -> (tempfile::TempDir, PathBuf) {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("tool");
    write(&dir, "a.txt", "alpha\n");
    write(&dir, "sub/b.txt", "beta\n");
    (tmp, dir)
}

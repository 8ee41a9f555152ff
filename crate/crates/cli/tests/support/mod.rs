#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::Command;

use geopub_cli::Env;
use geopub_mock::{start, Listen, RunningService, ServiceConfig};

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/projects")
}

pub struct Output {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

/// Mock services for both default profiles plus a config file pointing at
/// them, all inside one temporary directory.
pub struct World {
    pub figshare: RunningService,
    pub zenodo: RunningService,
    pub dir: tempfile::TempDir,
}

impl World {
    pub fn new() -> Self {
        Self::with(ServiceConfig::figshare_like(), ServiceConfig::zenodo_like())
    }

    pub fn with(figshare: ServiceConfig, zenodo: ServiceConfig) -> Self {
        let figshare = start(figshare, Listen::InProcess).unwrap();
        let zenodo = start(zenodo, Listen::InProcess).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let config = format!(
            "cache_path = \"{}\"\n\n[profile.figshare-like]\nbase_url = \"{}\"\n\n[profile.zenodo-like]\nbase_url = \"{}\"\n",
            dir.path().join("cache/dois.json").display(),
            figshare.base_url(),
            zenodo.base_url()
        );
        std::fs::write(dir.path().join("config.toml"), config).unwrap();
        World { figshare, zenodo, dir }
    }

    pub fn env(&self) -> Env {
        Env::from_pairs([
            ("GEOPUB_CONFIG".to_string(), self.dir.path().join("config.toml").display().to_string()),
            ("GEOPUB_TOKEN_FIGSHARE_LIKE".to_string(), "fig-token".to_string()),
            ("GEOPUB_TOKEN_ZENODO_LIKE".to_string(), "zen-token".to_string()),
        ])
    }

    pub fn run(&self, args: &[&str]) -> Output {
        run_with(&self.env(), args)
    }
}

pub fn run_with(env: &Env, args: &[&str]) -> Output {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("geopub").chain(args.iter().copied());
    let code = geopub_cli::run(argv, env, &mut out, &mut err);
    Output {
        code,
        stdout: String::from_utf8(out).unwrap(),
        stderr: String::from_utf8(err).unwrap(),
    }
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

/// A committed working copy named `qmesh`.
pub fn git_repo() -> (tempfile::TempDir, PathBuf) {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("qmesh");
    write(&dir, "README", "qmesh\n");
    write(&dir, "src/mesh.py", "print('mesh')\n");
    write(&dir, "AUTHORS", "Ada Lovelace <ada@example.org> figshare:1234\n");
    git(&dir, &["init", "-q"]);
    git(&dir, &["add", "."]);
    git(&dir, &["commit", "-q", "-m", "initial"]);
    (tmp, dir)
}

pub fn path(p: &Path) -> String {
    p.display().to_string()
}

/// `(id, doi)` from the two-line success output.
pub fn parse_success(stdout: &str) -> Option<(u64, String)> {
    let lines: Vec<&str> = stdout.lines().filter(|l| *l != "Reusing existing publication.").collect();
    match lines.as_slice() {
        [id, doi] => Some((
            id.strip_prefix("Publication ID: ")?.parse().ok()?,
            doi.strip_prefix("DOI: ")?.to_string(),
        )),
        _ => None,
    }
}

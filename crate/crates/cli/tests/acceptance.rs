//! Acceptance criteria, one line each. Exits non-zero when any fails.
//!
//!     cargo test -p geopub-cli --test acceptance

#[path = "../../core/tests/oracle/mod.rs"]
mod oracle;
mod support;

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use geopub_core::manifest::{build_manifest_with, ManifestEntry, ManifestOptions};
use geopub_core::orchestrator::{build_source_archive, prepare_data, DataRequest};
use geopub_core::protocol::{
    BackendProfile, DepositionMeta, DepositionState, ProtocolError, RepoClient, RetryPolicy,
};
use geopub_core::qgis_project;
use geopub_core::vcs_info::{detect_version, tree_hash};
use geopub_mock::{start, Listen, ServiceConfig, GB, MB};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use sha2::{Digest, Sha256};
use support::{fixtures, git_repo, parse_success, path, write, World};

type Outcome = Result<(), String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn sha256_of(p: &Path) -> String {
    hex::encode(Sha256::digest(std::fs::read(p).unwrap()))
}

fn orkney_args(extra: &[&str]) -> Vec<String> {
    let mut v: Vec<String> = vec![
        "publish".into(),
        "data".into(),
        "--project".into(),
        path(&fixtures().join("orkney/orkney.qgs")),
        "--mesh".into(),
        path(&fixtures().join("orkney/orkney.msh")),
    ];
    v.extend(extra.iter().map(|s| s.to_string()));
    v
}

fn argv(v: &[String]) -> Vec<&str> {
    v.iter().map(String::as_str).collect()
}

fn replay() -> Outcome {
    let started = Instant::now();
    let w = World::new();
    let out = w.run(&argv(&orkney_args(&[])));
    ensure!(out.code == 0, "exit {}: {}", out.code, out.stderr);
    let (id, doi) = parse_success(&out.stdout).ok_or(format!("bad output {:?}", out.stdout))?;
    let dep = w.figshare.service().deposition(id).ok_or("deposition missing")?;
    ensure!(dep.state == DepositionState::Public && dep.doi_active, "not public: {:?}", dep.state);
    ensure!(dep.doi == doi, "doi mismatch");
    ensure!(dep.files.len() == 7, "{} files on server", dep.files.len());

    let dir = fixtures().join("orkney");
    let local: BTreeSet<(String, String)> = [
        "orkney.qgs",
        "coastline.shp",
        "coastline.shx",
        "coastline.dbf",
        "data/bathymetry.nc",
        "data/resolution.nc",
        "orkney.msh",
    ]
    .iter()
    .map(|rel| {
        let name = Path::new(rel).file_name().unwrap().to_string_lossy().into_owned();
        (name, sha256_of(&dir.join(rel)))
    })
    .collect();
    let remote: BTreeSet<(String, String)> =
        dep.files.iter().map(|f| (f.name.clone(), f.sha256.clone())).collect();
    ensure!(local == remote, "digests differ:\n local {local:?}\nremote {remote:?}");
    let took = started.elapsed();
    ensure!(took < Duration::from_secs(5), "took {took:?}");
    Ok(())
}

fn idempotence() -> Outcome {
    let w = World::new();
    let (_t, dir) = git_repo();
    let src = path(&dir);
    let fig = ["publish", "software", "--source", src.as_str()];
    let a = w.run(&fig);
    let b = w.run(&fig);
    ensure!(a.code == 0 && b.code == 0, "exit {} / {}: {}{}", a.code, b.code, a.stderr, b.stderr);
    let (da, db) = (parse_success(&a.stdout), parse_success(&b.stdout));
    ensure!(da.is_some() && da == db, "figshare-like DOIs {da:?} vs {db:?}");
    ensure!(w.figshare.deposition_count() == 1, "figshare-like count {}", w.figshare.deposition_count());

    let zen = ["publish", "software", "--source", src.as_str(), "--service", "zenodo-like"];
    let mut no_cache = zen.to_vec();
    no_cache.push("--no-cache");
    for _ in 0..2 {
        let o = w.run(&no_cache);
        ensure!(o.code == 0, "exit {}: {}", o.code, o.stderr);
    }
    ensure!(w.zenodo.deposition_count() == 2, "zenodo-like --no-cache count {}", w.zenodo.deposition_count());

    let fresh = World::new();
    for _ in 0..2 {
        let o = fresh.run(&zen);
        ensure!(o.code == 0, "exit {}: {}", o.code, o.stderr);
    }
    ensure!(fresh.zenodo.deposition_count() == 1, "zenodo-like cached count {}", fresh.zenodo.deposition_count());
    Ok(())
}

#[derive(Debug, Clone)]
enum Op {
    Upload(u8),
    Publish(bool),
    MakePublic,
    Collaborator(u8),
    Get,
}

fn ops() -> impl Strategy<Value = (bool, Vec<Op>)> {
    let op = prop_oneof![
        3 => any::<u8>().prop_map(Op::Upload),
        2 => any::<bool>().prop_map(Op::Publish),
        2 => Just(Op::MakePublic),
        2 => (0u8..8).prop_map(Op::Collaborator),
        1 => Just(Op::Get),
    ];
    (any::<bool>(), proptest::collection::vec(op, 1..12))
}

fn lifecycle() -> Outcome {
    let w = World::new();
    let out = w.run(&argv(&orkney_args(&["--private"])));
    ensure!(out.code == 0, "exit {}: {}", out.code, out.stderr);
    let (id, doi) = parse_success(&out.stdout).ok_or("bad output")?;
    let dep = w.figshare.service().deposition(id).unwrap();
    ensure!(!dep.doi_active && dep.state == DepositionState::Private, "private publish left {:?}", dep.state);
    let client = RepoClient::new(BackendProfile::figshare_like(w.figshare.base_url(), "t"));
    let made = client.make_public(id).map_err(|e| e.to_string())?;
    ensure!(made.doi_active && made.doi == doi, "make_public gave {made:?}");

    let client = client.with_retry(RetryPolicy {
        max_retries: 0,
        initial_backoff: Duration::ZERO,
    });
    let mut runner = TestRunner::new(Config {
        cases: 1000,
        failure_persistence: None,
        ..Config::default()
    });
    runner
        .run(&ops(), |(private, ops)| {
            use DepositionState::*;
            let meta = DepositionMeta { title: "sm".into(), ..Default::default() };
            let created = client.create_deposition(&meta, private).unwrap();
            let mut state = Draft;
            let mut uploads = 0u32;
            for op in ops {
                let _ = match op {
                    Op::Upload(b) => {
                        uploads += 1;
                        let bytes = vec![b; b as usize + 1];
                        let entry = ManifestEntry {
                            path: PathBuf::new(),
                            name: format!("f{uploads}"),
                            size: bytes.len() as u64,
                            sha256: hex::encode(Sha256::digest(&bytes)),
                        };
                        client.upload_file(created.id, &entry, bytes.as_slice()).map(|_| ())
                    }
                    Op::Publish(p) => client.publish_deposition(created.id, p).map(|_| ()),
                    Op::MakePublic => client.make_public(created.id).map(|_| ()),
                    Op::Collaborator(n) => client.add_collaborator(created.id, &format!("u{n}")).map(|_| ()),
                    Op::Get => Ok(()),
                };
                let dep = client.get_deposition(created.id).unwrap();
                let legal = dep.state == state
                    || matches!((state, dep.state), (Draft, Public) | (Draft, Private) | (Private, Public));
                prop_assert!(legal, "{:?} -> {:?}", state, dep.state);
                prop_assert_eq!(&dep.doi, &created.doi);
                prop_assert_eq!(dep.doi_active, dep.state == Public);
                state = dep.state;
            }
            Ok(())
        })
        .map_err(|e| e.to_string())
}

fn quotas() -> Outcome {
    let small = start(
        ServiceConfig {
            per_file_limit: 1024,
            ..ServiceConfig::default()
        },
        Listen::InProcess,
    )
    .map_err(|e| e.to_string())?;
    let client = RepoClient::new(BackendProfile::figshare_like(small.base_url(), "t"));
    let id = client
        .create_deposition(&DepositionMeta { title: "q".into(), ..Default::default() }, false)
        .map_err(|e| e.to_string())?
        .id;

    let bytes = vec![7u8; 2048];
    let digest = hex::encode(Sha256::digest(&bytes));
    let resp = ureq::post(&format!("{}/api/v1/depositions/{id}/files", small.base_url()))
        .set("Authorization", "token t")
        .set("X-File-Name", "big.bin")
        .set("X-File-SHA256", &digest)
        .send_bytes(&bytes);
    match resp {
        Err(ureq::Error::Status(413, r)) => {
            let body: serde_json::Value = r.into_json().map_err(|e| e.to_string())?;
            ensure!(body["error"] == "quota", "413 body {body}");
        }
        other => return Err(format!("expected 413, got {other:?}")),
    }
    let entry = ManifestEntry {
        path: PathBuf::new(),
        name: "big2.bin".into(),
        size: 2048,
        sha256: digest,
    };
    let err = client.upload_file(id, &entry, bytes.as_slice()).unwrap_err();
    ensure!(matches!(err, ProtocolError::Quota(_)), "client error {err:?}");

    let defaults = start(ServiceConfig::default(), Listen::InProcess).map_err(|e| e.to_string())?;
    let c = defaults.config();
    ensure!(
        c.per_file_limit == 250 * MB && c.private_quota == GB && c.collaborator_limit == 5,
        "defaults {:?}",
        c
    );

    let client = RepoClient::new(BackendProfile::figshare_like(defaults.base_url(), "t"));
    let id = client
        .create_deposition(&DepositionMeta { title: "c".into(), ..Default::default() }, true)
        .map_err(|e| e.to_string())?
        .id;
    let file = ManifestEntry {
        path: PathBuf::new(),
        name: "a".into(),
        size: 1,
        sha256: hex::encode(Sha256::digest(b"a")),
    };
    client.upload_file(id, &file, &b"a"[..]).map_err(|e| e.to_string())?;
    client.publish_deposition(id, true).map_err(|e| e.to_string())?;
    for n in 1..=5 {
        client.add_collaborator(id, &format!("c{n}")).map_err(|e| format!("collaborator {n}: {e}"))?;
    }
    let sixth = client.add_collaborator(id, "c6");
    ensure!(matches!(sixth, Err(ProtocolError::Quota(_))), "sixth collaborator: {sixth:?}");
    Ok(())
}

fn parser_oracle() -> Outcome {
    let projects = oracle::fixture_projects();
    ensure!(projects.len() >= 10, "only {} fixtures", projects.len());
    for p in &projects {
        let (got, _) = oracle::actual(p);
        let want = oracle::oracle(p);
        ensure!(got == want, "{}:\n got {got:?}\nwant {want:?}", p.display());
    }
    Ok(())
}

fn determinism() -> Outcome {
    let req = DataRequest {
        project_path: fixtures().join("orkney/orkney.qgs"),
        mesh_path: Some(fixtures().join("orkney/orkney.msh")),
        ..Default::default()
    };
    let a = prepare_data(&req).map_err(|e| e.to_string())?.manifest.to_json();
    let b = prepare_data(&DataRequest { workers: Some(1), ..req.clone() })
        .map_err(|e| e.to_string())?
        .manifest
        .to_json();
    ensure!(a == b, "manifest differs between runs");

    // The same project copied with files created in the opposite order.
    let tmp = tempfile::tempdir().unwrap();
    let copy = tmp.path().join("orkney");
    let mut files: Vec<PathBuf> = walk(&fixtures().join("orkney"));
    files.reverse();
    for f in &files {
        let rel = f.strip_prefix(fixtures().join("orkney")).unwrap();
        let dst = copy.join(rel);
        std::fs::create_dir_all(dst.parent().unwrap()).unwrap();
        std::fs::copy(f, dst).unwrap();
    }
    let project = qgis_project::parse_project(&copy.join("orkney.qgs")).map_err(|e| e.to_string())?;
    let sources = qgis_project::collect_datasources(&project);
    let c = build_manifest_with(&project, &sources.sources, Some(&copy.join("orkney.msh")), &ManifestOptions::default())
        .map_err(|e| e.to_string())?;
    let strip = |j: &serde_json::Value| j["entries"].clone();
    let ja: serde_json::Value = serde_json::from_str(&a).unwrap();
    let jc: serde_json::Value = serde_json::from_str(&c.to_json()).unwrap();
    ensure!(strip(&ja) == strip(&jc), "manifest differs across listing order");

    let t1 = tmp.path().join("t1");
    let t2 = tmp.path().join("t2");
    for (rel, text) in [("a.txt", "alpha\n"), ("sub/b.txt", "beta\n"), ("sub/z/c.txt", "gamma\n")] {
        write(&t1, rel, text);
    }
    for (rel, text) in [("sub/z/c.txt", "gamma\n"), ("sub/b.txt", "beta\n"), ("a.txt", "alpha\n")] {
        write(&t2, rel, text);
    }
    let (h1, h2) = (tree_hash(&t1).unwrap(), tree_hash(&t2).unwrap());
    ensure!(h1 == h2, "tree_hash {h1} vs {h2}");
    ensure!(tree_hash(&t1).unwrap() == h1, "tree_hash changed between runs");

    let (_g, repo) = git_repo();
    let v = detect_version(&repo).map_err(|e| e.to_string())?;
    let o1 = tempfile::tempdir().unwrap();
    let o2 = tempfile::tempdir().unwrap();
    let x = build_source_archive(&v, o1.path()).map_err(|e| e.to_string())?;
    std::thread::sleep(Duration::from_millis(20));
    let readme = std::fs::read(repo.join("README")).unwrap();
    std::fs::write(repo.join("README"), readme).unwrap();
    let y = build_source_archive(&v, o2.path()).map_err(|e| e.to_string())?;
    ensure!(
        std::fs::read(&x.path).unwrap() == std::fs::read(&y.path).unwrap(),
        "archive bytes differ"
    );

    let plain = detect_version(&t1).map_err(|e| e.to_string())?;
    let plain2 = detect_version(&t2).map_err(|e| e.to_string())?;
    let p1 = build_source_archive(&plain, o1.path()).map_err(|e| e.to_string())?;
    let p2 = build_source_archive(&plain2, o2.path()).map_err(|e| e.to_string())?;
    // Root directory names differ (t1/t2), so compare members only.
    ensure!(members(&p1.path) == members(&p2.path), "tree archives differ across creation order");
    Ok(())
}

fn walk(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p);
            }
        }
    }
    out.sort();
    out
}

fn members(tar_path: &Path) -> Vec<(String, Vec<u8>)> {
    let bytes = std::fs::read(tar_path).unwrap();
    let mut out = Vec::new();
    let mut off = 0;
    while off + 512 <= bytes.len() && bytes[off..off + 512].iter().any(|b| *b != 0) {
        let h = &bytes[off..off + 512];
        let name = String::from_utf8_lossy(&h[..100]).trim_end_matches('\0').to_string();
        let size = usize::from_str_radix(String::from_utf8_lossy(&h[124..135]).trim_matches(['\0', ' ']), 8).unwrap();
        let rel = name.split_once('/').map(|(_, r)| r.to_string()).unwrap_or(name);
        // Header minus the name field and checksum, then content.
        let mut rest = h[100..148].to_vec();
        rest.extend_from_slice(&h[156..512]);
        rest.extend_from_slice(&bytes[off + 512..off + 512 + size]);
        out.push((rel, rest));
        off += 512 + size.div_ceil(512) * 512;
    }
    out
}

fn dry_run() -> Outcome {
    let w = World::new();
    let out = w.run(&argv(&orkney_args(&["--dry-run"])));
    ensure!(out.code == 0, "exit {}: {}", out.code, out.stderr);
    let json: serde_json::Value = serde_json::from_str(&out.stdout).map_err(|e| e.to_string())?;
    ensure!(json["entries"].as_array().map(Vec::len) == Some(7), "manifest {json}");
    let n = w.figshare.request_count() + w.zenodo.request_count();
    ensure!(n == 0, "{n} requests");
    Ok(())
}

fn main() {
    // Quiet the default panic message; failures are reported below.
    std::panic::set_hook(Box::new(|_| {}));
    let criteria: [Criterion; 7] = [
        ("1 end-to-end data publication replay", replay),
        ("2 software publish idempotence", idempotence),
        ("3 private DOI lifecycle and legal transitions", lifecycle),
        ("4 quota enforcement", quotas),
        ("5 parser oracle equivalence", parser_oracle),
        ("6 determinism", determinism),
        ("7 dry-run isolation", dry_run),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let started = Instant::now();
        let result = match catch_unwind(AssertUnwindSafe(f)) {
            Ok(r) => r,
            Err(p) => Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into())),
        };
        let ms = started.elapsed().as_millis();
        match result {
            Ok(()) => println!("[PASS] {name} ({ms} ms)"),
            Err(e) => {
                failed += 1;
                println!("[FAIL] {name} ({ms} ms): {e}");
            }
        }
    }
    println!("{} of 7 criteria passed", 7 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

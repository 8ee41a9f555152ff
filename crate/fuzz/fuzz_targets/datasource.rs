#![no_main]

use std::path::{Component, Path};

use geopub_core::qgis_project::{candidate_path, is_non_file, resolve_against};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|raw: &str| {
    match candidate_path(raw) {
        None => assert!(is_non_file(raw)),
        Some(c) => {
            assert!(!c.contains('|'));
            let p = resolve_against(&c, Path::new("/base/dir"));
            assert!(p.components().all(|c| c != Component::CurDir));
        }
    }
});

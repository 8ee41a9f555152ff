#![no_main]

use std::path::Path;

use geopub_core::qgis_project::{parse_project_str, resolve_datasource, Resolved};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(project) = parse_project_str(text, Path::new("/fuzz/project.qgs")) else { return };
    for layer in &project.layers {
        assert!(!layer.raw_datasource.trim().is_empty());
        if let Resolved::File(r) = resolve_datasource(layer, Path::new("/fuzz/missing")) {
            assert!(r.resolved_path.is_absolute());
        }
    }
});

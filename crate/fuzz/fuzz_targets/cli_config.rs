#![no_main]

use std::path::Path;

use geopub_cli::config::{parse_config_str, ConfigError};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    if let Err(ConfigError::Parse { line, .. }) = parse_config_str(text, Path::new("fuzz.toml")) {
        assert!(line >= 1 && line <= text.lines().count().max(1) + 1);
    }
});

#![no_main]

use geopub_core::cache::parse_cache_str;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    let Ok(records) = parse_cache_str(text) else { return };
    let json = serde_json::json!({ "records": records }).to_string();
    assert_eq!(parse_cache_str(&json).unwrap(), records);
});

#![no_main]

use geopub_mock::{classify, parse_head};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(head) = parse_head(data) {
        let path = head.target.split('?').next().unwrap_or("");
        let _ = classify(&head.method, path);
        let _ = head.header("content-length");
    }
});

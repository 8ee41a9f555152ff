#![no_main]

use std::io::Read;

use geopub_mock::ChunkedReader;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let mut out = Vec::new();
    let mut reader = ChunkedReader::new(data).take(1 << 20);
    if reader.read_to_end(&mut out).is_ok() {
        assert!(out.len() <= data.len());
    }
});

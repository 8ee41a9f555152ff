#![no_main]

use geopub_core::protocol::wire::{decode_file_name, encode_file_name, SearchResponse};
use geopub_core::protocol::Deposition;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(d) = serde_json::from_slice::<Deposition>(data) {
        let _ = d.stored_bytes();
        let back: Deposition = serde_json::from_str(&serde_json::to_string(&d).unwrap()).unwrap();
        assert_eq!(back.id, d.id);
    }
    let _ = serde_json::from_slice::<SearchResponse>(data);
    if let Ok(s) = std::str::from_utf8(data) {
        if let Some(name) = decode_file_name(s) {
            let _ = encode_file_name(&name);
        }
        assert_eq!(decode_file_name(&encode_file_name(s)).as_deref(), Some(s));
    }
});

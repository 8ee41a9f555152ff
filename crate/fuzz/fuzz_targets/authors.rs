#![no_main]

use geopub_core::vcs_info::parse_authors_str;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    let Ok(authors) = parse_authors_str(text) else { return };
    let rendered: String = authors.iter().map(|a| format!("{a}\n")).collect();
    let again = parse_authors_str(&rendered).expect("rendered authors reparse");
    assert_eq!(authors, again);
});

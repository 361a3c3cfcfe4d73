#![no_main]

use libfuzzer_sys::fuzz_target;
use rgpt::formats::parse_manifest;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(m) = parse_manifest(text, "fuzz.json") {
        assert!(m.risks.iter().any(|r| r.constrained));
    }
});

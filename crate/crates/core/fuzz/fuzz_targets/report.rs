#![no_main]

use libfuzzer_sys::fuzz_target;
use rgpt::formats::parse_report;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(r) = parse_report(text, "fuzz.json") {
        let again = parse_report(&r.to_json(), "again.json").expect("own output parses");
        assert_eq!(again.to_json(), r.to_json());
    }
});

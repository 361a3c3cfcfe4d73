#![no_main]

use libfuzzer_sys::fuzz_target;
use rgpt::formats::parse_risk_csv;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(csv) = parse_risk_csv(text, "fuzz.csv") {
        assert!(csv.rows.iter().all(|r| r.len() == csv.labels.len()));
        assert!(csv.rows.iter().flatten().all(|v| (0.0..=1.0).contains(v)));
    }
});

#![no_main]

use libfuzzer_sys::fuzz_target;
use rgpt::formats::parse_priors_csv;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let labels: Vec<String> = ["a", "b", "c"].map(String::from).to_vec();
    if let Ok(eta) = parse_priors_csv(text, &labels, "fuzz.csv") {
        assert_eq!(eta.len(), labels.len());
        assert!(eta.iter().flatten().all(|v| (0.0..=1.0).contains(v)));
    }
});

#![no_main]

use libfuzzer_sys::fuzz_target;
use rgpt::formats::parse_scenario;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(s) = parse_scenario(text, "fuzz.json") {
        // small accepted scenarios must also generate
        if s.synthetic.n_samples * s.synthetic.n_hyperparams() <= 10_000 {
            rgpt::simulate::gen_synthetic(&s.synthetic).expect("checked spec generates");
        }
    }
});

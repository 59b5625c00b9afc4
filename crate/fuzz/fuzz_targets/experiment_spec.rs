#![no_main]

use libfuzzer_sys::fuzz_target;
use tlcr::experiment::ExperimentSpec;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(spec) = ExperimentSpec::from_json(text) {
        // floats may move by an ulp through text, so only require re-acceptance
        let again = serde_json::to_string(&spec).unwrap();
        ExperimentSpec::from_json(&again).unwrap();
    }
});

#![no_main]

use libfuzzer_sys::fuzz_target;
use tlcr::metrics::QualityReport;

fuzz_target!(|data: &[u8]| {
    let _ = QualityReport::read_csv(data);
});

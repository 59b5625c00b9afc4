#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(img) = tlcr::io::decode_image(data) {
        let (w, h) = img.dims();
        assert!(w > 0 && h > 0);
    }
});
